#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace biascope {

using Json = nlohmann::json;

// Reads every line of a text file; throws IoError if it cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Parses each non-blank line as a JSON value. Lines that fail to parse are
// passed to on_bad (with their 1-based line number) and skipped.
std::vector<Json> read_jsonl(
    const std::filesystem::path& path,
    const std::function<void(std::size_t, std::string_view)>& on_bad = {});

// Writes records one per line, creating parent directories as needed.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

void append_jsonl(const std::filesystem::path& path, const Json& record);

void write_text(const std::filesystem::path& path, std::string_view text);

// Lowercases ASCII letters; other bytes (including UTF-8 sequences) pass through.
std::string ascii_lower(std::string_view text);

// Stable 64-bit FNV-1a, used for config hashes in artifact headers.
std::uint64_t fnv1a64(std::string_view data) noexcept;

std::string hex64(std::uint64_t value);

}  // namespace biascope
