#include "biascope/jsonl.hpp"

#include <cstdio>
#include <fstream>

#include "biascope/error.hpp"

namespace biascope {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
  }
  if (in.bad()) {
    throw IoError("read failed: " + path.string());
  }
  return lines;
}

std::vector<Json> read_jsonl(
    const std::filesystem::path& path,
    const std::function<void(std::size_t, std::string_view)>& on_bad) {
  std::vector<Json> records;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    Json value = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) {
      if (on_bad) {
        on_bad(line_no, line);
      }
      continue;
    }
    records.push_back(std::move(value));
  }
  return records;
}

namespace {

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string() +
                    ": " + ec.message());
    }
  }
}

}  // namespace

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  for (const auto& record : records) {
    out << record.dump() << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

void append_jsonl(const std::filesystem::path& path, const Json& record) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) {
    throw IoError("cannot append to " + path.string());
  }
  out << record.dump() << '\n';
  out.flush();
  if (!out) {
    throw IoError("append failed: " + path.string());
  }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<char>(c - 'A' + 'a');
    }
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace biascope
