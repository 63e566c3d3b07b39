#pragma once

// Persona-generation audit: ask a chat model for a persona per topic,
// read the persona's gender back, and score mismatches against the
// topic's alignment.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "biascope/error.hpp"
#include "biascope/gender.hpp"
#include "biascope/jsonl.hpp"

namespace biascope::persona {

class ProviderError : public Error {
 public:
  using Error::Error;
};

class AuthError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class MalformedResponseError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

enum class ProviderKind { kGenericChat, kMock };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kMock;
  std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
  std::string model;
  std::string token_env;  // name of the env var holding the bearer token
  double temperature = 0.8;
  double timeout_seconds = 60.0;
  std::filesystem::path mock_script;
  int max_attempts = 3;
  int backoff_ms = 500;  // doubled after each failed attempt
};

class Provider {
 public:
  virtual ~Provider() = default;
  // Must be safe to call from several threads at once.
  virtual std::string complete(const std::string& prompt) const = 0;
};

// Scripted responses: the first rule whose match string occurs in the
// prompt wins. No match raises ProviderError.
class MockProvider : public Provider {
 public:
  struct Rule {
    std::string match;
    std::string response;
  };

  explicit MockProvider(std::vector<Rule> rules) : rules_(std::move(rules)) {}
  static MockProvider from_file(const std::filesystem::path& path);

  std::string complete(const std::string& prompt) const override;

 private:
  std::vector<Rule> rules_;
};

// POST {model, messages:[{role,content}], temperature} and read
// choices[0].message.content. Retries transport failures and non-success
// statuses up to max_attempts; 401/403 fail immediately.
class ChatProvider : public Provider {
 public:
  explicit ChatProvider(ProviderConfig config);
  std::string complete(const std::string& prompt) const override;

 private:
  ProviderConfig config_;
  std::string origin_;
  std::string path_;
  std::string token_;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& config);

std::string build_prompt(const std::string& topic, const std::string& region);

// F, M, or kUnassigned for unknown.
Gender parse_gender(const std::string& text);

struct LabeledPair {
  std::string region;
  std::string f_label;
  std::string m_label;
};

// Reads pair report JSONL (region, f_label, m_label); other lines are ignored.
std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path);

struct PersonaProbe {
  std::string region;
  std::string topic;
  Gender expected = Gender::kFemale;
  std::string prompt;
};

struct PersonaResult {
  std::size_t run = 0;  // 1-based
  PersonaProbe probe;
  std::string response;
  Gender predicted = Gender::kUnassigned;
  std::string error;
};

struct MismatchReport {
  std::string region;
  std::string model;
  std::optional<double> mismatch_pct;  // mean of per-run percentages
  std::optional<double> pooled_pct;    // over all runs at once
  std::vector<std::optional<double>> per_run_pct;
  std::size_t matched = 0;
  std::size_t mismatched = 0;
  std::size_t unknown = 0;
  std::size_t runs = 0;
};

struct PersonaEvalOptions {
  std::size_t runs = 7;
  std::uint64_t seed = 0;
  std::size_t max_in_flight = 4;
  std::string model_name;
};

struct PersonaEval {
  std::vector<MismatchReport> reports;  // one per region, first-appearance order
  std::vector<PersonaResult> results;
};

PersonaEval run_persona_eval(const std::vector<LabeledPair>& pairs, const Provider& provider,
                             const PersonaEvalOptions& options = {});

Json to_json(const MismatchReport& report);
Json to_json(const PersonaResult& result);

}  // namespace biascope::persona
