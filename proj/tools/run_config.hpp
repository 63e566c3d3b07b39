#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "biascope/jsonl.hpp"

namespace biascope::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Every key here is settable from the config file and from a same-named flag.
struct RunConfig {
  std::vector<std::string> regions;

  std::string corpus;
  std::string embeddings;
  std::size_t embedding_dim = 0;  // 0: infer
  std::string lexicon;            // empty: bundled 52-pair list
  std::string topics_import;      // may contain {region}
  std::string labels;             // may contain {region}
  std::string results_dir = "results";
  std::size_t min_tokens = 0;
  std::string tie_policy = "exclude";

  std::size_t topics = 50;
  double alpha = 0.0;  // 0: 50 / topics
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::size_t top_n_words = 10;
  std::size_t min_topic_size = 100;

  std::size_t align_n = 100;
  double threshold = 0.01;
  std::string mode = "or";
  std::size_t top_pairs = 5;  // 0: keep every pair
  std::string she = "she";
  std::string he = "he";

  std::string weat_spec;
  std::string region_eval_spec;
  std::size_t n_samples = 100000;
  std::size_t min_targets = 2;
  unsigned threads = 0;

  std::string vocab;
  std::size_t axis_top_k = 20;

  std::string host = "0.0.0.0";
  int port = 8080;
  std::string data_dir = "iat-data";
  std::vector<std::string> studies;
  std::string ui_dir;

  std::string provider_kind = "mock";
  std::string provider_endpoint;
  std::string provider_model;
  std::string provider_token_env;
  double provider_temperature = 0.8;
  double provider_timeout = 60.0;
  std::string mock_script;
  std::vector<std::string> pairs;
  std::size_t runs = 7;
  std::size_t max_in_flight = 4;

  // Filled after parsing: hash of the effective configuration.
  std::string config_hash;

  std::filesystem::path results_path(const std::string& name) const {
    return std::filesystem::path(results_dir) / name;
  }
};

// Exit code 1: config or input validation failed before the stage ran.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json header_record(const RunConfig& config, const std::string& stage);

std::string substitute_region(const std::string& pattern, const std::string& region);

int run_ingest(const RunConfig& config);
int run_split(const RunConfig& config);
int run_fit_topics(const RunConfig& config);
int run_import_topics(const RunConfig& config);
int run_align(const RunConfig& config);
int run_pair(const RunConfig& config);
int run_weat(const RunConfig& config);
int run_region_eval(const RunConfig& config);
int run_gender_axis(const RunConfig& config);
int run_iat_serve(const RunConfig& config);
int run_persona_eval(const RunConfig& config);
int run_report(const RunConfig& config);

}  // namespace biascope::cli
