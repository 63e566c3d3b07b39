#pragma once

// Word Embedding Association Test: statistic, effect size and permutation
// p-value, plus the batch runner for topic-list evaluations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biascope/embed_store.hpp"
#include "biascope/jsonl.hpp"
#include "biascope/topic_model.hpp"

namespace biascope {

struct WeatTest {
  std::string name;
  std::vector<std::string> x;  // targets 1
  std::vector<std::string> y;  // targets 2
  std::vector<std::string> a;  // attributes 1
  std::vector<std::string> b;  // attributes 2
};

struct WeatOptions {
  // Minimum surviving target words per side after OOV filtering.
  std::size_t min_targets = 2;
  std::size_t n_samples = 100000;
  std::uint64_t seed = 0;
  // Enumerate every partition when there are at most this many.
  std::uint64_t exact_limit = 200000;
  // Worker threads for sampled p-values; 0 picks hardware concurrency.
  unsigned threads = 0;
};

struct WeatResult {
  double statistic = 0.0;
  double effect_size = 0.0;
  double p_value = 1.0;
  std::uint64_t n_permutations = 0;
  bool exact = false;
  std::vector<std::string> dropped_oov;
};

// Mean cosine of w to A minus mean cosine of w to B. OOV attribute words are
// skipped; an OOV w or a fully OOV attribute set throws.
double association(std::string_view w, std::span<const std::string> a,
                   std::span<const std::string> b, const EmbeddingTable& table);

// A WeatTest with OOV words removed and every association precomputed.
class PreparedWeat {
 public:
  PreparedWeat(const WeatTest& test, const EmbeddingTable& table, std::size_t min_targets = 2);

  std::span<const double> x_associations() const noexcept { return sx_; }
  std::span<const double> y_associations() const noexcept { return sy_; }
  const std::vector<std::string>& dropped_oov() const noexcept { return dropped_; }

  // sum_x s(x) - sum_y s(y)
  double statistic() const;
  // (mean_x s - mean_y s) / population std over X u Y. Throws DomainError on zero variance.
  double effect_size() const;

 private:
  std::vector<double> sx_;
  std::vector<double> sy_;
  std::vector<std::string> dropped_;
};

double weat_statistic(const WeatTest& test, const EmbeddingTable& table,
                      std::size_t min_targets = 2);
double effect_size(const WeatTest& test, const EmbeddingTable& table,
                   std::size_t min_targets = 2);

struct PermutationResult {
  double p_value = 1.0;
  std::uint64_t n_permutations = 0;
  bool exact = false;
};

// One-sided p = #{partitions with S >= S_obs} / #partitions over equal-size
// splits of X u Y. Exact when C(|X u Y|, |X|) <= options.exact_limit,
// otherwise options.n_samples seeded random splits.
PermutationResult permutation_p(const WeatTest& test, const EmbeddingTable& table,
                                const WeatOptions& options = {});
PermutationResult permutation_p(const PreparedWeat& prepared, const WeatOptions& options = {});

// C(n, k) as a double (exact below 2^53).
double binomial(std::size_t n, std::size_t k);

WeatResult run_weat(const WeatTest& test, const EmbeddingTable& table,
                    const WeatOptions& options = {});

// Top-k topic words as keywords; k is clamped to the vocabulary size.
std::vector<std::string> extract_keywords(const FittedTopicModel& model, std::size_t topic_id,
                                          std::size_t k = 10);

struct RegionEvalRow {
  std::string pair;
  std::vector<std::string> topic_f;
  std::vector<std::string> topic_m;
  std::vector<std::string> female_terms;
  std::vector<std::string> male_terms;
};

struct RegionEvalSpec {
  std::string region;
  std::vector<RegionEvalRow> rows;
};

struct RegionEvalResult {
  std::string region;
  std::string pair;
  std::optional<double> effect_size;
  std::optional<double> p_value;
  std::uint64_t n_permutations = 0;
  bool exact = false;
  bool identical_attributes = false;
  bool highest = false;
  std::vector<std::string> dropped_oov;
  std::string error;
};

// Per row: X = female terms, Y = male terms, A = F-topic words, B = M-topic
// words. A failing row records its error and the batch continues.
std::vector<RegionEvalResult> run_region_eval(const RegionEvalSpec& spec,
                                              const EmbeddingTable& table,
                                              const WeatOptions& options = {});

WeatTest parse_weat_test(const Json& record);
std::vector<WeatTest> load_weat_tests(const std::filesystem::path& path);

// Groups rows by region, keeping first-appearance order of regions and rows.
std::vector<RegionEvalSpec> parse_region_eval(const std::vector<Json>& records);
std::vector<RegionEvalSpec> load_region_eval(const std::filesystem::path& path);

Json weat_record(const std::string& name, const WeatResult& result);
Json region_eval_record(const RegionEvalResult& result);

// Plain-text table: region, pair, effect size, p-value.
std::string render_region_table(const std::vector<RegionEvalResult>& results);

}  // namespace biascope
