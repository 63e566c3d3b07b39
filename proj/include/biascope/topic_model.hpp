#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "biascope/corpus.hpp"
#include "biascope/jsonl.hpp"

namespace biascope {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct TopicModelConfig {
  std::size_t num_topics = 50;
  std::optional<double> alpha;  // defaults to 50 / num_topics
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  std::size_t top_n_words = 10;
  std::size_t min_topic_size = 100;

  double effective_alpha() const {
    return alpha ? *alpha : 50.0 / static_cast<double>(num_topics);
  }

  // Throws ValidationError on non-positive priors or zero counts.
  void validate() const;
};

struct WordWeight {
  std::string word;
  double weight = 0.0;
};

// Topic-word (phi, K x V) and document-topic (theta, D x K) distributions.
// Rows of both matrices sum to one within 1e-9.
class FittedTopicModel {
 public:
  FittedTopicModel(std::vector<std::string> vocab, Matrix phi, Matrix theta,
                   std::vector<std::string> doc_ids,
                   std::vector<std::vector<std::uint32_t>> assignments, TopicModelConfig config);

  std::size_t num_topics() const noexcept { return phi_.rows(); }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::size_t num_documents() const noexcept { return theta_.rows(); }

  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  const Matrix& phi() const noexcept { return phi_; }
  const Matrix& theta() const noexcept { return theta_; }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  // Per-document topic id of every kept token; empty for imported models.
  const std::vector<std::vector<std::uint32_t>>& assignments() const noexcept {
    return assignments_;
  }
  const TopicModelConfig& config() const noexcept { return config_; }

 private:
  std::vector<std::string> vocab_;
  Matrix phi_;
  Matrix theta_;
  std::vector<std::string> doc_ids_;
  std::vector<std::vector<std::uint32_t>> assignments_;
  TopicModelConfig config_;
};

// Collapsed Gibbs LDA. Words seen fewer than twice are dropped from the
// vocabulary. Deterministic for a fixed seed and input order.
FittedTopicModel fit_lda(const std::vector<Document>& docs, const TopicModelConfig& config);

// Theta row for one document.
std::span<const double> doc_topic_dist(const FittedTopicModel& model, std::size_t doc_index);

// The n highest-weight words of a topic, descending, ties by word.
std::vector<WordWeight> top_words(const FittedTopicModel& model, std::size_t topic_id,
                                  std::size_t n);

// Document and co-document frequencies over a token corpus.
class DocumentFrequencyIndex {
 public:
  explicit DocumentFrequencyIndex(const std::vector<Document>& docs);

  std::size_t df(const std::string& word) const;
  std::size_t co_df(const std::string& a, const std::string& b) const;

 private:
  std::unordered_map<std::string, std::vector<std::uint32_t>> postings_;
};

// u_mass over words in rank order:
// sum_{i>=2} sum_{j<i} log((D(w_i, w_j) + 1) / D(w_j)).
double umass_coherence(std::span<const std::string> ranked_words,
                       const DocumentFrequencyIndex& index);

// u_mass of a topic's top config().top_n_words words against docs.
double coherence_umass(const FittedTopicModel& model, std::size_t topic_id,
                       const std::vector<Document>& docs);
double coherence_umass(const FittedTopicModel& model, std::size_t topic_id,
                       const DocumentFrequencyIndex& index);

struct TopicSummary {
  std::size_t topic_id = 0;
  std::vector<WordWeight> top_words;
  double coherence = 0.0;
  std::size_t size = 0;  // documents whose argmax topic is this one
  bool undersized = false;
  std::optional<std::string> label;
};

// Per-topic summaries. Documents without tokens are left out of sizes.
std::vector<TopicSummary> summarize_topics(const FittedTopicModel& model,
                                           const std::vector<Document>& docs,
                                           const std::map<std::size_t, std::string>& labels = {});

// Export records: one meta line, one phi line per topic, one theta line per document.
std::vector<Json> export_topics(const FittedTopicModel& model);

// Builds a model from export records. Theta rows must sum to 1 within 1e-6
// (then renormalized); phi rows are renormalized. Header lines are ignored.
FittedTopicModel import_topics(const std::vector<Json>& records, const std::vector<Document>& docs);
FittedTopicModel import_topics(const std::filesystem::path& path, const std::vector<Document>& docs);

// Label file: {"topic": int, "label": string} per line.
std::map<std::size_t, std::string> load_topic_labels(const std::filesystem::path& path);

}  // namespace biascope
