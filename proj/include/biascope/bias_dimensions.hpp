#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "biascope/corpus.hpp"
#include "biascope/embed_store.hpp"
#include "biascope/gender.hpp"
#include "biascope/jsonl.hpp"
#include "biascope/topic_model.hpp"

namespace biascope {

struct TopicAlignment {
  std::size_t topic_id = 0;
  double p_f = 0.0;  // mean p_it over the F documents among the top n
  double p_m = 0.0;
  // kUnassigned marks an exact p_f == p_m tie; such topics join neither pool.
  Gender gender = Gender::kUnassigned;
  std::size_t n_used = 0;
  std::size_t m_f = 0;  // F documents among the n
};

// For every topic, takes the n documents with the highest probability for
// it (ties by lower document index) and compares the mean probability of the
// F and M documents among them.
std::vector<TopicAlignment> align_topics(const Matrix& theta,
                                         std::span<const Gender> doc_genders, std::size_t n);

// The model must have been fit on corpus.documents(), in that order.
std::vector<TopicAlignment> align_topics(const FittedTopicModel& model,
                                         const GenderedCorpus& corpus, std::size_t n);

struct AlignmentPools {
  std::vector<TopicAlignment> female;
  std::vector<TopicAlignment> male;
  std::size_t ties = 0;
};

AlignmentPools split_pools(const std::vector<TopicAlignment>& alignments);

struct TopicEmbedding {
  std::size_t topic_id = 0;
  std::vector<double> vector;
  std::size_t found_words = 0;
  std::vector<std::string> missing;
};

inline constexpr std::size_t kTopicEmbeddingWords = 10;

// Mean embedding of the topic's top ten words, skipping words not in the table.
TopicEmbedding topic_embedding(const EmbeddingTable& table, const FittedTopicModel& model,
                               std::size_t topic_id);

enum class PairMode { kOr, kAnd };
enum class MatchedCondition { kDirect, kCross, kBoth };

std::string_view to_string(MatchedCondition c) noexcept;

struct TopicPair {
  std::size_t f_topic = 0;
  std::size_t m_topic = 0;
  double delta_direct = 0.0;  // |cos(E_F, she) - cos(E_M, he)|
  double delta_cross = 0.0;   // |cos(E_F, he) - cos(E_M, she)|
  MatchedCondition matched = MatchedCondition::kDirect;
  double rank_score = 0.0;

  friend bool operator==(const TopicPair&, const TopicPair&) = default;
};

inline constexpr double kDefaultPairThreshold = 0.01;

struct PairSearch {
  std::vector<TopicPair> pairs;  // sorted by (f_topic, m_topic)
  std::vector<std::string> warnings;
};

// Every F x M combination whose cosine deltas fall strictly below threshold
// (either delta under kOr, both under kAnd).
PairSearch find_pairs(const std::vector<TopicAlignment>& f_aligned,
                      const std::vector<TopicAlignment>& m_aligned,
                      const std::map<std::size_t, TopicEmbedding>& embeddings,
                      std::span<const double> she, std::span<const double> he,
                      double threshold = kDefaultPairThreshold, PairMode mode = PairMode::kOr);

PairSearch find_pairs(const std::vector<TopicAlignment>& f_aligned,
                      const std::vector<TopicAlignment>& m_aligned,
                      const std::map<std::size_t, TopicEmbedding>& embeddings,
                      const EmbeddingTable& table, const GenderAnchors& anchors,
                      double threshold = kDefaultPairThreshold, PairMode mode = PairMode::kOr);

// Scores each pair by the mean u_mass of its two topics and keeps the top k
// (descending score, ties by smaller (f_topic, m_topic)).
std::vector<TopicPair> rank_pairs(std::vector<TopicPair> pairs,
                                  const std::map<std::size_t, double>& coherence, std::size_t k);

std::vector<TopicPair> rank_pairs(std::vector<TopicPair> pairs, const FittedTopicModel& model,
                                  const std::vector<Document>& docs, std::size_t k = 5);

// One pair report line.
Json pair_record(const std::string& region, const TopicPair& pair,
                 const std::map<std::size_t, std::string>& labels);

}  // namespace biascope
