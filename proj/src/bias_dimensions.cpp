#include "biascope/bias_dimensions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "biascope/error.hpp"

namespace biascope {

std::vector<TopicAlignment> align_topics(const Matrix& theta,
                                         std::span<const Gender> doc_genders, std::size_t n) {
  if (n == 0) {
    throw ValidationError("alignment needs n > 0 documents per topic");
  }
  const std::size_t D = theta.rows();
  if (doc_genders.size() != D) {
    throw ValidationError("gender labels do not cover every theta row");
  }
  if (n > D) {
    throw ValidationError("alignment n=" + std::to_string(n) + " exceeds document count " +
                          std::to_string(D));
  }
  for (const auto g : doc_genders) {
    if (g == Gender::kUnassigned) {
      throw ValidationError("alignment requires every document to be F or M");
    }
  }

  std::vector<TopicAlignment> out;
  std::vector<std::size_t> order(D);
  for (std::size_t t = 0; t < theta.cols(); ++t) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double pa = theta(a, t);
                        const double pb = theta(b, t);
                        return pa != pb ? pa > pb : a < b;
                      });
    double sum_f = 0.0;
    double sum_m = 0.0;
    std::size_t m_f = 0;
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = theta(order[i], t);
      mass += p;
      if (doc_genders[order[i]] == Gender::kFemale) {
        sum_f += p;
        ++m_f;
      } else {
        sum_m += p;
      }
    }
    if (!(mass > 0.0)) {
      throw DomainError("topic " + std::to_string(t) + " has no documents with positive probability");
    }
    TopicAlignment a;
    a.topic_id = t;
    a.n_used = n;
    a.m_f = m_f;
    a.p_f = m_f > 0 ? sum_f / static_cast<double>(m_f) : 0.0;
    a.p_m = n - m_f > 0 ? sum_m / static_cast<double>(n - m_f) : 0.0;
    if (m_f == 0) {
      a.gender = Gender::kMale;
    } else if (m_f == n) {
      a.gender = Gender::kFemale;
    } else if (a.p_f > a.p_m) {
      a.gender = Gender::kFemale;
    } else if (a.p_m > a.p_f) {
      a.gender = Gender::kMale;
    } else {
      a.gender = Gender::kUnassigned;
    }
    out.push_back(a);
  }
  return out;
}

std::vector<TopicAlignment> align_topics(const FittedTopicModel& model,
                                         const GenderedCorpus& corpus, std::size_t n) {
  const auto docs = corpus.documents();
  if (docs.size() != model.num_documents()) {
    throw ValidationError("topic model covers " + std::to_string(model.num_documents()) +
                          " documents but the corpus has " + std::to_string(docs.size()));
  }
  std::vector<Gender> genders;
  genders.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (docs[d].id != model.doc_ids()[d]) {
      throw ValidationError("topic model document order does not match the corpus at index " +
                            std::to_string(d));
    }
    genders.push_back(docs[d].gender);
  }
  return align_topics(model.theta(), genders, n);
}

AlignmentPools split_pools(const std::vector<TopicAlignment>& alignments) {
  AlignmentPools pools;
  for (const auto& a : alignments) {
    if (a.gender == Gender::kFemale) {
      pools.female.push_back(a);
    } else if (a.gender == Gender::kMale) {
      pools.male.push_back(a);
    } else {
      ++pools.ties;
    }
  }
  return pools;
}

TopicEmbedding topic_embedding(const EmbeddingTable& table, const FittedTopicModel& model,
                               std::size_t topic_id) {
  const std::size_t n = std::min(kTopicEmbeddingWords, model.vocab_size());
  std::vector<std::string> words;
  for (auto& ww : top_words(model, topic_id, n)) {
    words.push_back(std::move(ww.word));
  }
  auto mean = mean_vector(table, words, OovPolicy::kSkip);
  return {topic_id, std::move(mean.values), mean.found, std::move(mean.missing)};
}

std::string_view to_string(MatchedCondition c) noexcept {
  switch (c) {
    case MatchedCondition::kDirect:
      return "direct";
    case MatchedCondition::kCross:
      return "cross";
    default:
      return "both";
  }
}

PairSearch find_pairs(const std::vector<TopicAlignment>& f_aligned,
                      const std::vector<TopicAlignment>& m_aligned,
                      const std::map<std::size_t, TopicEmbedding>& embeddings,
                      std::span<const double> she, std::span<const double> he, double threshold,
                      PairMode mode) {
  PairSearch result;
  if (f_aligned.empty() || m_aligned.empty()) {
    result.warnings.push_back(f_aligned.empty() ? "no F-aligned topics; no pairs possible"
                                                : "no M-aligned topics; no pairs possible");
    return result;
  }
  auto lookup = [&](const TopicAlignment& a, Gender expected) -> const std::vector<double>& {
    if (a.gender != expected) {
      throw ValidationError("topic " + std::to_string(a.topic_id) + " is in the " +
                            std::string(to_string(expected)) + " pool but aligned " +
                            std::string(to_string(a.gender)));
    }
    auto it = embeddings.find(a.topic_id);
    if (it == embeddings.end()) {
      throw ValidationError("no embedding for topic " + std::to_string(a.topic_id));
    }
    return it->second.vector;
  };

  struct Cosines {
    std::size_t topic;
    double she;
    double he;
  };
  std::vector<Cosines> fem;
  std::vector<Cosines> mal;
  for (const auto& a : f_aligned) {
    const auto& v = lookup(a, Gender::kFemale);
    fem.push_back({a.topic_id, cosine(v, she), cosine(v, he)});
  }
  for (const auto& a : m_aligned) {
    const auto& v = lookup(a, Gender::kMale);
    mal.push_back({a.topic_id, cosine(v, she), cosine(v, he)});
  }

  for (const auto& f : fem) {
    for (const auto& m : mal) {
      const double direct = std::abs(f.she - m.he);
      const double cross = std::abs(f.he - m.she);
      const bool direct_ok = direct < threshold;
      const bool cross_ok = cross < threshold;
      const bool accept = mode == PairMode::kOr ? (direct_ok || cross_ok) : (direct_ok && cross_ok);
      if (!accept) {
        continue;
      }
      TopicPair pair;
      pair.f_topic = f.topic;
      pair.m_topic = m.topic;
      pair.delta_direct = direct;
      pair.delta_cross = cross;
      pair.matched = direct_ok && cross_ok ? MatchedCondition::kBoth
                     : direct_ok           ? MatchedCondition::kDirect
                                           : MatchedCondition::kCross;
      result.pairs.push_back(pair);
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end(), [](const TopicPair& a, const TopicPair& b) {
    return std::tie(a.f_topic, a.m_topic) < std::tie(b.f_topic, b.m_topic);
  });
  return result;
}

PairSearch find_pairs(const std::vector<TopicAlignment>& f_aligned,
                      const std::vector<TopicAlignment>& m_aligned,
                      const std::map<std::size_t, TopicEmbedding>& embeddings,
                      const EmbeddingTable& table, const GenderAnchors& anchors, double threshold,
                      PairMode mode) {
  return find_pairs(f_aligned, m_aligned, embeddings, table.at(anchors.she_word),
                    table.at(anchors.he_word), threshold, mode);
}

std::vector<TopicPair> rank_pairs(std::vector<TopicPair> pairs,
                                  const std::map<std::size_t, double>& coherence, std::size_t k) {
  if (k == 0) {
    throw ValidationError("rank_pairs needs k > 0");
  }
  auto score_of = [&](std::size_t topic) {
    auto it = coherence.find(topic);
    if (it == coherence.end()) {
      throw ValidationError("no coherence for topic " + std::to_string(topic));
    }
    return it->second;
  };
  for (auto& p : pairs) {
    p.rank_score = (score_of(p.f_topic) + score_of(p.m_topic)) / 2.0;
  }
  std::sort(pairs.begin(), pairs.end(), [](const TopicPair& a, const TopicPair& b) {
    if (a.rank_score != b.rank_score) {
      return a.rank_score > b.rank_score;
    }
    return std::tie(a.f_topic, a.m_topic) < std::tie(b.f_topic, b.m_topic);
  });
  if (pairs.size() > k) {
    pairs.resize(k);
  }
  return pairs;
}

std::vector<TopicPair> rank_pairs(std::vector<TopicPair> pairs, const FittedTopicModel& model,
                                  const std::vector<Document>& docs, std::size_t k) {
  const DocumentFrequencyIndex index(docs);
  std::map<std::size_t, double> coherence;
  for (const auto& p : pairs) {
    for (const auto topic : {p.f_topic, p.m_topic}) {
      if (!coherence.contains(topic)) {
        coherence[topic] = coherence_umass(model, topic, index);
      }
    }
  }
  return rank_pairs(std::move(pairs), coherence, k);
}

Json pair_record(const std::string& region, const TopicPair& pair,
                 const std::map<std::size_t, std::string>& labels) {
  auto label = [&](std::size_t topic) {
    auto it = labels.find(topic);
    return it == labels.end() ? std::string() : it->second;
  };
  return {{"region", region},
          {"f_topic", pair.f_topic},
          {"m_topic", pair.m_topic},
          {"f_label", label(pair.f_topic)},
          {"m_label", label(pair.m_topic)},
          {"delta_direct", pair.delta_direct},
          {"delta_cross", pair.delta_cross},
          {"matched", to_string(pair.matched)},
          {"rank_score", pair.rank_score}};
}

}  // namespace biascope
