#include "biascope/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "biascope/error.hpp"
#include "biascope/random.hpp"

namespace biascope {

namespace {

constexpr double kStochasticTolerance = 1e-9;
constexpr double kImportTolerance = 1e-6;

void check_stochastic(const Matrix& m, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (const double v : m.row(r)) {
      if (!(v >= 0.0)) {
        throw ValidationError(std::string(what) + " row " + std::to_string(r) +
                              " has a negative or NaN entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      throw ValidationError(std::string(what) + " row " + std::to_string(r) + " sums to " +
                            std::to_string(sum));
    }
  }
}

}  // namespace

void TopicModelConfig::validate() const {
  if (num_topics == 0) {
    throw ValidationError("topic count must be positive");
  }
  if (!(effective_alpha() > 0.0) || !(beta > 0.0)) {
    throw ValidationError("topic model priors must be positive");
  }
  if (iterations == 0) {
    throw ValidationError("iterations must be positive");
  }
  if (top_n_words == 0) {
    throw ValidationError("top_n_words must be positive");
  }
}

FittedTopicModel::FittedTopicModel(std::vector<std::string> vocab, Matrix phi, Matrix theta,
                                   std::vector<std::string> doc_ids,
                                   std::vector<std::vector<std::uint32_t>> assignments,
                                   TopicModelConfig config)
    : vocab_(std::move(vocab)),
      phi_(std::move(phi)),
      theta_(std::move(theta)),
      doc_ids_(std::move(doc_ids)),
      assignments_(std::move(assignments)),
      config_(std::move(config)) {
  if (phi_.cols() != vocab_.size()) {
    throw ValidationError("phi width does not match vocabulary size");
  }
  if (theta_.rows() != doc_ids_.size()) {
    throw ValidationError("theta height does not match document count");
  }
  if (theta_.cols() != phi_.rows()) {
    throw ValidationError("theta width does not match topic count");
  }
  if (!assignments_.empty() && assignments_.size() != doc_ids_.size()) {
    throw ValidationError("assignments do not cover every document");
  }
  check_stochastic(phi_, "phi");
  check_stochastic(theta_, "theta");
  config_.num_topics = phi_.rows();
}

FittedTopicModel fit_lda(const std::vector<Document>& docs, const TopicModelConfig& config) {
  config.validate();
  const std::size_t K = config.num_topics;
  if (K > docs.size()) {
    throw ValidationError("topic count " + std::to_string(K) + " exceeds document count " +
                          std::to_string(docs.size()));
  }

  std::map<std::string, std::size_t> frequency;
  for (const auto& doc : docs) {
    for (const auto& tok : doc.tokens) {
      ++frequency[tok];
    }
  }
  std::vector<std::string> vocab;
  std::unordered_map<std::string, std::uint32_t> word_id;
  for (const auto& [word, count] : frequency) {
    if (count >= 2) {
      word_id.emplace(word, static_cast<std::uint32_t>(vocab.size()));
      vocab.push_back(word);
    }
  }
  if (vocab.empty()) {
    throw ValidationError("empty vocabulary after dropping words seen fewer than twice");
  }
  const std::size_t V = vocab.size();
  const std::size_t D = docs.size();

  std::vector<std::vector<std::uint32_t>> words(D);
  std::size_t nonempty = 0;
  for (std::size_t d = 0; d < D; ++d) {
    for (const auto& tok : docs[d].tokens) {
      if (auto it = word_id.find(tok); it != word_id.end()) {
        words[d].push_back(it->second);
      }
    }
    nonempty += words[d].empty() ? 0 : 1;
  }
  if (nonempty < K) {
    throw ValidationError("need at least " + std::to_string(K) +
                          " documents with tokens, found " + std::to_string(nonempty));
  }

  const double alpha = config.effective_alpha();
  const double beta = config.beta;
  const double v_beta = static_cast<double>(V) * beta;

  std::vector<std::uint32_t> n_dt(D * K, 0);
  std::vector<std::uint32_t> n_tw(K * V, 0);
  std::vector<std::uint32_t> n_t(K, 0);
  std::vector<std::vector<std::uint32_t>> z(D);

  Xoshiro256 rng(config.seed);
  for (std::size_t d = 0; d < D; ++d) {
    z[d].resize(words[d].size());
    for (std::size_t i = 0; i < words[d].size(); ++i) {
      const auto t = static_cast<std::uint32_t>(rng.below(K));
      z[d][i] = t;
      ++n_dt[d * K + t];
      ++n_tw[t * V + words[d][i]];
      ++n_t[t];
    }
  }

  std::vector<double> cumulative(K);
  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    for (std::size_t d = 0; d < D; ++d) {
      for (std::size_t i = 0; i < words[d].size(); ++i) {
        const std::uint32_t w = words[d][i];
        const std::uint32_t old = z[d][i];
        --n_dt[d * K + old];
        --n_tw[old * V + w];
        --n_t[old];

        double total = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
          total += (n_dt[d * K + t] + alpha) * (n_tw[t * V + w] + beta) / (n_t[t] + v_beta);
          cumulative[t] = total;
        }
        const double u = rng.uniform() * total;
        std::size_t pick = 0;
        while (pick + 1 < K && cumulative[pick] <= u) {
          ++pick;
        }
        const auto t = static_cast<std::uint32_t>(pick);
        z[d][i] = t;
        ++n_dt[d * K + t];
        ++n_tw[t * V + w];
        ++n_t[t];
      }
    }
  }

  Matrix phi(K, V);
  for (std::size_t t = 0; t < K; ++t) {
    for (std::size_t w = 0; w < V; ++w) {
      phi(t, w) = (n_tw[t * V + w] + beta) / (n_t[t] + v_beta);
    }
  }
  Matrix theta(D, K);
  const double k_alpha = static_cast<double>(K) * alpha;
  for (std::size_t d = 0; d < D; ++d) {
    const double n_d = static_cast<double>(words[d].size());
    for (std::size_t t = 0; t < K; ++t) {
      theta(d, t) = (n_dt[d * K + t] + alpha) / (n_d + k_alpha);
    }
  }
  std::vector<std::string> ids;
  ids.reserve(D);
  for (const auto& doc : docs) {
    ids.push_back(doc.id);
  }
  return FittedTopicModel(std::move(vocab), std::move(phi), std::move(theta), std::move(ids),
                          std::move(z), config);
}

std::span<const double> doc_topic_dist(const FittedTopicModel& model, std::size_t doc_index) {
  if (doc_index >= model.num_documents()) {
    throw ValidationError("document index " + std::to_string(doc_index) + " out of range");
  }
  return model.theta().row(doc_index);
}

std::vector<WordWeight> top_words(const FittedTopicModel& model, std::size_t topic_id,
                                  std::size_t n) {
  if (topic_id >= model.num_topics()) {
    throw ValidationError("topic " + std::to_string(topic_id) + " out of range");
  }
  if (n > model.vocab_size()) {
    throw ValidationError("requested " + std::to_string(n) + " words from a vocabulary of " +
                          std::to_string(model.vocab_size()));
  }
  const auto row = model.phi().row(topic_id);
  const auto& vocab = model.vocab();
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return row[a] != row[b] ? row[a] > row[b] : vocab[a] < vocab[b];
                    });
  std::vector<WordWeight> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({vocab[order[i]], row[order[i]]});
  }
  return out;
}

DocumentFrequencyIndex::DocumentFrequencyIndex(const std::vector<Document>& docs) {
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& tok : docs[d].tokens) {
      auto& list = postings_[tok];
      if (list.empty() || list.back() != d) {
        list.push_back(static_cast<std::uint32_t>(d));
      }
    }
  }
}

std::size_t DocumentFrequencyIndex::df(const std::string& word) const {
  auto it = postings_.find(word);
  return it == postings_.end() ? 0 : it->second.size();
}

std::size_t DocumentFrequencyIndex::co_df(const std::string& a, const std::string& b) const {
  auto ia = postings_.find(a);
  auto ib = postings_.find(b);
  if (ia == postings_.end() || ib == postings_.end()) {
    return 0;
  }
  const auto& x = ia->second;
  const auto& y = ib->second;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t both = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] < y[j]) {
      ++i;
    } else if (y[j] < x[i]) {
      ++j;
    } else {
      ++both;
      ++i;
      ++j;
    }
  }
  return both;
}

double umass_coherence(std::span<const std::string> ranked_words,
                       const DocumentFrequencyIndex& index) {
  if (ranked_words.size() < 2) {
    throw ValidationError("u_mass coherence needs at least two words");
  }
  double total = 0.0;
  for (std::size_t i = 1; i < ranked_words.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const auto d_j = index.df(ranked_words[j]);
      if (d_j == 0) {
        throw DomainError("word '" + ranked_words[j] + "' occurs in no document");
      }
      const auto d_ij = index.co_df(ranked_words[i], ranked_words[j]);
      total += std::log((static_cast<double>(d_ij) + 1.0) / static_cast<double>(d_j));
    }
  }
  return total;
}

double coherence_umass(const FittedTopicModel& model, std::size_t topic_id,
                       const DocumentFrequencyIndex& index) {
  const std::size_t n = std::min(model.config().top_n_words, model.vocab_size());
  std::vector<std::string> words;
  for (auto& ww : top_words(model, topic_id, n)) {
    words.push_back(std::move(ww.word));
  }
  return umass_coherence(words, index);
}

double coherence_umass(const FittedTopicModel& model, std::size_t topic_id,
                       const std::vector<Document>& docs) {
  return coherence_umass(model, topic_id, DocumentFrequencyIndex(docs));
}

std::vector<TopicSummary> summarize_topics(const FittedTopicModel& model,
                                           const std::vector<Document>& docs,
                                           const std::map<std::size_t, std::string>& labels) {
  const std::size_t K = model.num_topics();
  std::vector<std::size_t> sizes(K, 0);
  const auto& theta = model.theta();
  const bool have_tokens = docs.size() == model.num_documents();
  for (std::size_t d = 0; d < model.num_documents(); ++d) {
    const bool counted = !model.assignments().empty() ? !model.assignments()[d].empty()
                         : have_tokens               ? !docs[d].tokens.empty()
                                                     : true;
    if (!counted) {
      continue;
    }
    const auto row = theta.row(d);
    sizes[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())]++;
  }
  const DocumentFrequencyIndex index(docs);
  const std::size_t n = std::min(model.config().top_n_words, model.vocab_size());
  std::vector<TopicSummary> out;
  out.reserve(K);
  for (std::size_t t = 0; t < K; ++t) {
    TopicSummary s;
    s.topic_id = t;
    s.top_words = top_words(model, t, n);
    s.coherence = n >= 2 ? coherence_umass(model, t, index) : 0.0;
    s.size = sizes[t];
    s.undersized = sizes[t] < model.config().min_topic_size;
    if (auto it = labels.find(t); it != labels.end()) {
      s.label = it->second;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Json> export_topics(const FittedTopicModel& model) {
  std::vector<Json> out;
  const auto& cfg = model.config();
  out.push_back({{"kind", "meta"},
                 {"K", model.num_topics()},
                 {"vocab", model.vocab()},
                 {"config",
                  {{"alpha", cfg.effective_alpha()},
                   {"beta", cfg.beta},
                   {"iterations", cfg.iterations},
                   {"seed", cfg.seed},
                   {"top_n_words", cfg.top_n_words},
                   {"min_topic_size", cfg.min_topic_size}}}});
  for (std::size_t t = 0; t < model.num_topics(); ++t) {
    Json weights = Json::array();
    const auto row = model.phi().row(t);
    for (std::size_t w = 0; w < row.size(); ++w) {
      weights.push_back(Json::array({model.vocab()[w], row[w]}));
    }
    out.push_back({{"kind", "phi"}, {"topic", t}, {"weights", std::move(weights)}});
  }
  for (std::size_t d = 0; d < model.num_documents(); ++d) {
    const auto row = model.theta().row(d);
    out.push_back({{"kind", "theta"},
                   {"doc_id", model.doc_ids()[d]},
                   {"dist", std::vector<double>(row.begin(), row.end())}});
  }
  return out;
}

namespace {

FittedTopicModel import_records(const std::vector<Json>& records,
                                const std::vector<Document>& docs) {
  std::optional<std::size_t> K;
  std::vector<std::string> vocab;
  std::unordered_map<std::string, std::size_t> vocab_index;
  TopicModelConfig config;
  std::map<std::size_t, std::vector<double>> phi_rows;
  std::unordered_map<std::string, std::vector<double>> theta_rows;

  for (const auto& rec : records) {
    const std::string kind = rec.value("kind", "");
    if (kind == "header") {
      continue;
    }
    if (kind == "meta") {
      K = rec.at("K").get<std::size_t>();
      vocab = rec.at("vocab").get<std::vector<std::string>>();
      for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (!vocab_index.emplace(vocab[i], i).second) {
          throw ValidationError("duplicate vocabulary word '" + vocab[i] + "' in topic import");
        }
      }
      if (auto it = rec.find("config"); it != rec.end() && it->is_object()) {
        config.alpha = it->value("alpha", config.effective_alpha());
        config.beta = it->value("beta", config.beta);
        config.iterations = it->value("iterations", config.iterations);
        config.seed = it->value("seed", config.seed);
        config.top_n_words = it->value("top_n_words", config.top_n_words);
        config.min_topic_size = it->value("min_topic_size", config.min_topic_size);
      }
      continue;
    }
    if (!K) {
      throw ValidationError("topic import must start with a meta record");
    }
    if (kind == "phi") {
      const auto topic = rec.at("topic").get<std::size_t>();
      if (topic >= *K) {
        throw ValidationError("phi record for topic " + std::to_string(topic) + " out of range");
      }
      std::vector<double> row(vocab.size(), 0.0);
      for (const auto& entry : rec.at("weights")) {
        const auto word = entry.at(0).get<std::string>();
        const auto weight = entry.at(1).get<double>();
        auto it = vocab_index.find(word);
        if (it == vocab_index.end()) {
          throw ValidationError("phi word '" + word + "' is not in the vocabulary");
        }
        if (!(weight >= 0.0)) {
          throw ValidationError("negative phi weight for '" + word + "'");
        }
        row[it->second] = weight;
      }
      phi_rows[topic] = std::move(row);
    } else if (kind == "theta") {
      const auto doc_id = rec.at("doc_id").get<std::string>();
      auto dist = rec.at("dist").get<std::vector<double>>();
      if (dist.size() != *K) {
        throw ValidationError("theta row for '" + doc_id + "' has " +
                              std::to_string(dist.size()) + " entries, expected " +
                              std::to_string(*K));
      }
      theta_rows[doc_id] = std::move(dist);
    } else {
      throw ValidationError("unknown record kind '" + kind + "' in topic import");
    }
  }
  if (!K || *K == 0) {
    throw ValidationError("topic import has no meta record");
  }

  Matrix phi(*K, vocab.size());
  for (std::size_t t = 0; t < *K; ++t) {
    auto it = phi_rows.find(t);
    if (it == phi_rows.end()) {
      throw ValidationError("topic import is missing phi for topic " + std::to_string(t));
    }
    const double sum = std::accumulate(it->second.begin(), it->second.end(), 0.0);
    if (!(sum > 0.0)) {
      throw ValidationError("phi row " + std::to_string(t) + " has no positive weight");
    }
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      phi(t, w) = it->second[w] / sum;
    }
  }

  std::unordered_map<std::string, bool> known;
  for (const auto& doc : docs) {
    known.emplace(doc.id, true);
  }
  for (const auto& [doc_id, _] : theta_rows) {
    if (!known.contains(doc_id)) {
      throw ValidationError("topic import references unknown document '" + doc_id + "'");
    }
  }
  Matrix theta(docs.size(), *K);
  std::vector<std::string> ids;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    auto it = theta_rows.find(docs[d].id);
    if (it == theta_rows.end()) {
      throw ValidationError("topic import has no distribution for document '" + docs[d].id + "'");
    }
    double sum = 0.0;
    for (const double p : it->second) {
      if (!(p >= 0.0)) {
        throw ValidationError("negative probability for document '" + docs[d].id + "'");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kImportTolerance) {
      throw ValidationError("distribution for document '" + docs[d].id + "' sums to " +
                            std::to_string(sum));
    }
    for (std::size_t t = 0; t < *K; ++t) {
      theta(d, t) = it->second[t] / sum;
    }
    ids.push_back(docs[d].id);
  }
  config.num_topics = *K;
  return FittedTopicModel(std::move(vocab), std::move(phi), std::move(theta), std::move(ids), {},
                          config);
}

}  // namespace

FittedTopicModel import_topics(const std::vector<Json>& records,
                               const std::vector<Document>& docs) {
  try {
    return import_records(records, docs);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed topic import record: ") + e.what());
  }
}

FittedTopicModel import_topics(const std::filesystem::path& path,
                               const std::vector<Document>& docs) {
  std::size_t bad = 0;
  auto records = read_jsonl(path, [&](std::size_t, std::string_view) { ++bad; });
  if (bad > 0) {
    throw ValidationError(std::to_string(bad) + " malformed lines in " + path.string());
  }
  return import_topics(records, docs);
}

std::map<std::size_t, std::string> load_topic_labels(const std::filesystem::path& path) {
  std::map<std::size_t, std::string> labels;
  for (const auto& rec : read_jsonl(path)) {
    labels[rec.at("topic").get<std::size_t>()] = rec.at("label").get<std::string>();
  }
  return labels;
}

}  // namespace biascope
