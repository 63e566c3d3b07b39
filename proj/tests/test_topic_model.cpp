#include <gtest/gtest.h>

#include <chrono>
#include <numeric>

#include "biascope/error.hpp"
#include "biascope/topic_model.hpp"
#include "biascope/weat.hpp"
#include "support.hpp"

using namespace biascope;
using biascope::testing::doc_of;
using biascope::testing::TempDir;

namespace {

TopicModelConfig small_config(std::size_t k, std::size_t iterations = 200) {
  TopicModelConfig c;
  c.num_topics = k;
  c.iterations = iterations;
  c.seed = 42;
  c.min_topic_size = 1;
  return c;
}

// Fraction of each source's vocabulary found in its greedily matched topic's top 10.
std::vector<double> purity(const FittedTopicModel& model, std::size_t sources) {
  std::vector<std::vector<std::size_t>> overlap(model.num_topics(),
                                                std::vector<std::size_t>(sources, 0));
  for (std::size_t t = 0; t < model.num_topics(); ++t) {
    for (const auto& w : top_words(model, t, 10)) {
      overlap[t][static_cast<std::size_t>(w.word[1] - '0')]++;
    }
  }
  std::vector<double> out(sources, 0.0);
  std::vector<bool> used_t(model.num_topics()), used_s(sources);
  for (std::size_t round = 0; round < sources; ++round) {
    std::size_t bt = 0, bs = 0, best = 0;
    bool found = false;
    for (std::size_t t = 0; t < model.num_topics(); ++t) {
      for (std::size_t s = 0; s < sources; ++s) {
        if (!used_t[t] && !used_s[s] && (!found || overlap[t][s] > best)) {
          bt = t, bs = s, best = overlap[t][s], found = true;
        }
      }
    }
    used_t[bt] = used_s[bs] = true;
    out[bs] = static_cast<double>(best) / 10.0;
  }
  return out;
}

}  // namespace

TEST(Lda, SingleTopic) {
  const auto docs = biascope::testing::disjoint_corpus(1, 20, 2, 5, 10);
  const auto model = fit_lda(docs, small_config(1, 20));
  for (const auto& doc : model.assignments()) {
    for (auto z : doc) EXPECT_EQ(z, 0u);
  }
  for (std::size_t d = 0; d < model.num_documents(); ++d) {
    EXPECT_EQ(doc_topic_dist(model, d)[0], 1.0);
  }
}

TEST(Lda, RecoversDisjointTopicsDeterministically) {
  const auto docs = biascope::testing::disjoint_corpus(7, 300, 3, 10, 40);
  const auto start = std::chrono::steady_clock::now();
  const auto a = fit_lda(docs, small_config(3));
  const auto b = fit_lda(docs, small_config(3));
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(60));
  for (double p : purity(a, 3)) EXPECT_GE(p, 0.9);
  EXPECT_EQ(a.assignments(), b.assignments());
}

TEST(Lda, ThetaMatchesCountRecomputation) {
  const auto docs = biascope::testing::disjoint_corpus(9, 40, 3, 6, 12);
  const auto config = small_config(4, 50);
  const auto model = fit_lda(docs, config);
  const double alpha = config.effective_alpha();
  for (std::size_t d = 0; d < model.num_documents(); ++d) {
    std::vector<double> counts(4, 0.0);
    for (auto z : model.assignments()[d]) counts[z] += 1.0;
    const double n_d = static_cast<double>(model.assignments()[d].size());
    for (std::size_t t = 0; t < 4; ++t) {
      EXPECT_NEAR(doc_topic_dist(model, d)[t], (counts[t] + alpha) / (n_d + 4 * alpha), 1e-12);
    }
  }
}

TEST(Lda, EmptyDocumentGetsUniformRow) {
  auto docs = biascope::testing::disjoint_corpus(9, 40, 2, 6, 12);
  docs.push_back(doc_of("empty", {"unseen"}));  // frequency 1: pruned from vocab
  const auto model = fit_lda(docs, small_config(4, 20));
  const auto row = doc_topic_dist(model, model.num_documents() - 1);
  for (double v : row) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Lda, RejectsTooManyTopics) {
  const auto docs = biascope::testing::disjoint_corpus(1, 5, 1, 5, 10);
  EXPECT_THROW(fit_lda(docs, small_config(6)), ValidationError);
}

TEST(UMass, HandCases) {
  // D(a) = D(b) = 2, D(a,b) = 1.
  const std::vector<Document> three{doc_of("1", {"a", "b"}), doc_of("2", {"a"}),
                                    doc_of("3", {"b"})};
  const std::vector<std::string> ab{"a", "b"};
  EXPECT_NEAR(umass_coherence(ab, DocumentFrequencyIndex(three)), 0.0, 1e-12);

  // a and b never co-occur; D(a) = D(b) = 4.
  std::vector<Document> apart;
  for (int i = 0; i < 4; ++i) {
    apart.push_back(doc_of("a" + std::to_string(i), {"a"}));
    apart.push_back(doc_of("b" + std::to_string(i), {"b"}));
  }
  EXPECT_NEAR(umass_coherence(ab, DocumentFrequencyIndex(apart)), std::log(1.0 / 4.0), 1e-12);
  EXPECT_NEAR(umass_coherence(ab, DocumentFrequencyIndex(apart)), -1.3863, 1e-4);
}

TEST(UMass, FullCooccurrenceIsPositive) {
  std::vector<Document> docs;
  for (int i = 0; i < 5; ++i) docs.push_back(doc_of(std::to_string(i), {"x", "y", "z"}));
  const std::vector<std::string> xyz{"x", "y", "z"};
  EXPECT_NEAR(umass_coherence(xyz, DocumentFrequencyIndex(docs)), 3 * std::log(6.0 / 5.0), 1e-12);
}

TEST(UMass, NeedsTwoWords) {
  const std::vector<Document> docs{doc_of("1", {"a"})};
  const std::vector<std::string> one{"a"};
  EXPECT_THROW(umass_coherence(one, DocumentFrequencyIndex(docs)), ValidationError);
}

TEST(TopicIo, ExportImportRoundTrip) {
  TempDir dir;
  const auto docs = biascope::testing::disjoint_corpus(3, 30, 3, 6, 12);
  const auto model = fit_lda(docs, small_config(3, 30));
  write_jsonl(dir / "topics.jsonl", export_topics(model));
  const auto back = import_topics(dir / "topics.jsonl", docs);
  ASSERT_EQ(back.vocab(), model.vocab());
  for (std::size_t d = 0; d < model.num_documents(); ++d) {
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_NEAR(back.theta()(d, t), model.theta()(d, t), 1e-9);
    }
  }
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t w = 0; w < model.vocab_size(); ++w) {
      EXPECT_NEAR(back.phi()(t, w), model.phi()(t, w), 1e-9);
    }
  }
}

TEST(TopicIo, HandWrittenFile) {
  const std::vector<Document> docs{doc_of("d1", {"a", "b"}), doc_of("d2", {"b", "c"})};
  const std::vector<Json> records{
      Json::parse(R"({"kind":"meta","K":2,"vocab":["a","b","c"]})"),
      Json::parse(R"({"kind":"phi","topic":0,"weights":[["a",0.5],["b",0.5]]})"),
      Json::parse(R"({"kind":"phi","topic":1,"weights":[["c",1.0]]})"),
      Json::parse(R"({"kind":"theta","doc_id":"d1","dist":[0.25,0.75]})"),
      Json::parse(R"({"kind":"theta","doc_id":"d2","dist":[0.6,0.4]})")};
  const auto model = import_topics(records, docs);
  EXPECT_EQ(doc_topic_dist(model, 0)[0], 0.25);
  EXPECT_EQ(doc_topic_dist(model, 0)[1], 0.75);
  EXPECT_EQ(doc_topic_dist(model, 1)[0], 0.6);
  EXPECT_EQ(doc_topic_dist(model, 1)[1], 0.4);
}

TEST(TopicIo, RejectsNonStochasticRow) {
  const std::vector<Document> docs{doc_of("d1", {"a"})};
  const std::vector<Json> records{
      Json::parse(R"({"kind":"meta","K":1,"vocab":["a"]})"),
      Json::parse(R"({"kind":"phi","topic":0,"weights":[["a",1.0]]})"),
      Json::parse(R"({"kind":"theta","doc_id":"d1","dist":[0.5]})")};
  EXPECT_THROW(import_topics(records, docs), ValidationError);
}

TEST(TopWords, Examples) {
  Matrix phi(1, 4);
  phi(0, 0) = 0.1, phi(0, 1) = 0.4, phi(0, 2) = 0.3, phi(0, 3) = 0.2;
  Matrix theta(1, 1, 1.0);
  FittedTopicModel model({"a", "b", "c", "d"}, phi, theta, {"d1"}, {}, small_config(1));
  const auto all = top_words(model, 0, 4);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].word, "b");
  EXPECT_EQ(all[1].word, "c");
  EXPECT_EQ(all[2].word, "d");
  EXPECT_EQ(all[3].word, "a");
  EXPECT_THROW(top_words(model, 0, 5), ValidationError);
}

TEST(TopWords, MatchesSortOracle) {
  Xoshiro256 rng(17);
  const std::size_t v = 30;
  Matrix phi(2, v);
  std::vector<std::string> vocab;
  for (std::size_t w = 0; w < v; ++w) vocab.push_back("w" + std::to_string(100 + w));
  for (std::size_t t = 0; t < 2; ++t) {
    double sum = 0;
    for (std::size_t w = 0; w < v; ++w) sum += phi(t, w) = rng.uniform() + 1e-3;
    for (std::size_t w = 0; w < v; ++w) phi(t, w) /= sum;
  }
  FittedTopicModel model(vocab, phi, Matrix(1, 2, 0.5), {"d"}, {}, small_config(2));
  for (std::size_t t = 0; t < 2; ++t) {
    std::vector<std::size_t> idx(v);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return phi(t, a) > phi(t, b); });
    const auto got = top_words(model, t, v);
    for (std::size_t i = 0; i < v; ++i) EXPECT_EQ(got[i].word, vocab[idx[i]]);
  }
}

TEST(ExtractKeywords, SocialMediaFixture) {
  const std::vector<std::string> expected{"instagram", "facebook", "social", "twitter",
                                          "tweet",     "snapchat", "tweets", "tweeted",
                                          "hashtag",   "followers"};
  std::vector<std::string> vocab = expected;
  vocab.insert(vocab.end(), {"music", "song", "album"});
  std::sort(vocab.begin(), vocab.end());
  Matrix phi(1, vocab.size());
  double sum = 0;
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    auto it = std::find(expected.begin(), expected.end(), vocab[w]);
    phi(0, w) = it == expected.end() ? 0.001 : 0.2 - 0.01 * static_cast<double>(it - expected.begin());
    sum += phi(0, w);
  }
  for (std::size_t w = 0; w < vocab.size(); ++w) phi(0, w) /= sum;
  FittedTopicModel model(vocab, phi, Matrix(1, 1, 1.0), {"d"}, {}, small_config(1));
  EXPECT_EQ(extract_keywords(model, 0, 10), expected);
  EXPECT_EQ(extract_keywords(model, 0, 1), std::vector<std::string>{"instagram"});
  EXPECT_EQ(extract_keywords(model, 0, 100).size(), vocab.size());
}
