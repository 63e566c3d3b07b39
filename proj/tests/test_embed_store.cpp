#include <gtest/gtest.h>

#include "biascope/embed_store.hpp"
#include "biascope/error.hpp"
#include "support.hpp"

using namespace biascope;
using biascope::testing::TempDir;

namespace {

std::filesystem::path write(const TempDir& dir, const std::string& body) {
  auto path = dir / "table.vec";
  write_text(path, body);
  return path;
}

}  // namespace

TEST(EmbedStore, LoadsHeaderedFile) {
  TempDir dir;
  auto loaded = load_embeddings(write(dir, "2 3\ncat 1 0 0\ndog 0 1 0\n"));
  EXPECT_EQ(loaded.table.dim(), 3u);
  EXPECT_EQ(loaded.table.size(), 2u);
  EXPECT_EQ(loaded.report.warning_count(), 0u);
}

TEST(EmbedStore, HeaderlessInfersDim) {
  TempDir dir;
  auto loaded = load_embeddings(write(dir, "cat 1 0\ndog 0 1\n"));
  EXPECT_EQ(loaded.table.dim(), 2u);
}

TEST(EmbedStore, DuplicateKeepsFirst) {
  TempDir dir;
  auto loaded = load_embeddings(write(dir, "cat 1 0\ncat 9 9\n"));
  EXPECT_EQ(loaded.table.size(), 1u);
  EXPECT_EQ(loaded.report.warning_count(), 1u);
  EXPECT_EQ(loaded.table.at("cat")[0], 1.0);
  EXPECT_EQ(loaded.table.at("cat")[1], 0.0);
}

TEST(EmbedStore, ZeroVectorSkipped) {
  TempDir dir;
  auto loaded = load_embeddings(write(dir, "nul 0 0 0\ncat 1 0 0\n"));
  EXPECT_EQ(loaded.table.size(), 1u);
  EXPECT_FALSE(loaded.table.contains("nul"));
}

TEST(EmbedStore, DimMismatchIsError) {
  TempDir dir;
  EXPECT_THROW(load_embeddings(write(dir, "cat 1 0 0\ndog 0 1\n")), ValidationError);
  EXPECT_THROW(load_embeddings(write(dir, "cat 1 0\n"), 3), ValidationError);
}

TEST(EmbedStore, MissingFileIsIoError) {
  EXPECT_THROW(load_embeddings("/nonexistent/table.vec"), IoError);
}

TEST(EmbedStore, LookupIsCaseInsensitive) {
  auto table = EmbeddingTable::from_rows(2, {{"Cat", {1, 0}}});
  EXPECT_TRUE(table.contains("cat"));
  EXPECT_TRUE(table.contains("CAT"));
  EXPECT_FALSE(table.find("dog").has_value());
}

TEST(Cosine, Examples) {
  const std::vector<double> a{1, 2}, b{3, 4}, x{1, 0}, y{0, 1};
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-15);
  EXPECT_EQ(cosine(x, y), 0.0);
  EXPECT_NEAR(cosine(a, b), 11.0 / (std::sqrt(5.0) * 5.0), 1e-15);
  EXPECT_NEAR(cosine(a, b), 0.98386991, 1e-8);
}

TEST(Cosine, ZeroNormThrows) {
  const std::vector<double> z{0, 0}, x{1, 0};
  EXPECT_THROW(cosine(z, x), DomainError);
}

TEST(MeanVector, Examples) {
  auto table = EmbeddingTable::from_rows(2, {{"a", {2, 0}}, {"b", {0, 2}}, {"w", {0.5, -3}}});
  const std::vector<std::string> ab{"a", "b"}, w{"w"}, oov{"a", "zzz"};
  EXPECT_EQ(mean_vector(table, ab).values, (std::vector<double>{1, 1}));
  EXPECT_EQ(mean_vector(table, w).values, (std::vector<double>{0.5, -3}));
  auto skipped = mean_vector(table, oov);
  EXPECT_EQ(skipped.found, 1u);
  EXPECT_EQ(skipped.missing, (std::vector<std::string>{"zzz"}));
  EXPECT_THROW(mean_vector(table, oov, OovPolicy::kError), ValidationError);
}

TEST(MeanVector, MatchesAccumulationOracle) {
  auto table = biascope::testing::random_table(11, {{"v", 10}}, 5);
  const auto ws = biascope::testing::words("v", 10);
  const auto mean = mean_vector(table, ws);
  for (std::size_t k = 0; k < 5; ++k) {
    double sum = 0;
    for (const auto& w : ws) sum += table.at(w)[k];
    EXPECT_NEAR(mean.values[k], sum / 10.0, 1e-14);
  }
}

TEST(GenderAxis, AnchorAppearsFirstOnSheSide) {
  auto table = EmbeddingTable::from_rows(
      2, {{"she", {1, 0}}, {"he", {0, 1}}, {"queenly", {1, 0}}, {"neutral", {1, 1}}});
  const std::vector<std::string> vocab{"neutral", "queenly", "she"};
  auto ranking = gender_axis_scores(table, {}, vocab, 3);
  ASSERT_GE(ranking.she_side.size(), 2u);
  // queenly and she tie exactly; lexicographic order decides.
  EXPECT_EQ(ranking.she_side[0].word, "queenly");
  EXPECT_EQ(ranking.she_side[1].word, "she");
}

TEST(GenderAxis, MidpointScore) {
  const std::vector<double> she{3, 1}, he{1, 2};
  std::vector<double> mid{2, 1.5};
  auto table = EmbeddingTable::from_rows(2, {{"she", she}, {"he", he}, {"mid", mid}});
  const std::vector<std::string> vocab{"mid"};
  auto ranking = gender_axis_scores(table, {}, vocab, 1);
  const double expected = (10.0 - 5.0) / (2.0 * std::sqrt(4.0 + 1.0));
  ASSERT_EQ(ranking.she_side.size(), 1u);
  EXPECT_NEAR(ranking.she_side[0].score, expected, 1e-12);

  auto equal = EmbeddingTable::from_rows(2, {{"she", {1, 0}}, {"he", {0, 1}}, {"mid", {0.5, 0.5}}});
  EXPECT_NEAR(gender_axis_scores(equal, {}, vocab, 1).she_side[0].score, 0.0, 1e-15);
}

TEST(GenderAxis, MatchesFullSortOracle) {
  auto table = biascope::testing::random_table(5, {{"w", 20}, {"she", 1}, {"he", 1}}, 4);
  const auto vocab = biascope::testing::words("w", 20);
  GenderAnchors anchors{"she0", "he0"};
  auto ranking = gender_axis_scores(table, anchors, vocab, 20);
  std::vector<std::pair<double, std::string>> oracle;
  const auto s = table.at("she0");
  const auto h = table.at("he0");
  std::vector<double> diff(4);
  for (int k = 0; k < 4; ++k) diff[k] = s[k] - h[k];
  for (const auto& w : vocab) {
    const auto v = table.at(w);
    double proj = 0;
    for (int k = 0; k < 4; ++k) proj += v[k] * diff[k];
    oracle.emplace_back(proj / l2_norm(diff), w);
  }
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  ASSERT_EQ(ranking.she_side.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(ranking.she_side[i].word, oracle[i].second);
    EXPECT_NEAR(ranking.she_side[i].score, oracle[i].first, 1e-12);
  }
}
