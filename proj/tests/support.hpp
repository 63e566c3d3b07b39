#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "biascope/bias_dimensions.hpp"
#include "biascope/corpus.hpp"
#include "biascope/embed_store.hpp"
#include "biascope/jsonl.hpp"
#include "biascope/random.hpp"
#include "biascope/weat.hpp"

namespace biascope::testing {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    Xoshiro256 rng(splitmix64(reinterpret_cast<std::uintptr_t>(this) ^ ++counter));
    path_ = std::filesystem::temp_directory_path() / ("biascope-test-" + hex64(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_vector(Xoshiro256& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) {
    x = rng.uniform() * 2.0 - 1.0;
  }
  return v;
}

// Table with words "<prefix>0".."<prefix>n-1" for each prefix.
inline EmbeddingTable random_table(std::uint64_t seed, const std::map<std::string, std::size_t>& sets,
                                   std::size_t dim) {
  Xoshiro256 rng(seed);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const auto& [prefix, n] : sets) {
    for (std::size_t i = 0; i < n; ++i) {
      rows.emplace_back(prefix + std::to_string(i), random_vector(rng, dim));
    }
  }
  return EmbeddingTable::from_rows(dim, rows);
}

inline std::vector<std::string> words(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(prefix + std::to_string(i));
  }
  return out;
}

// Naive WEAT: explicit loops, two-pass moments, full partition enumeration.
struct WeatOracle {
  double statistic = 0.0;
  double effect_size = 0.0;
  double p_value = 0.0;
  std::size_t partitions = 0;
};

inline double naive_cos(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

inline double naive_s(const std::string& w, const WeatTest& t, const EmbeddingTable& table) {
  double sa = 0, sb = 0;
  for (const auto& a : t.a) sa += naive_cos(table.at(w), table.at(a));
  for (const auto& b : t.b) sb += naive_cos(table.at(w), table.at(b));
  return sa / static_cast<double>(t.a.size()) - sb / static_cast<double>(t.b.size());
}

inline WeatOracle weat_oracle(const WeatTest& t, const EmbeddingTable& table) {
  std::vector<double> s;
  for (const auto& w : t.x) s.push_back(naive_s(w, t, table));
  for (const auto& w : t.y) s.push_back(naive_s(w, t, table));
  const std::size_t nx = t.x.size();
  auto stat = [&](const std::vector<bool>& in_x) {
    double v = 0;
    for (std::size_t i = 0; i < s.size(); ++i) v += in_x[i] ? s[i] : -s[i];
    return v;
  };
  WeatOracle o;
  std::vector<bool> identity(s.size(), false);
  std::fill(identity.begin(), identity.begin() + static_cast<std::ptrdiff_t>(nx), true);
  o.statistic = stat(identity);

  double mx = 0, my = 0, mean = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    (i < nx ? mx : my) += s[i];
    mean += s[i];
  }
  mx /= static_cast<double>(nx);
  my /= static_cast<double>(s.size() - nx);
  mean /= static_cast<double>(s.size());
  double var = 0;
  for (double v : s) var += (v - mean) * (v - mean);
  o.effect_size = (mx - my) / std::sqrt(var / static_cast<double>(s.size()));

  // prev_permutation over a sorted-descending mask visits every subset once.
  std::vector<bool> mask = identity;
  std::size_t ge = 0;
  do {
    ++o.partitions;
    if (stat(mask) >= o.statistic - 1e-12) ++ge;
  } while (std::prev_permutation(mask.begin(), mask.end()));
  o.p_value = static_cast<double>(ge) / static_cast<double>(o.partitions);
  return o;
}

// Exhaustive double loop over the pairing rule; returns (f, m) ids.
inline std::set<std::pair<std::size_t, std::size_t>> pair_oracle(
    const std::vector<std::size_t>& f_ids, const std::vector<std::size_t>& m_ids,
    const std::map<std::size_t, std::vector<double>>& emb, const std::vector<double>& she,
    const std::vector<double>& he, double thr, PairMode mode) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (auto f : f_ids) {
    for (auto m : m_ids) {
      const double direct =
          std::abs(naive_cos(emb.at(f), she) - naive_cos(emb.at(m), he));
      const double cross = std::abs(naive_cos(emb.at(f), he) - naive_cos(emb.at(m), she));
      const bool d = direct < thr;
      const bool c = cross < thr;
      if (mode == PairMode::kOr ? (d || c) : (d && c)) out.emplace(f, m);
    }
  }
  return out;
}

// Corpus of n_docs documents, each drawn from one of `topics` disjoint
// vocabularies of `vocab_per_topic` words ("t<k>w<i>").
inline std::vector<Document> disjoint_corpus(std::uint64_t seed, std::size_t n_docs,
                                             std::size_t topics, std::size_t vocab_per_topic,
                                             std::size_t doc_len) {
  Xoshiro256 rng(seed);
  std::vector<Document> docs;
  for (std::size_t d = 0; d < n_docs; ++d) {
    const std::size_t k = d % topics;
    Document doc;
    doc.id = "d" + std::to_string(d);
    doc.region = "synthetic";
    for (std::size_t i = 0; i < doc_len; ++i) {
      doc.tokens.push_back("t" + std::to_string(k) + "w" +
                           std::to_string(rng.below(vocab_per_topic)));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline Document doc_of(std::string id, std::vector<std::string> tokens) {
  Document d;
  d.id = std::move(id);
  d.region = "r";
  d.tokens = std::move(tokens);
  return d;
}

}  // namespace biascope::testing
