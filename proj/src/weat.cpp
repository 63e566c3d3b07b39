#include "biascope/weat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "biascope/error.hpp"
#include "biascope/random.hpp"

namespace biascope {

namespace {

double mean_cosine(std::span<const double> w, std::span<const std::string> words,
                   const EmbeddingTable& table, std::size_t& found) {
  double sum = 0.0;
  found = 0;
  for (const auto& word : words) {
    if (auto v = table.find(word)) {
      sum += cosine(w, *v);
      ++found;
    }
  }
  return found > 0 ? sum / static_cast<double>(found) : 0.0;
}

std::set<std::string> lowered_set(const std::vector<std::string>& words) {
  std::set<std::string> out;
  for (const auto& w : words) {
    out.insert(ascii_lower(w));
  }
  return out;
}

bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const std::string& w) { return b.contains(w); });
}

// Sum of a sample with the values sorted first, so the result does not
// depend on input order.
double ordered_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0);
}

}  // namespace

double association(std::string_view w, std::span<const std::string> a,
                   std::span<const std::string> b, const EmbeddingTable& table) {
  const auto vec = table.find(w);
  if (!vec) {
    throw ValidationError("target word '" + std::string(w) + "' is not in the embedding table");
  }
  std::size_t found_a = 0;
  std::size_t found_b = 0;
  const double mean_a = mean_cosine(*vec, a, table, found_a);
  const double mean_b = mean_cosine(*vec, b, table, found_b);
  if (found_a == 0 || found_b == 0) {
    throw ValidationError("an attribute set has no words in the embedding table");
  }
  return mean_a - mean_b;
}

PreparedWeat::PreparedWeat(const WeatTest& test, const EmbeddingTable& table,
                           std::size_t min_targets) {
  if (intersects(lowered_set(test.x), lowered_set(test.y))) {
    throw ValidationError("WEAT test '" + test.name + "': target sets overlap");
  }
  if (intersects(lowered_set(test.a), lowered_set(test.b))) {
    throw ValidationError("WEAT test '" + test.name + "': attribute sets overlap");
  }
  auto keep = [&](const std::vector<std::string>& words) {
    std::vector<std::string> kept;
    for (const auto& w : words) {
      if (table.contains(w)) {
        kept.push_back(w);
      } else {
        dropped_.push_back(w);
      }
    }
    return kept;
  };
  const auto x = keep(test.x);
  const auto y = keep(test.y);
  const auto a = keep(test.a);
  const auto b = keep(test.b);
  if (x.size() < min_targets || y.size() < min_targets) {
    throw ValidationError("WEAT test '" + test.name + "': fewer than " +
                          std::to_string(min_targets) + " target words survive OOV filtering");
  }
  if (a.empty() || b.empty()) {
    throw ValidationError("WEAT test '" + test.name + "': an attribute set is entirely OOV");
  }
  for (const auto& w : x) {
    sx_.push_back(association(w, a, b, table));
  }
  for (const auto& w : y) {
    sy_.push_back(association(w, a, b, table));
  }
}

double PreparedWeat::statistic() const {
  return std::accumulate(sx_.begin(), sx_.end(), 0.0) -
         std::accumulate(sy_.begin(), sy_.end(), 0.0);
}

double PreparedWeat::effect_size() const {
  const double mean_x = std::accumulate(sx_.begin(), sx_.end(), 0.0) / static_cast<double>(sx_.size());
  const double mean_y = std::accumulate(sy_.begin(), sy_.end(), 0.0) / static_cast<double>(sy_.size());
  std::vector<double> all(sx_);
  all.insert(all.end(), sy_.begin(), sy_.end());
  const double n = static_cast<double>(all.size());
  const double mean = ordered_sum(all) / n;
  std::vector<double> squares;
  squares.reserve(all.size());
  for (const double s : all) {
    squares.push_back((s - mean) * (s - mean));
  }
  const double variance = ordered_sum(std::move(squares)) / n;
  const double stddev = std::sqrt(variance);
  // Spread this small relative to the associations themselves is rounding noise.
  const double scale = std::max(std::abs(mean_x), std::abs(mean_y));
  if (!(stddev > 1e-12 * scale) || stddev == 0.0) {
    throw DomainError("effect size undefined: associations have zero variance");
  }
  return (mean_x - mean_y) / stddev;
}

double weat_statistic(const WeatTest& test, const EmbeddingTable& table, std::size_t min_targets) {
  return PreparedWeat(test, table, min_targets).statistic();
}

double effect_size(const WeatTest& test, const EmbeddingTable& table, std::size_t min_targets) {
  return PreparedWeat(test, table, min_targets).effect_size();
}

double binomial(std::size_t n, std::size_t k) {
  if (k > n) {
    return 0.0;
  }
  k = std::min(k, n - k);
  double result = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(result);
}

PermutationResult permutation_p(const PreparedWeat& prepared, const WeatOptions& options) {
  const auto sx = prepared.x_associations();
  const auto sy = prepared.y_associations();
  if (sx.size() != sy.size()) {
    throw ValidationError("permutation test needs |X| == |Y| after OOV filtering (" +
                          std::to_string(sx.size()) + " vs " + std::to_string(sy.size()) + ")");
  }
  if (options.n_samples == 0) {
    throw ValidationError("n_samples must be positive");
  }
  std::vector<double> pool(sx.begin(), sx.end());
  pool.insert(pool.end(), sy.begin(), sy.end());
  const std::size_t n = pool.size();
  const std::size_t k = sx.size();
  const double total = std::accumulate(pool.begin(), pool.end(), 0.0);
  double magnitude = 0.0;
  for (const double s : pool) {
    magnitude += std::abs(s);
  }
  // Every partition statistic is computed as 2 * sum(X') - sum(X u Y); the
  // observed one goes through the same route so the identity split always counts.
  auto split_stat = [&](double subset_sum) { return 2.0 * subset_sum - total; };
  const double observed = split_stat(std::accumulate(sx.begin(), sx.end(), 0.0));
  const double tolerance = 1e-12 * (1.0 + magnitude);

  PermutationResult result;
  const double count = binomial(n, k);
  if (count <= static_cast<double>(options.exact_limit)) {
    result.exact = true;
    result.n_permutations = static_cast<std::uint64_t>(count);
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::uint64_t hits = 0;
    while (true) {
      double sum = 0.0;
      for (const auto i : idx) {
        sum += pool[i];
      }
      if (split_stat(sum) >= observed - tolerance) {
        ++hits;
      }
      // Next k-combination in lexicographic order.
      std::size_t pos = k;
      while (pos > 0 && idx[pos - 1] == n - k + pos - 1) {
        --pos;
      }
      if (pos == 0) {
        break;
      }
      ++idx[pos - 1];
      for (std::size_t j = pos; j < k; ++j) {
        idx[j] = idx[j - 1] + 1;
      }
    }
    result.p_value = static_cast<double>(hits) / count;
    return result;
  }

  result.exact = false;
  result.n_permutations = options.n_samples;
  unsigned workers = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  workers = std::max(1U, std::min<unsigned>(workers, 64));
  std::atomic<std::uint64_t> hits{0};
  auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<double> scratch(pool);
    std::uint64_t local = 0;
    for (std::uint64_t draw = begin; draw < end; ++draw) {
      auto rng = substream(options.seed, draw);
      std::copy(pool.begin(), pool.end(), scratch.begin());
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(scratch[i], scratch[j]);
        sum += scratch[i];
      }
      if (split_stat(sum) >= observed - tolerance) {
        ++local;
      }
    }
    hits += local;
  };
  const std::uint64_t per = (options.n_samples + workers - 1) / workers;
  std::vector<std::jthread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t begin = w * per;
    const std::uint64_t end = std::min<std::uint64_t>(options.n_samples, begin + per);
    if (begin >= end) {
      break;
    }
    threads.emplace_back(run_range, begin, end);
  }
  threads.clear();
  result.p_value = static_cast<double>(hits.load()) / static_cast<double>(options.n_samples);
  return result;
}

PermutationResult permutation_p(const WeatTest& test, const EmbeddingTable& table,
                                const WeatOptions& options) {
  return permutation_p(PreparedWeat(test, table, options.min_targets), options);
}

WeatResult run_weat(const WeatTest& test, const EmbeddingTable& table,
                    const WeatOptions& options) {
  const PreparedWeat prepared(test, table, options.min_targets);
  WeatResult result;
  result.statistic = prepared.statistic();
  result.effect_size = prepared.effect_size();
  const auto perm = permutation_p(prepared, options);
  result.p_value = perm.p_value;
  result.n_permutations = perm.n_permutations;
  result.exact = perm.exact;
  result.dropped_oov = prepared.dropped_oov();
  return result;
}

std::vector<std::string> extract_keywords(const FittedTopicModel& model, std::size_t topic_id,
                                          std::size_t k) {
  std::vector<std::string> words;
  for (auto& ww : top_words(model, topic_id, std::min(k, model.vocab_size()))) {
    words.push_back(std::move(ww.word));
  }
  return words;
}

std::vector<RegionEvalResult> run_region_eval(const RegionEvalSpec& spec,
                                              const EmbeddingTable& table,
                                              const WeatOptions& options) {
  std::vector<RegionEvalResult> results;
  for (const auto& row : spec.rows) {
    RegionEvalResult r;
    r.region = spec.region;
    r.pair = row.pair;
    try {
      if (row.female_terms.empty() || row.male_terms.empty() || row.topic_f.empty() ||
          row.topic_m.empty()) {
        throw ValidationError("empty word list");
      }
      if (lowered_set(row.topic_f) == lowered_set(row.topic_m)) {
        // Identical attribute sets give every term an association of exactly zero.
        r.identical_attributes = true;
        r.effect_size = 0.0;
      } else {
        const WeatTest test{row.pair, row.female_terms, row.male_terms, row.topic_f, row.topic_m};
        const PreparedWeat prepared(test, table, options.min_targets);
        r.dropped_oov = prepared.dropped_oov();
        r.effect_size = prepared.effect_size();
        const auto perm = permutation_p(prepared, options);
        r.p_value = perm.p_value;
        r.n_permutations = perm.n_permutations;
        r.exact = perm.exact;
      }
    } catch (const Error& e) {
      r.effect_size.reset();
      r.p_value.reset();
      r.error = e.what();
    }
    results.push_back(std::move(r));
  }
  RegionEvalResult* best = nullptr;
  for (auto& r : results) {
    if (r.effect_size && (best == nullptr || *r.effect_size > *best->effect_size)) {
      best = &r;
    }
  }
  if (best != nullptr) {
    best->highest = true;
  }
  return results;
}

WeatTest parse_weat_test(const Json& record) {
  try {
    WeatTest test;
    test.name = record.value("name", "");
    test.x = record.at("x").get<std::vector<std::string>>();
    test.y = record.at("y").get<std::vector<std::string>>();
    test.a = record.at("a").get<std::vector<std::string>>();
    test.b = record.at("b").get<std::vector<std::string>>();
    return test;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed WEAT spec record: ") + e.what());
  }
}

std::vector<WeatTest> load_weat_tests(const std::filesystem::path& path) {
  std::vector<WeatTest> tests;
  for (const auto& rec : read_jsonl(path, [&](std::size_t line, std::string_view) {
         throw ValidationError(path.string() + ":" + std::to_string(line) + ": invalid JSON");
       })) {
    tests.push_back(parse_weat_test(rec));
  }
  return tests;
}

std::vector<RegionEvalSpec> parse_region_eval(const std::vector<Json>& records) {
  std::vector<RegionEvalSpec> specs;
  for (const auto& rec : records) {
    if (rec.value("kind", "") == "header") {
      continue;
    }
    RegionEvalRow row;
    std::string region;
    try {
      region = rec.at("region").get<std::string>();
      row.pair = rec.at("pair").get<std::string>();
      auto lower_list = [&](const char* key) {
        std::vector<std::string> words;
        for (const auto& w : rec.at(key)) {
          words.push_back(ascii_lower(w.get<std::string>()));
        }
        return words;
      };
      row.topic_f = lower_list("topic_f");
      row.topic_m = lower_list("topic_m");
      row.female_terms = lower_list("female_terms");
      row.male_terms = lower_list("male_terms");
    } catch (const Json::exception& e) {
      throw ValidationError(std::string("malformed region-eval record: ") + e.what());
    }
    auto it = std::find_if(specs.begin(), specs.end(),
                           [&](const RegionEvalSpec& s) { return s.region == region; });
    if (it == specs.end()) {
      specs.push_back({region, {}});
      it = specs.end() - 1;
    }
    it->rows.push_back(std::move(row));
  }
  return specs;
}

std::vector<RegionEvalSpec> load_region_eval(const std::filesystem::path& path) {
  return parse_region_eval(read_jsonl(path, [&](std::size_t line, std::string_view) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": invalid JSON");
  }));
}

Json weat_record(const std::string& name, const WeatResult& result) {
  return {{"name", name},
          {"statistic", result.statistic},
          {"effect_size", result.effect_size},
          {"p_value", result.p_value},
          {"n_permutations", result.n_permutations},
          {"exact", result.exact},
          {"dropped_oov", result.dropped_oov}};
}

Json region_eval_record(const RegionEvalResult& r) {
  Json rec = {{"region", r.region},
              {"pair", r.pair},
              {"effect_size", nullptr},
              {"p_value", nullptr},
              {"n_permutations", r.n_permutations},
              {"exact", r.exact},
              {"highest", r.highest},
              {"identical_attributes", r.identical_attributes},
              {"dropped_oov", r.dropped_oov}};
  if (r.effect_size) {
    rec["effect_size"] = *r.effect_size;
  }
  if (r.p_value) {
    rec["p_value"] = *r.p_value;
  }
  if (!r.error.empty()) {
    rec["error"] = r.error;
  }
  return rec;
}

std::string render_region_table(const std::vector<RegionEvalResult>& results) {
  std::size_t region_w = 6;
  std::size_t pair_w = 14;
  for (const auto& r : results) {
    region_w = std::max(region_w, r.region.size());
    pair_w = std::max(pair_w, r.pair.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  std::ostringstream out;
  out << pad("Region", region_w) << " | " << pad("F-M topic pair", pair_w)
      << " | WEAT d  | p-value\n";
  out << std::string(region_w, '-') << "-+-" << std::string(pair_w, '-') << "-+---------+---------\n";
  std::string last_region;
  for (const auto& r : results) {
    const std::string region = r.region == last_region ? "" : r.region;
    last_region = r.region;
    char d_buf[32] = "n/a";
    char p_buf[32] = "n/a";
    if (r.effect_size) {
      std::snprintf(d_buf, sizeof d_buf, "%7.3f%s", *r.effect_size, r.highest ? "*" : " ");
    }
    if (r.p_value) {
      std::snprintf(p_buf, sizeof p_buf, "%.4g", *r.p_value);
    }
    out << pad(region, region_w) << " | " << pad(r.pair, pair_w) << " | " << pad(d_buf, 7)
        << " | " << p_buf;
    if (r.identical_attributes) {
      out << "  (identical attribute lists)";
    }
    if (!r.error.empty()) {
      out << "  error: " << r.error;
    }
    out << '\n';
  }
  out << "* highest effect size in region. Scores are WEAT effect sizes (d).\n";
  return out.str();
}

}  // namespace biascope
