#include "biascope/embed_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "biascope/error.hpp"
#include "biascope/jsonl.hpp"

namespace biascope {

class EmbeddingTableBuilder {
 public:
  explicit EmbeddingTableBuilder(EmbeddingLoadReport& report) : report_(report) {}

  void set_dim(std::size_t dim) { table_.dim_ = dim; }
  std::size_t dim() const { return table_.dim_; }

  void add(std::string_view raw_word, std::span<const double> values) {
    std::string word = ascii_lower(raw_word);
    if (table_.index_.contains(word)) {
      ++report_.duplicates;
      report_.warnings.push_back("duplicate word '" + word + "' ignored");
      return;
    }
    const double norm = l2_norm(values);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      ++report_.zero_vectors;
      report_.warnings.push_back("zero or non-finite vector for '" + word + "' skipped");
      return;
    }
    table_.index_.emplace(word, table_.words_.size());
    table_.words_.push_back(std::move(word));
    table_.data_.insert(table_.data_.end(), values.begin(), values.end());
    table_.norms_.push_back(norm);
  }

  EmbeddingTable finish() { return std::move(table_); }

 private:
  EmbeddingTable table_;
  EmbeddingLoadReport& report_;
};

EmbeddingTable EmbeddingTable::from_rows(
    std::size_t dim, const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  if (dim == 0) {
    throw ValidationError("embedding dim must be positive");
  }
  EmbeddingLoadReport report;
  EmbeddingTableBuilder builder(report);
  builder.set_dim(dim);
  for (const auto& [word, values] : rows) {
    if (values.size() != dim) {
      throw ValidationError("vector for '" + word + "' has length " +
                            std::to_string(values.size()) + ", expected " +
                            std::to_string(dim));
    }
    builder.add(word, values);
  }
  return builder.finish();
}

std::optional<std::size_t> EmbeddingTable::index_of(std::string_view word) const {
  auto it = index_.find(ascii_lower(word));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

bool EmbeddingTable::contains(std::string_view word) const {
  return index_of(word).has_value();
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view word) const {
  const auto idx = index_of(word);
  if (!idx) {
    return std::nullopt;
  }
  return std::span<const double>(data_.data() + *idx * dim_, dim_);
}

std::span<const double> EmbeddingTable::at(std::string_view word) const {
  auto found = find(word);
  if (!found) {
    throw ValidationError("word not in embedding table: '" + std::string(word) + "'");
  }
  return *found;
}

double EmbeddingTable::norm(std::string_view word) const {
  const auto idx = index_of(word);
  if (!idx) {
    throw ValidationError("word not in embedding table: '" + std::string(word) + "'");
  }
  return norms_[*idx];
}

EmbeddingTable EmbeddingTable::scaled(double factor) const {
  if (!(factor > 0.0)) {
    throw ValidationError("scale factor must be positive");
  }
  EmbeddingTable copy = *this;
  for (auto& v : copy.data_) {
    v *= factor;
  }
  for (std::size_t i = 0; i < copy.norms_.size(); ++i) {
    copy.norms_[i] = l2_norm(std::span<const double>(copy.data_.data() + i * dim_, dim_));
  }
  return copy;
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) {
      ++pos;
    }
    if (pos >= line.size()) {
      break;
    }
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') {
      ++end;
    }
    tokens.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return tokens;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') {
    ++first;
  }
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

LoadedEmbeddings load_embeddings(const std::filesystem::path& path,
                                 std::optional<std::size_t> expected_dim) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open embedding file " + path.string());
  }
  LoadedEmbeddings result;
  EmbeddingTableBuilder builder(result.report);

  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    const auto tokens = split_spaces(line);
    if (tokens.empty()) {
      continue;
    }
    if (line_no == 1 && tokens.size() == 2) {
      long long count = 0;
      if (parse_number(tokens[0], count)) {
        long long dim = 0;
        if (count < 0 || !parse_number(tokens[1], dim) || dim <= 0) {
          throw ValidationError("malformed header in " + path.string() + ": '" + line + "'");
        }
        builder.set_dim(static_cast<std::size_t>(dim));
        continue;
      }
    }
    const std::size_t value_count = tokens.size() - 1;
    if (builder.dim() == 0) {
      if (value_count == 0) {
        ++result.report.unparsable;
        result.report.warnings.push_back("line " + std::to_string(line_no) + ": no values");
        continue;
      }
      builder.set_dim(value_count);
    }
    if (value_count != builder.dim()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(builder.dim()) + " values, found " +
                            std::to_string(value_count));
    }
    values.assign(value_count, 0.0);
    bool ok = true;
    for (std::size_t i = 0; i < value_count; ++i) {
      if (!parse_number(tokens[i + 1], values[i]) || !std::isfinite(values[i])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++result.report.unparsable;
      result.report.warnings.push_back("line " + std::to_string(line_no) +
                                       ": unparsable value, skipped");
      continue;
    }
    builder.add(tokens[0], values);
  }
  if (in.bad()) {
    throw IoError("read failed: " + path.string());
  }
  if (builder.dim() == 0) {
    throw ValidationError("no embedding rows in " + path.string());
  }
  if (expected_dim && *expected_dim != builder.dim()) {
    throw ValidationError("embedding dim " + std::to_string(builder.dim()) +
                          " does not match expected " + std::to_string(*expected_dim));
  }
  result.table = builder.finish();
  return result;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("vector length mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += a[i] * b[i];
  }
  return sum;
}

double l2_norm(std::span<const double> a) {
  double sum = 0.0;
  for (const double v : a) {
    sum += v * v;
  }
  return std::sqrt(sum);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double d = dot(a, b);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw DomainError("cosine of a zero vector is undefined");
  }
  return std::clamp(d / (na * nb), -1.0, 1.0);
}

MeanVector mean_vector(const EmbeddingTable& table, std::span<const std::string> words,
                       OovPolicy policy) {
  if (words.empty()) {
    throw ValidationError("mean_vector needs at least one word");
  }
  MeanVector out;
  out.values.assign(table.dim(), 0.0);
  for (const auto& word : words) {
    auto vec = table.find(word);
    if (!vec) {
      if (policy == OovPolicy::kError) {
        throw ValidationError("out-of-vocabulary word: '" + word + "'");
      }
      out.missing.push_back(word);
      continue;
    }
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += (*vec)[i];
    }
    ++out.found;
  }
  if (out.found == 0) {
    throw ValidationError("every word is out of vocabulary");
  }
  for (auto& v : out.values) {
    v /= static_cast<double>(out.found);
  }
  return out;
}

AxisRanking gender_axis_scores(const EmbeddingTable& table, const GenderAnchors& anchors,
                               std::span<const std::string> vocab, std::size_t top_k) {
  if (top_k == 0) {
    throw ValidationError("top_k must be positive");
  }
  const auto she = table.find(anchors.she_word);
  const auto he = table.find(anchors.he_word);
  if (!she || !he) {
    throw ValidationError("gender anchors '" + anchors.she_word + "'/'" + anchors.he_word +
                          "' must both be in the embedding table");
  }
  std::vector<double> axis(table.dim());
  for (std::size_t i = 0; i < axis.size(); ++i) {
    axis[i] = (*she)[i] - (*he)[i];
  }
  const double axis_norm = l2_norm(axis);
  if (!(axis_norm > 0.0)) {
    throw DomainError("she and he embeddings coincide; the gender axis is undefined");
  }
  for (auto& v : axis) {
    v /= axis_norm;
  }

  AxisRanking ranking;
  std::vector<AxisScore> scores;
  std::unordered_set<std::string> seen;
  for (const auto& raw : vocab) {
    std::string word = ascii_lower(raw);
    if (!seen.insert(word).second) {
      continue;
    }
    auto vec = table.find(word);
    if (!vec) {
      ranking.skipped.push_back(word);
      continue;
    }
    scores.push_back({word, dot(*vec, axis)});
  }

  const std::size_t k = std::min(top_k, scores.size());
  auto she_order = scores;
  std::sort(she_order.begin(), she_order.end(), [](const AxisScore& a, const AxisScore& b) {
    return a.score != b.score ? a.score > b.score : a.word < b.word;
  });
  she_order.resize(k);
  auto he_order = std::move(scores);
  std::sort(he_order.begin(), he_order.end(), [](const AxisScore& a, const AxisScore& b) {
    return a.score != b.score ? a.score < b.score : a.word < b.word;
  });
  he_order.resize(k);
  ranking.she_side = std::move(she_order);
  ranking.he_side = std::move(he_order);
  return ranking;
}

}  // namespace biascope
