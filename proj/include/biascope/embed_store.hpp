#pragma once

// Static word-embedding tables and the vector arithmetic built on them.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace biascope {

// Immutable word -> vector map. Words are lowercased on insert and lookup.
// Every stored vector has length dim() and a strictly positive norm.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  // Builds a table from in-memory rows using the same policy as the file
  // loader: duplicates keep the first row, zero vectors are skipped.
  // Rows whose length differs from dim throw ValidationError.
  static EmbeddingTable from_rows(
      std::size_t dim, const std::vector<std::pair<std::string, std::vector<double>>>& rows);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

  bool contains(std::string_view word) const;
  // Throws ValidationError for unknown words.
  std::span<const double> at(std::string_view word) const;
  // nullopt when absent.
  std::optional<std::span<const double>> find(std::string_view word) const;
  double norm(std::string_view word) const;

  // Words in load order.
  const std::vector<std::string>& words() const noexcept { return words_; }

  // Returns a copy with every vector multiplied by factor (> 0).
  EmbeddingTable scaled(double factor) const;

 private:
  friend class EmbeddingTableBuilder;

  std::optional<std::size_t> index_of(std::string_view word) const;

  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingLoadReport {
  std::size_t duplicates = 0;
  std::size_t zero_vectors = 0;
  std::size_t unparsable = 0;
  std::vector<std::string> warnings;

  std::size_t warning_count() const noexcept { return warnings.size(); }
};

struct LoadedEmbeddings {
  EmbeddingTable table;
  EmbeddingLoadReport report;
};

// Reads the text ".vec" format: an optional "<count> <dim>" header, then
// "<word> <v1> ... <vdim>" per line. Throws IoError, or ValidationError on a
// malformed header, a row whose value count differs from dim, or an
// expected_dim mismatch.
LoadedEmbeddings load_embeddings(const std::filesystem::path& path,
                                 std::optional<std::size_t> expected_dim = std::nullopt);

// dot(a, b) / (|a| |b|), clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

enum class OovPolicy { kSkip, kError };

struct MeanVector {
  std::vector<double> values;
  std::size_t found = 0;
  std::vector<std::string> missing;
};

// Elementwise mean of the embeddings of the given words, summed in input order.
MeanVector mean_vector(const EmbeddingTable& table, std::span<const std::string> words,
                       OovPolicy policy = OovPolicy::kSkip);

struct GenderAnchors {
  std::string she_word = "she";
  std::string he_word = "he";
};

struct AxisScore {
  std::string word;
  double score = 0.0;
};

struct AxisRanking {
  std::vector<AxisScore> she_side;  // descending score
  std::vector<AxisScore> he_side;   // ascending score
  std::vector<std::string> skipped;
};

// Projects each vocab word on the unit she-he direction and returns the
// top_k words on each side. Ties break lexicographically.
AxisRanking gender_axis_scores(const EmbeddingTable& table, const GenderAnchors& anchors,
                               std::span<const std::string> vocab, std::size_t top_k);

}  // namespace biascope
