#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "biascope/gender.hpp"

namespace biascope {

struct Document {
  std::string id;
  std::string region;
  std::string text;
  std::vector<std::string> tokens;
  Gender gender = Gender::kUnassigned;
};

struct IngestResult {
  std::vector<Document> documents;
  std::size_t skipped = 0;
};

// Reads corpus JSONL ({"id","region","text"} per line; extra fields ignored).
// Malformed lines are counted and skipped; zero valid lines is an error.
IngestResult ingest(const std::filesystem::path& path);

// Lowercases, strips URLs, splits on whitespace and trims leading/trailing
// punctuation from each token. Returns nullopt when fewer than min_tokens remain.
std::optional<Document> preprocess(Document doc, std::size_t min_tokens = 0);

std::vector<std::string> tokenize(std::string_view text);

// A phrase is one or two lowercase tokens.
using Phrase = std::vector<std::string>;

class GenderLexicon {
 public:
  struct Pair {
    Phrase male;
    Phrase female;
  };

  GenderLexicon() = default;
  // Validates phrase length (1-2 tokens) and that no phrase sits on both sides.
  explicit GenderLexicon(std::vector<Pair> pairs);

  const std::vector<Pair>& pairs() const noexcept { return pairs_; }
  bool empty() const noexcept { return pairs_.empty(); }

  // Occurrences of distinct lexicon phrases in a token sequence. Bigram
  // phrases match two adjacent tokens; matching is exact token equality.
  std::size_t count_male(const std::vector<std::string>& tokens) const;
  std::size_t count_female(const std::vector<std::string>& tokens) const;

 private:
  static std::size_t count(const std::vector<Phrase>& phrases,
                           const std::vector<std::string>& tokens);

  std::vector<Pair> pairs_;
  std::vector<Phrase> male_;
  std::vector<Phrase> female_;
};

// CSV with header "male,female".
GenderLexicon load_lexicon(const std::filesystem::path& path);
GenderLexicon parse_lexicon_csv(std::string_view text);

// The bundled 52-pair list.
const GenderLexicon& default_lexicon();

enum class TiePolicy { kExclude, kDuplicate };

struct GenderedCorpus {
  std::string region;
  std::vector<Document> f_docs;
  std::vector<Document> m_docs;
  std::size_t excluded_count = 0;
  std::size_t unassigned_count = 0;

  // f_docs followed by m_docs: the document order topic models are fit on.
  std::vector<Document> documents() const;
};

// Majority vote of female vs male phrase counts per document.
GenderedCorpus gender_split(const std::vector<Document>& docs, const GenderLexicon& lexicon,
                            TiePolicy tie_policy = TiePolicy::kExclude);

// Label a single document would receive (kUnassigned for none or tie).
Gender classify(const Document& doc, const GenderLexicon& lexicon);

}  // namespace biascope
