#include "biascope/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "biascope/error.hpp"
#include "biascope/jsonl.hpp"
#include "bundled_data.hpp"

namespace biascope {

IngestResult ingest(const std::filesystem::path& path) {
  IngestResult result;
  std::size_t bad_lines = 0;
  const auto records = read_jsonl(path, [&](std::size_t, std::string_view) { ++bad_lines; });
  result.skipped = bad_lines;
  for (const auto& rec : records) {
    if (!rec.is_object()) {
      ++result.skipped;
      continue;
    }
    const auto id = rec.find("id");
    const auto region = rec.find("region");
    const auto text = rec.find("text");
    if (id == rec.end() || region == rec.end() || text == rec.end() || !id->is_string() ||
        !region->is_string() || !text->is_string()) {
      ++result.skipped;
      continue;
    }
    Document doc;
    doc.id = id->get<std::string>();
    doc.region = region->get<std::string>();
    doc.text = text->get<std::string>();
    result.documents.push_back(std::move(doc));
  }
  if (result.documents.empty()) {
    throw ValidationError("zero valid lines in " + path.string());
  }
  return result;
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_scheme_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '+' || c == '-' || c == '.';
}

// Offset where a URL begins inside a whitespace-free run, or npos.
std::size_t url_start(std::string_view run) {
  std::size_t best = std::string_view::npos;
  if (const auto sep = run.find("://"); sep != std::string_view::npos && sep > 0) {
    std::size_t start = sep;
    while (start > 0 && is_scheme_char(run[start - 1])) {
      --start;
    }
    if (start < sep && std::isalpha(static_cast<unsigned char>(run[start])) != 0) {
      best = start;
    }
  }
  for (std::size_t pos = run.find("www."); pos != std::string_view::npos;
       pos = run.find("www.", pos + 1)) {
    if (pos == 0 || std::isalnum(static_cast<unsigned char>(run[pos - 1])) == 0) {
      best = std::min(best, pos);
      break;
    }
  }
  return best;
}

// Punctuation stripped from token edges: ASCII punctuation plus common
// UTF-8 quotes, dashes and ellipsis.
constexpr std::array<std::string_view, 9> kUnicodePunct = {
    "“", "”", "‘", "’", "…", "–", "—", "«", "»"};

bool strip_front(std::string_view& tok) {
  if (tok.empty()) {
    return false;
  }
  if (std::ispunct(static_cast<unsigned char>(tok.front())) != 0) {
    tok.remove_prefix(1);
    return true;
  }
  for (const auto p : kUnicodePunct) {
    if (tok.starts_with(p)) {
      tok.remove_prefix(p.size());
      return true;
    }
  }
  return false;
}

bool strip_back(std::string_view& tok) {
  if (tok.empty()) {
    return false;
  }
  if (std::ispunct(static_cast<unsigned char>(tok.back())) != 0) {
    tok.remove_suffix(1);
    return true;
  }
  for (const auto p : kUnicodePunct) {
    if (tok.ends_with(p)) {
      tok.remove_suffix(p.size());
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  const std::string lower = ascii_lower(text);
  std::string_view rest(lower);
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < rest.size()) {
    while (pos < rest.size() && is_space(rest[pos])) {
      ++pos;
    }
    std::size_t end = pos;
    while (end < rest.size() && !is_space(rest[end])) {
      ++end;
    }
    if (end == pos) {
      break;
    }
    std::string_view run = rest.substr(pos, end - pos);
    pos = end;
    if (const auto cut = url_start(run); cut != std::string_view::npos) {
      run = run.substr(0, cut);
    }
    while (strip_front(run)) {
    }
    while (strip_back(run)) {
    }
    if (!run.empty()) {
      tokens.emplace_back(run);
    }
  }
  return tokens;
}

std::optional<Document> preprocess(Document doc, std::size_t min_tokens) {
  doc.tokens = tokenize(doc.text);
  if (doc.tokens.size() < min_tokens) {
    return std::nullopt;
  }
  return doc;
}

GenderLexicon::GenderLexicon(std::vector<Pair> pairs) : pairs_(std::move(pairs)) {
  std::set<Phrase> male;
  std::set<Phrase> female;
  for (const auto& pair : pairs_) {
    for (const auto* phrase : {&pair.male, &pair.female}) {
      if (phrase->empty() || phrase->size() > 2) {
        throw ValidationError("lexicon phrases must have one or two tokens");
      }
    }
    male.insert(pair.male);
    female.insert(pair.female);
  }
  for (const auto& phrase : male) {
    if (female.contains(phrase)) {
      std::string joined = phrase.front();
      if (phrase.size() == 2) {
        joined += " " + phrase.back();
      }
      throw ValidationError("lexicon phrase '" + joined + "' appears on both sides");
    }
  }
  male_.assign(male.begin(), male.end());
  female_.assign(female.begin(), female.end());
}

std::size_t GenderLexicon::count(const std::vector<Phrase>& phrases,
                                 const std::vector<std::string>& tokens) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& phrase : phrases) {
      if (phrase[0] != tokens[i]) {
        continue;
      }
      if (phrase.size() == 1 || (i + 1 < tokens.size() && phrase[1] == tokens[i + 1])) {
        ++hits;
      }
    }
  }
  return hits;
}

std::size_t GenderLexicon::count_male(const std::vector<std::string>& tokens) const {
  return count(male_, tokens);
}

std::size_t GenderLexicon::count_female(const std::vector<std::string>& tokens) const {
  return count(female_, tokens);
}

GenderLexicon parse_lexicon_csv(std::string_view text) {
  std::vector<GenderLexicon::Pair> pairs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      continue;
    }
    ++line_no;
    if (line_no == 1) {
      if (ascii_lower(line) != "male,female") {
        throw ValidationError("lexicon CSV must start with the header 'male,female'");
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      throw ValidationError("lexicon line " + std::to_string(line_no) +
                            " must have exactly two fields");
    }
    pairs.push_back({tokenize(line.substr(0, comma)), tokenize(line.substr(comma + 1))});
  }
  if (pairs.empty()) {
    throw ValidationError("lexicon CSV has no pairs");
  }
  return GenderLexicon(std::move(pairs));
}

GenderLexicon load_lexicon(const std::filesystem::path& path) {
  std::string text;
  for (const auto& line : read_lines(path)) {
    text += line;
    text += '\n';
  }
  return parse_lexicon_csv(text);
}

const GenderLexicon& default_lexicon() {
  static const GenderLexicon lexicon = parse_lexicon_csv(bundled::kGenderPairsCsv);
  return lexicon;
}

std::vector<Document> GenderedCorpus::documents() const {
  std::vector<Document> all;
  all.reserve(f_docs.size() + m_docs.size());
  all.insert(all.end(), f_docs.begin(), f_docs.end());
  all.insert(all.end(), m_docs.begin(), m_docs.end());
  return all;
}

Gender classify(const Document& doc, const GenderLexicon& lexicon) {
  const auto c_f = lexicon.count_female(doc.tokens);
  const auto c_m = lexicon.count_male(doc.tokens);
  if (c_f > c_m) {
    return Gender::kFemale;
  }
  if (c_m > c_f) {
    return Gender::kMale;
  }
  return Gender::kUnassigned;
}

GenderedCorpus gender_split(const std::vector<Document>& docs, const GenderLexicon& lexicon,
                            TiePolicy tie_policy) {
  if (lexicon.empty()) {
    throw ValidationError("gender lexicon is empty");
  }
  GenderedCorpus corpus;
  if (!docs.empty()) {
    corpus.region = docs.front().region;
  }
  for (const auto& doc : docs) {
    if (doc.region != corpus.region) {
      throw ValidationError("gender_split expects one region, found '" + corpus.region +
                            "' and '" + doc.region + "'");
    }
    const auto c_f = lexicon.count_female(doc.tokens);
    const auto c_m = lexicon.count_male(doc.tokens);
    if (c_f > c_m) {
      auto& copy = corpus.f_docs.emplace_back(doc);
      copy.gender = Gender::kFemale;
    } else if (c_m > c_f) {
      auto& copy = corpus.m_docs.emplace_back(doc);
      copy.gender = Gender::kMale;
    } else if (c_f == 0) {
      ++corpus.unassigned_count;
    } else if (tie_policy == TiePolicy::kExclude) {
      ++corpus.excluded_count;
    } else {
      corpus.f_docs.emplace_back(doc).gender = Gender::kFemale;
      corpus.m_docs.emplace_back(doc).gender = Gender::kMale;
    }
  }
  return corpus;
}

}  // namespace biascope
