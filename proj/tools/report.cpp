#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "biascope/weat.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;

namespace biascope::cli {

namespace {

std::vector<Json> records_of(const fs::path& path, const std::string& kind) {
  std::vector<Json> out;
  for (auto& rec : read_jsonl(path)) {
    if (rec.value("kind", "") == kind) {
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<fs::path> matching(const fs::path& dir, const std::string& prefix) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.starts_with(prefix) && name.ends_with(".jsonl")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string topic_name(const Json& pair, const char* side) {
  const auto label = pair.value(std::string(side) + "_label", "");
  return label.empty() ? "topic " + std::to_string(pair.value(std::string(side) + "_topic", 0))
                       : label;
}

// Top topics per gender by coherence, from alignment + topic summaries.
void report_topics(const fs::path& dir, std::ostringstream& os) {
  for (const auto& path : matching(dir, "alignment_")) {
    const auto slug = path.filename().string().substr(10);
    const auto summary_path = dir / ("topic_summary_" + slug);
    if (!fs::exists(summary_path)) {
      continue;
    }
    std::map<std::size_t, Json> summaries;
    for (auto& s : records_of(summary_path, "topic")) {
      summaries[s.at("topic").get<std::size_t>()] = s;
    }
    std::map<std::string, std::vector<Json>> by_gender;
    std::string region;
    for (const auto& a : records_of(path, "alignment")) {
      region = a.value("region", "");
      auto it = summaries.find(a.at("topic").get<std::size_t>());
      if (it != summaries.end()) {
        by_gender[a.at("gender").get<std::string>()].push_back(it->second);
      }
    }
    os << "Topics by coherence: " << region << "\n";
    for (const char* g : {"F", "M"}) {
      auto& list = by_gender[g];
      std::stable_sort(list.begin(), list.end(), [](const Json& a, const Json& b) {
        return a.at("coherence").get<double>() > b.at("coherence").get<double>();
      });
      for (std::size_t i = 0; i < list.size() && i < 5; ++i) {
        const auto& s = list[i];
        std::string words;
        for (const auto& w : s.at("top_words")) {
          words += (words.empty() ? "" : " ") + w.get<std::string>();
        }
        const auto label = s.at("label").is_string() ? s.at("label").get<std::string>()
                                                      : "topic " + std::to_string(s.at("topic").get<std::size_t>());
        os << "  " << g << "  " << label << "  u_mass=" << fmt("%.3f", s.at("coherence").get<double>())
           << "  [" << words << "]\n";
      }
    }
    os << "\n";
  }
}

void report_pairs(const fs::path& dir, std::ostringstream& os) {
  bool any = false;
  for (const auto& path : matching(dir, "pairs_")) {
    for (const auto& p : records_of(path, "pair")) {
      if (!any) {
        os << "Topic pairs (F topic - M topic)\n";
        any = true;
      }
      os << "  " << p.value("region", "") << ": " << topic_name(p, "f") << " - "
         << topic_name(p, "m") << "  (" << p.value("matched", "")
         << ", score=" << fmt("%.3f", p.value("rank_score", 0.0)) << ")\n";
    }
  }
  if (any) {
    os << "\n";
  }
}

void report_weat(const fs::path& dir, std::ostringstream& os) {
  const auto path = dir / "weat.jsonl";
  if (!fs::exists(path)) {
    return;
  }
  os << "WEAT\n";
  for (const auto& r : records_of(path, "weat")) {
    os << "  " << r.value("name", "") << "  d=" << fmt("%+.2f", r.value("effect_size", 0.0))
       << "  p=" << fmt("%.3g", r.value("p_value", 1.0)) << "\n";
  }
  os << "\n";
}

void report_region_eval(const fs::path& dir, std::ostringstream& os) {
  const auto path = dir / "region_eval.txt";
  if (fs::exists(path)) {
    os << "Region evaluation\n";
    for (const auto& line : read_lines(path)) {
      os << "  " << line << "\n";
    }
    os << "\n";
  }
}

void report_persona(const fs::path& dir, std::ostringstream& os) {
  const auto path = dir / "persona_eval.jsonl";
  if (!fs::exists(path)) {
    return;
  }
  os << "Persona gender mismatch\n";
  for (const auto& r : records_of(path, "mismatch")) {
    const auto& pct = r.at("mismatch_pct");
    os << "  " << r.value("region", "") << "  " << r.value("model", "") << "  "
       << (pct.is_number() ? fmt("%.1f%%", pct.get<double>()) : std::string("n/a")) << "\n";
  }
  os << "\n";
}

}  // namespace

int run_report(const RunConfig& config) {
  const fs::path dir = config.results_dir;
  if (!fs::is_directory(dir) || fs::is_empty(dir)) {
    std::cout << "no artifacts in " << dir.string() << "\n";
    return 0;
  }
  std::ostringstream os;
  report_topics(dir, os);
  report_pairs(dir, os);
  report_weat(dir, os);
  report_region_eval(dir, os);
  report_persona(dir, os);
  const auto text = os.str();
  if (text.empty()) {
    std::cout << "no artifacts in " << dir.string() << "\n";
    return 0;
  }
  std::cout << text;
  write_text(dir / "report.txt", text);
  return 0;
}

}  // namespace biascope::cli
