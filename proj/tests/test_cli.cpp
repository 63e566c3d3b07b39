#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "biascope/bias_dimensions.hpp"
#include "biascope/corpus.hpp"
#include "biascope/topic_model.hpp"
#include "support.hpp"

using namespace biascope;
using biascope::testing::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args, const TempDir& dir) {
  const auto out = dir / "cli_output.txt";
  const std::string cmd = std::string(BIASCOPE_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kFemaleWords{"song", "album", "music", "singer", "dance", "choir"};
const std::vector<std::string> kMaleWords{"goal", "league", "match", "coach", "team", "score"};
const std::vector<std::string> kShared{"the", "today", "city", "news", "people", "week"};

// Region corpus with a music/sports split along she/he documents.
void write_pipeline_inputs(const TempDir& dir) {
  Xoshiro256 rng(2024);
  std::vector<Json> lines;
  for (int d = 0; d < 80; ++d) {
    const bool female = d % 2 == 0;
    const auto& topical = female ? kFemaleWords : kMaleWords;
    std::string text = female ? "She said her" : "He said his";
    for (int i = 0; i < 25; ++i) {
      const auto& pool = rng.below(4) == 0 ? kShared : topical;
      text += " " + pool[rng.below(pool.size())];
    }
    if (d % 10 == 3) text += " https://example.com/x";
    lines.push_back({{"id", "doc" + std::to_string(d)}, {"region", "asia"}, {"text", text}});
  }
  lines.push_back({{"id", "neutral"}, {"region", "asia"}, {"text", "the city news today"}});
  write_jsonl(dir / "corpus.jsonl", lines);

  std::string vec;
  std::vector<std::string> all{"she", "he"};
  for (const auto* list : {&kFemaleWords, &kMaleWords, &kShared}) {
    all.insert(all.end(), list->begin(), list->end());
  }
  for (const auto& w : all) {
    vec += w;
    for (int k = 0; k < 6; ++k) vec += " " + std::to_string(rng.uniform() * 2 - 1);
    vec += "\n";
  }
  write_text(dir / "emb.vec", vec);
}

std::string pipeline_flags(const TempDir& dir) {
  return "--corpus " + (dir / "corpus.jsonl").string() + " --embeddings " +
         (dir / "emb.vec").string() + " --results-dir " + (dir / "results").string() +
         " --topics 4 --iterations 60 --seed 7 --align-n 10 --top-pairs 0 --threshold 0.5";
}

std::vector<Json> body_records(const std::filesystem::path& path) {
  std::vector<Json> out;
  for (auto& rec : read_jsonl(path)) {
    if (rec.value("kind", "") != "header") out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

TEST(Cli, ReportOnEmptyResults) {
  TempDir dir;
  const auto r = run_cli("report --results-dir " + (dir / "nothing").string(), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("no artifacts"), std::string::npos);
}

TEST(Cli, WeatToySpecPrintsEffectSize) {
  TempDir dir;
  const std::string data = BIASCOPE_SOURCE_DIR "/data/fixtures/";
  const auto r = run_cli("weat --spec " + data + "toy_weat.jsonl --embeddings " + data +
                             "toy.vec --min-targets 1 --results-dir " + dir.path().string(),
                         dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("d=+2.0000"), std::string::npos) << r.output;
  const auto records = body_records(dir / "weat.jsonl");
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0]["effect_size"], 2.0);
  EXPECT_EQ(records[0]["p_value"], 0.5);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_cli("ingest --corpus " + (dir / "missing.jsonl").string(), dir).code, 1);
  EXPECT_EQ(run_cli("no-such-stage", dir).code, 1);
  EXPECT_EQ(run_cli("fit-topics --results-dir " + dir.path().string(), dir).code, 1);
  write_text(dir / "empty.jsonl", "");
  EXPECT_EQ(run_cli("ingest --corpus " + (dir / "empty.jsonl").string() + " --results-dir " +
                        dir.path().string(),
                    dir)
                .code,
            2);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  TempDir dir;
  const std::string data = BIASCOPE_SOURCE_DIR "/data/fixtures/";
  write_text(dir / "run.conf", "# toy run\nseed = 5\nmin-targets = 1\nembeddings = " + data +
                                   "toy.vec\nweat-spec = " + data + "toy_weat.jsonl\nresults-dir = " +
                                   dir.path().string() + "\n");
  ASSERT_EQ(run_cli("weat --config " + (dir / "run.conf").string(), dir).code, 0);
  auto header = read_jsonl(dir / "weat.jsonl").front();
  EXPECT_EQ(header["seed"], 5);
  ASSERT_EQ(run_cli("weat --config " + (dir / "run.conf").string() + " --seed 9", dir).code, 0);
  header = read_jsonl(dir / "weat.jsonl").front();
  EXPECT_EQ(header["seed"], 9);
  EXPECT_EQ(header["kind"], "header");
  EXPECT_EQ(header["tool"], "biascope");
  EXPECT_EQ(header["stage"], "weat");
  EXPECT_TRUE(header.contains("config_hash"));
  EXPECT_TRUE(header.contains("version"));
}

TEST(Cli, PipelineMatchesModuleOracle) {
  TempDir dir;
  write_pipeline_inputs(dir);
  const auto flags = pipeline_flags(dir);
  for (const char* stage : {"ingest", "split", "fit-topics", "align"}) {
    const auto r = run_cli(std::string(stage) + " " + flags, dir);
    ASSERT_EQ(r.code, 0) << stage << ": " << r.output;
  }
  const auto r = run_cli("pair --mode or " + flags, dir);
  ASSERT_EQ(r.code, 0) << r.output;

  // Same computation through the library API.
  std::vector<Document> docs;
  for (auto& d : ingest(dir / "corpus.jsonl").documents) {
    if (auto p = preprocess(std::move(d))) docs.push_back(std::move(*p));
  }
  const auto corpus = gender_split(docs, default_lexicon());
  TopicModelConfig config;
  config.num_topics = 4;
  config.iterations = 60;
  config.seed = 7;
  const auto fitted = fit_lda(corpus.documents(), config);
  const auto model = import_topics(export_topics(fitted), corpus.documents());
  const auto alignments = align_topics(model, corpus, 10);
  const auto pools = split_pools(alignments);
  const auto table = load_embeddings(dir / "emb.vec").table;
  std::map<std::size_t, TopicEmbedding> embeddings;
  for (const auto& a : alignments) {
    if (a.gender != Gender::kUnassigned) embeddings.emplace(a.topic_id, topic_embedding(table, model, a.topic_id));
  }
  auto search = find_pairs(pools.female, pools.male, embeddings, table, {}, 0.5, PairMode::kOr);
  const auto n = search.pairs.size();
  const auto ranked = rank_pairs(std::move(search.pairs), model, corpus.documents(), n);
  std::vector<Json> expected;
  for (const auto& p : ranked) {
    auto rec = pair_record("asia", p, {});
    rec["kind"] = "pair";
    expected.push_back(rec);
  }
  const auto got = body_records(dir / "results" / "pairs_asia.jsonl");
  EXPECT_EQ(got, expected);
  EXPECT_FALSE(got.empty()) << "fixture should produce at least one pair";

  const auto report = run_cli("report " + flags, dir);
  EXPECT_EQ(report.code, 0);
  EXPECT_NE(report.output.find("Topic pairs"), std::string::npos) << report.output;
}

TEST(Cli, StagesAreByteIdenticalOnRerun) {
  TempDir dir;
  write_pipeline_inputs(dir);
  const auto flags = pipeline_flags(dir);
  for (const char* stage : {"ingest", "split", "fit-topics", "align", "pair"}) {
    ASSERT_EQ(run_cli(std::string(stage) + " " + flags, dir).code, 0) << stage;
  }
  std::map<std::string, std::string> first;
  for (const auto& e : std::filesystem::directory_iterator(dir / "results")) {
    first[e.path().filename().string()] = slurp(e.path());
  }
  for (const char* stage : {"ingest", "split", "fit-topics", "align", "pair"}) {
    ASSERT_EQ(run_cli(std::string(stage) + " " + flags, dir).code, 0) << stage;
  }
  for (const auto& [name, content] : first) {
    EXPECT_EQ(slurp(dir / "results" / name), content) << name;
    EXPECT_EQ(read_jsonl(dir / "results" / name).front()["kind"], "header") << name;
  }
}

TEST(Cli, PersonaEvalWithMockScript) {
  TempDir dir;
  std::vector<Json> pairs;
  std::vector<Json> rules;
  for (int i = 0; i < 5; ++i) {
    const auto f = "ftopic" + std::to_string(i), m = "mtopic" + std::to_string(i);
    pairs.push_back({{"kind", "pair"}, {"region", "asia"}, {"f_label", f}, {"m_label", m}});
    rules.push_back({{"match", "in " + f + " "}, {"response", "Ana.\nGender: female"}});
    rules.push_back({{"match", "in " + m + " "}, {"response", "Ana.\nGender: female"}});
  }
  write_jsonl(dir / "pairs.jsonl", pairs);
  write_jsonl(dir / "mock.jsonl", rules);
  const auto r = run_cli("persona-eval --pairs " + (dir / "pairs.jsonl").string() +
                             " --mock-script " + (dir / "mock.jsonl").string() +
                             " --results-dir " + dir.path().string(),
                         dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto reports = body_records(dir / "persona_eval.jsonl");
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0]["mismatch_pct"], 50.0);
}
