#include <atomic>
#include <csignal>
#include <iostream>
#include <map>
#include <thread>

#include "biascope/bias_dimensions.hpp"
#include "biascope/corpus.hpp"
#include "biascope/embed_store.hpp"
#include "biascope/error.hpp"
#include "biascope/iat.hpp"
#include "biascope/iat_server.hpp"
#include "biascope/persona.hpp"
#include "biascope/topic_model.hpp"
#include "biascope/weat.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;

namespace biascope::cli {

Json header_record(const RunConfig& config, const std::string& stage) {
  return {{"kind", "header"},       {"tool", "biascope"},
          {"version", kToolVersion}, {"stage", stage},
          {"seed", config.seed},     {"config_hash", config.config_hash}};
}

std::string substitute_region(const std::string& pattern, const std::string& region) {
  std::string out = pattern;
  for (auto pos = out.find("{region}"); pos != std::string::npos;
       pos = out.find("{region}", pos + region.size())) {
    out.replace(pos, 8, region);
  }
  return out;
}

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) {
    throw ConfigError(what + " is not set");
  }
  if (!fs::is_regular_file(path)) {
    throw ConfigError(what + " not found: " + path);
  }
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::is_regular_file(path)) {
    throw ConfigError(path.string() + " is missing; run '" + producer + "' first");
  }
}

std::string file_slug(const std::string& region) {
  std::string out;
  for (char c : region) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  }
  return out.empty() ? "_" : out;
}

fs::path region_artifact(const RunConfig& config, const std::string& stem,
                         const std::string& region) {
  return config.results_path(stem + "_" + file_slug(region) + ".jsonl");
}

Json document_record(const Document& doc, bool with_gender) {
  Json rec = {{"kind", "document"},
              {"id", doc.id},
              {"region", doc.region},
              {"text", doc.text},
              {"tokens", doc.tokens}};
  if (with_gender) {
    rec["gender"] = std::string(to_string(doc.gender));
  }
  return rec;
}

Document document_from(const Json& rec) {
  Document doc;
  doc.id = rec.at("id").get<std::string>();
  doc.region = rec.at("region").get<std::string>();
  doc.text = rec.value("text", "");
  doc.tokens = rec.at("tokens").get<std::vector<std::string>>();
  if (rec.contains("gender")) {
    doc.gender = parse_gender_tag(rec.at("gender").get<std::string>()).value_or(Gender::kUnassigned);
  }
  return doc;
}

std::vector<Document> load_documents(const fs::path& path) {
  std::vector<Document> docs;
  for (const auto& rec : read_jsonl(path)) {
    if (rec.value("kind", "") == "document") {
      docs.push_back(document_from(rec));
    }
  }
  return docs;
}

std::vector<std::string> regions_of(const RunConfig& config, const std::vector<Document>& docs) {
  if (!config.regions.empty()) {
    return config.regions;
  }
  std::vector<std::string> regions;
  for (const auto& d : docs) {
    if (std::find(regions.begin(), regions.end(), d.region) == regions.end()) {
      regions.push_back(d.region);
    }
  }
  return regions;
}

std::vector<std::string> stage_regions(const RunConfig& config) {
  const auto docs_path = config.results_path("documents.jsonl");
  require_artifact(docs_path, "ingest");
  auto regions = regions_of(config, load_documents(docs_path));
  if (regions.empty()) {
    throw ConfigError("no regions to process");
  }
  return regions;
}

GenderedCorpus load_split(const RunConfig& config, const std::string& region) {
  const auto path = region_artifact(config, "split", region);
  require_artifact(path, "split");
  GenderedCorpus corpus;
  corpus.region = region;
  for (const auto& rec : read_jsonl(path)) {
    const auto kind = rec.value("kind", "");
    if (kind == "summary") {
      corpus.excluded_count = rec.at("excluded").get<std::size_t>();
      corpus.unassigned_count = rec.at("unassigned").get<std::size_t>();
    } else if (kind == "document") {
      auto doc = document_from(rec);
      (doc.gender == Gender::kFemale ? corpus.f_docs : corpus.m_docs).push_back(std::move(doc));
    }
  }
  return corpus;
}

std::map<std::size_t, std::string> region_labels(const RunConfig& config,
                                                 const std::string& region) {
  if (config.labels.empty()) {
    return {};
  }
  const auto path = substitute_region(config.labels, region);
  require_file(path, "labels");
  return load_topic_labels(path);
}

TopicModelConfig topic_config(const RunConfig& config) {
  TopicModelConfig tc;
  tc.num_topics = config.topics;
  if (config.alpha > 0.0) {
    tc.alpha = config.alpha;
  }
  tc.beta = config.beta;
  tc.iterations = config.iterations;
  tc.seed = config.seed;
  tc.top_n_words = config.top_n_words;
  tc.min_topic_size = config.min_topic_size;
  tc.validate();
  return tc;
}

void write_topics(const RunConfig& config, const std::string& stage, const std::string& region,
                  const FittedTopicModel& model, const GenderedCorpus& corpus) {
  std::vector<Json> out{header_record(config, stage)};
  for (auto& rec : export_topics(model)) {
    out.push_back(std::move(rec));
  }
  write_jsonl(region_artifact(config, "topics", region), out);

  std::vector<Json> summary{header_record(config, stage)};
  for (const auto& s : summarize_topics(model, corpus.documents(), region_labels(config, region))) {
    Json words = Json::array();
    for (const auto& w : s.top_words) {
      words.push_back(w.word);
    }
    summary.push_back({{"kind", "topic"},
                       {"region", region},
                       {"topic", s.topic_id},
                       {"top_words", words},
                       {"coherence", s.coherence},
                       {"size", s.size},
                       {"undersized", s.undersized},
                       {"label", s.label ? Json(*s.label) : Json(nullptr)}});
  }
  write_jsonl(region_artifact(config, "topic_summary", region), summary);
}

FittedTopicModel load_model(const RunConfig& config, const std::string& region,
                            const GenderedCorpus& corpus) {
  const auto path = region_artifact(config, "topics", region);
  require_artifact(path, "fit-topics' or 'import-topics");
  return import_topics(path, corpus.documents());
}

EmbeddingTable load_table(const RunConfig& config) {
  require_file(config.embeddings, "embeddings");
  auto loaded = load_embeddings(config.embeddings, config.embedding_dim
                                                       ? std::optional(config.embedding_dim)
                                                       : std::nullopt);
  if (loaded.report.warning_count() > 0) {
    std::cerr << "embeddings: " << loaded.report.warning_count() << " warnings ("
              << loaded.report.duplicates << " duplicates, " << loaded.report.zero_vectors
              << " zero vectors, " << loaded.report.unparsable << " unparsable)\n";
  }
  return std::move(loaded.table);
}

WeatOptions weat_options(const RunConfig& config) {
  WeatOptions options;
  options.n_samples = config.n_samples;
  options.min_targets = config.min_targets;
  options.seed = config.seed;
  options.threads = config.threads;
  return options;
}

}  // namespace

int run_ingest(const RunConfig& config) {
  require_file(config.corpus, "corpus");
  auto result = ingest(config.corpus);
  std::vector<Json> out{header_record(config, "ingest")};
  std::size_t kept = 0;
  std::size_t short_docs = 0;
  for (auto& doc : result.documents) {
    if (!config.regions.empty() &&
        std::find(config.regions.begin(), config.regions.end(), doc.region) ==
            config.regions.end()) {
      continue;
    }
    auto pre = preprocess(std::move(doc), config.min_tokens);
    if (!pre) {
      ++short_docs;
      continue;
    }
    out.push_back(document_record(*pre, false));
    ++kept;
  }
  const auto path = config.results_path("documents.jsonl");
  write_jsonl(path, out);
  std::cout << "ingest: " << kept << " documents, " << result.skipped << " malformed lines, "
            << short_docs << " below min_tokens -> " << path.string() << "\n";
  return 0;
}

int run_split(const RunConfig& config) {
  const auto docs_path = config.results_path("documents.jsonl");
  require_artifact(docs_path, "ingest");
  if (!config.lexicon.empty()) {
    require_file(config.lexicon, "lexicon");
  }
  const auto policy = config.tie_policy == "duplicate" ? TiePolicy::kDuplicate : TiePolicy::kExclude;
  const auto docs = load_documents(docs_path);
  const GenderLexicon lexicon =
      config.lexicon.empty() ? default_lexicon() : load_lexicon(config.lexicon);
  for (const auto& region : regions_of(config, docs)) {
    std::vector<Document> region_docs;
    for (const auto& d : docs) {
      if (d.region == region) {
        region_docs.push_back(d);
      }
    }
    if (region_docs.empty()) {
      throw ValidationError("no documents for region '" + region + "'");
    }
    const auto corpus = gender_split(region_docs, lexicon, policy);
    std::vector<Json> out{header_record(config, "split"),
                          {{"kind", "summary"},
                           {"region", region},
                           {"f", corpus.f_docs.size()},
                           {"m", corpus.m_docs.size()},
                           {"excluded", corpus.excluded_count},
                           {"unassigned", corpus.unassigned_count}}};
    for (const auto& d : corpus.documents()) {
      out.push_back(document_record(d, true));
    }
    write_jsonl(region_artifact(config, "split", region), out);
    std::cout << "split " << region << ": F=" << corpus.f_docs.size()
              << " M=" << corpus.m_docs.size() << " excluded=" << corpus.excluded_count
              << " unassigned=" << corpus.unassigned_count << "\n";
  }
  return 0;
}

int run_fit_topics(const RunConfig& config) {
  const auto tc = topic_config(config);
  for (const auto& region : stage_regions(config)) {
    const auto corpus = load_split(config, region);
    const auto model = fit_lda(corpus.documents(), tc);
    write_topics(config, "fit-topics", region, model, corpus);
    std::cout << "fit-topics " << region << ": K=" << model.num_topics()
              << " V=" << model.vocab_size() << " D=" << model.num_documents() << "\n";
  }
  return 0;
}

int run_import_topics(const RunConfig& config) {
  if (config.topics_import.empty()) {
    throw ConfigError("topics_import is not set");
  }
  const auto regions = stage_regions(config);
  for (const auto& region : regions) {
    require_file(substitute_region(config.topics_import, region), "topics_import");
  }
  for (const auto& region : regions) {
    const auto corpus = load_split(config, region);
    const auto model =
        import_topics(fs::path(substitute_region(config.topics_import, region)), corpus.documents());
    write_topics(config, "import-topics", region, model, corpus);
    std::cout << "import-topics " << region << ": K=" << model.num_topics()
              << " V=" << model.vocab_size() << "\n";
  }
  return 0;
}

int run_align(const RunConfig& config) {
  for (const auto& region : stage_regions(config)) {
    const auto corpus = load_split(config, region);
    const auto model = load_model(config, region, corpus);
    const auto alignments = align_topics(model, corpus, config.align_n);
    std::vector<Json> out{header_record(config, "align")};
    std::size_t nf = 0, nm = 0;
    for (const auto& a : alignments) {
      nf += a.gender == Gender::kFemale;
      nm += a.gender == Gender::kMale;
      out.push_back({{"kind", "alignment"},
                     {"region", region},
                     {"topic", a.topic_id},
                     {"p_f", a.p_f},
                     {"p_m", a.p_m},
                     {"gender", std::string(to_string(a.gender))},
                     {"n_used", a.n_used},
                     {"m_f", a.m_f}});
    }
    write_jsonl(region_artifact(config, "alignment", region), out);
    std::cout << "align " << region << ": " << nf << " F topics, " << nm << " M topics, "
              << alignments.size() - nf - nm << " ties\n";
  }
  return 0;
}

int run_pair(const RunConfig& config) {
  const auto mode = config.mode == "and" ? PairMode::kAnd : PairMode::kOr;
  const auto regions = stage_regions(config);
  const auto table = load_table(config);
  for (const auto& region : regions) {
    const auto corpus = load_split(config, region);
    const auto model = load_model(config, region, corpus);
    const auto align_path = region_artifact(config, "alignment", region);
    require_artifact(align_path, "align");
    std::vector<TopicAlignment> alignments;
    for (const auto& rec : read_jsonl(align_path)) {
      if (rec.value("kind", "") != "alignment") {
        continue;
      }
      TopicAlignment a;
      a.topic_id = rec.at("topic").get<std::size_t>();
      a.p_f = rec.at("p_f").get<double>();
      a.p_m = rec.at("p_m").get<double>();
      a.gender = parse_gender_tag(rec.at("gender").get<std::string>()).value_or(Gender::kUnassigned);
      a.n_used = rec.at("n_used").get<std::size_t>();
      a.m_f = rec.at("m_f").get<std::size_t>();
      alignments.push_back(a);
    }
    const auto pools = split_pools(alignments);
    std::map<std::size_t, TopicEmbedding> embeddings;
    for (const auto& a : alignments) {
      if (a.gender != Gender::kUnassigned) {
        embeddings.emplace(a.topic_id, topic_embedding(table, model, a.topic_id));
      }
    }
    auto search = find_pairs(pools.female, pools.male, embeddings, table,
                             GenderAnchors{config.she, config.he}, config.threshold, mode);
    for (const auto& w : search.warnings) {
      std::cerr << "pair " << region << ": " << w << "\n";
    }
    const auto found = search.pairs.size();
    const auto ranked = rank_pairs(std::move(search.pairs), model, corpus.documents(),
                                   config.top_pairs ? config.top_pairs : found);
    const auto labels = region_labels(config, region);
    std::vector<Json> out{header_record(config, "pair")};
    for (const auto& p : ranked) {
      auto rec = pair_record(region, p, labels);
      rec["kind"] = "pair";
      out.push_back(std::move(rec));
    }
    write_jsonl(region_artifact(config, "pairs", region), out);
    std::cout << "pair " << region << ": " << found << " candidate pairs, kept " << ranked.size()
              << "\n";
  }
  return 0;
}

int run_weat(const RunConfig& config) {
  require_file(config.weat_spec, "weat_spec");
  const auto tests = load_weat_tests(config.weat_spec);
  const auto table = load_table(config);
  const auto options = weat_options(config);
  std::vector<Json> out{header_record(config, "weat")};
  for (const auto& test : tests) {
    const auto result = run_weat(test, table, options);
    auto rec = weat_record(test.name, result);
    rec["kind"] = "weat";
    out.push_back(std::move(rec));
    std::printf("%-24s d=%+.4f p=%.3g%s\n", test.name.c_str(), result.effect_size,
                result.p_value, result.exact ? " (exact)" : "");
  }
  write_jsonl(config.results_path("weat.jsonl"), out);
  return 0;
}

int run_region_eval(const RunConfig& config) {
  require_file(config.region_eval_spec, "region_eval_spec");
  const auto specs = load_region_eval(config.region_eval_spec);
  const auto table = load_table(config);
  const auto options = weat_options(config);
  std::vector<RegionEvalResult> all;
  for (const auto& spec : specs) {
    if (!config.regions.empty() && std::find(config.regions.begin(), config.regions.end(),
                                             spec.region) == config.regions.end()) {
      continue;
    }
    auto rows = run_region_eval(spec, table, options);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  std::vector<Json> out{header_record(config, "region-eval")};
  for (const auto& r : all) {
    auto rec = region_eval_record(r);
    rec["kind"] = "region_eval";
    out.push_back(std::move(rec));
  }
  write_jsonl(config.results_path("region_eval.jsonl"), out);
  const auto table_text = render_region_table(all);
  write_text(config.results_path("region_eval.txt"), table_text);
  std::cout << table_text;
  return 0;
}

int run_gender_axis(const RunConfig& config) {
  if (!config.vocab.empty()) {
    require_file(config.vocab, "vocab");
  }
  const auto table = load_table(config);
  std::vector<std::string> vocab;
  if (config.vocab.empty()) {
    vocab = table.words();
  } else {
    for (const auto& line : read_lines(config.vocab)) {
      if (!line.empty()) {
        vocab.push_back(line);
      }
    }
  }
  const auto ranking =
      gender_axis_scores(table, GenderAnchors{config.she, config.he}, vocab, config.axis_top_k);
  std::vector<Json> out{header_record(config, "gender-axis")};
  auto emit = [&](const char* side, const std::vector<AxisScore>& scores) {
    std::size_t rank = 1;
    for (const auto& s : scores) {
      out.push_back({{"kind", "axis"}, {"side", side}, {"rank", rank++}, {"word", s.word},
                     {"score", s.score}});
      std::printf("%-4s %3zu %-24s %+.4f\n", side, rank - 1, s.word.c_str(), s.score);
    }
  };
  emit("she", ranking.she_side);
  emit("he", ranking.he_side);
  if (!ranking.skipped.empty()) {
    std::cerr << "gender-axis: " << ranking.skipped.size() << " vocabulary words not in table\n";
  }
  write_jsonl(config.results_path("gender_axis.jsonl"), out);
  return 0;
}

namespace {
std::atomic<iat::HttpServer*> g_server{nullptr};
extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) {
    s->stop();
  }
}
}  // namespace

int run_iat_serve(const RunConfig& config) {
  if (config.studies.empty()) {
    throw ConfigError("at least one study spec is required");
  }
  for (const auto& s : config.studies) {
    require_file(s, "study");
  }
  if (!config.ui_dir.empty() && !fs::is_directory(config.ui_dir)) {
    throw ConfigError("ui_dir not found: " + config.ui_dir);
  }
  std::vector<iat::StudySpec> studies;
  for (const auto& s : config.studies) {
    studies.push_back(iat::load_study_spec(s));
  }
  iat::StudyService service(std::move(studies), config.data_dir);
  iat::HttpServer server(service, config.ui_dir.empty() ? std::nullopt
                                                        : std::optional<fs::path>(config.ui_dir));
  if (!server.bind(config.host, config.port)) {
    throw IoError("cannot bind " + config.host + ":" + std::to_string(config.port));
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "iat-serve listening on " << config.host << ":" << config.port << " (data in "
            << config.data_dir << ")" << std::endl;
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

int run_persona_eval(const RunConfig& config) {
  std::vector<fs::path> pair_files;
  if (!config.pairs.empty()) {
    for (const auto& p : config.pairs) {
      require_file(p, "pairs");
      pair_files.emplace_back(p);
    }
  } else {
    for (const auto& region : stage_regions(config)) {
      const auto path = region_artifact(config, "pairs", region);
      require_artifact(path, "pair");
      pair_files.push_back(path);
    }
  }
  persona::ProviderConfig pc;
  if (config.provider_kind == "mock") {
    pc.kind = persona::ProviderKind::kMock;
    require_file(config.mock_script, "mock_script");
    pc.mock_script = config.mock_script;
  } else {
    pc.kind = persona::ProviderKind::kGenericChat;
    if (config.provider_endpoint.empty()) {
      throw ConfigError("provider_endpoint is not set");
    }
  }
  pc.endpoint = config.provider_endpoint;
  pc.model = config.provider_model;
  pc.token_env = config.provider_token_env;
  pc.temperature = config.provider_temperature;
  pc.timeout_seconds = config.provider_timeout;

  std::vector<persona::LabeledPair> pairs;
  for (const auto& f : pair_files) {
    auto loaded = persona::load_labeled_pairs(f);
    pairs.insert(pairs.end(), loaded.begin(), loaded.end());
  }
  if (pairs.empty()) {
    throw ValidationError("no labeled pairs to evaluate");
  }
  const auto provider = persona::make_provider(pc);
  persona::PersonaEvalOptions options;
  options.runs = config.runs;
  options.seed = config.seed;
  options.max_in_flight = config.max_in_flight;
  options.model_name = config.provider_model.empty() ? config.provider_kind : config.provider_model;
  const auto eval = persona::run_persona_eval(pairs, *provider, options);

  std::vector<Json> reports{header_record(config, "persona-eval")};
  for (const auto& r : eval.reports) {
    auto rec = persona::to_json(r);
    rec["kind"] = "mismatch";
    reports.push_back(std::move(rec));
    if (r.mismatch_pct) {
      std::printf("%-16s %-16s mismatch=%.1f%% unknown=%zu\n", r.region.c_str(), r.model.c_str(),
                  *r.mismatch_pct, r.unknown);
    } else {
      std::printf("%-16s %-16s mismatch=n/a unknown=%zu\n", r.region.c_str(), r.model.c_str(),
                  r.unknown);
    }
  }
  write_jsonl(config.results_path("persona_eval.jsonl"), reports);
  std::vector<Json> results{header_record(config, "persona-eval")};
  for (const auto& r : eval.results) {
    auto rec = persona::to_json(r);
    rec["kind"] = "persona";
    results.push_back(std::move(rec));
  }
  write_jsonl(config.results_path("persona_results.jsonl"), results);
  return 0;
}

}  // namespace biascope::cli
