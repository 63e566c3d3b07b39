// biascope: one subcommand per pipeline stage; artifacts go to results_dir.
#include <iostream>

#include <CLI11.hpp>

#include "biascope/error.hpp"
#include "run_config.hpp"

using biascope::cli::RunConfig;

namespace {

void add_options(CLI::App& app, RunConfig& c) {
  app.add_option("--region", c.regions, "Regions to process (default: all in corpus)")
      ->delimiter(',');
  app.add_option("--corpus", c.corpus, "JSONL corpus {id, region, text}");
  app.add_option("--embeddings", c.embeddings, "Embedding table (.vec text format)");
  app.add_option("--embedding-dim", c.embedding_dim, "Expected dimension (0 = infer)");
  app.add_option("--lexicon", c.lexicon, "Gender lexicon CSV male,female (default: bundled)");
  app.add_option("--topics-import", c.topics_import, "Topic JSONL to import; {region} expands");
  app.add_option("--labels", c.labels, "Topic labels JSONL; {region} expands");
  app.add_option("--results-dir", c.results_dir, "Artifact directory")->capture_default_str();
  app.add_option("--min-tokens", c.min_tokens, "Drop documents with fewer tokens");
  app.add_option("--tie-policy", c.tie_policy, "Gender ties: exclude | duplicate")
      ->check(CLI::IsMember({"exclude", "duplicate"}))
      ->capture_default_str();

  app.add_option("--topics", c.topics, "Number of LDA topics")->capture_default_str();
  app.add_option("--alpha", c.alpha, "Doc-topic prior (0 = 50/topics)");
  app.add_option("--beta", c.beta, "Topic-word prior")->capture_default_str();
  app.add_option("--iterations", c.iterations, "Gibbs sweeps")->capture_default_str();
  app.add_option("--seed", c.seed, "Seed for every stochastic stage")->capture_default_str();
  app.add_option("--top-n-words", c.top_n_words, "Words per topic summary");
  app.add_option("--min-topic-size", c.min_topic_size, "Flag smaller topics");

  app.add_option("--align-n", c.align_n, "Top documents per topic for alignment")
      ->capture_default_str();
  app.add_option("--threshold", c.threshold, "Pairing threshold (strict)")->capture_default_str();
  app.add_option("--mode", c.mode, "Pairing condition: or | and")
      ->check(CLI::IsMember({"or", "and"}))
      ->capture_default_str();
  app.add_option("--top-pairs", c.top_pairs, "Pairs kept per region (0 = all)");
  app.add_option("--she", c.she, "Female anchor word");
  app.add_option("--he", c.he, "Male anchor word");

  app.add_option("--weat-spec", c.weat_spec, "WEAT tests JSONL");
  app.add_option("--region-eval-spec", c.region_eval_spec, "Region-eval rows JSONL");
  app.add_option("--n-samples", c.n_samples, "Sampled permutations")->capture_default_str();
  app.add_option("--min-targets", c.min_targets, "Minimum in-vocabulary targets per set");
  app.add_option("--threads", c.threads, "Permutation workers (0 = hardware)");

  app.add_option("--vocab", c.vocab, "Word list for gender-axis (default: whole table)");
  app.add_option("--axis-top-k", c.axis_top_k, "Words per side");

  app.add_option("--host", c.host, "Bind address");
  app.add_option("--port", c.port, "Listen port")->envname("BIASCOPE_PORT");
  app.add_option("--data-dir", c.data_dir, "Session log directory")->envname("BIASCOPE_DATA_DIR");
  app.add_option("--study", c.studies, "Study spec JSON (repeatable)");
  app.add_option("--ui-dir", c.ui_dir, "Static UI bundle to serve at /");

  app.add_option("--provider-kind", c.provider_kind, "mock | generic-chat")
      ->check(CLI::IsMember({"mock", "generic-chat"}));
  app.add_option("--provider-endpoint", c.provider_endpoint, "Chat-completion URL");
  app.add_option("--provider-model", c.provider_model, "Model name sent to the provider");
  app.add_option("--provider-token-env", c.provider_token_env, "Env var holding the bearer token");
  app.add_option("--provider-temperature", c.provider_temperature, "Sampling temperature");
  app.add_option("--provider-timeout", c.provider_timeout, "Request timeout, seconds");
  app.add_option("--mock-script", c.mock_script, "Mock provider rules JSONL");
  app.add_option("--pairs", c.pairs, "Labeled pair JSONL (default: results_dir/pairs_*)");
  app.add_option("--runs", c.runs, "Persona runs")->capture_default_str();
  app.add_option("--max-in-flight", c.max_in_flight, "Concurrent provider requests");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = biascope::cli;
  CLI::App app{"Gender bias dimensions pipeline", "biascope"};
  app.set_version_flag("--version", std::string(cli::kToolVersion));
  app.set_config("--config", "", "Flat key = value config file; flags win");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig config;
  add_options(app, config);

  using Stage = int (*)(const RunConfig&);
  const std::pair<const char*, Stage> stages[] = {
      {"ingest", cli::run_ingest},           {"split", cli::run_split},
      {"fit-topics", cli::run_fit_topics},   {"import-topics", cli::run_import_topics},
      {"align", cli::run_align},             {"pair", cli::run_pair},
      {"weat", cli::run_weat},               {"region-eval", cli::run_region_eval},
      {"gender-axis", cli::run_gender_axis}, {"iat-serve", cli::run_iat_serve},
      {"persona-eval", cli::run_persona_eval}, {"report", cli::run_report},
  };
  std::vector<std::pair<CLI::App*, Stage>> subs;
  for (const auto& [name, fn] : stages) {
    subs.emplace_back(app.add_subcommand(name), fn);
  }
  subs[6].first->add_option("--spec", config.weat_spec, "Alias of --weat-spec");
  subs[7].first->add_option("--spec", config.region_eval_spec, "Alias of --region-eval-spec");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  // The hash covers every effective setting except the config path itself.
  config.config_hash = biascope::hex64(biascope::fnv1a64(app.config_to_str(true, false)));

  for (const auto& [sub, fn] : subs) {
    if (!sub->parsed()) {
      continue;
    }
    try {
      return fn(config);
    } catch (const cli::ConfigError& e) {
      std::cerr << "biascope " << sub->get_name() << ": " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "biascope " << sub->get_name() << ": " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}
