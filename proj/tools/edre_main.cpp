#include <edre.h>

#include <CLI11.hpp>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

using nlohmann::json;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

int fail(edre_status status) {
  std::fprintf(stderr, "error: %s: %s\n", edre_status_name(status), edre_last_error());
  return 1;
}

// Runs one C API call and parses its result JSON; nullopt means the call
// failed and the error line is already printed.
std::optional<json> run(edre_status (*op)(const char*, char**), const json& options) {
  char* result = nullptr;
  edre_status status = op(options.dump().c_str(), &result);
  if (status != EDRE_OK) {
    fail(status);
    return std::nullopt;
  }
  json parsed = result == nullptr ? json() : json::parse(result);
  edre_free(result);
  return parsed;
}

uint64_t default_seed() {
  std::random_device rd;
  return (static_cast<uint64_t>(rd()) << 32) ^ rd();
}

// Shared hyperparameter flags; only flags the user set reach the library so
// its own defaults stay authoritative.
struct ParamFlags {
  double alpha = 0.0;
  double lambda = 0.0;
  double step = 0.0;
  uint32_t max_iters = 0;
  double tolerance = 0.0;
  double cost = 0.0;
  uint32_t epochs = 0;
  uint32_t trees = 0;
  uint32_t max_depth = 0;
  bool no_bootstrap = false;
  uint32_t rounds = 0;
  double shrinkage = 0.0;
  double subsample = 0.0;

  CLI::App* cmd = nullptr;

  void add_to(CLI::App* app) {
    cmd = app;
    app->add_option("--alpha", alpha, "NB Laplace smoothing");
    app->add_option("--lambda", lambda, "LOGREG L2 strength");
    app->add_option("--step", step, "LOGREG initial step size");
    app->add_option("--max-iters", max_iters, "LOGREG iteration cap");
    app->add_option("--tolerance", tolerance, "LOGREG convergence threshold");
    app->add_option("--cost", cost, "SVM regularization C");
    app->add_option("--epochs", epochs, "SVM training epochs");
    app->add_option("--trees", trees, "RF tree count");
    app->add_option("--max-depth", max_depth, "RF or GBRT tree depth cap");
    app->add_flag("--no-bootstrap", no_bootstrap, "RF: train each tree on the full data");
    app->add_option("--rounds", rounds, "GBRT boosting rounds");
    app->add_option("--shrinkage", shrinkage, "GBRT learning rate");
    app->add_option("--subsample", subsample, "GBRT row fraction per round");
  }

  json to_json() const {
    json params = json::object();
    auto set = [&](const char* flag, const char* key, const json& value) {
      if (cmd->count(flag) > 0) params[key] = value;
    };
    set("--alpha", "alpha", alpha);
    set("--lambda", "lambda", lambda);
    set("--step", "step", step);
    set("--max-iters", "max_iters", max_iters);
    set("--tolerance", "tolerance", tolerance);
    set("--cost", "C", cost);
    set("--epochs", "epochs", epochs);
    set("--trees", "trees", trees);
    set("--max-depth", "max_depth", max_depth);
    set("--no-bootstrap", "bootstrap", false);
    set("--rounds", "rounds", rounds);
    set("--shrinkage", "shrinkage", shrinkage);
    set("--subsample", "subsample", subsample);
    return params;
  }
};

struct EmbeddingFlags {
  uint32_t min_df = 1;
  std::string external_vectors;
  CLI::App* cmd = nullptr;

  void add_to(CLI::App* app) {
    cmd = app;
    app->add_option("--min-df", min_df, "TF-IDF vocabulary document-frequency floor");
    app->add_option("--external-vectors", external_vectors,
                    "embed with this id<TAB>values file instead of TF-IDF");
  }

  json to_json() const {
    if (cmd->count("--external-vectors") > 0) {
      return json{{"kind", "external"}, {"vectors", external_vectors}};
    }
    return json{{"kind", "tfidf"}, {"min_df", min_df}};
  }
};

// Seed flag contract: randomized commands take --seed; when omitted one is
// drawn and printed so the run stays reproducible.
uint64_t resolve_seed(CLI::App* cmd, uint64_t seed) {
  if (cmd->count("--seed") > 0) return seed;
  uint64_t drawn = default_seed();
  std::printf("seed: %llu\n", static_cast<unsigned long long>(drawn));
  return drawn;
}

void print_scores(const json& result) {
  std::string line = "scores:";
  for (size_t i = 0; i < result["classes"].size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), " %s=%.4f", result["classes"][i].get<std::string>().c_str(),
                  result["scores"][i].get<double>());
    line += buf;
  }
  std::printf("%s\n", line.c_str());
}

int do_serve(const json& options) {
  edre_server* server = nullptr;
  int port = 0;
  edre_status status = edre_serve_start(options.dump().c_str(), &server, &port);
  if (status != EDRE_OK) return fail(status);

  std::printf("listening on %s:%d\n", options.value("host", std::string("127.0.0.1")).c_str(),
              port);
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  int ticks = 0;
  while (g_stop == 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    if (++ticks % 10 == 0) {
      size_t posted = 0;
      edre_serve_flush(server, &posted);
    }
  }
  edre_serve_stop(server);
  edre_serve_free(server);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Review clarity classification, example retrieval, and the review bot"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file; command-line flags override it");
  app.set_version_flag("--version", []() { return std::string(edre_library_version()); });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Mine review comments from a code host");
  std::string store, base_url, since, until, token;
  std::vector<std::string> repos;
  uint32_t per_page = 100;
  ingest->add_option("--store", store, "corpus JSONL path")->required();
  ingest->add_option("--base-url", base_url, "code-host API root")->required();
  ingest->add_option("--repo", repos, "owner/name, repeatable")->required();
  ingest->add_option("--since", since, "window start, RFC 3339")->required();
  ingest->add_option("--until", until, "window end, RFC 3339")->required();
  ingest->add_option("--per-page", per_page, "page size");
  ingest->add_option("--token", token, "API token (default: EDRE_TOKEN)");

  // labels
  auto* labels = app.add_subcommand("labels", "Aggregate rater labels onto the corpus");
  std::string labels_store, labels_csv;
  uint32_t min_votes = 1;
  labels->add_option("--store", labels_store, "corpus JSONL path")->required();
  labels->add_option("--labels", labels_csv, "rater CSV path")->required();
  labels->add_option("--min-votes", min_votes, "votes needed to keep a review");

  // stats
  auto* stats = app.add_subcommand("stats", "Describe the labeled corpus");
  std::string stats_store;
  stats->add_option("--store", stats_store, "corpus JSONL path")->required();

  // train
  auto* train = app.add_subcommand("train", "Fit a clarity model and save it");
  std::string train_store, train_algorithm, model_out;
  uint64_t train_seed = 0;
  ParamFlags train_params;
  EmbeddingFlags train_embedding;
  train->add_option("--store", train_store, "corpus JSONL path")->required();
  train->add_option("--algorithm", train_algorithm, "nb | logreg | svm | rf | gbrt")->required();
  train->add_option("--model-out", model_out, "output model path")->required();
  train->add_option("--seed", train_seed, "RNG seed (drawn and printed when omitted)");
  train_embedding.add_to(train);
  train_params.add_to(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate or holdout-evaluate");
  std::string eval_store, protocol = "repeated-kfold", eval_out, eval_format = "csv";
  std::vector<std::string> eval_algorithms;
  uint32_t k = 5, repeats = 1;
  double test_fraction = 0.2;
  uint64_t eval_seed = 0;
  ParamFlags eval_params;
  EmbeddingFlags eval_embedding;
  evaluate->add_option("--store", eval_store, "corpus JSONL path")->required();
  evaluate->add_option("--algorithm", eval_algorithms, "algorithm name, repeatable")->required();
  evaluate->add_option("--protocol", protocol, "repeated-kfold | holdout");
  evaluate->add_option("--k", k, "fold count");
  evaluate->add_option("--repeats", repeats, "CV repetitions");
  evaluate->add_option("--test-fraction", test_fraction, "holdout test share");
  evaluate->add_option("--seed", eval_seed, "RNG seed (drawn and printed when omitted)");
  evaluate->add_option("--out", eval_out, "write the report here");
  evaluate->add_option("--format", eval_format, "report file format: csv | text");
  eval_embedding.add_to(evaluate);
  eval_params.add_to(evaluate);

  // gridsearch
  auto* gridsearch = app.add_subcommand("gridsearch", "Sweep the default hyperparameter grid");
  std::string grid_store, grid_algorithm;
  uint32_t grid_k = 5, grid_repeats = 1;
  uint64_t grid_seed = 0;
  EmbeddingFlags grid_embedding;
  gridsearch->add_option("--store", grid_store, "corpus JSONL path")->required();
  gridsearch->add_option("--algorithm", grid_algorithm, "algorithm name")->required();
  gridsearch->add_option("--k", grid_k, "fold count");
  gridsearch->add_option("--repeats", grid_repeats, "CV repetitions");
  gridsearch->add_option("--seed", grid_seed, "RNG seed (drawn and printed when omitted)");
  grid_embedding.add_to(gridsearch);

  // report
  auto* report = app.add_subcommand("report", "Render a saved CSV report as text");
  std::string report_in;
  report->add_option("--in", report_in, "report CSV path")->required();

  // index
  auto* index = app.add_subcommand("index", "Build the example retrieval index");
  std::string index_store, index_model, index_out, index_project;
  double min_similarity = 0.1;
  index->add_option("--store", index_store, "corpus JSONL path")->required();
  index->add_option("--model", index_model, "trained model supplying the embedding")->required();
  index->add_option("--out", index_out, "output index path")->required();
  index->add_option("--min-similarity", min_similarity, "retrieval similarity floor");
  index->add_option("--project", index_project, "keep only this project's reviews");

  // explain
  auto* explain = app.add_subcommand("explain", "Classify one review and fetch examples");
  std::string explain_model, explain_index, explain_text;
  explain->add_option("--model", explain_model, "model path")->required();
  explain->add_option("--index", explain_index, "index path")->required();
  explain->add_option("--text", explain_text, "review comment text")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the webhook bot");
  std::string serve_model, serve_index, posted_log, serve_host = "127.0.0.1";
  std::string serve_base_url, serve_token, serve_secret;
  int serve_port = 0;
  uint32_t serve_per_page = 100;
  serve->add_option("--model", serve_model, "model path")->required();
  serve->add_option("--index", serve_index, "index path")->required();
  serve->add_option("--posted-log", posted_log, "idempotency log path")->required();
  serve->add_option("--base-url", serve_base_url, "code-host API root")->required();
  serve->add_option("--host", serve_host, "bind address");
  serve->add_option("--port", serve_port, "bind port (0 picks a free one)");
  serve->add_option("--token", serve_token, "API token (default: EDRE_TOKEN)");
  serve->add_option("--secret", serve_secret, "webhook secret (default: EDRE_WEBHOOK_SECRET)");
  serve->add_option("--per-page", serve_per_page, "page size for host calls");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    std::fprintf(stderr, "%s", app.help().c_str());
    return 2;
  }

  if (*ingest) {
    json options{{"store", store}, {"base_url", base_url}, {"repos", repos},
                 {"since", since}, {"until", until},       {"per_page", per_page}};
    if (!token.empty()) options["token"] = token;
    auto result = run(edre_ingest, options);
    if (!result) return 1;
    std::printf("fetched: %llu\nadded: %llu\n",
                static_cast<unsigned long long>((*result)["fetched"].get<uint64_t>()),
                static_cast<unsigned long long>((*result)["added"].get<uint64_t>()));
    return 0;
  }

  if (*labels) {
    auto result = run(edre_apply_labels, json{{"store", labels_store},
                                              {"labels", labels_csv},
                                              {"min_votes", min_votes}});
    if (!result) return 1;
    std::printf("reviews: %llu\nlabeled: %llu\n",
                static_cast<unsigned long long>((*result)["reviews"].get<uint64_t>()),
                static_cast<unsigned long long>((*result)["labeled"].get<uint64_t>()));
    return 0;
  }

  if (*stats) {
    auto result = run(edre_corpus_stats, json{{"store", stats_store}});
    if (!result) return 1;
    std::printf("%s", (*result)["text"].get<std::string>().c_str());
    return 0;
  }

  if (*train) {
    json options{{"store", train_store},
                 {"algorithm", train_algorithm},
                 {"model_out", model_out},
                 {"seed", resolve_seed(train, train_seed)},
                 {"embedding", train_embedding.to_json()}};
    json params = train_params.to_json();
    if (!params.empty()) options["params"] = params;
    auto result = run(edre_train, options);
    if (!result) return 1;
    std::printf("model: %s\nalgorithm: %s\nconfig: %s\ndimension: %llu\nfingerprint: %s\n",
                (*result)["model"].get<std::string>().c_str(),
                (*result)["algorithm"].get<std::string>().c_str(),
                (*result)["config"].get<std::string>().c_str(),
                static_cast<unsigned long long>((*result)["dimension"].get<uint64_t>()),
                (*result)["fingerprint"].get<std::string>().c_str());
    return 0;
  }

  if (*evaluate) {
    json options{{"store", eval_store},
                 {"algorithms", eval_algorithms},
                 {"protocol", protocol},
                 {"k", k},
                 {"repeats", repeats},
                 {"test_fraction", test_fraction},
                 {"seed", resolve_seed(evaluate, eval_seed)},
                 {"embedding", eval_embedding.to_json()},
                 {"format", eval_format}};
    json params = eval_params.to_json();
    if (!params.empty()) options["params"] = params;
    if (!eval_out.empty()) options["out"] = eval_out;
    auto result = run(edre_evaluate, options);
    if (!result) return 1;
    std::printf("%s", (*result)["text"].get<std::string>().c_str());
    return 0;
  }

  if (*gridsearch) {
    auto result = run(edre_grid_search, json{{"store", grid_store},
                                             {"algorithm", grid_algorithm},
                                             {"k", grid_k},
                                             {"repeats", grid_repeats},
                                             {"seed", resolve_seed(gridsearch, grid_seed)},
                                             {"embedding", grid_embedding.to_json()}});
    if (!result) return 1;
    for (const json& cell : (*result)["table"]) {
      std::printf("%-28s macro_f1=%.4f accuracy=%.4f\n",
                  cell["config"].get<std::string>().c_str(), cell["macro_f1"].get<double>(),
                  cell["accuracy"].get<double>());
    }
    std::printf("best: %s (macro_f1=%.4f accuracy=%.4f)\n",
                (*result)["best"].get<std::string>().c_str(),
                (*result)["best_macro_f1"].get<double>(),
                (*result)["best_accuracy"].get<double>());
    return 0;
  }

  if (*report) {
    auto result = run(edre_render_report, json{{"in", report_in}});
    if (!result) return 1;
    std::printf("%s", (*result)["text"].get<std::string>().c_str());
    return 0;
  }

  if (*index) {
    auto result = run(edre_build_index, json{{"store", index_store},
                                             {"model", index_model},
                                             {"out", index_out},
                                             {"min_similarity", min_similarity},
                                             {"project", index_project}});
    if (!result) return 1;
    std::printf("index: %s\nindexed: %llu\nskipped_unclear: %llu\nskipped_empty_vector: %llu\n"
                "skipped_project: %llu\nfingerprint: %s\n",
                (*result)["out"].get<std::string>().c_str(),
                static_cast<unsigned long long>((*result)["indexed"].get<uint64_t>()),
                static_cast<unsigned long long>((*result)["skipped_unclear"].get<uint64_t>()),
                static_cast<unsigned long long>(
                    (*result)["skipped_empty_vector"].get<uint64_t>()),
                static_cast<unsigned long long>((*result)["skipped_project"].get<uint64_t>()),
                (*result)["fingerprint"].get<std::string>().c_str());
    return 0;
  }

  if (*explain) {
    edre_model* model = nullptr;
    edre_index* idx = nullptr;
    edre_status status = edre_model_load(explain_model.c_str(), &model);
    if (status != EDRE_OK) return fail(status);
    status = edre_index_load(explain_index.c_str(), &idx);
    if (status != EDRE_OK) {
      edre_model_free(model);
      return fail(status);
    }
    char* raw = nullptr;
    status = edre_explain(model, idx, explain_text.c_str(), &raw);
    edre_model_free(model);
    edre_index_free(idx);
    if (status != EDRE_OK) return fail(status);
    json result = json::parse(raw);
    edre_free(raw);

    std::printf("clarity: %s\n", result["clarity"].get<std::string>().c_str());
    if (result["low_confidence"].get<bool>()) std::printf("low_confidence: true\n");
    print_scores(result);
    if (result["hits"].empty()) {
      std::printf("examples: none\n");
    } else {
      std::printf("examples:\n");
      for (const json& hit : result["hits"]) {
        std::printf("  %u. (similarity %.2f) %s %s\n", hit["rank"].get<uint32_t>(),
                    hit["similarity"].get<double>(), hit["review_id"].get<std::string>().c_str(),
                    hit["thread_url"].get<std::string>().c_str());
      }
    }
    return 0;
  }

  if (*serve) {
    json options{{"model", serve_model},     {"index", serve_index},
                 {"posted_log", posted_log}, {"base_url", serve_base_url},
                 {"host", serve_host},       {"port", serve_port},
                 {"per_page", serve_per_page}};
    if (!serve_token.empty()) options["token"] = serve_token;
    if (!serve_secret.empty()) options["secret"] = serve_secret;
    return do_serve(options);
  }

  return 2;
}
