#include "edre.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <nlohmann/json.hpp>
#include <string>

#include "corpus.hpp"
#include "embed.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "github_client.hpp"
#include "learners.hpp"
#include "retrieval.hpp"
#include "service.hpp"
#include "textprep.hpp"
#include "util.hpp"

struct edre_model {
  edre::learners::TrainedModel model;
};
struct edre_index {
  edre::retrieval::RetrievalIndex index;
};
struct edre_server {
  edre::service::Bot bot;
  edre::service::Server server;

  explicit edre_server(edre::service::BotConfig config)
      : bot(std::move(config)), server(bot) {}
};

namespace {

using nlohmann::json;
using namespace edre;

thread_local std::string g_last_error;

edre_status status_of(ErrorClass cls) {
  return static_cast<edre_status>(static_cast<int>(cls) + 1);
}

template <typename F>
edre_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return EDRE_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.cls());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EDRE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return EDRE_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) raise(ErrorClass::Internal, "out of memory");
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void set_result(char** out, const json& value) {
  if (out != nullptr) *out = dup_string(value.dump());
}

json parse_options(const char* options_json) {
  if (options_json == nullptr) raise(ErrorClass::Invalid, "options JSON is null");
  json parsed = json::parse(options_json, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    raise(ErrorClass::Parse, "options are not a JSON object");
  }
  return parsed;
}

std::string req_string(const json& options, const char* key) {
  if (!options.contains(key) || !options[key].is_string() ||
      options[key].get<std::string>().empty()) {
    raise(ErrorClass::Invalid, std::string("option \"") + key + "\" (string) is required");
  }
  return options[key].get<std::string>();
}

uint64_t req_u64(const json& options, const char* key) {
  if (!options.contains(key) || !options[key].is_number_unsigned()) {
    raise(ErrorClass::Invalid,
          std::string("option \"") + key + "\" (unsigned integer) is required");
  }
  return options[key].get<uint64_t>();
}

std::string fingerprint_hex(uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

std::vector<corpus::LabeledReview> labeled_from_store(const json& options) {
  corpus::CorpusStore store(req_string(options, "store"));
  std::vector<corpus::LabeledReview> labeled = corpus::labeled_of(store.load());
  if (labeled.empty()) {
    raise(ErrorClass::Invalid, store.path().string() + " has no labeled reviews");
  }
  return labeled;
}

eval::EmbeddingSpec embedding_spec_of(const json& options) {
  eval::EmbeddingSpec spec;
  if (!options.contains("embedding")) return spec;
  const json& e = options["embedding"];
  if (!e.is_object()) raise(ErrorClass::Invalid, "option \"embedding\" must be an object");
  std::string kind = e.value("kind", "tfidf");
  if (kind == "tfidf") {
    spec.kind = eval::EmbeddingSpec::Kind::Tfidf;
    spec.min_df = e.value("min_df", 1u);
  } else if (kind == "external") {
    spec.kind = eval::EmbeddingSpec::Kind::External;
    if (!e.contains("vectors") || !e["vectors"].is_string()) {
      raise(ErrorClass::Invalid, "external embedding needs a \"vectors\" file path");
    }
    spec.external =
        embed::parse_external_vectors(read_file(e["vectors"].get<std::string>()));
  } else {
    raise(ErrorClass::Invalid, "unknown embedding kind \"" + kind + "\"");
  }
  return spec;
}

learners::HyperParams params_of(learners::Algorithm algorithm, const json& options) {
  learners::HyperParams hp;
  hp.algorithm = algorithm;
  if (options.contains("params")) {
    const json& p = options["params"];
    if (!p.is_object()) raise(ErrorClass::Invalid, "option \"params\" must be an object");
    switch (algorithm) {
      case learners::Algorithm::NB:
        hp.nb.alpha = p.value("alpha", hp.nb.alpha);
        break;
      case learners::Algorithm::LOGREG:
        hp.logreg.lambda = p.value("lambda", hp.logreg.lambda);
        hp.logreg.step = p.value("step", hp.logreg.step);
        hp.logreg.max_iters = p.value("max_iters", hp.logreg.max_iters);
        hp.logreg.tolerance = p.value("tolerance", hp.logreg.tolerance);
        break;
      case learners::Algorithm::SVM:
        hp.svm.C = p.value("C", hp.svm.C);
        hp.svm.epochs = p.value("epochs", hp.svm.epochs);
        break;
      case learners::Algorithm::RF:
        hp.forest.trees = p.value("trees", hp.forest.trees);
        hp.forest.max_depth = p.value("max_depth", hp.forest.max_depth);
        hp.forest.bootstrap = p.value("bootstrap", hp.forest.bootstrap);
        break;
      case learners::Algorithm::GBRT:
        hp.gbrt.rounds = p.value("rounds", hp.gbrt.rounds);
        hp.gbrt.shrinkage = p.value("shrinkage", hp.gbrt.shrinkage);
        hp.gbrt.max_depth = p.value("max_depth", hp.gbrt.max_depth);
        hp.gbrt.subsample = p.value("subsample", hp.gbrt.subsample);
        break;
    }
  }
  hp.validate();
  return hp;
}

json classes_json(const std::vector<Clarity>& classes) {
  json out = json::array();
  for (Clarity c : classes) out.push_back(to_string(c));
  return out;
}

github::HostConfig host_config_of(const json& options) {
  github::HostConfig host;
  host.base_url = req_string(options, "base_url");
  host.token = options.value("token", std::string());
  if (options.contains("per_page")) host.per_page = options["per_page"].get<uint32_t>();
  return host;
}

void do_ingest(const json& options, char** result) {
  github::HostConfig host = host_config_of(options);
  if (!options.contains("repos") || !options["repos"].is_array()) {
    raise(ErrorClass::Invalid, "option \"repos\" (array of owner/name) is required");
  }
  for (const json& repo : options["repos"]) host.repos.push_back(repo.get<std::string>());
  int64_t since = parse_rfc3339(req_string(options, "since"));
  int64_t until = parse_rfc3339(req_string(options, "until"));
  corpus::CorpusStore store(req_string(options, "store"));
  github::IngestResult ingest = github::ingest_from_host(host, since, until, store);
  set_result(result, json{{"fetched", ingest.fetched}, {"added", ingest.added}});
}

void do_apply_labels(const json& options, char** result) {
  corpus::CorpusStore store(req_string(options, "store"));
  std::vector<corpus::CorpusEntry> entries = store.load();
  std::vector<corpus::RaterLabel> labels = corpus::load_labels(req_string(options, "labels"));
  uint32_t min_votes = options.value("min_votes", 1u);
  std::vector<corpus::LabeledReview> aggregated =
      corpus::aggregate_majority(labels, corpus::comments_of(entries), min_votes);

  std::map<std::string, const corpus::LabeledReview*> by_id;
  for (const corpus::LabeledReview& review : aggregated) by_id[review.comment.id] = &review;
  size_t labeled = 0;
  for (corpus::CorpusEntry& entry : entries) {
    auto it = by_id.find(entry.comment.id);
    if (it == by_id.end()) continue;
    entry.clarity = it->second->clarity;
    entry.vote_counts = it->second->vote_counts;
    ++labeled;
  }
  store.rewrite(entries);
  set_result(result, json{{"reviews", entries.size()}, {"labeled", labeled}});
}

void do_corpus_stats(const json& options, char** result) {
  corpus::CorpusStore store(req_string(options, "store"));
  corpus::CorpusStats stats = corpus::corpus_stats(corpus::labeled_of(store.load()));
  json dist = json::array();
  for (double share : stats.label_distribution) dist.push_back(share);
  set_result(result, json{{"text", corpus::render_stats(stats)},
                          {"n_reviews", stats.n_reviews},
                          {"avg_words", stats.avg_words},
                          {"avg_chars", stats.avg_chars},
                          {"label_distribution", dist}});
}

void do_train(const json& options, char** result) {
  std::vector<corpus::LabeledReview> labeled = labeled_from_store(options);
  eval::EmbeddingSpec spec = embedding_spec_of(options);
  textprep::PrepConfig prep = textprep::PrepConfig::defaults();

  std::vector<textprep::TokenDoc> docs;
  docs.reserve(labeled.size());
  embed::EmbeddingSource source;
  if (spec.kind == eval::EmbeddingSpec::Kind::Tfidf) {
    for (const corpus::LabeledReview& review : labeled) {
      docs.push_back(textprep::preprocess(review.comment, prep));
    }
    source = embed::tfidf_source(embed::build_vocabulary(docs, spec.min_df));
  } else {
    source.kind = embed::EmbeddingSource::Kind::External;
    source.external = *spec.external;
    for (const corpus::LabeledReview& review : labeled) {
      docs.push_back(textprep::TokenDoc{review.comment.id, {}, {}});
    }
  }

  learners::TrainSet data;
  for (size_t i = 0; i < labeled.size(); ++i) {
    data.vectors.push_back(embed::embed_doc(source, docs[i]));
    data.labels.push_back(labeled[i].clarity);
    data.review_ids.push_back(labeled[i].comment.id);
  }

  learners::Algorithm algorithm =
      learners::algorithm_from_string(req_string(options, "algorithm"));
  learners::HyperParams hp = params_of(algorithm, options);
  uint64_t seed = req_u64(options, "seed");
  learners::TrainedModel model = learners::train(data, hp, seed, source.fingerprint());
  model.embedding = std::move(source);

  std::string out_path = req_string(options, "model_out");
  learners::save_model(model, out_path);
  set_result(result, json{{"model", out_path},
                          {"algorithm", learners::to_string(algorithm)},
                          {"classes", classes_json(model.classes)},
                          {"dimension", model.dimension},
                          {"fingerprint", fingerprint_hex(model.embedding_fingerprint)},
                          {"config", hp.describe()}});
}

void do_evaluate(const json& options, char** result) {
  std::vector<corpus::LabeledReview> labeled = labeled_from_store(options);
  eval::EmbeddingSpec spec = embedding_spec_of(options);
  uint64_t seed = req_u64(options, "seed");
  std::string protocol = options.value("protocol", "repeated-kfold");

  std::vector<std::string> names;
  if (options.contains("algorithms")) {
    if (!options["algorithms"].is_array() || options["algorithms"].empty()) {
      raise(ErrorClass::Invalid, "option \"algorithms\" must be a nonempty array");
    }
    for (const json& name : options["algorithms"]) names.push_back(name.get<std::string>());
  } else {
    names.push_back(req_string(options, "algorithm"));
  }

  std::vector<eval::MetricsReport> reports;
  for (const std::string& name : names) {
    learners::Algorithm algorithm = learners::algorithm_from_string(name);
    learners::HyperParams hp = params_of(algorithm, options);
    if (protocol == "repeated-kfold") {
      uint32_t k = options.value("k", 5u);
      uint32_t repeats = options.value("repeats", 1u);
      reports.push_back(eval::cross_validate(algorithm, hp, spec, labeled, k, repeats, seed));
    } else if (protocol == "holdout") {
      double test_fraction = options.value("test_fraction", 0.2);
      reports.push_back(eval::holdout_evaluate(algorithm, hp, spec, labeled, test_fraction, seed));
    } else {
      raise(ErrorClass::Invalid,
            "unknown protocol \"" + protocol + "\" (repeated-kfold or holdout)");
    }
  }

  std::string text = eval::render_report_text(reports);
  std::string csv = eval::render_report_csv(reports);
  json out_path;
  if (options.contains("out")) {
    std::string path = req_string(options, "out");
    std::string format = options.value("format", "csv");
    if (format != "csv" && format != "text") {
      raise(ErrorClass::Invalid, "unknown report format \"" + format + "\"");
    }
    write_file(path, format == "csv" ? csv : text);
    out_path = path;
  }
  set_result(result, json{{"text", text}, {"csv", csv}, {"out", out_path}});
}

void do_grid_search(const json& options, char** result) {
  std::vector<corpus::LabeledReview> labeled = labeled_from_store(options);
  eval::EmbeddingSpec spec = embedding_spec_of(options);
  learners::Algorithm algorithm =
      learners::algorithm_from_string(req_string(options, "algorithm"));
  uint32_t k = options.value("k", 5u);
  uint32_t repeats = options.value("repeats", 1u);
  uint64_t seed = req_u64(options, "seed");

  eval::GridResult grid =
      eval::grid_search(algorithm, eval::default_grid(algorithm), spec, labeled, k, repeats, seed);

  std::string best = grid.best.describe();
  json table = json::array();
  double best_f1 = 0.0;
  double best_acc = 0.0;
  for (const eval::GridCell& cell : grid.table) {
    table.push_back(json{{"config", cell.config.describe()},
                         {"macro_f1", cell.report.macro_f1},
                         {"accuracy", cell.report.accuracy}});
    if (cell.config.describe() == best) {
      best_f1 = cell.report.macro_f1;
      best_acc = cell.report.accuracy;
    }
  }
  set_result(result, json{{"best", best},
                          {"best_macro_f1", best_f1},
                          {"best_accuracy", best_acc},
                          {"table", table}});
}

void do_render_report(const json& options, char** result) {
  std::string content = read_file(req_string(options, "in"));
  std::vector<eval::ReportRow> rows = eval::parse_report_csv(content);
  set_result(result, json{{"text", eval::render_rows_text(rows)}});
}

void do_build_index(const json& options, char** result) {
  std::vector<corpus::LabeledReview> labeled = labeled_from_store(options);
  learners::TrainedModel model = learners::load_model(req_string(options, "model"));
  if (!model.embedding.has_value()) {
    raise(ErrorClass::Invalid, "model carries no embedding source; retrain through the text pipeline");
  }
  double min_similarity = options.value("min_similarity", 0.1);
  std::string project = options.value("project", std::string());

  retrieval::BuildStats stats;
  retrieval::RetrievalIndex index =
      retrieval::build_index(labeled, *model.embedding, textprep::PrepConfig::defaults(),
                             min_similarity, project, &stats);
  std::string out_path = req_string(options, "out");
  retrieval::save_index(index, out_path);
  set_result(result, json{{"out", out_path},
                          {"indexed", stats.indexed},
                          {"skipped_unclear", stats.skipped_unclear},
                          {"skipped_empty_vector", stats.skipped_empty_vector},
                          {"skipped_project", stats.skipped_project},
                          {"fingerprint", fingerprint_hex(index.embedding_fingerprint)}});
}

json hits_json(const std::vector<retrieval::ExampleHit>& hits) {
  json out = json::array();
  for (const retrieval::ExampleHit& hit : hits) {
    out.push_back(json{{"rank", hit.rank},
                       {"review_id", hit.review_id},
                       {"similarity", hit.similarity},
                       {"body", hit.body},
                       {"thread_url", hit.thread_url}});
  }
  return out;
}

}  // namespace

extern "C" {

const char* edre_status_name(edre_status status) {
  if (status == EDRE_OK) return "ok";
  int index = static_cast<int>(status) - 1;
  if (index < 0 || index > static_cast<int>(ErrorClass::Internal)) return "internal";
  return error_class_name(static_cast<ErrorClass>(index));
}

const char* edre_last_error(void) { return g_last_error.c_str(); }

void edre_free(char* p) { std::free(p); }

const char* edre_library_version(void) { return "0.1.0"; }

edre_status edre_ingest(const char* options_json, char** result_json) {
  return guarded([&] { do_ingest(parse_options(options_json), result_json); });
}

edre_status edre_apply_labels(const char* options_json, char** result_json) {
  return guarded([&] { do_apply_labels(parse_options(options_json), result_json); });
}

edre_status edre_corpus_stats(const char* options_json, char** result_json) {
  return guarded([&] { do_corpus_stats(parse_options(options_json), result_json); });
}

edre_status edre_train(const char* options_json, char** result_json) {
  return guarded([&] { do_train(parse_options(options_json), result_json); });
}

edre_status edre_evaluate(const char* options_json, char** result_json) {
  return guarded([&] { do_evaluate(parse_options(options_json), result_json); });
}

edre_status edre_grid_search(const char* options_json, char** result_json) {
  return guarded([&] { do_grid_search(parse_options(options_json), result_json); });
}

edre_status edre_render_report(const char* options_json, char** result_json) {
  return guarded([&] { do_render_report(parse_options(options_json), result_json); });
}

edre_status edre_build_index(const char* options_json, char** result_json) {
  return guarded([&] { do_build_index(parse_options(options_json), result_json); });
}

edre_status edre_model_load(const char* path, edre_model** out) {
  if (out == nullptr) return EDRE_ERR_INVALID;
  *out = nullptr;
  return guarded([&] {
    if (path == nullptr) raise(ErrorClass::Invalid, "model path is null");
    *out = new edre_model{learners::load_model(path)};
  });
}

edre_status edre_model_info(const edre_model* model, char** result_json) {
  return guarded([&] {
    if (model == nullptr) raise(ErrorClass::Invalid, "model handle is null");
    const learners::TrainedModel& m = model->model;
    set_result(result_json,
               json{{"algorithm", learners::to_string(m.algorithm)},
                    {"classes", classes_json(m.classes)},
                    {"dimension", m.dimension},
                    {"seed", m.seed},
                    {"fingerprint", fingerprint_hex(m.embedding_fingerprint)},
                    {"format_version", m.format_version},
                    {"config", m.params.describe()},
                    {"has_embedding", m.embedding.has_value()}});
  });
}

edre_status edre_model_predict(const edre_model* model, const char* text, char** result_json) {
  return guarded([&] {
    if (model == nullptr) raise(ErrorClass::Invalid, "model handle is null");
    if (text == nullptr) raise(ErrorClass::Invalid, "text is null");
    const learners::TrainedModel& m = model->model;
    if (!m.embedding.has_value()) {
      raise(ErrorClass::Invalid, "model carries no embedding source; retrain through the text pipeline");
    }
    if (m.embedding->kind == embed::EmbeddingSource::Kind::External) {
      raise(ErrorClass::Invalid, "model was trained on external vectors, which cannot embed raw text");
    }
    textprep::TokenDoc doc =
        textprep::preprocess_text("query", text, textprep::PrepConfig::defaults());
    learners::Prediction prediction = learners::predict(m, embed::embed_doc(*m.embedding, doc));
    json scores = json::array();
    for (double s : prediction.scores) scores.push_back(s);
    set_result(result_json, json{{"label", to_string(prediction.label)},
                                 {"low_confidence", prediction.low_confidence},
                                 {"classes", classes_json(m.classes)},
                                 {"scores", scores}});
  });
}

void edre_model_free(edre_model* model) { delete model; }

edre_status edre_index_load(const char* path, edre_index** out) {
  if (out == nullptr) return EDRE_ERR_INVALID;
  *out = nullptr;
  return guarded([&] {
    if (path == nullptr) raise(ErrorClass::Invalid, "index path is null");
    *out = new edre_index{retrieval::load_index(path)};
  });
}

edre_status edre_index_info(const edre_index* index, char** result_json) {
  return guarded([&] {
    if (index == nullptr) raise(ErrorClass::Invalid, "index handle is null");
    const retrieval::RetrievalIndex& ix = index->index;
    set_result(result_json, json{{"entries", ix.entries.size()},
                                 {"dimension", ix.dimension},
                                 {"min_similarity", ix.min_similarity},
                                 {"fingerprint", fingerprint_hex(ix.embedding_fingerprint)},
                                 {"format_version", ix.format_version}});
  });
}

void edre_index_free(edre_index* index) { delete index; }

edre_status edre_explain(const edre_model* model, const edre_index* index, const char* text,
                         char** result_json) {
  return guarded([&] {
    if (model == nullptr) raise(ErrorClass::Invalid, "model handle is null");
    if (index == nullptr) raise(ErrorClass::Invalid, "index handle is null");
    if (text == nullptr) raise(ErrorClass::Invalid, "text is null");
    retrieval::Decision decision = retrieval::explain(text, model->model, index->index,
                                                      textprep::PrepConfig::defaults());
    json scores = json::array();
    for (double s : decision.scores) scores.push_back(s);
    set_result(result_json, json{{"clarity", to_string(decision.clarity)},
                                 {"low_confidence", decision.low_confidence},
                                 {"classes", classes_json(decision.classes)},
                                 {"scores", scores},
                                 {"hits", hits_json(decision.hits)}});
  });
}

edre_status edre_serve_start(const char* options_json, edre_server** out, int* bound_port) {
  if (out == nullptr) return EDRE_ERR_INVALID;
  *out = nullptr;
  return guarded([&] {
    json options = parse_options(options_json);
    service::BotConfig config;
    config.host = host_config_of(options);
    config.webhook_secret = options.value("secret", std::string());
    config.posted_log = req_string(options, "posted_log");

    auto server = std::make_unique<edre_server>(std::move(config));
    server->bot.reload_artifacts(req_string(options, "model"), req_string(options, "index"));
    int port = server->server.start(options.value("host", std::string("127.0.0.1")),
                                    options.value("port", 0));
    if (bound_port != nullptr) *bound_port = port;
    *out = server.release();
  });
}

edre_status edre_serve_flush(edre_server* server, size_t* posted) {
  return guarded([&] {
    if (server == nullptr) raise(ErrorClass::Invalid, "server handle is null");
    size_t count = server->bot.flush_retries();
    if (posted != nullptr) *posted = count;
  });
}

edre_status edre_serve_stop(edre_server* server) {
  return guarded([&] {
    if (server == nullptr) raise(ErrorClass::Invalid, "server handle is null");
    server->server.stop();
  });
}

void edre_serve_free(edre_server* server) { delete server; }

}  // extern "C"
