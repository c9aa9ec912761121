#include <doctest.h>
#include <edre.h>
#include <httplib.h>

#include <cstring>
#include <nlohmann/json.hpp>
#include <string>

#include "corpus.hpp"
#include "fixtures.hpp"
#include "mock_host.hpp"
#include "service.hpp"
#include "synthetic.hpp"
#include "temp.hpp"
#include "util.hpp"

using namespace edre;
using edre::test::MockHost;
using nlohmann::json;

namespace {

// Result strings move through json::parse and are always released.
struct Result {
  char* raw = nullptr;

  ~Result() { edre_free(raw); }
  json parsed() const {
    REQUIRE(raw != nullptr);
    return json::parse(raw);
  }
};

void write_store(const std::filesystem::path& path,
                 const std::vector<corpus::LabeledReview>& reviews) {
  corpus::CorpusStore store(path);
  std::vector<corpus::CorpusEntry> entries;
  for (const corpus::LabeledReview& review : reviews) {
    corpus::CorpusEntry entry;
    entry.comment = review.comment;
    entry.clarity = review.clarity;
    entry.vote_counts = review.vote_counts;
    entries.push_back(entry);
  }
  store.rewrite(entries);
}

// Store, trained model, and index on disk, everything produced through the
// C surface so the test exercises it end to end.
struct DiskFixture {
  edre::test::TempDir dir;
  std::string store_path;
  std::string model_path;
  std::string index_path;

  DiskFixture() {
    store_path = dir.file("corpus.jsonl").string();
    model_path = dir.file("model.bin").string();
    index_path = dir.file("examples.index").string();
    write_store(store_path, edre::test::make_artifact_fixture().reviews);

    json train_options{{"store", store_path},
                       {"algorithm", "nb"},
                       {"seed", 42},
                       {"model_out", model_path}};
    Result trained;
    REQUIRE(edre_train(train_options.dump().c_str(), &trained.raw) == EDRE_OK);

    json index_options{{"store", store_path}, {"model", model_path}, {"out", index_path}};
    Result indexed;
    REQUIRE(edre_build_index(index_options.dump().c_str(), &indexed.raw) == EDRE_OK);
  }
};

}  // namespace

TEST_CASE("status names and error reporting") {
  CHECK(std::string(edre_status_name(EDRE_OK)) == "ok");
  CHECK(std::string(edre_status_name(EDRE_ERR_IO)) == "io");
  CHECK(std::string(edre_status_name(EDRE_ERR_PARSE)) == "parse");
  CHECK(std::string(edre_status_name(EDRE_ERR_INVALID)) == "invalid");
  CHECK(std::string(edre_status_name(EDRE_ERR_DUPLICATE)) == "duplicate");
  CHECK(std::string(edre_status_name(EDRE_ERR_NOT_FOUND)) == "not_found");
  CHECK(std::string(edre_status_name(EDRE_ERR_AUTH)) == "auth");
  CHECK(std::string(edre_status_name(EDRE_ERR_RATE_LIMIT)) == "rate_limit");
  CHECK(std::string(edre_status_name(EDRE_ERR_NETWORK)) == "network");
  CHECK(std::string(edre_status_name(EDRE_ERR_VERSION)) == "version");
  CHECK(std::string(edre_status_name(EDRE_ERR_FINGERPRINT)) == "fingerprint");
  CHECK(std::string(edre_status_name(EDRE_ERR_INTERNAL)) == "internal");
  CHECK(std::string(edre_library_version()) == "0.1.0");

  SUBCASE("failures leave a message, successes clear it") {
    Result result;
    CHECK(edre_corpus_stats("not json", &result.raw) == EDRE_ERR_PARSE);
    CHECK(std::string(edre_last_error()).find("JSON object") != std::string::npos);
    CHECK(edre_corpus_stats(nullptr, &result.raw) == EDRE_ERR_INVALID);

    edre::test::TempDir dir;
    write_store(dir.file("c.jsonl"), edre::test::make_artifact_fixture().reviews);
    json options{{"store", dir.file("c.jsonl").string()}};
    CHECK(edre_corpus_stats(options.dump().c_str(), &result.raw) == EDRE_OK);
    CHECK(std::string(edre_last_error()).empty());
  }
  SUBCASE("a missing store maps to the io status") {
    Result result;
    json options{{"store", "/nonexistent/corpus.jsonl"}};
    CHECK(edre_corpus_stats(options.dump().c_str(), &result.raw) == EDRE_ERR_IO);
    CHECK(std::string(edre_last_error()).find("corpus.jsonl") != std::string::npos);
  }
  SUBCASE("missing options are named") {
    Result result;
    CHECK(edre_train("{}", &result.raw) == EDRE_ERR_INVALID);
    CHECK(std::string(edre_last_error()).find("store") != std::string::npos);
  }
}

TEST_CASE("corpus operations through the C surface") {
  edre::test::TempDir dir;
  std::string store_path = dir.file("corpus.jsonl").string();

  SUBCASE("stats summarize a labeled store") {
    write_store(store_path, edre::test::synthetic_reviews(40, 7));
    Result result;
    json options{{"store", store_path}};
    REQUIRE(edre_corpus_stats(options.dump().c_str(), &result.raw) == EDRE_OK);
    json stats = result.parsed();
    CHECK(stats["n_reviews"] == 40);
    CHECK(stats["avg_words"].get<double>() > 0);
    CHECK(stats["label_distribution"].size() == 4);
    double share = 0;
    for (const json& s : stats["label_distribution"]) share += s.get<double>();
    CHECK(share == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(stats["text"].get<std::string>().find("reviews") != std::string::npos);
  }
  SUBCASE("ingest pulls from a host and apply_labels annotates") {
    MockHost host;
    host.add_comment("acme/widget",
                     json{{"id", "m1"},
                          {"body", "Rename this to total."},
                          {"user", {{"login", "alice"}}},
                          {"html_url", "https://host.test/pr/1#m1"},
                          {"created_at", format_rfc3339(1640995200)}});
    host.add_comment("acme/widget",
                     json{{"id", "m2"},
                          {"body", "wat"},
                          {"user", {{"login", "bob"}}},
                          {"html_url", "https://host.test/pr/1#m2"},
                          {"created_at", format_rfc3339(1640995300)}});

    json ingest_options{{"store", store_path},
                        {"base_url", host.base_url()},
                        {"repos", json::array({"acme/widget"})},
                        {"since", "2022-01-01T00:00:00Z"},
                        {"until", "2022-01-02T00:00:00Z"}};
    Result ingested;
    REQUIRE(edre_ingest(ingest_options.dump().c_str(), &ingested.raw) == EDRE_OK);
    CHECK(ingested.parsed()["fetched"] == 2);
    CHECK(ingested.parsed()["added"] == 2);

    auto labels_path = dir.file("labels.csv");
    write_file(labels_path,
               "review_id,rater_id,label\n"
               "m1,r1,clear\nm1,r2,clear\nm2,r1,unclear\nm2,r2,unclear\n");
    json label_options{{"store", store_path},
                       {"labels", labels_path.string()},
                       {"min_votes", 2}};
    Result applied;
    REQUIRE(edre_apply_labels(label_options.dump().c_str(), &applied.raw) == EDRE_OK);
    CHECK(applied.parsed()["reviews"] == 2);
    CHECK(applied.parsed()["labeled"] == 2);

    corpus::CorpusStore store(store_path);
    auto labeled = corpus::labeled_of(store.load());
    REQUIRE(labeled.size() == 2);
    CHECK(labeled[0].clarity == Clarity::Clear);
    CHECK(labeled[1].clarity == Clarity::Unclear);
  }
}

TEST_CASE("train, index, predict, and explain through handles") {
  DiskFixture f;

  edre_model* model = nullptr;
  REQUIRE(edre_model_load(f.model_path.c_str(), &model) == EDRE_OK);
  REQUIRE(model != nullptr);
  edre_index* index = nullptr;
  REQUIRE(edre_index_load(f.index_path.c_str(), &index) == EDRE_OK);
  REQUIRE(index != nullptr);

  SUBCASE("info mirrors the artifacts") {
    Result model_info;
    REQUIRE(edre_model_info(model, &model_info.raw) == EDRE_OK);
    json m = model_info.parsed();
    CHECK(m["algorithm"] == "nb");
    CHECK(m["seed"] == 42);
    CHECK(m["classes"].size() == 3);
    CHECK(m["has_embedding"] == true);
    CHECK(m["fingerprint"].get<std::string>().size() == 16);

    Result index_info;
    REQUIRE(edre_index_info(index, &index_info.raw) == EDRE_OK);
    json ix = index_info.parsed();
    CHECK(ix["entries"] == 5);
    CHECK(ix["min_similarity"] == 0.1);
    CHECK(ix["fingerprint"] == m["fingerprint"]);
  }
  SUBCASE("prediction returns a distribution") {
    Result prediction;
    REQUIRE(edre_model_predict(model, "Please rename this variable to count.",
                               &prediction.raw) == EDRE_OK);
    json p = prediction.parsed();
    CHECK(p["label"] == "clear");
    CHECK(p["low_confidence"] == false);
    REQUIRE(p["scores"].size() == p["classes"].size());
    double sum = 0;
    for (const json& s : p["scores"]) sum += s.get<double>();
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("explain returns ranked hits for unclear text") {
    Result decision;
    REQUIRE(edre_explain(model, index, "huh cache result somewhere", &decision.raw) == EDRE_OK);
    json d = decision.parsed();
    CHECK(d["clarity"] == "unclear");
    REQUIRE(d["hits"].size() == 2);
    CHECK(d["hits"][0]["rank"] == 1);
    CHECK(d["hits"][0]["review_id"] == "s1");
    CHECK(d["hits"][0]["similarity"].get<double>() >=
          d["hits"][1]["similarity"].get<double>());
    CHECK(d["hits"][0]["thread_url"].get<std::string>().find("https://") == 0);

    Result clear_decision;
    REQUIRE(edre_explain(model, index, "Please rename this variable to count.",
                         &clear_decision.raw) == EDRE_OK);
    CHECK(clear_decision.parsed()["hits"].empty());
  }
  SUBCASE("null handles are invalid") {
    Result r;
    CHECK(edre_model_info(nullptr, &r.raw) == EDRE_ERR_INVALID);
    CHECK(edre_model_predict(nullptr, "x", &r.raw) == EDRE_ERR_INVALID);
    CHECK(edre_model_predict(model, nullptr, &r.raw) == EDRE_ERR_INVALID);
    CHECK(edre_explain(model, nullptr, "x", &r.raw) == EDRE_ERR_INVALID);
    edre_model* missing = nullptr;
    CHECK(edre_model_load("/nonexistent/model.bin", &missing) == EDRE_ERR_IO);
    CHECK(missing == nullptr);
  }
  SUBCASE("a mismatched index is a fingerprint error") {
    edre::test::TempDir dir;
    auto other = edre::test::make_artifact_fixture(true);
    auto other_index = dir.file("other.index");
    retrieval::save_index(other.index, other_index);
    edre_index* mismatched = nullptr;
    REQUIRE(edre_index_load(other_index.string().c_str(), &mismatched) == EDRE_OK);
    Result r;
    CHECK(edre_explain(model, mismatched, "huh cache result somewhere", &r.raw) ==
          EDRE_ERR_FINGERPRINT);
    CHECK(std::string(edre_last_error()).find("differ") != std::string::npos);
    edre_index_free(mismatched);
  }

  edre_model_free(model);
  edre_index_free(index);
  edre_model_free(nullptr);
  edre_index_free(nullptr);
}

TEST_CASE("evaluation and grid search through the C surface") {
  edre::test::TempDir dir;
  std::string store_path = dir.file("corpus.jsonl").string();
  write_store(store_path, edre::test::synthetic_reviews(60, 3));

  SUBCASE("cross validation is deterministic and writable") {
    auto out_path = dir.file("report.csv");
    json options{{"store", store_path},
                 {"algorithm", "nb"},
                 {"protocol", "repeated-kfold"},
                 {"k", 5},
                 {"repeats", 2},
                 {"seed", 42},
                 {"out", out_path.string()}};
    Result first;
    REQUIRE(edre_evaluate(options.dump().c_str(), &first.raw) == EDRE_OK);
    json r1 = first.parsed();
    CHECK(r1["csv"].get<std::string>() == read_file(out_path));
    CHECK(r1["out"] == out_path.string());
    CHECK(r1["text"].get<std::string>().find("nb") != std::string::npos);

    Result second;
    REQUIRE(edre_evaluate(options.dump().c_str(), &second.raw) == EDRE_OK);
    CHECK(second.parsed()["csv"] == r1["csv"]);

    Result rendered;
    json render_options{{"in", out_path.string()}};
    REQUIRE(edre_render_report(render_options.dump().c_str(), &rendered.raw) == EDRE_OK);
    CHECK(rendered.parsed()["text"].get<std::string>().find("MACRO") != std::string::npos);
  }
  SUBCASE("several algorithms in one call") {
    json options{{"store", store_path},
                 {"algorithms", json::array({"nb", "svm"})},
                 {"protocol", "holdout"},
                 {"test_fraction", 0.25},
                 {"seed", 7}};
    Result result;
    REQUIRE(edre_evaluate(options.dump().c_str(), &result.raw) == EDRE_OK);
    std::string text = result.parsed()["text"].get<std::string>();
    CHECK(text.find("nb") != std::string::npos);
    CHECK(text.find("svm") != std::string::npos);
  }
  SUBCASE("unknown protocol is invalid") {
    json options{{"store", store_path},
                 {"algorithm", "nb"},
                 {"protocol", "loocv"},
                 {"seed", 1}};
    Result result;
    CHECK(edre_evaluate(options.dump().c_str(), &result.raw) == EDRE_ERR_INVALID);
    CHECK(std::string(edre_last_error()).find("loocv") != std::string::npos);
  }
  SUBCASE("grid search reports its table and best cell") {
    json options{{"store", store_path}, {"algorithm", "nb"}, {"k", 3}, {"seed", 42}};
    Result result;
    REQUIRE(edre_grid_search(options.dump().c_str(), &result.raw) == EDRE_OK);
    json g = result.parsed();
    CHECK(g["table"].size() == 3);
    bool best_in_table = false;
    for (const json& cell : g["table"]) {
      if (cell["config"] == g["best"]) {
        best_in_table = true;
        CHECK(cell["macro_f1"] == g["best_macro_f1"]);
      }
      CHECK(cell["macro_f1"].get<double>() >= 0.0);
      CHECK(cell["accuracy"].get<double>() <= 1.0);
    }
    CHECK(best_in_table);
  }
  SUBCASE("custom params flow through to the trained config") {
    json options{{"store", store_path},
                 {"algorithm", "nb"},
                 {"seed", 1},
                 {"params", {{"alpha", 0.5}}},
                 {"model_out", dir.file("m.bin").string()}};
    Result result;
    REQUIRE(edre_train(options.dump().c_str(), &result.raw) == EDRE_OK);
    CHECK(result.parsed()["config"] == "alpha=0.5000");
  }
}

TEST_CASE("webhook service lifecycle through the C surface") {
  MockHost host;
  DiskFixture f;
  std::string posted_log = f.dir.file("posted.log").string();

  json options{{"model", f.model_path},
               {"index", f.index_path},
               {"posted_log", posted_log},
               {"base_url", host.base_url()},
               {"token", "t0ken"},
               {"secret", "s3cret"},
               {"port", 0}};

  edre_server* server = nullptr;
  int port = 0;
  REQUIRE(edre_serve_start(options.dump().c_str(), &server, &port) == EDRE_OK);
  REQUIRE(server != nullptr);
  REQUIRE(port > 0);

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(json::parse(health->body)["status"] == "ok");

  json event{{"delivery_id", "d1"},      {"repo", "acme/widget"},
             {"pr_number", 42},          {"comment_id", "r1"},
             {"comment_body", "huh cache result somewhere"},
             {"comment_url", "https://host.test/acme/widget/pull/42#r1"}};
  std::string body = event.dump();
  auto res = client.Post("/webhook",
                         {{"X-Hub-Signature-256", service::sign_body("s3cret", body)}}, body,
                         "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["action"] == "posted");
  CHECK(host.posted().size() == 1);

  SUBCASE("flush reposts a queued failure") {
    host.script_post({502, "{\"message\":\"bad gateway\"}", ""});
    host.script_post({502, "{\"message\":\"bad gateway\"}", ""});
    json retry_event = event;
    retry_event["comment_id"] = "r2";
    retry_event["delivery_id"] = "d2";
    std::string retry_body = retry_event.dump();
    auto failed = client.Post(
        "/webhook", {{"X-Hub-Signature-256", service::sign_body("s3cret", retry_body)}},
        retry_body, "application/json");
    REQUIRE(failed);
    CHECK(failed->status == 502);

    size_t posted = 0;
    REQUIRE(edre_serve_flush(server, &posted) == EDRE_OK);
    CHECK(posted == 1);
    CHECK(host.posted().size() == 2);
  }

  REQUIRE(edre_serve_stop(server) == EDRE_OK);
  edre_serve_free(server);
  edre_serve_free(nullptr);

  SUBCASE("a fingerprint mismatch refuses to start") {
    auto other = edre::test::make_artifact_fixture(true);
    auto other_index = f.dir.file("other.index");
    retrieval::save_index(other.index, other_index);
    json bad = options;
    bad["index"] = other_index.string();
    bad["posted_log"] = f.dir.file("posted2.log").string();
    edre_server* refused = nullptr;
    CHECK(edre_serve_start(bad.dump().c_str(), &refused, nullptr) == EDRE_ERR_FINGERPRINT);
    CHECK(refused == nullptr);
  }
  SUBCASE("flush and stop require a handle") {
    size_t posted = 0;
    CHECK(edre_serve_flush(nullptr, &posted) == EDRE_ERR_INVALID);
    CHECK(edre_serve_stop(nullptr) == EDRE_ERR_INVALID);
  }
}
