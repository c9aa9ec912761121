#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clarity.hpp"
#include "github_client.hpp"
#include "learners.hpp"
#include "retrieval.hpp"
#include "textprep.hpp"

namespace edre::service {

struct WebhookEvent {
  std::string delivery_id;
  std::string repo;
  int64_t pr_number = 0;
  std::string comment_id;
  std::string comment_body;
  std::string comment_url;
  std::string thread_id;  // optional; nonempty posts an in-thread reply
};

// Strict on required fields (missing or mistyped names the field); unknown
// fields pass through silently.
WebhookEvent parse_event(const std::string& json_body);

// Deterministic markdown: one preamble line, then one numbered item per hit
// with the similarity at 2 decimals, the quoted body (truncated to 200
// bytes plus "..."), and the thread link.
std::string format_explanation(const std::vector<retrieval::ExampleHit>& hits);

// "sha256=<lowercase hex>" over the raw body, keyed by the shared secret.
std::string sign_body(const std::string& secret, const std::string& body);
bool signature_valid(const std::string& secret, const std::string& body,
                     const std::string& header);

// Append-only comment_id -> posted_comment_id log, fsync'd per append and
// replayed on open. At most one record per comment_id.
class PostedRecord {
 public:
  explicit PostedRecord(std::filesystem::path path);
  ~PostedRecord();
  PostedRecord(const PostedRecord&) = delete;
  PostedRecord& operator=(const PostedRecord&) = delete;

  bool contains(const std::string& comment_id) const;
  void append(const std::string& comment_id, const std::string& posted_comment_id);
  size_t size() const { return posted_.size(); }

 private:
  std::filesystem::path path_;
  std::map<std::string, std::string> posted_;
  int fd_ = -1;
};

struct Artifacts {
  learners::TrainedModel model;
  retrieval::RetrievalIndex index;
};

struct BotConfig {
  github::HostConfig host;     // posting target
  std::string webhook_secret;  // falls back to EDRE_WEBHOOK_SECRET
  std::filesystem::path posted_log;
  textprep::PrepConfig prep = textprep::PrepConfig::defaults();
};

struct BotResponse {
  int http_status = 200;
  std::string action;  // posted | skipped-clear | skipped-duplicate |
                       // skipped-no-hits | post-failed | rejected
  std::string comment_id;
  std::optional<Clarity> clarity;
  bool low_confidence = false;
  size_t hit_count = 0;
  std::string posted_comment_id;  // empty unless action == "posted"
  std::string error;
  int64_t timestamp = 0;

  std::string to_json() const;
};

// Transport-free webhook core: verify, parse, dedup, classify, retrieve,
// post. Thread-safe over a shared immutable artifact pair.
class Bot {
 public:
  explicit Bot(BotConfig config);

  BotResponse handle_webhook(const std::string& raw_body, const std::string& signature_header);

  // Validates that the pair shares one embedding fingerprint and that the
  // model can embed raw text; on failure the old pair keeps serving.
  void set_artifacts(Artifacts artifacts);
  void reload_artifacts(const std::filesystem::path& model_path,
                        const std::filesystem::path& index_path);

  // Replays events whose post failed, once each; returns how many posted.
  size_t flush_retries();
  size_t retry_pending() const;

  std::string healthz_json() const;
  std::shared_ptr<const Artifacts> artifacts() const;

 private:
  struct PendingRetry {
    WebhookEvent event;
    std::string text;
  };

  BotResponse classify_and_post(const WebhookEvent& event);
  bool reserve(const std::string& comment_id);
  void release(const std::string& comment_id);

  BotConfig config_;
  std::shared_ptr<const Artifacts> artifacts_;
  PostedRecord posted_;
  std::deque<PendingRetry> retries_;
  std::set<std::string> reserved_;  // in-flight or queued comment ids
  mutable std::mutex mutex_;
};

// HTTP front end: POST /webhook, GET /healthz.
class Server {
 public:
  explicit Server(Bot& bot);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace edre::service
