#include "service.hpp"

#include <fcntl.h>
#include <httplib.h>
#include <openssl/crypto.h>
#include <openssl/hmac.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <nlohmann/json.hpp>
#include <thread>

#include "error.hpp"
#include "util.hpp"

namespace edre::service {
namespace {

using nlohmann::json;

std::string fingerprint_hex(uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

std::string require_string(const json& body, const char* field, bool allow_empty) {
  if (!body.contains(field) || !body[field].is_string()) {
    raise(ErrorClass::Parse,
          std::string("webhook payload: field \"") + field + "\" missing or not a string");
  }
  std::string value = body[field].get<std::string>();
  if (!allow_empty && value.empty()) {
    raise(ErrorClass::Parse, std::string("webhook payload: field \"") + field + "\" is empty");
  }
  return value;
}

// Record lines are tab separated, so ids carrying control bytes are
// rejected up front.
void require_clean_id(const std::string& id, const char* field) {
  for (char c : id) {
    if (static_cast<unsigned char>(c) < 0x20) {
      raise(ErrorClass::Parse,
            std::string("webhook payload: field \"") + field + "\" contains control characters");
    }
  }
}

std::string truncate_quote(const std::string& body) {
  std::string text = body;
  for (char& c : text) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  if (text.size() <= 200) return text;
  size_t cut = 200;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xc0) == 0x80) --cut;
  return text.substr(0, cut) + "...";
}

}  // namespace

WebhookEvent parse_event(const std::string& json_body) {
  json body = json::parse(json_body, nullptr, false);
  if (!body.is_object()) raise(ErrorClass::Parse, "webhook payload is not a JSON object");

  WebhookEvent event;
  event.delivery_id = require_string(body, "delivery_id", false);
  event.repo = require_string(body, "repo", false);
  if (!body.contains("pr_number") || !body["pr_number"].is_number_integer()) {
    raise(ErrorClass::Parse, "webhook payload: field \"pr_number\" missing or not an integer");
  }
  event.pr_number = body["pr_number"].get<int64_t>();
  event.comment_id = require_string(body, "comment_id", false);
  require_clean_id(event.comment_id, "comment_id");
  event.comment_body = require_string(body, "comment_body", true);
  event.comment_url = require_string(body, "comment_url", true);
  if (body.contains("thread_id")) {
    if (!body["thread_id"].is_string()) {
      raise(ErrorClass::Parse, "webhook payload: field \"thread_id\" is not a string");
    }
    event.thread_id = body["thread_id"].get<std::string>();
  }
  return event;
}

std::string format_explanation(const std::vector<retrieval::ExampleHit>& hits) {
  if (hits.empty()) raise(ErrorClass::Invalid, "no hits to format");
  std::string out = "Similar review comments that were rated clear:\n\n";
  for (const retrieval::ExampleHit& hit : hits) {
    out += std::to_string(hit.rank);
    out += ". (similarity ";
    out += format_double(hit.similarity, 2);
    out += ") \"";
    out += truncate_quote(hit.body);
    out += "\" ([thread](";
    out += hit.thread_url;
    out += "))\n";
  }
  return out;
}

std::string sign_body(const std::string& secret, const std::string& body) {
  unsigned char mac[EVP_MAX_MD_SIZE];
  unsigned int mac_len = 0;
  HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
       reinterpret_cast<const unsigned char*>(body.data()), body.size(), mac, &mac_len);
  static const char* hex = "0123456789abcdef";
  std::string out = "sha256=";
  for (unsigned int i = 0; i < mac_len; ++i) {
    out += hex[mac[i] >> 4];
    out += hex[mac[i] & 0x0f];
  }
  return out;
}

bool signature_valid(const std::string& secret, const std::string& body,
                     const std::string& header) {
  std::string expected = sign_body(secret, body);
  if (header.size() != expected.size()) return false;
  return CRYPTO_memcmp(header.data(), expected.data(), expected.size()) == 0;
}

PostedRecord::PostedRecord(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) raise(ErrorClass::Invalid, "posted-record path is empty");
  if (std::filesystem::exists(path_)) {
    std::string content = read_file(path_);
    size_t line_no = 0;
    for (const std::string& line : split(content, '\n')) {
      ++line_no;
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      if (tab == std::string::npos || tab == 0) {
        raise(ErrorClass::Parse, path_.string() + " line " + std::to_string(line_no) +
                                     ": expected <comment_id>\\t<posted_comment_id>");
      }
      posted_[line.substr(0, tab)] = line.substr(tab + 1);
    }
  }
  fd_ = ::open(path_.c_str(), O_CREAT | O_WRONLY | O_APPEND, 0644);
  if (fd_ < 0) raise(ErrorClass::Io, "cannot open " + path_.string() + " for append");
}

PostedRecord::~PostedRecord() {
  if (fd_ >= 0) ::close(fd_);
}

bool PostedRecord::contains(const std::string& comment_id) const {
  return posted_.count(comment_id) > 0;
}

void PostedRecord::append(const std::string& comment_id, const std::string& posted_comment_id) {
  if (contains(comment_id)) {
    raise(ErrorClass::Duplicate, "comment " + comment_id + " already recorded");
  }
  std::string line = comment_id + "\t" + posted_comment_id + "\n";
  const char* data = line.data();
  size_t left = line.size();
  while (left > 0) {
    ssize_t n = ::write(fd_, data, left);
    if (n <= 0) raise(ErrorClass::Io, "write to " + path_.string() + " failed");
    data += n;
    left -= static_cast<size_t>(n);
  }
  if (::fsync(fd_) != 0) raise(ErrorClass::Io, "fsync of " + path_.string() + " failed");
  posted_[comment_id] = posted_comment_id;
}

std::string BotResponse::to_json() const {
  json body;
  body["action"] = action;
  body["comment_id"] = comment_id.empty() ? json() : json(comment_id);
  body["clarity"] = clarity.has_value() ? json(to_string(*clarity)) : json();
  body["low_confidence"] = low_confidence;
  body["hit_count"] = hit_count;
  body["posted_comment_id"] = posted_comment_id.empty() ? json() : json(posted_comment_id);
  body["error"] = error.empty() ? json() : json(error);
  body["timestamp"] = format_rfc3339(timestamp);
  return body.dump();
}

Bot::Bot(BotConfig config) : config_(std::move(config)), posted_(config_.posted_log) {
  if (config_.webhook_secret.empty()) {
    const char* env = std::getenv("EDRE_WEBHOOK_SECRET");
    if (env != nullptr) config_.webhook_secret = env;
  }
  if (config_.webhook_secret.empty()) {
    raise(ErrorClass::Invalid, "webhook secret is empty (set EDRE_WEBHOOK_SECRET)");
  }
}

void Bot::set_artifacts(Artifacts artifacts) {
  if (!artifacts.model.embedding.has_value()) {
    raise(ErrorClass::Invalid, "model carries no embedding source; retrain through the text pipeline");
  }
  if (artifacts.model.embedding_fingerprint != artifacts.index.embedding_fingerprint) {
    raise(ErrorClass::Fingerprint,
          "model fingerprint " + fingerprint_hex(artifacts.model.embedding_fingerprint) +
              " does not match index fingerprint " +
              fingerprint_hex(artifacts.index.embedding_fingerprint) + "; reload rejected");
  }
  auto next = std::make_shared<const Artifacts>(std::move(artifacts));
  std::lock_guard<std::mutex> lock(mutex_);
  artifacts_ = std::move(next);
}

void Bot::reload_artifacts(const std::filesystem::path& model_path,
                           const std::filesystem::path& index_path) {
  Artifacts next{learners::load_model(model_path), retrieval::load_index(index_path)};
  set_artifacts(std::move(next));
}

std::shared_ptr<const Artifacts> Bot::artifacts() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return artifacts_;
}

bool Bot::reserve(const std::string& comment_id) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (posted_.contains(comment_id)) return false;
  return reserved_.insert(comment_id).second;
}

void Bot::release(const std::string& comment_id) {
  std::lock_guard<std::mutex> lock(mutex_);
  reserved_.erase(comment_id);
}

BotResponse Bot::handle_webhook(const std::string& raw_body,
                                const std::string& signature_header) {
  BotResponse resp;
  resp.timestamp = static_cast<int64_t>(std::time(nullptr));

  if (!signature_valid(config_.webhook_secret, raw_body, signature_header)) {
    resp.http_status = 401;
    resp.action = "rejected";
    resp.error = "signature mismatch";
    return resp;
  }

  WebhookEvent event;
  try {
    event = parse_event(raw_body);
  } catch (const Error& e) {
    resp.http_status = 400;
    resp.action = "rejected";
    resp.error = e.what();
    return resp;
  }
  resp.comment_id = event.comment_id;

  if (artifacts() == nullptr) {
    resp.http_status = 503;
    resp.action = "rejected";
    resp.error = "no model/index pair loaded";
    return resp;
  }
  if (!reserve(event.comment_id)) {
    resp.action = "skipped-duplicate";
    return resp;
  }

  BotResponse out = classify_and_post(event);
  out.comment_id = event.comment_id;
  out.timestamp = resp.timestamp;
  return out;
}

BotResponse Bot::classify_and_post(const WebhookEvent& event) {
  BotResponse resp;
  std::shared_ptr<const Artifacts> pair = artifacts();

  retrieval::Decision decision;
  try {
    decision = retrieval::explain(event.comment_body, pair->model, pair->index, config_.prep);
  } catch (const Error& e) {
    release(event.comment_id);
    resp.http_status = 500;
    resp.action = "rejected";
    resp.error = e.what();
    return resp;
  }
  resp.clarity = decision.clarity;
  resp.low_confidence = decision.low_confidence;
  resp.hit_count = decision.hits.size();

  if (!needs_explanation(decision.clarity)) {
    release(event.comment_id);
    resp.action = "skipped-clear";
    return resp;
  }
  if (decision.hits.empty()) {
    release(event.comment_id);
    resp.action = "skipped-no-hits";
    return resp;
  }

  std::string text = format_explanation(decision.hits);
  std::string posted_id;
  try {
    posted_id = github::post_comment(config_.host, event.repo, event.pr_number, text,
                                     event.thread_id);
  } catch (const Error& e) {
    // Reservation stays held while the retry is queued, so redeliveries
    // cannot race a second post.
    std::lock_guard<std::mutex> lock(mutex_);
    retries_.push_back(PendingRetry{event, text});
    resp.http_status = 502;
    resp.action = "post-failed";
    resp.error = e.what();
    return resp;
  }

  {
    std::lock_guard<std::mutex> lock(mutex_);
    posted_.append(event.comment_id, posted_id);
    reserved_.erase(event.comment_id);
  }
  resp.action = "posted";
  resp.posted_comment_id = posted_id;
  return resp;
}

size_t Bot::flush_retries() {
  std::deque<PendingRetry> pending;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    pending.swap(retries_);
  }
  size_t posted = 0;
  for (PendingRetry& retry : pending) {
    std::string posted_id;
    try {
      posted_id = github::post_comment(config_.host, retry.event.repo, retry.event.pr_number,
                                       retry.text, retry.event.thread_id);
    } catch (const Error&) {
      release(retry.event.comment_id);
      continue;
    }
    std::lock_guard<std::mutex> lock(mutex_);
    posted_.append(retry.event.comment_id, posted_id);
    reserved_.erase(retry.event.comment_id);
    ++posted;
  }
  return posted;
}

size_t Bot::retry_pending() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return retries_.size();
}

std::string Bot::healthz_json() const {
  std::shared_ptr<const Artifacts> pair = artifacts();
  json body;
  if (pair == nullptr) {
    body["status"] = "empty";
  } else {
    body["status"] = "ok";
    body["algorithm"] = learners::to_string(pair->model.algorithm);
    body["model_fingerprint"] = fingerprint_hex(pair->model.embedding_fingerprint);
    body["index_fingerprint"] = fingerprint_hex(pair->index.embedding_fingerprint);
    body["index_entries"] = pair->index.entries.size();
  }
  return body.dump();
}

struct Server::Impl {
  Bot& bot;
  httplib::Server svr;
  std::thread thread;
  std::atomic<bool> running{false};

  explicit Impl(Bot& b) : bot(b) {}
};

Server::Server(Bot& bot) : impl_(std::make_unique<Impl>(bot)) {}

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port) {
  Bot& bot = impl_->bot;
  impl_->svr.Post("/webhook", [&bot](const httplib::Request& req, httplib::Response& res) {
    BotResponse out;
    try {
      out = bot.handle_webhook(req.body, req.get_header_value("X-Hub-Signature-256"));
    } catch (const std::exception& e) {
      out.http_status = 500;
      out.action = "rejected";
      out.error = e.what();
      out.timestamp = static_cast<int64_t>(std::time(nullptr));
    }
    res.status = out.http_status;
    res.set_content(out.to_json(), "application/json");
  });
  impl_->svr.Get("/healthz", [&bot](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(bot.healthz_json(), "application/json");
  });

  int bound = port;
  if (port == 0) {
    bound = impl_->svr.bind_to_any_port(host);
    if (bound < 0) raise(ErrorClass::Io, "cannot bind " + host);
  } else if (!impl_->svr.bind_to_port(host, port)) {
    raise(ErrorClass::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->running = true;
  impl_->thread = std::thread([this] { impl_->svr.listen_after_bind(); });
  impl_->svr.wait_until_ready();
  return bound;
}

void Server::stop() {
  if (!impl_ || !impl_->running.exchange(false)) return;
  impl_->svr.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace edre::service
