#include "github_client.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "error.hpp"
#include "util.hpp"

namespace edre::github {
namespace {

using nlohmann::json;

constexpr uint32_t kMaxRetryAfterSeconds = 30;

httplib::Headers request_headers(const HostConfig& config) {
  httplib::Headers headers{{"Accept", "application/vnd.github+json"}, {"User-Agent", "edre-bot"}};
  std::string token = auth_token(config);
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  return headers;
}

std::string host_message(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_object() && parsed.contains("message") && parsed["message"].is_string()) {
    return parsed["message"].get<std::string>();
  }
  return body.empty() ? "(no response body)" : body;
}

bool is_rate_limited(const httplib::Response& res) {
  if (res.status == 429) return true;
  return res.status == 403 && (res.has_header("Retry-After") ||
                               res.get_header_value("X-RateLimit-Remaining") == "0");
}

uint32_t retry_after_seconds(const httplib::Response& res) {
  std::string value = res.get_header_value("Retry-After");
  if (value.empty()) return 1;
  char* end = nullptr;
  long seconds = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || seconds < 0) return 1;
  return std::min<uint32_t>(static_cast<uint32_t>(seconds), kMaxRetryAfterSeconds);
}

// Runs one request, absorbing rate-limit responses by waiting out the
// advertised Retry-After and retrying up to the configured budget.
httplib::Response request_with_rate_limit(httplib::Client& client, const HostConfig& config,
                                          const std::string& what,
                                          const std::function<httplib::Result()>& send) {
  for (uint32_t attempt = 0;; ++attempt) {
    httplib::Result res = send();
    if (!res) {
      raise(ErrorClass::Network, what + ": " + httplib::to_string(res.error()));
    }
    if (!is_rate_limited(*res)) return *res;
    uint32_t wait = retry_after_seconds(*res);
    if (attempt >= config.rate_limit_retries) {
      raise(ErrorClass::RateLimit, what + ": rate limited after " + std::to_string(attempt + 1) +
                                       " attempts (last Retry-After " + std::to_string(wait) +
                                       "s)");
    }
    if (wait > 0) std::this_thread::sleep_for(std::chrono::seconds(wait));
  }
}

bool link_header_has_next(const std::string& link) {
  for (const std::string& part : split(link, ',')) {
    if (trim(part).find("rel=\"next\"") != std::string::npos) return true;
  }
  return false;
}

corpus::ReviewComment comment_from_json(const json& item, const std::string& repo,
                                        const std::string& what) {
  if (!item.is_object() || !item.contains("id")) {
    raise(ErrorClass::Parse, what + ": comment object missing id");
  }
  corpus::ReviewComment comment;
  if (item["id"].is_string()) {
    comment.id = item["id"].get<std::string>();
  } else if (item["id"].is_number_integer()) {
    comment.id = std::to_string(item["id"].get<int64_t>());
  } else {
    raise(ErrorClass::Parse, what + ": comment id is neither string nor integer");
  }
  comment.project = repo;
  if (item.contains("body") && item["body"].is_string()) {
    comment.body = item["body"].get<std::string>();
  }
  if (item.contains("user") && item["user"].is_object() && item["user"].contains("login") &&
      item["user"]["login"].is_string()) {
    comment.author = item["user"]["login"].get<std::string>();
  }
  if (item.contains("html_url") && item["html_url"].is_string()) {
    comment.thread_url = item["html_url"].get<std::string>();
  }
  if (!item.contains("created_at") || !item["created_at"].is_string()) {
    raise(ErrorClass::Parse, what + ": comment " + comment.id + " missing created_at");
  }
  comment.created_at = parse_rfc3339(item["created_at"].get<std::string>());
  return comment;
}

void check_list_status(const httplib::Response& res, const std::string& what) {
  if (res.status == 200) return;
  if (res.status == 401 || res.status == 403) {
    raise(ErrorClass::Auth, what + ": " + std::to_string(res.status) + " " +
                                host_message(res.body));
  }
  raise(ErrorClass::Network,
        what + ": unexpected status " + std::to_string(res.status) + " " +
            host_message(res.body));
}

}  // namespace

std::string auth_token(const HostConfig& config) {
  if (!config.token.empty()) return config.token;
  const char* env = std::getenv("EDRE_TOKEN");
  return env == nullptr ? std::string() : std::string(env);
}

std::vector<corpus::ReviewComment> fetch_review_comments(const HostConfig& config, int64_t since,
                                                         int64_t until) {
  if (config.base_url.empty()) raise(ErrorClass::Invalid, "host base_url is empty");
  if (since > until) raise(ErrorClass::Invalid, "ingestion window is empty (since > until)");
  uint32_t per_page = config.per_page == 0 ? 100 : config.per_page;

  httplib::Client client(config.base_url);
  client.set_follow_location(true);
  httplib::Headers headers = request_headers(config);

  std::vector<corpus::ReviewComment> out;
  std::set<std::string> seen;
  for (const std::string& repo : config.repos) {
    for (uint32_t page = 1;; ++page) {
      std::string path = "/repos/" + repo + "/pulls/comments?per_page=" +
                         std::to_string(per_page) + "&page=" + std::to_string(page) +
                         "&since=" + format_rfc3339(since);
      std::string what = "list review comments for " + repo + " page " + std::to_string(page);
      httplib::Response res = request_with_rate_limit(
          client, config, what, [&] { return client.Get(path, headers); });
      check_list_status(res, what);

      json parsed = json::parse(res.body, nullptr, false);
      if (!parsed.is_array()) {
        raise(ErrorClass::Parse, what + ": response is not a JSON array");
      }
      for (const json& item : parsed) {
        corpus::ReviewComment comment = comment_from_json(item, repo, what);
        if (comment.created_at < since || comment.created_at > until) continue;
        if (!seen.insert(comment.id).second) continue;
        out.push_back(std::move(comment));
      }

      if (res.has_header("Link")) {
        if (!link_header_has_next(res.get_header_value("Link"))) break;
      } else if (parsed.size() < per_page) {
        break;
      }
    }
  }
  return out;
}

IngestResult ingest_from_host(const HostConfig& config, int64_t since, int64_t until,
                              corpus::CorpusStore& store) {
  std::vector<corpus::ReviewComment> comments = fetch_review_comments(config, since, until);
  IngestResult result;
  result.fetched = comments.size();
  result.added = store.append_new(comments);
  return result;
}

std::string post_comment(const HostConfig& config, const std::string& repo, int64_t pr_number,
                         const std::string& body, const std::string& reply_to) {
  if (config.base_url.empty()) raise(ErrorClass::Invalid, "host base_url is empty");
  if (repo.empty()) raise(ErrorClass::Invalid, "repo is empty");
  if (body.empty()) raise(ErrorClass::Invalid, "comment body is empty");

  httplib::Client client(config.base_url);
  httplib::Headers headers = request_headers(config);
  std::string path =
      reply_to.empty()
          ? "/repos/" + repo + "/issues/" + std::to_string(pr_number) + "/comments"
          : "/repos/" + repo + "/pulls/" + std::to_string(pr_number) + "/comments/" + reply_to +
                "/replies";
  std::string payload = json{{"body", body}}.dump();
  std::string what = "post comment to " + repo + "#" + std::to_string(pr_number);

  // One extra attempt on 5xx; everything else resolves on the first pass.
  for (uint32_t attempt = 0;; ++attempt) {
    httplib::Response res = request_with_rate_limit(client, config, what, [&] {
      return client.Post(path, headers, payload, "application/json");
    });
    if (res.status >= 500) {
      if (attempt == 0) continue;
      raise(ErrorClass::Network, what + ": host returned " + std::to_string(res.status) +
                                     " twice: " + host_message(res.body));
    }
    if (res.status == 401 || res.status == 403) {
      raise(ErrorClass::Auth,
            what + ": " + std::to_string(res.status) + " " + host_message(res.body));
    }
    if (res.status != 200 && res.status != 201) {
      raise(ErrorClass::Invalid,
            what + ": " + std::to_string(res.status) + " " + host_message(res.body));
    }
    json parsed = json::parse(res.body, nullptr, false);
    if (!parsed.is_object() || !parsed.contains("id")) {
      raise(ErrorClass::Parse, what + ": response has no comment id");
    }
    return parsed["id"].is_string() ? parsed["id"].get<std::string>()
                                    : std::to_string(parsed["id"].get<int64_t>());
  }
}

}  // namespace edre::github
