#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace edre::github {

struct HostConfig {
  std::string base_url;            // scheme://host[:port], no trailing slash
  std::vector<std::string> repos;  // "owner/name"
  std::string token;               // falls back to EDRE_TOKEN when empty
  uint32_t per_page = 100;
  uint32_t rate_limit_retries = 2;
};

// Pull-request review comments across all configured repos, every page,
// filtered to created_at within [since, until] and deduplicated by id.
// 401/403 raise Auth, 429 raises RateLimit after the configured retries,
// transport failures raise Network.
std::vector<corpus::ReviewComment> fetch_review_comments(const HostConfig& config, int64_t since,
                                                         int64_t until);

struct IngestResult {
  size_t fetched = 0;
  size_t added = 0;  // new ids persisted; re-running the same window adds 0
};

IngestResult ingest_from_host(const HostConfig& config, int64_t since, int64_t until,
                              corpus::CorpusStore& store);

// Posts a PR comment and returns the host-assigned comment id. A nonempty
// reply_to posts an in-thread reply instead of a top-level comment. 5xx
// responses get exactly one retry; 4xx surface the host's message.
std::string post_comment(const HostConfig& config, const std::string& repo, int64_t pr_number,
                         const std::string& body, const std::string& reply_to = "");

std::string auth_token(const HostConfig& config);

}  // namespace edre::github
