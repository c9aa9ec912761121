#include "corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace edre {

std::optional<Clarity> clarity_from_string(std::string_view s) {
  std::string v = to_lower_ascii(trim(s));
  for (Clarity c : kAllClarity) {
    if (v == to_string(c)) return c;
  }
  return std::nullopt;
}

}  // namespace edre

namespace edre::corpus {

namespace {

using nlohmann::json;

constexpr const char* kAllowedLabels = "clear, somewhat_clear, somewhat_unclear, unclear";

size_t whitespace_word_count(const std::string& s) {
  size_t count = 0;
  bool in_word = false;
  for (unsigned char c : s) {
    bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!ws && !in_word) ++count;
    in_word = !ws;
  }
  return count;
}

}  // namespace

std::vector<RaterLabel> parse_labels_csv(const std::string& content, const std::string& origin) {
  std::vector<RaterLabel> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(content);
  std::string line;
  size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (!header_seen) {
      header_seen = true;
      if (fields.size() != 3 || to_lower_ascii(trim(fields[0])) != "review_id" ||
          to_lower_ascii(trim(fields[1])) != "rater_id" || to_lower_ascii(trim(fields[2])) != "label") {
        raise(ErrorClass::Parse,
              origin + ":" + std::to_string(lineno) + ": expected header \"review_id,rater_id,label\"");
      }
      continue;
    }
    if (fields.size() != 3) {
      raise(ErrorClass::Parse, origin + ":" + std::to_string(lineno) + ": expected 3 fields, got " +
                                   std::to_string(fields.size()));
    }
    RaterLabel label;
    label.review_id = trim(fields[0]);
    label.rater_id = trim(fields[1]);
    if (label.review_id.empty() || label.rater_id.empty()) {
      raise(ErrorClass::Parse, origin + ":" + std::to_string(lineno) + ": empty review_id or rater_id");
    }
    auto clarity = clarity_from_string(fields[2]);
    if (!clarity) {
      raise(ErrorClass::Parse, origin + ":" + std::to_string(lineno) + ": unknown clarity \"" +
                                   trim(fields[2]) + "\" (allowed: " + kAllowedLabels + ")");
    }
    label.clarity = *clarity;
    if (!seen.emplace(label.review_id, label.rater_id).second) {
      raise(ErrorClass::Duplicate, origin + ":" + std::to_string(lineno) + ": duplicate vote by rater \"" +
                                       label.rater_id + "\" on review \"" + label.review_id + "\"");
    }
    out.push_back(std::move(label));
  }
  if (!header_seen) raise(ErrorClass::Parse, origin + ": empty label file (missing header)");
  return out;
}

std::vector<RaterLabel> load_labels(const std::filesystem::path& path) {
  return parse_labels_csv(read_file(path), path.string());
}

std::vector<LabeledReview> aggregate_majority(const std::vector<RaterLabel>& labels,
                                              const std::vector<ReviewComment>& comments,
                                              uint32_t min_votes) {
  std::unordered_map<std::string, size_t> by_id;
  by_id.reserve(comments.size());
  for (size_t i = 0; i < comments.size(); ++i) by_id.emplace(comments[i].id, i);

  std::unordered_map<std::string, VoteCounts> votes;
  for (const auto& label : labels) {
    if (!by_id.count(label.review_id)) {
      raise(ErrorClass::NotFound, "label references unknown review_id \"" + label.review_id + "\"");
    }
    votes[label.review_id][static_cast<size_t>(label.clarity)] += 1;
  }

  std::vector<LabeledReview> out;
  out.reserve(votes.size());
  for (const auto& comment : comments) {
    auto it = votes.find(comment.id);
    if (it == votes.end()) continue;  // zero votes: excluded, not defaulted
    const VoteCounts& counts = it->second;
    uint32_t total = 0;
    for (uint32_t c : counts) total += c;
    if (total < min_votes || total == 0) continue;
    // Plurality; scanning least-clear first makes ties conservative.
    size_t best = 0;
    for (size_t c = 1; c < kClarityCount; ++c) {
      if (counts[c] > counts[best]) best = c;
    }
    out.push_back(LabeledReview{comment, static_cast<Clarity>(best), counts});
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<LabeledReview>& corpus) {
  CorpusStats stats;
  stats.n_reviews = corpus.size();
  if (corpus.empty()) return stats;
  double words = 0, chars = 0;
  std::array<size_t, kClarityCount> counts{};
  for (const auto& review : corpus) {
    words += static_cast<double>(whitespace_word_count(review.comment.body));
    chars += static_cast<double>(review.comment.body.size());
    counts[static_cast<size_t>(review.clarity)] += 1;
  }
  stats.avg_words = words / static_cast<double>(corpus.size());
  stats.avg_chars = chars / static_cast<double>(corpus.size());
  for (size_t c = 0; c < kClarityCount; ++c) {
    stats.label_distribution[c] = static_cast<double>(counts[c]) / static_cast<double>(corpus.size());
  }
  return stats;
}

std::string render_stats(const CorpusStats& stats) {
  std::ostringstream out;
  out << "reviews:    " << stats.n_reviews << "\n";
  out << "avg words:  " << format_double(stats.avg_words, 2) << "\n";
  out << "avg chars:  " << format_double(stats.avg_chars, 2) << "\n";
  out << "label distribution:\n";
  for (int c = kClarityCount - 1; c >= 0; --c) {
    char line[80];
    std::snprintf(line, sizeof(line), "  %-17s %6.1f%%\n", to_string(static_cast<Clarity>(c)),
                  stats.label_distribution[static_cast<size_t>(c)] * 100.0);
    out << line;
  }
  return out.str();
}

std::string entry_to_json_line(const CorpusEntry& entry) {
  json j;
  j["id"] = entry.comment.id;
  j["project"] = entry.comment.project;
  j["author"] = entry.comment.author;
  j["created_at"] = format_rfc3339(entry.comment.created_at);
  j["body"] = entry.comment.body;
  j["thread_url"] = entry.comment.thread_url;
  if (entry.clarity) {
    j["clarity"] = to_string(*entry.clarity);
    json vc = json::object();
    for (Clarity c : kAllClarity) {
      uint32_t n = entry.vote_counts[static_cast<size_t>(c)];
      if (n > 0) vc[to_string(c)] = n;
    }
    j["vote_counts"] = vc;
  }
  return j.dump();
}

std::vector<CorpusEntry> parse_corpus_jsonl(const std::string& content, const std::string& origin) {
  std::vector<CorpusEntry> out;
  std::unordered_map<std::string, size_t> index_by_id;
  std::istringstream in(content);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      raise(ErrorClass::Parse, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
    CorpusEntry entry;
    try {
      entry.comment.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                                : std::to_string(j.at("id").get<int64_t>());
      entry.comment.project = j.value("project", "");
      entry.comment.author = j.value("author", "");
      entry.comment.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
      entry.comment.body = j.value("body", "");
      entry.comment.thread_url = j.value("thread_url", "");
      if (j.contains("clarity")) {
        auto clarity = clarity_from_string(j.at("clarity").get<std::string>());
        if (!clarity) {
          raise(ErrorClass::Parse, origin + ":" + std::to_string(lineno) + ": unknown clarity \"" +
                                       j.at("clarity").get<std::string>() + "\"");
        }
        entry.clarity = clarity;
        if (j.contains("vote_counts")) {
          for (auto& [key, value] : j.at("vote_counts").items()) {
            auto c = clarity_from_string(key);
            if (!c) raise(ErrorClass::Parse, origin + ":" + std::to_string(lineno) + ": unknown clarity key");
            entry.vote_counts[static_cast<size_t>(*c)] = value.get<uint32_t>();
          }
        }
      }
    } catch (const json::exception& e) {
      raise(ErrorClass::Parse, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto [it, inserted] = index_by_id.emplace(entry.comment.id, out.size());
    if (inserted) {
      out.push_back(std::move(entry));
    } else {
      out[it->second] = std::move(entry);  // later line wins
    }
  }
  return out;
}

std::vector<CorpusEntry> CorpusStore::load() const {
  if (!std::filesystem::exists(path_)) {
    raise(ErrorClass::Io, "corpus store does not exist: " + path_.string());
  }
  return parse_corpus_jsonl(read_file(path_), path_.string());
}

std::vector<CorpusEntry> CorpusStore::load_or_empty() const {
  return std::filesystem::exists(path_) ? load() : std::vector<CorpusEntry>{};
}

size_t CorpusStore::append_new(const std::vector<ReviewComment>& comments) {
  std::unordered_set<std::string> existing;
  for (const auto& entry : load_or_empty()) existing.insert(entry.comment.id);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) raise(ErrorClass::Io, "cannot open corpus store for append: " + path_.string());
  size_t added = 0;
  for (const auto& comment : comments) {
    if (!existing.insert(comment.id).second) continue;
    out << entry_to_json_line(CorpusEntry{comment, std::nullopt, {}}) << "\n";
    ++added;
  }
  if (!out) raise(ErrorClass::Io, "short write to corpus store: " + path_.string());
  return added;
}

void CorpusStore::rewrite(const std::vector<CorpusEntry>& entries) {
  std::ostringstream out;
  for (const auto& entry : entries) out << entry_to_json_line(entry) << "\n";
  write_file(path_, out.str());
}

std::vector<ReviewComment> comments_of(const std::vector<CorpusEntry>& entries) {
  std::vector<ReviewComment> out;
  out.reserve(entries.size());
  for (const auto& entry : entries) out.push_back(entry.comment);
  return out;
}

std::vector<LabeledReview> labeled_of(const std::vector<CorpusEntry>& entries) {
  std::vector<LabeledReview> out;
  for (const auto& entry : entries) {
    if (entry.clarity) out.push_back(entry.labeled());
  }
  return out;
}

}  // namespace edre::corpus
