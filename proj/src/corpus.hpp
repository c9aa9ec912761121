#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clarity.hpp"

namespace edre::corpus {

struct ReviewComment {
  std::string id;
  std::string project;
  std::string author;
  int64_t created_at = 0;  // epoch seconds, UTC
  std::string body;        // may be empty; flagged downstream, never rejected
  std::string thread_url;
};

struct RaterLabel {
  std::string review_id;
  std::string rater_id;
  Clarity clarity = Clarity::Unclear;
};

using VoteCounts = std::array<uint32_t, kClarityCount>;

struct LabeledReview {
  ReviewComment comment;
  Clarity clarity = Clarity::Unclear;
  VoteCounts vote_counts{};
};

// One line of a corpus JSONL file: a mined comment, optionally annotated
// with its aggregated clarity.
struct CorpusEntry {
  ReviewComment comment;
  std::optional<Clarity> clarity;
  VoteCounts vote_counts{};

  LabeledReview labeled() const { return LabeledReview{comment, *clarity, vote_counts}; }
};

struct CorpusStats {
  size_t n_reviews = 0;
  double avg_words = 0.0;
  double avg_chars = 0.0;
  std::array<double, kClarityCount> label_distribution{};
};

// Label CSV: header `review_id,rater_id,label`. Rejects duplicate
// (review_id, rater_id) pairs and unknown label strings, naming the line.
std::vector<RaterLabel> load_labels(const std::filesystem::path& path);
std::vector<RaterLabel> parse_labels_csv(const std::string& content, const std::string& origin);

// Plurality label per review; ties go to the least-clear tied label. Reviews
// with fewer than min_votes votes are left out. Labels that reference an
// unknown review id are an error.
std::vector<LabeledReview> aggregate_majority(const std::vector<RaterLabel>& labels,
                                              const std::vector<ReviewComment>& comments,
                                              uint32_t min_votes = 1);

CorpusStats corpus_stats(const std::vector<LabeledReview>& corpus);

std::string render_stats(const CorpusStats& stats);

// JSONL persistence, one review object per line. Appends are dedup'd by id
// so re-running ingestion over the same window is a no-op.
class CorpusStore {
 public:
  explicit CorpusStore(std::filesystem::path path) : path_(std::move(path)) {}

  std::vector<CorpusEntry> load() const;         // missing file is an error
  std::vector<CorpusEntry> load_or_empty() const;  // missing file reads as empty
  // Appends comments whose id is not already present; returns how many were
  // added. Creates the file on first append.
  size_t append_new(const std::vector<ReviewComment>& comments);
  void rewrite(const std::vector<CorpusEntry>& entries);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::vector<CorpusEntry> parse_corpus_jsonl(const std::string& content, const std::string& origin);
std::string entry_to_json_line(const CorpusEntry& entry);

// Convenience filters over a loaded corpus.
std::vector<ReviewComment> comments_of(const std::vector<CorpusEntry>& entries);
std::vector<LabeledReview> labeled_of(const std::vector<CorpusEntry>& entries);

}  // namespace edre::corpus
