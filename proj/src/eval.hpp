#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clarity.hpp"
#include "corpus.hpp"
#include "embed.hpp"
#include "learners.hpp"
#include "textprep.hpp"

namespace edre::eval {

struct FoldPlan {
  uint32_t k = 0;
  uint64_t seed = 0;
  std::map<std::string, uint32_t> assignments;  // review_id -> fold
};

// Stratified assignment: per-class fold counts differ by at most 1, and so
// do total fold sizes (classes are dealt consecutively onto one rotation).
FoldPlan stratified_kfold(const std::vector<std::string>& review_ids,
                          const std::vector<Clarity>& labels, uint32_t k, uint64_t seed);

struct HoldoutSplit {
  std::vector<size_t> train_indices;  // ascending
  std::vector<size_t> test_indices;   // ascending
};

// Stratified; |test| = round(fraction * N), clamped so neither side is empty.
// Per-class test counts apportioned by largest remainder.
HoldoutSplit holdout_split(const std::vector<Clarity>& labels, double test_fraction, uint64_t seed);

struct ConfusionMatrix {
  // counts[predicted][actual], Clarity ordinal order on both axes
  std::array<std::array<uint64_t, kClarityCount>, kClarityCount> counts{};

  void add(Clarity predicted, Clarity actual);
  uint64_t total() const;
  uint64_t trace() const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool in_data = false;    // the class appears in the actuals (column sum > 0)
  bool degenerate = false; // a 0/0 was defined as 0 somewhere in this class
};

struct Provenance {
  learners::Algorithm algorithm = learners::Algorithm::NB;
  std::string embedding;  // "tfidf" or "external"
  std::string config;     // HyperParams::describe()
  std::string protocol;   // "cv", "holdout", or "matrix"
  uint32_t k = 0;         // 0 outside the cv protocol
  uint32_t repeats = 0;
  uint64_t seed = 0;
};

struct MetricsReport {
  std::array<ClassMetrics, kClarityCount> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  Provenance provenance;
};

// precision = diag/row_sum, recall = diag/col_sum, 0/0 defined as 0 and
// flagged. Macro averages run over classes present in the actuals.
MetricsReport compute_metrics(const ConfusionMatrix& confusion);

// Which vectors the evaluation pipeline feeds the learners.
struct EmbeddingSpec {
  enum class Kind : uint8_t { Tfidf = 0, External = 1 };
  Kind kind = Kind::Tfidf;
  textprep::PrepConfig prep = textprep::PrepConfig::defaults();
  uint32_t min_df = 1;                              // tfidf vocabulary threshold
  std::optional<embed::ExternalVectors> external;   // required when kind == External

  const char* name() const { return kind == Kind::Tfidf ? "tfidf" : "external"; }
};

// Passed to the per-fold observer; pointers are valid only during the call.
struct FoldObservation {
  uint32_t repeat = 0;
  uint32_t fold = 0;
  const embed::EmbeddingSource* source = nullptr;
  const std::vector<std::string>* train_ids = nullptr;
  const std::vector<std::string>* test_ids = nullptr;
  MetricsReport fold_metrics;
};
using FoldObserver = std::function<void(const FoldObservation&)>;

// Repeated stratified k-fold CV. Each repeat draws a fresh fold plan; each
// fold rebuilds the TF-IDF vocabulary from its training split only. Reported
// metrics are unweighted means over the k*repeats fold metrics; the
// confusion matrix pools every fold's counts.
MetricsReport cross_validate(learners::Algorithm algorithm, const learners::HyperParams& config,
                             const EmbeddingSpec& embedding,
                             const std::vector<corpus::LabeledReview>& reviews, uint32_t k,
                             uint32_t repeats, uint64_t seed, const FoldObserver& observer = {});

// Single stratified train/test split evaluation.
MetricsReport holdout_evaluate(learners::Algorithm algorithm, const learners::HyperParams& config,
                               const EmbeddingSpec& embedding,
                               const std::vector<corpus::LabeledReview>& reviews,
                               double test_fraction, uint64_t seed);

struct GridCell {
  learners::HyperParams config;
  MetricsReport report;
};

struct GridResult {
  learners::HyperParams best;
  std::vector<GridCell> table;  // one row per grid cell, input order
};

// Best cell by macro-F1, ties by accuracy, then by lexicographically
// smaller config description.
GridResult grid_search(learners::Algorithm algorithm,
                       const std::vector<learners::HyperParams>& grid,
                       const EmbeddingSpec& embedding,
                       const std::vector<corpus::LabeledReview>& reviews, uint32_t k,
                       uint32_t repeats, uint64_t seed);

std::vector<learners::HyperParams> default_grid(learners::Algorithm algorithm);

// Benchmark table plus one confusion matrix per report; 4-decimal fixed
// formatting throughout so identical runs render identical bytes.
std::string render_report_text(const std::vector<MetricsReport>& reports);

// Schema: algorithm,embedding,protocol,k,repeats,seed,class,precision,
// recall,f1,accuracy. One row per class plus a MACRO row per report.
std::string render_report_csv(const std::vector<MetricsReport>& reports);

struct ReportRow {
  std::string algorithm;
  std::string embedding;
  std::string protocol;
  uint32_t k = 0;
  uint32_t repeats = 0;
  uint64_t seed = 0;
  std::string cls;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};
std::vector<ReportRow> parse_report_csv(const std::string& content);

// Text table over already-parsed CSV rows (re-rendering a saved report).
std::string render_rows_text(const std::vector<ReportRow>& rows);

}  // namespace edre::eval
