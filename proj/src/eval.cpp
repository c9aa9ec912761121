#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace edre::eval {

namespace {

constexpr uint64_t kFoldStream = 0x464f4c44;   // "FOLD"
constexpr uint64_t kSplitStream = 0x484f4c44;  // "HOLD"
constexpr uint64_t kModelStream = 0x4d444c;    // "MDL"

std::vector<std::vector<size_t>> group_by_class(const std::vector<Clarity>& labels) {
  std::vector<std::vector<size_t>> groups(kClarityCount);
  for (size_t i = 0; i < labels.size(); ++i) groups[static_cast<size_t>(labels[i])].push_back(i);
  return groups;
}

}  // namespace

FoldPlan stratified_kfold(const std::vector<std::string>& review_ids,
                          const std::vector<Clarity>& labels, uint32_t k, uint64_t seed) {
  if (review_ids.size() != labels.size()) {
    raise(ErrorClass::Invalid, "review ids and labels are misaligned");
  }
  if (k < 2) raise(ErrorClass::Invalid, "fold count must be >= 2, got " + std::to_string(k));
  if (k > review_ids.size()) {
    raise(ErrorClass::Invalid, "fold count " + std::to_string(k) + " exceeds corpus size " +
                                   std::to_string(review_ids.size()));
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;

  auto groups = group_by_class(labels);
  uint64_t counter = 0;
  for (size_t c = 0; c < groups.size(); ++c) {
    Rng rng(Rng::mix(Rng::mix(seed, kFoldStream), c));
    rng.shuffle(groups[c]);
    for (size_t index : groups[c]) {
      auto [it, inserted] = plan.assignments.emplace(review_ids[index], counter % k);
      if (!inserted) raise(ErrorClass::Duplicate, "duplicate review_id \"" + review_ids[index] + "\"");
      ++counter;
    }
  }
  return plan;
}

HoldoutSplit holdout_split(const std::vector<Clarity>& labels, double test_fraction, uint64_t seed) {
  const size_t n = labels.size();
  if (n < 2) raise(ErrorClass::Invalid, "need at least 2 reviews to split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    raise(ErrorClass::Invalid, "test fraction must be in (0, 1)");
  }
  size_t test_total = static_cast<size_t>(std::llround(test_fraction * static_cast<double>(n)));
  test_total = std::clamp<size_t>(test_total, 1, n - 1);

  auto groups = group_by_class(labels);

  // Largest-remainder apportionment of the test quota across classes.
  std::array<size_t, kClarityCount> take{};
  std::array<double, kClarityCount> remainder{};
  size_t allocated = 0;
  for (size_t c = 0; c < groups.size(); ++c) {
    double target = static_cast<double>(test_total) * static_cast<double>(groups[c].size()) /
                    static_cast<double>(n);
    take[c] = static_cast<size_t>(std::floor(target));
    take[c] = std::min(take[c], groups[c].size());
    remainder[c] = target - static_cast<double>(take[c]);
    allocated += take[c];
  }
  while (allocated < test_total) {
    size_t best = kClarityCount;
    for (size_t c = 0; c < groups.size(); ++c) {
      if (take[c] >= groups[c].size()) continue;
      if (best == kClarityCount || remainder[c] > remainder[best]) best = c;
    }
    if (best == kClarityCount) break;  // every class exhausted
    ++take[best];
    remainder[best] = -1.0;
    ++allocated;
  }

  HoldoutSplit split;
  for (size_t c = 0; c < groups.size(); ++c) {
    Rng rng(Rng::mix(Rng::mix(seed, kSplitStream), c));
    rng.shuffle(groups[c]);
    for (size_t i = 0; i < groups[c].size(); ++i) {
      (i < take[c] ? split.test_indices : split.train_indices).push_back(groups[c][i]);
    }
  }
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  return split;
}

void ConfusionMatrix::add(Clarity predicted, Clarity actual) {
  ++counts[static_cast<size_t>(predicted)][static_cast<size_t>(actual)];
}

uint64_t ConfusionMatrix::total() const {
  uint64_t sum = 0;
  for (const auto& row : counts) {
    for (uint64_t v : row) sum += v;
  }
  return sum;
}

uint64_t ConfusionMatrix::trace() const {
  uint64_t sum = 0;
  for (size_t i = 0; i < counts.size(); ++i) sum += counts[i][i];
  return sum;
}

MetricsReport compute_metrics(const ConfusionMatrix& confusion) {
  uint64_t total = confusion.total();
  if (total == 0) raise(ErrorClass::Invalid, "confusion matrix is empty");

  MetricsReport report;
  report.confusion = confusion;
  report.provenance.protocol = "matrix";
  report.accuracy = static_cast<double>(confusion.trace()) / static_cast<double>(total);

  size_t present = 0;
  for (size_t c = 0; c < kClarityCount; ++c) {
    uint64_t row_sum = 0, col_sum = 0;
    for (size_t o = 0; o < kClarityCount; ++o) {
      row_sum += confusion.counts[c][o];
      col_sum += confusion.counts[o][c];
    }
    uint64_t hit = confusion.counts[c][c];
    ClassMetrics& m = report.per_class[c];
    m.in_data = col_sum > 0;
    if (row_sum > 0) {
      m.precision = static_cast<double>(hit) / static_cast<double>(row_sum);
    } else {
      m.precision = 0.0;
      m.degenerate = true;
    }
    if (col_sum > 0) {
      m.recall = static_cast<double>(hit) / static_cast<double>(col_sum);
    } else {
      m.recall = 0.0;
      m.degenerate = true;
    }
    double pr = m.precision + m.recall;
    m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
    if (m.in_data) {
      report.macro_precision += m.precision;
      report.macro_recall += m.recall;
      report.macro_f1 += m.f1;
      ++present;
    }
  }
  report.macro_precision /= static_cast<double>(present);
  report.macro_recall /= static_cast<double>(present);
  report.macro_f1 /= static_cast<double>(present);
  return report;
}

namespace {

struct PipelineData {
  std::vector<std::string> ids;
  std::vector<Clarity> labels;
  std::vector<textprep::TokenDoc> docs;  // tokenized once; vocabularies differ per fold
};

PipelineData prepare(const EmbeddingSpec& embedding, const std::vector<corpus::LabeledReview>& reviews) {
  if (reviews.empty()) raise(ErrorClass::Invalid, "no labeled reviews to evaluate");
  PipelineData data;
  data.ids.reserve(reviews.size());
  data.labels.reserve(reviews.size());
  for (const auto& review : reviews) {
    data.ids.push_back(review.comment.id);
    data.labels.push_back(review.clarity);
  }
  if (embedding.kind == EmbeddingSpec::Kind::Tfidf) {
    data.docs.reserve(reviews.size());
    for (const auto& review : reviews) {
      data.docs.push_back(textprep::preprocess(review.comment, embedding.prep));
    }
  } else {
    if (!embedding.external) raise(ErrorClass::Invalid, "external embedding spec has no vectors");
    for (const auto& id : data.ids) {
      if (!embedding.external->by_review.count(id)) {
        raise(ErrorClass::NotFound, "no external vector for review \"" + id + "\"");
      }
    }
  }
  return data;
}

// Builds the fold's embedding source from training rows only, then returns
// vectors for the requested rows.
embed::EmbeddingSource fold_source(const EmbeddingSpec& embedding, const PipelineData& data,
                                   const std::vector<size_t>& train_rows) {
  if (embedding.kind == EmbeddingSpec::Kind::External) {
    embed::EmbeddingSource source;
    source.kind = embed::EmbeddingSource::Kind::External;
    source.external = *embedding.external;
    return source;
  }
  std::vector<textprep::TokenDoc> train_docs;
  train_docs.reserve(train_rows.size());
  for (size_t row : train_rows) train_docs.push_back(data.docs[row]);
  return embed::tfidf_source(embed::build_vocabulary(train_docs, embedding.min_df));
}

embed::SparseVector row_vector(const embed::EmbeddingSource& source, const EmbeddingSpec& embedding,
                               const PipelineData& data, size_t row) {
  if (embedding.kind == EmbeddingSpec::Kind::Tfidf) return embed::tfidf_vector(data.docs[row], source.vocab);
  textprep::TokenDoc stub;
  stub.review_id = data.ids[row];
  return embed::embed_doc(source, stub);
}

MetricsReport evaluate_one_split(learners::Algorithm algorithm, const learners::HyperParams& config,
                                 const EmbeddingSpec& embedding, const PipelineData& data,
                                 const std::vector<size_t>& train_rows,
                                 const std::vector<size_t>& test_rows, uint64_t model_seed,
                                 const embed::EmbeddingSource** source_out,
                                 embed::EmbeddingSource& source_storage) {
  source_storage = fold_source(embedding, data, train_rows);
  if (source_out) *source_out = &source_storage;

  learners::TrainSet train_set;
  train_set.vectors.reserve(train_rows.size());
  train_set.labels.reserve(train_rows.size());
  train_set.review_ids.reserve(train_rows.size());
  for (size_t row : train_rows) {
    train_set.vectors.push_back(row_vector(source_storage, embedding, data, row));
    train_set.labels.push_back(data.labels[row]);
    train_set.review_ids.push_back(data.ids[row]);
  }
  learners::HyperParams active = config;
  active.algorithm = algorithm;
  learners::TrainedModel model =
      learners::train(train_set, active, model_seed, source_storage.fingerprint());

  ConfusionMatrix confusion;
  for (size_t row : test_rows) {
    auto prediction = learners::predict(model, row_vector(source_storage, embedding, data, row));
    confusion.add(prediction.label, data.labels[row]);
  }
  return compute_metrics(confusion);
}

void fill_provenance(MetricsReport& report, learners::Algorithm algorithm,
                     const learners::HyperParams& config, const EmbeddingSpec& embedding,
                     const std::string& protocol, uint32_t k, uint32_t repeats, uint64_t seed) {
  learners::HyperParams active = config;
  active.algorithm = algorithm;
  report.provenance.algorithm = algorithm;
  report.provenance.embedding = embedding.name();
  report.provenance.config = active.describe();
  report.provenance.protocol = protocol;
  report.provenance.k = k;
  report.provenance.repeats = repeats;
  report.provenance.seed = seed;
}

}  // namespace

MetricsReport cross_validate(learners::Algorithm algorithm, const learners::HyperParams& config,
                             const EmbeddingSpec& embedding,
                             const std::vector<corpus::LabeledReview>& reviews, uint32_t k,
                             uint32_t repeats, uint64_t seed, const FoldObserver& observer) {
  if (repeats == 0) raise(ErrorClass::Invalid, "repeats must be >= 1");
  PipelineData data = prepare(embedding, reviews);

  MetricsReport pooled;
  std::array<double, kClarityCount> precision_sum{}, recall_sum{}, f1_sum{};
  std::array<uint32_t, kClarityCount> presence{};
  std::array<bool, kClarityCount> degenerate{};
  double accuracy_sum = 0.0, macro_p_sum = 0.0, macro_r_sum = 0.0, macro_f_sum = 0.0;
  uint32_t fold_count = 0;

  for (uint32_t repeat = 0; repeat < repeats; ++repeat) {
    FoldPlan plan = stratified_kfold(data.ids, data.labels, k, Rng::mix(seed, repeat));
    for (uint32_t fold = 0; fold < k; ++fold) {
      std::vector<size_t> train_rows, test_rows;
      for (size_t row = 0; row < data.ids.size(); ++row) {
        (plan.assignments.at(data.ids[row]) == fold ? test_rows : train_rows).push_back(row);
      }
      uint64_t model_seed = Rng::mix(Rng::mix(Rng::mix(seed, kModelStream), repeat), fold);
      embed::EmbeddingSource source_storage;
      const embed::EmbeddingSource* source = nullptr;
      MetricsReport fold_metrics;
      try {
        fold_metrics = evaluate_one_split(algorithm, config, embedding, data, train_rows, test_rows,
                                          model_seed, &source, source_storage);
      } catch (const Error& e) {
        raise(e.cls(), "repeat " + std::to_string(repeat) + " fold " + std::to_string(fold) + ": " +
                           e.what());
      }
      fill_provenance(fold_metrics, algorithm, config, embedding, "cv-fold", k, repeats, seed);

      ++fold_count;
      accuracy_sum += fold_metrics.accuracy;
      macro_p_sum += fold_metrics.macro_precision;
      macro_r_sum += fold_metrics.macro_recall;
      macro_f_sum += fold_metrics.macro_f1;
      for (size_t c = 0; c < kClarityCount; ++c) {
        const auto& m = fold_metrics.per_class[c];
        if (m.in_data) {
          precision_sum[c] += m.precision;
          recall_sum[c] += m.recall;
          f1_sum[c] += m.f1;
          ++presence[c];
        }
        degenerate[c] = degenerate[c] || m.degenerate;
      }
      for (size_t p = 0; p < kClarityCount; ++p) {
        for (size_t a = 0; a < kClarityCount; ++a) {
          pooled.confusion.counts[p][a] += fold_metrics.confusion.counts[p][a];
        }
      }

      if (observer) {
        std::vector<std::string> train_ids, test_ids;
        for (size_t row : train_rows) train_ids.push_back(data.ids[row]);
        for (size_t row : test_rows) test_ids.push_back(data.ids[row]);
        FoldObservation obs;
        obs.repeat = repeat;
        obs.fold = fold;
        obs.source = source;
        obs.train_ids = &train_ids;
        obs.test_ids = &test_ids;
        obs.fold_metrics = fold_metrics;
        observer(obs);
      }
    }
  }

  pooled.accuracy = accuracy_sum / fold_count;
  pooled.macro_precision = macro_p_sum / fold_count;
  pooled.macro_recall = macro_r_sum / fold_count;
  pooled.macro_f1 = macro_f_sum / fold_count;
  for (size_t c = 0; c < kClarityCount; ++c) {
    auto& m = pooled.per_class[c];
    m.in_data = presence[c] > 0;
    m.degenerate = degenerate[c];
    if (presence[c] > 0) {
      m.precision = precision_sum[c] / presence[c];
      m.recall = recall_sum[c] / presence[c];
      m.f1 = f1_sum[c] / presence[c];
    }
  }
  fill_provenance(pooled, algorithm, config, embedding, "cv", k, repeats, seed);
  return pooled;
}

MetricsReport holdout_evaluate(learners::Algorithm algorithm, const learners::HyperParams& config,
                               const EmbeddingSpec& embedding,
                               const std::vector<corpus::LabeledReview>& reviews,
                               double test_fraction, uint64_t seed) {
  PipelineData data = prepare(embedding, reviews);
  HoldoutSplit split = holdout_split(data.labels, test_fraction, seed);
  embed::EmbeddingSource source_storage;
  MetricsReport report =
      evaluate_one_split(algorithm, config, embedding, data, split.train_indices,
                         split.test_indices, Rng::mix(seed, kModelStream), nullptr, source_storage);
  fill_provenance(report, algorithm, config, embedding, "holdout", 0, 0, seed);
  return report;
}

GridResult grid_search(learners::Algorithm algorithm,
                       const std::vector<learners::HyperParams>& grid,
                       const EmbeddingSpec& embedding,
                       const std::vector<corpus::LabeledReview>& reviews, uint32_t k,
                       uint32_t repeats, uint64_t seed) {
  if (grid.empty()) raise(ErrorClass::Invalid, "hyperparameter grid is empty");

  GridResult result;
  size_t best_index = 0;
  for (size_t i = 0; i < grid.size(); ++i) {
    GridCell cell;
    cell.config = grid[i];
    cell.config.algorithm = algorithm;
    cell.report = cross_validate(algorithm, cell.config, embedding, reviews, k, repeats, seed);
    result.table.push_back(std::move(cell));

    const auto& best = result.table[best_index].report;
    const auto& cur = result.table.back().report;
    bool better = cur.macro_f1 > best.macro_f1 ||
                  (cur.macro_f1 == best.macro_f1 && cur.accuracy > best.accuracy) ||
                  (cur.macro_f1 == best.macro_f1 && cur.accuracy == best.accuracy &&
                   result.table.back().config.describe() < result.table[best_index].config.describe());
    if (i > 0 && better) best_index = i;
  }
  result.best = result.table[best_index].config;
  return result;
}

std::vector<learners::HyperParams> default_grid(learners::Algorithm algorithm) {
  std::vector<learners::HyperParams> grid;
  learners::HyperParams base;
  base.algorithm = algorithm;
  switch (algorithm) {
    case learners::Algorithm::NB:
      for (double alpha : {0.1, 0.5, 1.0}) {
        base.nb.alpha = alpha;
        grid.push_back(base);
      }
      break;
    case learners::Algorithm::LOGREG:
      for (double lambda : {0.0001, 0.001, 0.01}) {
        base.logreg.lambda = lambda;
        grid.push_back(base);
      }
      break;
    case learners::Algorithm::SVM:
      for (double c : {0.1, 1.0, 10.0}) {
        for (uint32_t epochs : {5u, 20u}) {
          base.svm.C = c;
          base.svm.epochs = epochs;
          grid.push_back(base);
        }
      }
      break;
    case learners::Algorithm::RF:
      for (uint32_t trees : {50u, 100u}) {
        for (uint32_t depth : {8u, 12u}) {
          base.forest.trees = trees;
          base.forest.max_depth = depth;
          grid.push_back(base);
        }
      }
      break;
    case learners::Algorithm::GBRT:
      for (uint32_t rounds : {50u, 100u}) {
        for (double eta : {0.05, 0.1}) {
          base.gbrt.rounds = rounds;
          base.gbrt.shrinkage = eta;
          grid.push_back(base);
        }
      }
      break;
  }
  return grid;
}

namespace {

void render_confusion(std::ostringstream& out, const MetricsReport& report) {
  out << "confusion (rows=predicted, cols=actual) " << learners::to_string(report.provenance.algorithm)
      << " " << report.provenance.embedding << " " << report.provenance.protocol << " seed="
      << report.provenance.seed << "\n";
  out << "                  ";
  for (Clarity c : kAllClarity) {
    out << " " << to_string(c);
    for (size_t pad = std::string(to_string(c)).size(); pad < 17; ++pad) out << ' ';
  }
  out << "\n";
  for (Clarity p : kAllClarity) {
    std::string name = to_string(p);
    out << name;
    for (size_t pad = name.size(); pad < 18; ++pad) out << ' ';
    for (Clarity a : kAllClarity) {
      std::string v = std::to_string(report.confusion.counts[static_cast<size_t>(p)][static_cast<size_t>(a)]);
      out << v;
      for (size_t pad = v.size(); pad < 18; ++pad) out << ' ';
    }
    out << "\n";
  }
}

}  // namespace

std::string render_report_text(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << "algorithm  embedding  protocol  config                precision  recall  f1      accuracy\n";
  for (const auto& r : reports) {
    std::string alg = learners::to_string(r.provenance.algorithm);
    out << alg << std::string(11 - alg.size(), ' ');
    out << r.provenance.embedding << std::string(11 - r.provenance.embedding.size(), ' ');
    out << r.provenance.protocol << std::string(10 - r.provenance.protocol.size(), ' ');
    std::string config = r.provenance.config;
    if (config.size() < 22) config += std::string(22 - config.size(), ' ');
    out << config;
    out << format_double(r.macro_precision, 4) << "     " << format_double(r.macro_recall, 4) << "  "
        << format_double(r.macro_f1, 4) << "  " << format_double(r.accuracy, 4) << "\n";
  }
  out << "\n";
  for (const auto& r : reports) {
    render_confusion(out, r);
    out << "\n";
  }
  return out.str();
}

std::string render_report_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << "algorithm,embedding,protocol,k,repeats,seed,class,precision,recall,f1,accuracy\n";
  for (const auto& r : reports) {
    auto row = [&](const std::string& cls, double p, double rec, double f1) {
      out << learners::to_string(r.provenance.algorithm) << ',' << r.provenance.embedding << ','
          << r.provenance.protocol << ',' << r.provenance.k << ',' << r.provenance.repeats << ','
          << r.provenance.seed << ',' << cls << ',' << format_double(p, 4) << ','
          << format_double(rec, 4) << ',' << format_double(f1, 4) << ','
          << format_double(r.accuracy, 4) << "\n";
    };
    for (Clarity c : kAllClarity) {
      const auto& m = r.per_class[static_cast<size_t>(c)];
      row(to_string(c), m.precision, m.recall, m.f1);
    }
    row("MACRO", r.macro_precision, r.macro_recall, r.macro_f1);
  }
  return out.str();
}

std::vector<ReportRow> parse_report_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) raise(ErrorClass::Parse, "report CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "algorithm,embedding,protocol,k,repeats,seed,class,precision,recall,f1,accuracy") {
    raise(ErrorClass::Parse, "unexpected report CSV header: " + line);
  }
  std::vector<ReportRow> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != 11) {
      raise(ErrorClass::Parse, "report CSV line " + std::to_string(lineno) + ": expected 11 fields, got " +
                                   std::to_string(fields.size()));
    }
    ReportRow row;
    row.algorithm = fields[0];
    row.embedding = fields[1];
    row.protocol = fields[2];
    try {
      row.k = static_cast<uint32_t>(std::stoul(fields[3]));
      row.repeats = static_cast<uint32_t>(std::stoul(fields[4]));
      row.seed = std::stoull(fields[5]);
      row.cls = fields[6];
      row.precision = std::stod(fields[7]);
      row.recall = std::stod(fields[8]);
      row.f1 = std::stod(fields[9]);
      row.accuracy = std::stod(fields[10]);
    } catch (const std::exception&) {
      raise(ErrorClass::Parse, "report CSV line " + std::to_string(lineno) + ": bad numeric field");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_rows_text(const std::vector<ReportRow>& rows) {
  auto pad = [](const std::string& s, size_t width) {
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
  };
  std::ostringstream out;
  out << "algorithm  embedding  protocol  k    repeats  seed        class             "
         "precision  recall  f1      accuracy\n";
  for (const ReportRow& row : rows) {
    out << pad(row.algorithm, 11) << pad(row.embedding, 11) << pad(row.protocol, 10)
        << pad(std::to_string(row.k), 5) << pad(std::to_string(row.repeats), 9)
        << pad(std::to_string(row.seed), 12) << pad(row.cls, 18)
        << format_double(row.precision, 4) << "     " << format_double(row.recall, 4) << "  "
        << format_double(row.f1, 4) << "  " << format_double(row.accuracy, 4) << "\n";
  }
  return out.str();
}

}  // namespace edre::eval
