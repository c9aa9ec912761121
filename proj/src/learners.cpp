#include "learners.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "error.hpp"
#include "learners_detail.hpp"
#include "util.hpp"

namespace edre::learners {

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::NB: return "nb";
    case Algorithm::LOGREG: return "logreg";
    case Algorithm::SVM: return "svm";
    case Algorithm::RF: return "rf";
    case Algorithm::GBRT: return "gbrt";
  }
  return "nb";
}

Algorithm algorithm_from_string(const std::string& name) {
  std::string lower = to_lower_ascii(name);
  for (Algorithm a : kAllAlgorithms) {
    if (lower == to_string(a)) return a;
  }
  raise(ErrorClass::Invalid, "unknown algorithm \"" + name + "\" (expected nb, logreg, svm, rf, or gbrt)");
}

void TrainSet::validate() const {
  if (vectors.empty()) raise(ErrorClass::Invalid, "training set is empty");
  if (labels.size() != vectors.size() || review_ids.size() != vectors.size()) {
    raise(ErrorClass::Invalid, "training set lists are misaligned: " + std::to_string(vectors.size()) +
                                   " vectors, " + std::to_string(labels.size()) + " labels, " +
                                   std::to_string(review_ids.size()) + " review ids");
  }
  uint32_t dimension = vectors.front().dimension;
  for (size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dimension != dimension) {
      raise(ErrorClass::Invalid, "review \"" + review_ids[i] + "\" has dimension " +
                                     std::to_string(vectors[i].dimension) + ", expected " +
                                     std::to_string(dimension));
    }
    for (const auto& [index, value] : vectors[i].entries) {
      if (!std::isfinite(value)) {
        raise(ErrorClass::Invalid, "review \"" + review_ids[i] + "\" has a non-finite feature value");
      }
    }
  }
  std::set<Clarity> seen(labels.begin(), labels.end());
  if (seen.size() < 2) {
    raise(ErrorClass::Invalid, "training needs at least 2 distinct labels, got " +
                                   std::to_string(seen.size()));
  }
}

void HyperParams::validate() const {
  switch (algorithm) {
    case Algorithm::NB:
      if (nb.alpha <= 0) raise(ErrorClass::Invalid, "nb alpha must be > 0");
      break;
    case Algorithm::LOGREG:
      if (logreg.lambda < 0) raise(ErrorClass::Invalid, "logreg lambda must be >= 0");
      if (logreg.step <= 0) raise(ErrorClass::Invalid, "logreg step must be > 0");
      if (logreg.max_iters == 0) raise(ErrorClass::Invalid, "logreg max_iters must be > 0");
      break;
    case Algorithm::SVM:
      if (svm.C <= 0) raise(ErrorClass::Invalid, "svm C must be > 0");
      if (svm.epochs == 0) raise(ErrorClass::Invalid, "svm epochs must be > 0");
      break;
    case Algorithm::RF:
      if (forest.trees == 0) raise(ErrorClass::Invalid, "rf trees must be > 0");
      if (forest.max_depth == 0) raise(ErrorClass::Invalid, "rf depth must be > 0");
      break;
    case Algorithm::GBRT:
      if (gbrt.rounds == 0) raise(ErrorClass::Invalid, "gbrt rounds must be > 0");
      if (gbrt.shrinkage <= 0 || gbrt.shrinkage > 1) raise(ErrorClass::Invalid, "gbrt shrinkage must be in (0,1]");
      if (gbrt.subsample <= 0 || gbrt.subsample > 1) raise(ErrorClass::Invalid, "gbrt subsample must be in (0,1]");
      if (gbrt.max_depth == 0) raise(ErrorClass::Invalid, "gbrt depth must be > 0");
      break;
  }
}

std::string HyperParams::describe() const {
  std::ostringstream out;
  switch (algorithm) {
    case Algorithm::NB:
      out << "alpha=" << format_double(nb.alpha, 4);
      break;
    case Algorithm::LOGREG:
      out << "lambda=" << format_double(logreg.lambda, 6);
      break;
    case Algorithm::SVM:
      out << "C=" << format_double(svm.C, 4) << ",epochs=" << svm.epochs;
      break;
    case Algorithm::RF:
      out << "trees=" << forest.trees << ",depth=" << forest.max_depth;
      break;
    case Algorithm::GBRT:
      out << "rounds=" << gbrt.rounds << ",eta=" << format_double(gbrt.shrinkage, 4);
      break;
  }
  return out.str();
}

namespace detail {

std::vector<Clarity> distinct_classes(const std::vector<Clarity>& labels) {
  std::set<Clarity> seen(labels.begin(), labels.end());
  return std::vector<Clarity>(seen.begin(), seen.end());  // ordinal order, least clear first
}

std::vector<uint32_t> class_index_of(const std::vector<Clarity>& labels,
                                     const std::vector<Clarity>& classes) {
  std::vector<uint32_t> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(classes.begin(), classes.end(), labels[i]);
    out[i] = static_cast<uint32_t>(it - classes.begin());
  }
  return out;
}

size_t argmax_less_clear(const std::vector<double>& scores) {
  size_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

TrainedModel model_shell(Algorithm algorithm, const TrainSet& data, const HyperParams& params,
                         uint64_t seed, uint64_t embedding_fingerprint) {
  TrainedModel model;
  model.algorithm = algorithm;
  model.classes = distinct_classes(data.labels);
  model.dimension = data.vectors.front().dimension;
  model.embedding_fingerprint = embedding_fingerprint;
  model.seed = seed;
  model.params = params;
  model.params.algorithm = algorithm;
  model.class_priors.assign(model.classes.size(), 0.0);
  auto indices = class_index_of(data.labels, model.classes);
  for (uint32_t k : indices) model.class_priors[k] += 1.0;
  for (double& p : model.class_priors) p /= static_cast<double>(data.labels.size());
  return model;
}

double vector_at(const embed::SparseVector& x, uint32_t feature) {
  auto it = x.entries.find(feature);
  return it == x.entries.end() ? 0.0 : it->second;
}

const TreeNode& leaf_for(const Tree& tree, const embed::SparseVector& x) {
  uint32_t index = 0;
  while (tree.nodes[index].feature >= 0) {
    const TreeNode& node = tree.nodes[index];
    index = vector_at(x, static_cast<uint32_t>(node.feature)) <= node.threshold ? node.left : node.right;
  }
  return tree.nodes[index];
}

void require_nonnegative_features(const TrainSet& data, const char* algorithm_name) {
  for (size_t i = 0; i < data.vectors.size(); ++i) {
    for (const auto& [index, value] : data.vectors[i].entries) {
      if (value < 0) {
        raise(ErrorClass::Invalid, std::string(algorithm_name) + " requires non-negative features; review \"" +
                                       data.review_ids[i] + "\" has a negative value");
      }
    }
  }
}

}  // namespace detail

TrainedModel train(const TrainSet& data, const HyperParams& params, uint64_t seed,
                   uint64_t embedding_fingerprint) {
  data.validate();
  params.validate();
  switch (params.algorithm) {
    case Algorithm::NB: return train_nb(data, params, seed, embedding_fingerprint);
    case Algorithm::LOGREG: return train_logreg(data, params, seed, embedding_fingerprint);
    case Algorithm::SVM: return train_svm(data, params, seed, embedding_fingerprint);
    case Algorithm::RF: return train_forest(data, params, seed, embedding_fingerprint);
    case Algorithm::GBRT: return train_gbrt(data, params, seed, embedding_fingerprint);
  }
  raise(ErrorClass::Internal, "unhandled algorithm");
}

Prediction predict(const TrainedModel& model, const embed::SparseVector& x) {
  if (x.dimension != model.dimension) {
    raise(ErrorClass::Invalid, "query vector dimension " + std::to_string(x.dimension) +
                                   " does not match model dimension " + std::to_string(model.dimension));
  }
  for (const auto& [index, value] : x.entries) {
    if (!std::isfinite(value)) raise(ErrorClass::Invalid, "query vector has a non-finite value");
  }

  Prediction prediction;
  if (x.entries.empty()) {
    prediction.scores = model.class_priors;
    prediction.low_confidence = true;
  } else {
    switch (model.algorithm) {
      case Algorithm::NB: prediction.scores = detail::score_nb(model, x); break;
      case Algorithm::LOGREG: prediction.scores = detail::score_logreg(model, x); break;
      case Algorithm::SVM: prediction.scores = detail::score_svm(model, x); break;
      case Algorithm::RF: prediction.scores = detail::score_forest(model, x); break;
      case Algorithm::GBRT: prediction.scores = detail::score_gbrt(model, x); break;
    }
  }
  prediction.label = model.classes[detail::argmax_less_clear(prediction.scores)];
  return prediction;
}

}  // namespace edre::learners
