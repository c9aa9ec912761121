#include <cmath>

#include "error.hpp"
#include "learners_detail.hpp"

namespace edre::learners {

// Multinomial Naive Bayes with Laplace smoothing. Feature weights may be
// fractional (TF-IDF) but never negative. All arithmetic stays in log space.

TrainedModel train_nb(const TrainSet& data, const HyperParams& params, uint64_t seed,
                      uint64_t embedding_fingerprint) {
  detail::require_nonnegative_features(data, "naive bayes");
  TrainedModel model = detail::model_shell(Algorithm::NB, data, params, seed, embedding_fingerprint);
  const double alpha = params.nb.alpha;
  const size_t k_classes = model.classes.size();
  const uint32_t dimension = model.dimension;

  auto class_of = detail::class_index_of(data.labels, model.classes);
  std::vector<double> class_count(k_classes, 0.0);
  std::vector<std::vector<double>> feature_sum(k_classes, std::vector<double>(dimension, 0.0));
  std::vector<double> total_sum(k_classes, 0.0);

  for (size_t i = 0; i < data.vectors.size(); ++i) {
    uint32_t k = class_of[i];
    class_count[k] += 1.0;
    for (const auto& [feature, value] : data.vectors[i].entries) {
      feature_sum[k][feature] += value;
      total_sum[k] += value;
    }
  }

  model.nb.log_prior.resize(k_classes);
  model.nb.log_like.assign(k_classes, std::vector<double>(dimension, 0.0));
  for (size_t k = 0; k < k_classes; ++k) {
    model.nb.log_prior[k] = std::log(class_count[k] / static_cast<double>(data.size()));
    double denom = std::log(total_sum[k] + alpha * dimension);
    for (uint32_t f = 0; f < dimension; ++f) {
      model.nb.log_like[k][f] = std::log(feature_sum[k][f] + alpha) - denom;
    }
  }
  return model;
}

namespace detail {

std::vector<double> score_nb(const TrainedModel& model, const embed::SparseVector& x) {
  const size_t k_classes = model.classes.size();
  std::vector<double> log_post(k_classes);
  for (size_t k = 0; k < k_classes; ++k) {
    double s = model.nb.log_prior[k];
    for (const auto& [feature, value] : x.entries) {
      if (value < 0) raise(ErrorClass::Invalid, "naive bayes requires non-negative features");
      s += value * model.nb.log_like[k][feature];
    }
    log_post[k] = s;
  }
  // normalize to probabilities via log-sum-exp
  double peak = log_post[argmax_less_clear(log_post)];
  double sum = 0.0;
  for (double v : log_post) sum += std::exp(v - peak);
  double log_z = peak + std::log(sum);
  std::vector<double> posterior(k_classes);
  for (size_t k = 0; k < k_classes; ++k) posterior[k] = std::exp(log_post[k] - log_z);
  return posterior;
}

}  // namespace detail

}  // namespace edre::learners
