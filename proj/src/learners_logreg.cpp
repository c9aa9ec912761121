#include <cmath>

#include "error.hpp"
#include "learners_detail.hpp"

namespace edre::learners {

// Multinomial softmax regression, L2 penalty on weights (not bias), trained
// by full-batch gradient descent. A step that raises the loss is reverted
// and retried at half the step size, so the recorded loss sequence is
// monotone non-increasing by construction.

namespace {

void softmax_row(std::vector<double>& scores) {
  double peak = scores[0];
  for (double v : scores) peak = std::max(peak, v);
  double sum = 0.0;
  for (double& v : scores) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : scores) v /= sum;
}

std::vector<double> raw_scores(const LinearParams& params, const embed::SparseVector& x) {
  const size_t k_classes = params.bias.size();
  std::vector<double> scores(params.bias);
  for (size_t k = 0; k < k_classes; ++k) {
    const auto& w = params.weights[k];
    for (const auto& [feature, value] : x.entries) scores[k] += w[feature] * value;
  }
  return scores;
}

}  // namespace

double logreg_loss(const TrainSet& data, const std::vector<Clarity>& classes,
                   const LinearParams& params, double lambda) {
  auto class_of = detail::class_index_of(data.labels, classes);
  const double n = static_cast<double>(data.size());
  double loss = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    auto scores = raw_scores(params, data.vectors[i]);
    double peak = scores[0];
    for (double v : scores) peak = std::max(peak, v);
    double sum = 0.0;
    for (double v : scores) sum += std::exp(v - peak);
    loss += (peak + std::log(sum)) - scores[class_of[i]];
  }
  loss /= n;
  double penalty = 0.0;
  for (const auto& w : params.weights) {
    for (double v : w) penalty += v * v;
  }
  return loss + 0.5 * lambda * penalty;
}

void logreg_gradient(const TrainSet& data, const std::vector<Clarity>& classes,
                     const LinearParams& params, double lambda, LinearParams& grad) {
  const size_t k_classes = classes.size();
  const uint32_t dimension = data.vectors.front().dimension;
  grad.weights.assign(k_classes, std::vector<double>(dimension, 0.0));
  grad.bias.assign(k_classes, 0.0);

  auto class_of = detail::class_index_of(data.labels, classes);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    auto p = raw_scores(params, data.vectors[i]);
    softmax_row(p);
    p[class_of[i]] -= 1.0;
    for (size_t k = 0; k < k_classes; ++k) {
      double coeff = p[k] * inv_n;
      if (coeff == 0.0) continue;
      grad.bias[k] += coeff;
      auto& gw = grad.weights[k];
      for (const auto& [feature, value] : data.vectors[i].entries) gw[feature] += coeff * value;
    }
  }
  for (size_t k = 0; k < k_classes; ++k) {
    auto& gw = grad.weights[k];
    const auto& w = params.weights[k];
    for (uint32_t f = 0; f < dimension; ++f) gw[f] += lambda * w[f];
  }
}

TrainedModel train_logreg_traced(const TrainSet& data, const HyperParams& params, uint64_t seed,
                                 uint64_t embedding_fingerprint, LogRegTrace* trace) {
  TrainedModel model = detail::model_shell(Algorithm::LOGREG, data, params, seed, embedding_fingerprint);
  const size_t k_classes = model.classes.size();
  const uint32_t dimension = model.dimension;
  const auto& config = params.logreg;

  LinearParams current;
  current.weights.assign(k_classes, std::vector<double>(dimension, 0.0));
  current.bias.assign(k_classes, 0.0);

  double loss = logreg_loss(data, model.classes, current, config.lambda);
  if (trace) trace->losses.push_back(loss);

  double step = config.step;
  LinearParams grad;
  bool converged = false;
  for (uint32_t iter = 0; iter < config.max_iters && !converged; ++iter) {
    logreg_gradient(data, model.classes, current, config.lambda, grad);

    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      LinearParams next = current;
      for (size_t k = 0; k < k_classes; ++k) {
        for (uint32_t f = 0; f < dimension; ++f) next.weights[k][f] -= step * grad.weights[k][f];
        next.bias[k] -= step * grad.bias[k];
      }
      double next_loss = logreg_loss(data, model.classes, next, config.lambda);
      if (next_loss <= loss) {
        converged = (loss - next_loss) < config.tolerance;
        current = std::move(next);
        loss = next_loss;
        if (trace) trace->losses.push_back(loss);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no achievable descent at any step size
  }

  model.linear = std::move(current);
  return model;
}

TrainedModel train_logreg(const TrainSet& data, const HyperParams& params, uint64_t seed,
                          uint64_t embedding_fingerprint) {
  return train_logreg_traced(data, params, seed, embedding_fingerprint, nullptr);
}

namespace detail {

std::vector<double> score_logreg(const TrainedModel& model, const embed::SparseVector& x) {
  auto scores = raw_scores(model.linear, x);
  softmax_row(scores);
  return scores;
}

}  // namespace detail

}  // namespace edre::learners
