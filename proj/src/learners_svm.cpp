#include <algorithm>
#include <cmath>
#include <numeric>

#include "learners_detail.hpp"
#include "rng.hpp"

namespace edre::learners {

// One-vs-rest linear SVM trained with the Pegasos stochastic subgradient
// schedule: eta_t = 1/(lambda*t), lambda = 1/(C*n). The weight vector is
// kept as scale*direction so the per-step shrink does not touch every
// coordinate. The bias is unregularized and moves only on margin violations.

namespace {

constexpr uint64_t kSvmStream = 0x53564d; // "SVM"

void train_one_class(const TrainSet& data, const std::vector<int8_t>& y, double lambda,
                     uint32_t epochs, uint64_t seed, std::vector<double>& w, double& b) {
  const size_t n = data.size();
  std::vector<double> direction(w.size(), 0.0);
  double scale = 1.0;
  b = 0.0;

  Rng rng(seed);
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  uint64_t t = 0;
  for (uint32_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (uint32_t i : order) {
      ++t;
      double eta = 1.0 / (lambda * static_cast<double>(t));
      double factor = 1.0 - eta * lambda;  // = 1 - 1/t
      if (factor == 0.0) {
        std::fill(direction.begin(), direction.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= factor;
      }
      double dot = 0.0;
      for (const auto& [feature, value] : data.vectors[i].entries) dot += direction[feature] * value;
      double margin = y[i] * (scale * dot + b);
      if (margin < 1.0) {
        double push = eta * y[i] / scale;
        for (const auto& [feature, value] : data.vectors[i].entries) direction[feature] += push * value;
        b += eta * y[i];
      }
      if (scale < 1e-9) {  // fold the scale back in before it underflows
        for (double& v : direction) v *= scale;
        scale = 1.0;
      }
    }
  }
  for (size_t f = 0; f < w.size(); ++f) w[f] = scale * direction[f];
}

}  // namespace

TrainedModel train_svm(const TrainSet& data, const HyperParams& params, uint64_t seed,
                       uint64_t embedding_fingerprint) {
  TrainedModel model = detail::model_shell(Algorithm::SVM, data, params, seed, embedding_fingerprint);
  const size_t k_classes = model.classes.size();
  const double lambda = 1.0 / (params.svm.C * static_cast<double>(data.size()));

  auto class_of = detail::class_index_of(data.labels, model.classes);
  model.linear.weights.assign(k_classes, std::vector<double>(model.dimension, 0.0));
  model.linear.bias.assign(k_classes, 0.0);

  for (size_t k = 0; k < k_classes; ++k) {
    std::vector<int8_t> y(data.size());
    for (size_t i = 0; i < data.size(); ++i) y[i] = class_of[i] == k ? 1 : -1;
    train_one_class(data, y, lambda, params.svm.epochs, Rng::mix(Rng::mix(seed, kSvmStream), k),
                    model.linear.weights[k], model.linear.bias[k]);
  }
  return model;
}

namespace detail {

std::vector<double> score_svm(const TrainedModel& model, const embed::SparseVector& x) {
  const size_t k_classes = model.classes.size();
  std::vector<double> margins(model.linear.bias);
  for (size_t k = 0; k < k_classes; ++k) {
    const auto& w = model.linear.weights[k];
    for (const auto& [feature, value] : x.entries) margins[k] += w[feature] * value;
  }
  return margins;
}

}  // namespace detail

}  // namespace edre::learners
