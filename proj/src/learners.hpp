#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clarity.hpp"
#include "embed.hpp"

namespace edre::learners {

enum class Algorithm : uint8_t { NB = 0, LOGREG = 1, SVM = 2, RF = 3, GBRT = 4 };
constexpr int kAlgorithmCount = 5;
constexpr Algorithm kAllAlgorithms[] = {Algorithm::NB, Algorithm::LOGREG, Algorithm::SVM,
                                        Algorithm::RF, Algorithm::GBRT};

const char* to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct TrainSet {
  std::vector<embed::SparseVector> vectors;
  std::vector<Clarity> labels;
  std::vector<std::string> review_ids;

  size_t size() const { return vectors.size(); }
  // aligned lengths, nonempty, uniform dimension, finite values, >= 2 classes
  void validate() const;
};

struct NbConfig {
  double alpha = 1.0;
};
struct LogRegConfig {
  double lambda = 1e-3;
  double step = 1.0;        // halved whenever a step would raise the loss
  uint32_t max_iters = 300;
  double tolerance = 1e-8;
};
struct SvmConfig {
  double C = 1.0;
  uint32_t epochs = 20;
};
struct ForestConfig {
  uint32_t trees = 100;
  uint32_t max_depth = 12;
  bool bootstrap = true;  // off only for split-oracle tests
};
struct GbrtConfig {
  uint32_t rounds = 100;
  double shrinkage = 0.1;
  uint32_t max_depth = 3;
  double subsample = 0.8;  // row fraction per round; < 1 makes seeds matter
};

// Carries every algorithm's settings; `algorithm` picks the active one.
struct HyperParams {
  Algorithm algorithm = Algorithm::NB;
  NbConfig nb;
  LogRegConfig logreg;
  SvmConfig svm;
  ForestConfig forest;
  GbrtConfig gbrt;

  void validate() const;
  std::string describe() const;  // e.g. "alpha=0.5" or "trees=100,depth=12"
};

struct TreeNode {
  int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  uint32_t left = 0;
  uint32_t right = 0;
  std::vector<double> leaf;  // class counts (forest) or one value (boosting)
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct NbParams {
  std::vector<double> log_prior;              // per class
  std::vector<std::vector<double>> log_like;  // [class][feature]
};
struct LinearParams {
  std::vector<std::vector<double>> weights;  // [class][feature]
  std::vector<double> bias;                  // per class, unregularized
};
struct ForestParams {
  std::vector<Tree> trees;
};
struct GbrtParams {
  std::vector<double> f0;                     // per-class prior logit
  std::vector<std::vector<Tree>> rounds;      // [class][round]
};

constexpr uint32_t kModelFormatVersion = 1;

struct TrainedModel {
  Algorithm algorithm = Algorithm::NB;
  std::vector<Clarity> classes;  // distinct training labels, ordinal order
  uint32_t dimension = 0;
  uint64_t embedding_fingerprint = 0;
  uint64_t seed = 0;
  uint32_t format_version = kModelFormatVersion;
  HyperParams params;
  std::vector<double> class_priors;  // training label fractions, per class

  NbParams nb;
  LinearParams linear;  // LOGREG and SVM
  ForestParams forest;
  GbrtParams gbrt;

  // Present when the model was trained through the text pipeline; lets a
  // loaded model vectorize raw text on its own.
  std::optional<embed::EmbeddingSource> embedding;
};

struct Prediction {
  Clarity label = Clarity::Unclear;
  std::vector<double> scores;  // aligned with model.classes
  bool low_confidence = false; // the input vector had no entries
};

// Deterministic for a fixed (data order, params, seed). Score semantics:
// NB/LOGREG probabilities summing to 1, SVM margins, RF tree-vote fractions,
// GBRT additive logits.
TrainedModel train(const TrainSet& data, const HyperParams& params, uint64_t seed,
                   uint64_t embedding_fingerprint);

// Label = argmax score; score ties resolve to the less-clear class. An empty
// vector falls back to the training priors and sets low_confidence.
Prediction predict(const TrainedModel& model, const embed::SparseVector& x);

// Exposed for gradient and residual checks.
double logreg_loss(const TrainSet& data, const std::vector<Clarity>& classes,
                   const LinearParams& params, double lambda);
void logreg_gradient(const TrainSet& data, const std::vector<Clarity>& classes,
                     const LinearParams& params, double lambda, LinearParams& grad);
// Negative gradient of per-sample logistic loss: y - sigmoid(f).
std::vector<double> logistic_pseudo_residuals(const std::vector<double>& y01,
                                              const std::vector<double>& f);

// Loss after each accepted LOGREG iteration, in order. Training asserts the
// sequence is non-increasing; tests inspect it through this hook.
struct LogRegTrace {
  std::vector<double> losses;
};
TrainedModel train_logreg_traced(const TrainSet& data, const HyperParams& params, uint64_t seed,
                                 uint64_t embedding_fingerprint, LogRegTrace* trace);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view bytes);

// Internal trainers, dispatched by train(); exposed so tests can target one.
TrainedModel train_nb(const TrainSet& data, const HyperParams& params, uint64_t seed,
                      uint64_t embedding_fingerprint);
TrainedModel train_logreg(const TrainSet& data, const HyperParams& params, uint64_t seed,
                          uint64_t embedding_fingerprint);
TrainedModel train_svm(const TrainSet& data, const HyperParams& params, uint64_t seed,
                       uint64_t embedding_fingerprint);
TrainedModel train_forest(const TrainSet& data, const HyperParams& params, uint64_t seed,
                          uint64_t embedding_fingerprint);
TrainedModel train_gbrt(const TrainSet& data, const HyperParams& params, uint64_t seed,
                        uint64_t embedding_fingerprint);

}  // namespace edre::learners
