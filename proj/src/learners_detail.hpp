#pragma once

#include "learners.hpp"

// Pieces shared between the per-algorithm translation units.

namespace edre::learners::detail {

std::vector<Clarity> distinct_classes(const std::vector<Clarity>& labels);

// Each label's index into `classes`.
std::vector<uint32_t> class_index_of(const std::vector<Clarity>& labels,
                                     const std::vector<Clarity>& classes);

// Strict > scan from index 0; classes are stored least-clear first, so ties
// land on the less-clear class.
size_t argmax_less_clear(const std::vector<double>& scores);

// Model with algorithm, classes, dimension, priors, and metadata filled in.
TrainedModel model_shell(Algorithm algorithm, const TrainSet& data, const HyperParams& params,
                         uint64_t seed, uint64_t embedding_fingerprint);

double vector_at(const embed::SparseVector& x, uint32_t feature);

const TreeNode& leaf_for(const Tree& tree, const embed::SparseVector& x);

std::vector<double> score_nb(const TrainedModel& model, const embed::SparseVector& x);
std::vector<double> score_logreg(const TrainedModel& model, const embed::SparseVector& x);
std::vector<double> score_svm(const TrainedModel& model, const embed::SparseVector& x);
std::vector<double> score_forest(const TrainedModel& model, const embed::SparseVector& x);
std::vector<double> score_gbrt(const TrainedModel& model, const embed::SparseVector& x);

void require_nonnegative_features(const TrainSet& data, const char* algorithm_name);

}  // namespace edre::learners::detail
