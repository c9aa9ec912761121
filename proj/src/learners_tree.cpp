#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "learners_detail.hpp"
#include "rng.hpp"

namespace edre::learners {

// Shared CART machinery for the forest and the boosting trainers. Nodes
// gather their instances' sparse entries, sort them by (feature, value),
// and sweep each feature group once; instances absent from a column sit in
// an implicit zero block, so all-zero features are never even visited.

namespace {

constexpr uint64_t kForestStream = 0x5246;  // "RF"
constexpr uint64_t kGbrtStream = 0x47425254;  // "GBRT"
constexpr double kMinGain = 1e-12;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct Entry {
  uint32_t feature;
  double value;
  uint32_t position;  // absolute index into the node's instance array
};

struct SideStats {
  double count = 0.0;
  std::array<double, 4> hist{};  // class counts (gini mode)
  double grad = 0.0;             // gradient sum (regression mode)
  double hess = 0.0;

  void add(const SideStats& o) {
    count += o.count;
    for (size_t k = 0; k < hist.size(); ++k) hist[k] += o.hist[k];
    grad += o.grad;
    hess += o.hess;
  }
  void subtract_from(const SideStats& total, SideStats& out) const {
    out.count = total.count - count;
    for (size_t k = 0; k < hist.size(); ++k) out.hist[k] = total.hist[k] - hist[k];
    out.grad = total.grad - grad;
    out.hess = total.hess - hess;
  }
};

struct SweepItem {
  double value;
  SideStats stats;
};

struct BuildContext {
  const TrainSet* data = nullptr;
  std::vector<std::vector<std::pair<uint32_t, double>>> rows;  // per-row sorted entries
  const std::vector<uint32_t>* class_of = nullptr;             // gini mode
  const std::vector<double>* grad = nullptr;                   // regression mode
  const std::vector<double>* hess = nullptr;
  size_t k_classes = 0;
  bool gini = false;
  uint32_t max_depth = 0;
  uint32_t candidates = 0;  // 0 means every feature present in the node
  Rng* rng = nullptr;
  std::vector<uint32_t> sample_stamp;
  uint32_t stamp = 0;

  void init_rows() {
    rows.resize(data->size());
    for (size_t i = 0; i < data->size(); ++i) {
      rows[i].assign(data->vectors[i].entries.begin(), data->vectors[i].entries.end());
    }
    sample_stamp.assign(data->vectors.front().dimension, 0);
  }

  double purity(const SideStats& s) const {
    if (s.count <= 0.0) return 0.0;
    if (gini) {
      double sum = 0.0;
      for (size_t k = 0; k < k_classes; ++k) sum += s.hist[k] * s.hist[k];
      return sum / s.count;
    }
    return s.grad * s.grad / s.count;
  }

  void accumulate(uint32_t row, SideStats& s) const {
    s.count += 1.0;
    if (gini) {
      s.hist[(*class_of)[row]] += 1.0;
    } else {
      s.grad += (*grad)[row];
      s.hess += (*hess)[row];
    }
  }
};

std::vector<double> leaf_payload(const BuildContext& ctx, const SideStats& stats) {
  if (ctx.gini) {
    return std::vector<double>(stats.hist.begin(), stats.hist.begin() + ctx.k_classes);
  }
  // Newton step for logistic loss; the hessian sum can be tiny on saturated
  // leaves, so it is floored and the value clamped.
  double value = stats.grad / std::max(stats.hess, 1e-6);
  return {std::clamp(value, -10.0, 10.0)};
}

uint32_t build_node(BuildContext& ctx, std::vector<uint32_t>& inst, uint32_t lo, uint32_t hi,
                    uint32_t depth, Tree& tree) {
  uint32_t node_id = static_cast<uint32_t>(tree.nodes.size());
  tree.nodes.emplace_back();

  SideStats node_stats;
  for (uint32_t p = lo; p < hi; ++p) ctx.accumulate(inst[p], node_stats);

  bool stop = depth >= ctx.max_depth || hi - lo < 2;
  if (!stop && ctx.gini) {
    size_t present = 0;
    for (size_t k = 0; k < ctx.k_classes; ++k) present += node_stats.hist[k] > 0.0 ? 1 : 0;
    stop = present <= 1;
  }
  if (stop) {
    tree.nodes[node_id].leaf = leaf_payload(ctx, node_stats);
    return node_id;
  }

  std::vector<Entry> entries;
  for (uint32_t p = lo; p < hi; ++p) {
    for (const auto& [feature, value] : ctx.rows[inst[p]]) entries.push_back({feature, value, p});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.feature != b.feature ? a.feature < b.feature : a.value < b.value;
  });

  if (ctx.candidates > 0) {
    ++ctx.stamp;
    uint32_t dimension = static_cast<uint32_t>(ctx.sample_stamp.size());
    uint32_t want = std::min(ctx.candidates, dimension);
    uint32_t drawn = 0;
    while (drawn < want) {
      uint32_t f = static_cast<uint32_t>(ctx.rng->index(dimension));
      if (ctx.sample_stamp[f] != ctx.stamp) {
        ctx.sample_stamp[f] = ctx.stamp;
        ++drawn;
      }
    }
  }

  double parent_purity = ctx.purity(node_stats);
  double best_score = parent_purity + kMinGain;
  int64_t best_feature = -1;
  double best_threshold = 0.0;

  std::vector<SweepItem> items;
  for (size_t i = 0; i < entries.size();) {
    size_t j = i;
    uint32_t feature = entries[i].feature;
    while (j < entries.size() && entries[j].feature == feature) ++j;
    if (ctx.candidates > 0 && ctx.sample_stamp[feature] != ctx.stamp) {
      i = j;
      continue;
    }

    items.clear();
    SideStats nonzero;
    for (size_t e = i; e < j; ++e) {
      if (items.empty() || items.back().value != entries[e].value) {
        items.push_back({entries[e].value, {}});
      }
      ctx.accumulate(inst[entries[e].position], items.back().stats);
    }
    for (const auto& item : items) nonzero.add(item.stats);
    double zero_count = node_stats.count - nonzero.count;
    if (zero_count > 0.0) {
      SweepItem zero_item{0.0, {}};
      nonzero.subtract_from(node_stats, zero_item.stats);
      auto at = std::upper_bound(items.begin(), items.end(), 0.0,
                                 [](double v, const SweepItem& it) { return v < it.value; });
      items.insert(at, zero_item);
    }
    if (items.size() >= 2) {
      SideStats left;
      for (size_t t = 0; t + 1 < items.size(); ++t) {
        left.add(items[t].stats);
        SideStats right;
        left.subtract_from(node_stats, right);
        double score = ctx.purity(left) + ctx.purity(right);
        if (score > best_score) {
          best_score = score;
          best_feature = feature;
          best_threshold = (items[t].value + items[t + 1].value) / 2.0;
        }
      }
    }
    i = j;
  }

  if (best_feature < 0) {
    tree.nodes[node_id].leaf = leaf_payload(ctx, node_stats);
    return node_id;
  }

  // Per-position values of the chosen feature, then a stable two-way split.
  std::vector<double> position_value(hi - lo, 0.0);
  auto first = std::lower_bound(entries.begin(), entries.end(), best_feature,
                                [](const Entry& e, int64_t f) { return e.feature < static_cast<uint32_t>(f); });
  for (auto it = first; it != entries.end() && it->feature == best_feature; ++it) {
    position_value[it->position - lo] = it->value;
  }
  std::vector<uint32_t> left_rows, right_rows;
  for (uint32_t p = lo; p < hi; ++p) {
    (position_value[p - lo] <= best_threshold ? left_rows : right_rows).push_back(inst[p]);
  }
  uint32_t mid = lo + static_cast<uint32_t>(left_rows.size());
  std::copy(left_rows.begin(), left_rows.end(), inst.begin() + lo);
  std::copy(right_rows.begin(), right_rows.end(), inst.begin() + mid);

  uint32_t left_id = build_node(ctx, inst, lo, mid, depth + 1, tree);
  uint32_t right_id = build_node(ctx, inst, mid, hi, depth + 1, tree);
  TreeNode& node = tree.nodes[node_id];
  node.feature = static_cast<int32_t>(best_feature);
  node.threshold = best_threshold;
  node.left = left_id;
  node.right = right_id;
  return node_id;
}

Tree build_tree(BuildContext& ctx, std::vector<uint32_t> instances) {
  Tree tree;
  build_node(ctx, instances, 0, static_cast<uint32_t>(instances.size()), 0, tree);
  return tree;
}

}  // namespace

TrainedModel train_forest(const TrainSet& data, const HyperParams& params, uint64_t seed,
                          uint64_t embedding_fingerprint) {
  TrainedModel model = detail::model_shell(Algorithm::RF, data, params, seed, embedding_fingerprint);
  const size_t n = data.size();
  auto class_of = detail::class_index_of(data.labels, model.classes);

  BuildContext ctx;
  ctx.data = &data;
  ctx.class_of = &class_of;
  ctx.k_classes = model.classes.size();
  ctx.gini = true;
  ctx.max_depth = params.forest.max_depth;
  ctx.candidates = std::max<uint32_t>(
      1, static_cast<uint32_t>(std::floor(std::sqrt(static_cast<double>(model.dimension)))));
  ctx.init_rows();

  model.forest.trees.reserve(params.forest.trees);
  for (uint32_t t = 0; t < params.forest.trees; ++t) {
    Rng rng(Rng::mix(Rng::mix(seed, kForestStream), t));
    ctx.rng = &rng;
    std::vector<uint32_t> instances(n);
    if (params.forest.bootstrap) {
      for (auto& r : instances) r = static_cast<uint32_t>(rng.index(n));
    } else {
      std::iota(instances.begin(), instances.end(), 0);
    }
    model.forest.trees.push_back(build_tree(ctx, std::move(instances)));
  }
  return model;
}

TrainedModel train_gbrt(const TrainSet& data, const HyperParams& params, uint64_t seed,
                        uint64_t embedding_fingerprint) {
  TrainedModel model = detail::model_shell(Algorithm::GBRT, data, params, seed, embedding_fingerprint);
  const size_t n = data.size();
  const size_t k_classes = model.classes.size();
  auto class_of = detail::class_index_of(data.labels, model.classes);

  BuildContext ctx;
  ctx.data = &data;
  ctx.k_classes = k_classes;
  ctx.gini = false;
  ctx.max_depth = params.gbrt.max_depth;
  ctx.candidates = 0;
  ctx.init_rows();

  model.gbrt.f0.resize(k_classes);
  for (size_t k = 0; k < k_classes; ++k) {
    double p = std::clamp(model.class_priors[k], 1e-6, 1.0 - 1e-6);
    model.gbrt.f0[k] = std::log(p / (1.0 - p));
  }
  model.gbrt.rounds.assign(k_classes, {});
  for (auto& per_class : model.gbrt.rounds) per_class.reserve(params.gbrt.rounds);

  std::vector<std::vector<double>> f(k_classes, std::vector<double>(n));
  for (size_t k = 0; k < k_classes; ++k) std::fill(f[k].begin(), f[k].end(), model.gbrt.f0[k]);

  std::vector<double> grad(n), hess(n);
  ctx.grad = &grad;
  ctx.hess = &hess;

  std::vector<uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  for (uint32_t round = 0; round < params.gbrt.rounds; ++round) {
    Rng rng(Rng::mix(Rng::mix(seed, kGbrtStream), round));
    ctx.rng = &rng;

    std::vector<uint32_t> sample = all_rows;
    size_t take = std::max<size_t>(1, static_cast<size_t>(params.gbrt.subsample * static_cast<double>(n)));
    if (take < n) {
      rng.shuffle(sample);
      sample.resize(take);
      std::sort(sample.begin(), sample.end());
    }

    for (size_t k = 0; k < k_classes; ++k) {
      for (size_t i = 0; i < n; ++i) {
        double p = sigmoid(f[k][i]);
        grad[i] = (class_of[i] == k ? 1.0 : 0.0) - p;
        hess[i] = p * (1.0 - p);
      }
      Tree tree = build_tree(ctx, sample);
      for (size_t i = 0; i < n; ++i) {
        f[k][i] += params.gbrt.shrinkage * detail::leaf_for(tree, data.vectors[i]).leaf[0];
      }
      model.gbrt.rounds[k].push_back(std::move(tree));
    }
  }
  return model;
}

std::vector<double> logistic_pseudo_residuals(const std::vector<double>& y01,
                                              const std::vector<double>& f) {
  std::vector<double> out(y01.size());
  for (size_t i = 0; i < y01.size(); ++i) out[i] = y01[i] - sigmoid(f[i]);
  return out;
}

namespace detail {

std::vector<double> score_forest(const TrainedModel& model, const embed::SparseVector& x) {
  const size_t k_classes = model.classes.size();
  std::vector<double> votes(k_classes, 0.0);
  for (const auto& tree : model.forest.trees) {
    const auto& leaf = leaf_for(tree, x).leaf;
    size_t winner = 0;
    for (size_t k = 1; k < k_classes; ++k) {
      if (leaf[k] > leaf[winner]) winner = k;
    }
    votes[winner] += 1.0;
  }
  for (double& v : votes) v /= static_cast<double>(model.forest.trees.size());
  return votes;
}

std::vector<double> score_gbrt(const TrainedModel& model, const embed::SparseVector& x) {
  const size_t k_classes = model.classes.size();
  std::vector<double> scores(model.gbrt.f0);
  for (size_t k = 0; k < k_classes; ++k) {
    for (const auto& tree : model.gbrt.rounds[k]) {
      scores[k] += model.params.gbrt.shrinkage * leaf_for(tree, x).leaf[0];
    }
  }
  return scores;
}

}  // namespace detail

}  // namespace edre::learners
