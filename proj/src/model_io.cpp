#include "binio.hpp"
#include "error.hpp"
#include "learners.hpp"
#include "util.hpp"

namespace edre::learners {

// Model file: little-endian, self-describing header, then the active
// algorithm's hyperparameters, payload, and optional embedding source.

namespace {

constexpr std::string_view kModelMagic = "EDREMODL";

void write_tree(ByteWriter& out, const Tree& tree) {
  out.u32(static_cast<uint32_t>(tree.nodes.size()));
  for (const auto& node : tree.nodes) {
    out.u32(static_cast<uint32_t>(node.feature));
    out.f64(node.threshold);
    out.u32(node.left);
    out.u32(node.right);
    out.u32(static_cast<uint32_t>(node.leaf.size()));
    for (double v : node.leaf) out.f64(v);
  }
}

Tree read_tree(ByteReader& in) {
  Tree tree;
  uint32_t count = in.u32();
  tree.nodes.resize(count);
  for (auto& node : tree.nodes) {
    node.feature = static_cast<int32_t>(in.u32());
    node.threshold = in.f64();
    node.left = in.u32();
    node.right = in.u32();
    uint32_t leaf_size = in.u32();
    node.leaf.resize(leaf_size);
    for (auto& v : node.leaf) v = in.f64();
    if (node.feature >= 0 && (node.left >= count || node.right >= count)) {
      raise(ErrorClass::Parse, "tree node points past the node table");
    }
  }
  return tree;
}

void write_matrix(ByteWriter& out, const std::vector<std::vector<double>>& m) {
  for (const auto& row : m) {
    for (double v : row) out.f64(v);
  }
}

void read_matrix(ByteReader& in, std::vector<std::vector<double>>& m, size_t rows, size_t cols) {
  m.assign(rows, std::vector<double>(cols));
  for (auto& row : m) {
    for (auto& v : row) v = in.f64();
  }
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  ByteWriter out;
  out.raw(kModelMagic);
  out.u32(model.format_version);
  out.u8(static_cast<uint8_t>(model.algorithm));
  out.u64(model.seed);
  out.u64(model.embedding_fingerprint);
  out.u32(model.dimension);
  out.u8(static_cast<uint8_t>(model.classes.size()));
  for (Clarity c : model.classes) out.u8(static_cast<uint8_t>(c));
  for (double p : model.class_priors) out.f64(p);

  const size_t k_classes = model.classes.size();
  switch (model.algorithm) {
    case Algorithm::NB:
      out.f64(model.params.nb.alpha);
      for (double v : model.nb.log_prior) out.f64(v);
      write_matrix(out, model.nb.log_like);
      break;
    case Algorithm::LOGREG:
      out.f64(model.params.logreg.lambda);
      out.f64(model.params.logreg.step);
      out.u32(model.params.logreg.max_iters);
      out.f64(model.params.logreg.tolerance);
      write_matrix(out, model.linear.weights);
      for (double v : model.linear.bias) out.f64(v);
      break;
    case Algorithm::SVM:
      out.f64(model.params.svm.C);
      out.u32(model.params.svm.epochs);
      write_matrix(out, model.linear.weights);
      for (double v : model.linear.bias) out.f64(v);
      break;
    case Algorithm::RF:
      out.u32(model.params.forest.trees);
      out.u32(model.params.forest.max_depth);
      out.u8(model.params.forest.bootstrap ? 1 : 0);
      out.u32(static_cast<uint32_t>(model.forest.trees.size()));
      for (const auto& tree : model.forest.trees) write_tree(out, tree);
      break;
    case Algorithm::GBRT:
      out.u32(model.params.gbrt.rounds);
      out.f64(model.params.gbrt.shrinkage);
      out.u32(model.params.gbrt.max_depth);
      out.f64(model.params.gbrt.subsample);
      for (double v : model.gbrt.f0) out.f64(v);
      out.u32(model.gbrt.rounds.empty() ? 0 : static_cast<uint32_t>(model.gbrt.rounds.front().size()));
      for (size_t k = 0; k < k_classes; ++k) {
        for (const auto& tree : model.gbrt.rounds[k]) write_tree(out, tree);
      }
      break;
  }

  out.u8(model.embedding.has_value() ? 1 : 0);
  if (model.embedding) embed::write_source(out, *model.embedding);
  return out.take();
}

TrainedModel deserialize_model(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.raw(kModelMagic.size()) != kModelMagic) {
    raise(ErrorClass::Parse, "not a model file (bad magic)");
  }
  TrainedModel model;
  model.format_version = in.u32();
  if (model.format_version > kModelFormatVersion) {
    raise(ErrorClass::Version, "model format version " + std::to_string(model.format_version) +
                                   " is newer than supported version " +
                                   std::to_string(kModelFormatVersion));
  }
  uint8_t algorithm = in.u8();
  if (algorithm >= kAlgorithmCount) {
    raise(ErrorClass::Parse, "unknown algorithm code " + std::to_string(algorithm));
  }
  model.algorithm = static_cast<Algorithm>(algorithm);
  model.params.algorithm = model.algorithm;
  model.seed = in.u64();
  model.embedding_fingerprint = in.u64();
  model.dimension = in.u32();
  uint8_t k_classes = in.u8();
  if (k_classes == 0 || k_classes > kClarityCount) {
    raise(ErrorClass::Parse, "model declares " + std::to_string(k_classes) + " classes");
  }
  model.classes.resize(k_classes);
  for (auto& c : model.classes) {
    uint8_t ordinal = in.u8();
    if (ordinal >= kClarityCount) raise(ErrorClass::Parse, "bad class ordinal " + std::to_string(ordinal));
    c = static_cast<Clarity>(ordinal);
  }
  model.class_priors.resize(k_classes);
  for (auto& p : model.class_priors) p = in.f64();

  switch (model.algorithm) {
    case Algorithm::NB:
      model.params.nb.alpha = in.f64();
      model.nb.log_prior.resize(k_classes);
      for (auto& v : model.nb.log_prior) v = in.f64();
      read_matrix(in, model.nb.log_like, k_classes, model.dimension);
      break;
    case Algorithm::LOGREG:
      model.params.logreg.lambda = in.f64();
      model.params.logreg.step = in.f64();
      model.params.logreg.max_iters = in.u32();
      model.params.logreg.tolerance = in.f64();
      read_matrix(in, model.linear.weights, k_classes, model.dimension);
      model.linear.bias.resize(k_classes);
      for (auto& v : model.linear.bias) v = in.f64();
      break;
    case Algorithm::SVM:
      model.params.svm.C = in.f64();
      model.params.svm.epochs = in.u32();
      read_matrix(in, model.linear.weights, k_classes, model.dimension);
      model.linear.bias.resize(k_classes);
      for (auto& v : model.linear.bias) v = in.f64();
      break;
    case Algorithm::RF: {
      model.params.forest.trees = in.u32();
      model.params.forest.max_depth = in.u32();
      model.params.forest.bootstrap = in.u8() != 0;
      uint32_t count = in.u32();
      model.forest.trees.reserve(count);
      for (uint32_t t = 0; t < count; ++t) model.forest.trees.push_back(read_tree(in));
      break;
    }
    case Algorithm::GBRT: {
      model.params.gbrt.rounds = in.u32();
      model.params.gbrt.shrinkage = in.f64();
      model.params.gbrt.max_depth = in.u32();
      model.params.gbrt.subsample = in.f64();
      model.gbrt.f0.resize(k_classes);
      for (auto& v : model.gbrt.f0) v = in.f64();
      uint32_t rounds = in.u32();
      model.gbrt.rounds.assign(k_classes, {});
      for (size_t k = 0; k < k_classes; ++k) {
        model.gbrt.rounds[k].reserve(rounds);
        for (uint32_t r = 0; r < rounds; ++r) model.gbrt.rounds[k].push_back(read_tree(in));
      }
      break;
    }
  }

  if (in.u8() != 0) model.embedding = embed::read_source(in);
  if (!in.done()) raise(ErrorClass::Parse, "trailing bytes after model payload");
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

}  // namespace edre::learners
