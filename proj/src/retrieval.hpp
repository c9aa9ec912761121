#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clarity.hpp"
#include "corpus.hpp"
#include "embed.hpp"
#include "learners.hpp"
#include "textprep.hpp"

namespace edre::retrieval {

// dot(u,v)/(|u||v|); 0 when either norm is 0. Dimensions must match.
double cosine(const embed::SparseVector& u, const embed::SparseVector& v);

struct IndexEntry {
  std::string review_id;
  embed::SparseVector vector;
  Clarity clarity = Clarity::Clear;
  std::string body;
  std::string thread_url;
};

constexpr uint32_t kIndexFormatVersion = 1;

struct RetrievalIndex {
  uint32_t format_version = kIndexFormatVersion;
  uint64_t embedding_fingerprint = 0;
  double min_similarity = 0.1;
  uint32_t dimension = 0;
  std::vector<IndexEntry> entries;  // only Clear / SomewhatClear reviews
};

struct BuildStats {
  uint32_t indexed = 0;
  uint32_t skipped_unclear = 0;       // ineligible clarity
  uint32_t skipped_empty_vector = 0;  // eligible but vectorized to nothing
  uint32_t skipped_project = 0;       // filtered by project
};

// Indexes the Clear and SomewhatClear reviews with nonempty vectors. An
// empty `project` keeps every project.
RetrievalIndex build_index(const std::vector<corpus::LabeledReview>& reviews,
                           const embed::EmbeddingSource& embedding,
                           const textprep::PrepConfig& prep, double min_similarity = 0.1,
                           const std::string& project = "", BuildStats* stats = nullptr);

struct ExampleHit {
  std::string review_id;
  double similarity = 0.0;
  std::string body;
  std::string thread_url;
  uint32_t rank = 0;  // 1-based
};

// Exhaustive scan; similarity descending, ties by smaller review_id; only
// hits at or above min_similarity are returned.
std::vector<ExampleHit> top_k(const RetrievalIndex& index, const embed::SparseVector& query,
                              uint32_t k = 5);

struct Decision {
  Clarity clarity = Clarity::Unclear;
  std::vector<double> scores;  // aligned with the model's class list
  std::vector<Clarity> classes;
  bool low_confidence = false;
  std::vector<ExampleHit> hits;  // nonempty only when needs_explanation(clarity)
};

// preprocess -> vectorize -> predict -> retrieve when unclear. The model
// must carry its embedding source (models trained through the text pipeline
// do); its fingerprint must match the index.
Decision explain(const std::string& body, const learners::TrainedModel& model,
                 const RetrievalIndex& index, const textprep::PrepConfig& prep);

void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);
std::string serialize_index(const RetrievalIndex& index);
RetrievalIndex deserialize_index(std::string_view bytes);

}  // namespace edre::retrieval
