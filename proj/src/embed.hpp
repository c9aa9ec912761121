#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "binio.hpp"
#include "textprep.hpp"

namespace edre::embed {

struct Vocabulary {
  std::map<std::string, uint32_t> term_index;  // dense 0..V-1, lexicographic order
  std::map<std::string, uint32_t> doc_freq;    // only retained terms
  uint32_t n_docs = 0;
  uint32_t min_df = 1;

  uint32_t size() const { return static_cast<uint32_t>(term_index.size()); }
};

struct SparseVector {
  uint32_t dimension = 0;
  std::map<uint32_t, double> entries;

  bool empty() const { return entries.empty(); }
  double norm() const;
};

struct ExternalVectors {
  uint32_t dimension = 0;
  std::map<std::string, std::vector<double>> by_review;
};

struct EmbeddingSource {
  enum class Kind : uint8_t { Tfidf = 0, External = 1 };
  Kind kind = Kind::Tfidf;
  Vocabulary vocab;          // valid when kind == Tfidf
  ExternalVectors external;  // valid when kind == External

  uint64_t fingerprint() const;
  uint32_t dimension() const;
};

// Document frequency over doc.features (each doc counts a term once); terms
// below min_df dropped; surviving terms indexed lexicographically.
Vocabulary build_vocabulary(const std::vector<textprep::TokenDoc>& docs, uint32_t min_df = 1);

// Smoothed inverse document frequency: ln((1+N)/(1+df)) + 1.
double idf(const std::string& term, const Vocabulary& vocab);

// Raw feature count times idf, L2-normalized. Out-of-vocabulary features are
// skipped; a doc with none in vocabulary yields an empty vector.
SparseVector tfidf_vector(const textprep::TokenDoc& doc, const Vocabulary& vocab);

// One row per line: review_id<TAB>v1 v2 ... vd. Every row must share d.
ExternalVectors parse_external_vectors(const std::string& content);
EmbeddingSource load_external_vectors(const std::filesystem::path& path);

EmbeddingSource tfidf_source(Vocabulary vocab);

// Vector for one review under either source kind. TFIDF computes from the
// doc's features; EXTERNAL looks the review_id up (missing id is an error).
SparseVector embed_doc(const EmbeddingSource& source, const textprep::TokenDoc& doc);

uint64_t fingerprint_of(const Vocabulary& vocab);
uint64_t fingerprint_of(const ExternalVectors& vectors);

// Binary layout shared by model and index files.
void write_source(ByteWriter& out, const EmbeddingSource& source);
EmbeddingSource read_source(ByteReader& in);

}  // namespace edre::embed
