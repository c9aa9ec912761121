#include "embed.hpp"

#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "error.hpp"
#include "util.hpp"

namespace edre::embed {

double SparseVector::norm() const {
  double sum = 0.0;
  for (const auto& [index, weight] : entries) sum += weight * weight;
  return std::sqrt(sum);
}

uint32_t EmbeddingSource::dimension() const {
  return kind == Kind::Tfidf ? vocab.size() : external.dimension;
}

uint64_t EmbeddingSource::fingerprint() const {
  return kind == Kind::Tfidf ? fingerprint_of(vocab) : fingerprint_of(external);
}

Vocabulary build_vocabulary(const std::vector<textprep::TokenDoc>& docs, uint32_t min_df) {
  if (docs.empty()) raise(ErrorClass::Invalid, "cannot build a vocabulary from zero documents");
  Vocabulary vocab;
  vocab.n_docs = static_cast<uint32_t>(docs.size());
  vocab.min_df = min_df;

  std::map<std::string, uint32_t> df;
  for (const auto& doc : docs) {
    std::set<std::string> seen(doc.features.begin(), doc.features.end());
    for (const auto& term : seen) ++df[term];
  }
  for (auto& [term, count] : df) {
    if (count >= min_df) vocab.doc_freq.emplace(term, count);
  }
  uint32_t index = 0;
  for (const auto& [term, count] : vocab.doc_freq) vocab.term_index.emplace(term, index++);
  return vocab;
}

double idf(const std::string& term, const Vocabulary& vocab) {
  auto it = vocab.doc_freq.find(term);
  if (it == vocab.doc_freq.end()) {
    raise(ErrorClass::NotFound, "term not in vocabulary: \"" + term + "\"");
  }
  return std::log((1.0 + vocab.n_docs) / (1.0 + it->second)) + 1.0;
}

SparseVector tfidf_vector(const textprep::TokenDoc& doc, const Vocabulary& vocab) {
  SparseVector vec;
  vec.dimension = vocab.size();

  std::map<uint32_t, double> counts;
  for (const auto& feature : doc.features) {
    auto it = vocab.term_index.find(feature);
    if (it != vocab.term_index.end()) counts[it->second] += 1.0;
  }
  if (counts.empty()) return vec;

  std::vector<const std::string*> term_of(vocab.size());
  for (const auto& [term, index] : vocab.term_index) term_of[index] = &term;

  double sum = 0.0;
  for (const auto& [index, count] : counts) {
    double w = count * idf(*term_of[index], vocab);
    vec.entries[index] = w;
    sum += w * w;
  }
  double norm = std::sqrt(sum);
  for (auto& [index, weight] : vec.entries) weight /= norm;
  return vec;
}

ExternalVectors parse_external_vectors(const std::string& content) {
  ExternalVectors out;
  std::istringstream in(content);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      raise(ErrorClass::Parse, "vector file line " + std::to_string(lineno) + ": expected review_id<TAB>values");
    }
    std::string review_id = line.substr(0, tab);
    if (review_id.empty()) {
      raise(ErrorClass::Parse, "vector file line " + std::to_string(lineno) + ": empty review_id");
    }
    if (out.by_review.count(review_id)) {
      raise(ErrorClass::Duplicate, "vector file line " + std::to_string(lineno) +
                                       ": duplicate review_id \"" + review_id + "\"");
    }
    std::vector<double> values;
    const char* cursor = line.c_str() + tab + 1;
    while (*cursor) {
      char* end = nullptr;
      double v = std::strtod(cursor, &end);
      if (end == cursor) {
        raise(ErrorClass::Parse, "vector file line " + std::to_string(lineno) + ": bad numeric value near \"" +
                                     std::string(cursor).substr(0, 12) + "\"");
      }
      values.push_back(v);
      cursor = end;
      while (*cursor == ' ') ++cursor;
    }
    if (values.empty()) {
      raise(ErrorClass::Parse, "vector file line " + std::to_string(lineno) + ": no values for \"" + review_id + "\"");
    }
    if (out.dimension == 0) {
      out.dimension = static_cast<uint32_t>(values.size());
    } else if (values.size() != out.dimension) {
      raise(ErrorClass::Parse, "vector file line " + std::to_string(lineno) + ": review \"" + review_id + "\" has " +
                                   std::to_string(values.size()) + " values, expected " +
                                   std::to_string(out.dimension));
    }
    out.by_review.emplace(std::move(review_id), std::move(values));
  }
  return out;
}

EmbeddingSource load_external_vectors(const std::filesystem::path& path) {
  EmbeddingSource source;
  source.kind = EmbeddingSource::Kind::External;
  source.external = parse_external_vectors(read_file(path));
  return source;
}

EmbeddingSource tfidf_source(Vocabulary vocab) {
  EmbeddingSource source;
  source.kind = EmbeddingSource::Kind::Tfidf;
  source.vocab = std::move(vocab);
  return source;
}

SparseVector embed_doc(const EmbeddingSource& source, const textprep::TokenDoc& doc) {
  if (source.kind == EmbeddingSource::Kind::Tfidf) return tfidf_vector(doc, source.vocab);
  auto it = source.external.by_review.find(doc.review_id);
  if (it == source.external.by_review.end()) {
    raise(ErrorClass::NotFound, "no external vector for review \"" + doc.review_id + "\"");
  }
  SparseVector vec;
  vec.dimension = source.external.dimension;
  for (uint32_t i = 0; i < vec.dimension; ++i) {
    if (it->second[i] != 0.0) vec.entries.emplace(i, it->second[i]);
  }
  return vec;
}

uint64_t fingerprint_of(const Vocabulary& vocab) {
  ByteWriter w;
  w.raw("EDRE.TFIDF");
  w.u32(vocab.n_docs);
  w.u32(vocab.min_df);
  for (const auto& [term, index] : vocab.term_index) {
    w.raw(term);
    w.u8(0);
    w.u32(vocab.doc_freq.at(term));
  }
  return fnv1a64(w.bytes());
}

uint64_t fingerprint_of(const ExternalVectors& vectors) {
  ByteWriter w;
  w.raw("EDRE.EXT");
  w.u32(vectors.dimension);
  w.u32(static_cast<uint32_t>(vectors.by_review.size()));
  for (const auto& [review_id, values] : vectors.by_review) {
    w.raw(review_id);
    w.u8(0);
    for (double v : values) w.f64(v);
  }
  return fnv1a64(w.bytes());
}

void write_source(ByteWriter& out, const EmbeddingSource& source) {
  out.u8(static_cast<uint8_t>(source.kind));
  if (source.kind == EmbeddingSource::Kind::Tfidf) {
    const auto& vocab = source.vocab;
    out.u32(vocab.n_docs);
    out.u32(vocab.min_df);
    out.u32(vocab.size());
    for (const auto& [term, index] : vocab.term_index) {
      out.str(term);
      out.u32(vocab.doc_freq.at(term));
    }
  } else {
    const auto& ext = source.external;
    out.u32(ext.dimension);
    out.u32(static_cast<uint32_t>(ext.by_review.size()));
    for (const auto& [review_id, values] : ext.by_review) {
      out.str(review_id);
      for (double v : values) out.f64(v);
    }
  }
}

EmbeddingSource read_source(ByteReader& in) {
  EmbeddingSource source;
  uint8_t kind = in.u8();
  if (kind > 1) raise(ErrorClass::Parse, "unknown embedding source kind " + std::to_string(kind));
  source.kind = static_cast<EmbeddingSource::Kind>(kind);
  if (source.kind == EmbeddingSource::Kind::Tfidf) {
    auto& vocab = source.vocab;
    vocab.n_docs = in.u32();
    vocab.min_df = in.u32();
    uint32_t count = in.u32();
    uint32_t index = 0;
    for (uint32_t i = 0; i < count; ++i) {
      std::string term = in.str();
      uint32_t df = in.u32();
      vocab.doc_freq.emplace(term, df);
      vocab.term_index.emplace(std::move(term), index++);
    }
  } else {
    auto& ext = source.external;
    ext.dimension = in.u32();
    uint32_t count = in.u32();
    for (uint32_t i = 0; i < count; ++i) {
      std::string review_id = in.str();
      std::vector<double> values(ext.dimension);
      for (auto& v : values) v = in.f64();
      ext.by_review.emplace(std::move(review_id), std::move(values));
    }
  }
  return source;
}

}  // namespace edre::embed
