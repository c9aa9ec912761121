#include "retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "binio.hpp"
#include "error.hpp"
#include "util.hpp"

namespace edre::retrieval {

double cosine(const embed::SparseVector& u, const embed::SparseVector& v) {
  if (u.dimension != v.dimension) {
    raise(ErrorClass::Invalid, "cosine dimension mismatch: " + std::to_string(u.dimension) + " vs " +
                                   std::to_string(v.dimension));
  }
  double dot = 0.0;
  auto iu = u.entries.begin();
  auto iv = v.entries.begin();
  while (iu != u.entries.end() && iv != v.entries.end()) {
    if (iu->first < iv->first) {
      ++iu;
    } else if (iv->first < iu->first) {
      ++iv;
    } else {
      dot += iu->second * iv->second;
      ++iu;
      ++iv;
    }
  }
  double nu = u.norm();
  double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (nu * nv);
}

RetrievalIndex build_index(const std::vector<corpus::LabeledReview>& reviews,
                           const embed::EmbeddingSource& embedding,
                           const textprep::PrepConfig& prep, double min_similarity,
                           const std::string& project, BuildStats* stats) {
  RetrievalIndex index;
  index.embedding_fingerprint = embedding.fingerprint();
  index.min_similarity = min_similarity;
  index.dimension = embedding.dimension();

  BuildStats local;
  for (const auto& review : reviews) {
    if (!project.empty() && review.comment.project != project) {
      ++local.skipped_project;
      continue;
    }
    if (review.clarity != Clarity::Clear && review.clarity != Clarity::SomewhatClear) {
      ++local.skipped_unclear;
      continue;
    }
    embed::SparseVector vector;
    if (embedding.kind == embed::EmbeddingSource::Kind::Tfidf) {
      vector = embed::tfidf_vector(textprep::preprocess(review.comment, prep), embedding.vocab);
    } else {
      textprep::TokenDoc stub;
      stub.review_id = review.comment.id;
      vector = embed::embed_doc(embedding, stub);  // missing id raises, naming it
    }
    if (vector.empty()) {
      ++local.skipped_empty_vector;
      continue;
    }
    IndexEntry entry;
    entry.review_id = review.comment.id;
    entry.vector = std::move(vector);
    entry.clarity = review.clarity;
    entry.body = review.comment.body;
    entry.thread_url = review.comment.thread_url;
    index.entries.push_back(std::move(entry));
    ++local.indexed;
  }
  if (stats) *stats = local;
  return index;
}

std::vector<ExampleHit> top_k(const RetrievalIndex& index, const embed::SparseVector& query,
                              uint32_t k) {
  if (query.dimension != index.dimension) {
    raise(ErrorClass::Invalid, "query dimension " + std::to_string(query.dimension) +
                                   " does not match index dimension " + std::to_string(index.dimension));
  }
  struct Scored {
    double similarity;
    const IndexEntry* entry;
  };
  std::vector<Scored> scored;
  for (const auto& entry : index.entries) {
    double similarity = cosine(query, entry.vector);
    if (similarity >= index.min_similarity) scored.push_back({similarity, &entry});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry->review_id < b.entry->review_id;
  });
  if (scored.size() > k) scored.resize(k);

  std::vector<ExampleHit> hits;
  hits.reserve(scored.size());
  for (size_t i = 0; i < scored.size(); ++i) {
    ExampleHit hit;
    hit.review_id = scored[i].entry->review_id;
    hit.similarity = scored[i].similarity;
    hit.body = scored[i].entry->body;
    hit.thread_url = scored[i].entry->thread_url;
    hit.rank = static_cast<uint32_t>(i + 1);
    hits.push_back(std::move(hit));
  }
  return hits;
}

Decision explain(const std::string& body, const learners::TrainedModel& model,
                 const RetrievalIndex& index, const textprep::PrepConfig& prep) {
  if (!model.embedding) {
    raise(ErrorClass::Invalid, "model carries no embedding source; retrain through the text pipeline");
  }
  if (model.embedding->kind != embed::EmbeddingSource::Kind::Tfidf) {
    raise(ErrorClass::Invalid,
          "model was trained on external vectors, which cannot embed raw text");
  }
  if (model.embedding_fingerprint != index.embedding_fingerprint) {
    raise(ErrorClass::Fingerprint, "model and index embeddings differ (model " +
                                       std::to_string(model.embedding_fingerprint) + ", index " +
                                       std::to_string(index.embedding_fingerprint) + ")");
  }

  textprep::TokenDoc doc = textprep::preprocess_text("query", body, prep);
  embed::SparseVector vector = embed::tfidf_vector(doc, model.embedding->vocab);
  learners::Prediction prediction = learners::predict(model, vector);

  Decision decision;
  decision.clarity = prediction.label;
  decision.scores = prediction.scores;
  decision.classes = model.classes;
  decision.low_confidence = prediction.low_confidence;
  if (!prediction.low_confidence && needs_explanation(prediction.label)) {
    decision.hits = top_k(index, vector, 5);
  }
  return decision;
}

namespace {
constexpr std::string_view kIndexMagic = "EDREINDX";
}

std::string serialize_index(const RetrievalIndex& index) {
  ByteWriter out;
  out.raw(kIndexMagic);
  out.u32(index.format_version);
  out.u64(index.embedding_fingerprint);
  out.f64(index.min_similarity);
  out.u32(index.dimension);
  out.u32(static_cast<uint32_t>(index.entries.size()));
  for (const auto& entry : index.entries) {
    out.str(entry.review_id);
    out.str(entry.body);
    out.str(entry.thread_url);
    out.u8(static_cast<uint8_t>(entry.clarity));
    out.u32(static_cast<uint32_t>(entry.vector.entries.size()));
    for (const auto& [feature, value] : entry.vector.entries) {
      out.u32(feature);
      out.f64(value);
    }
  }
  return out.take();
}

RetrievalIndex deserialize_index(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.raw(kIndexMagic.size()) != kIndexMagic) {
    raise(ErrorClass::Parse, "not an index file (bad magic)");
  }
  RetrievalIndex index;
  index.format_version = in.u32();
  if (index.format_version > kIndexFormatVersion) {
    raise(ErrorClass::Version, "index format version " + std::to_string(index.format_version) +
                                   " is newer than supported version " +
                                   std::to_string(kIndexFormatVersion));
  }
  index.embedding_fingerprint = in.u64();
  index.min_similarity = in.f64();
  index.dimension = in.u32();
  uint32_t count = in.u32();
  index.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    IndexEntry entry;
    entry.review_id = in.str();
    entry.body = in.str();
    entry.thread_url = in.str();
    uint8_t clarity = in.u8();
    if (clarity != static_cast<uint8_t>(Clarity::Clear) &&
        clarity != static_cast<uint8_t>(Clarity::SomewhatClear)) {
      raise(ErrorClass::Parse, "index entry \"" + entry.review_id + "\" has ineligible clarity");
    }
    entry.clarity = static_cast<Clarity>(clarity);
    entry.vector.dimension = index.dimension;
    uint32_t nnz = in.u32();
    for (uint32_t e = 0; e < nnz; ++e) {
      uint32_t feature = in.u32();
      double value = in.f64();
      if (feature >= index.dimension) {
        raise(ErrorClass::Parse, "index entry \"" + entry.review_id + "\" has feature " +
                                     std::to_string(feature) + " outside dimension " +
                                     std::to_string(index.dimension));
      }
      entry.vector.entries.emplace(feature, value);
    }
    index.entries.push_back(std::move(entry));
  }
  if (!in.done()) raise(ErrorClass::Parse, "trailing bytes after index payload");
  return index;
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
  write_file(path, serialize_index(index));
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  return deserialize_index(read_file(path));
}

}  // namespace edre::retrieval
