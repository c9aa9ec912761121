#include <doctest.h>

#include <cmath>
#include <fstream>

#include "binio.hpp"
#include "embed.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "temp.hpp"
#include "textprep.hpp"
#include "util.hpp"

using namespace edre;
using namespace edre::embed;
using edre::textprep::TokenDoc;

namespace {

TokenDoc doc_of(const std::string& id, std::vector<std::string> features) {
  TokenDoc doc;
  doc.review_id = id;
  doc.lemmas = features;
  doc.features = std::move(features);
  return doc;
}

// ln(3/2) + 1 and the two-document TF-IDF weights it implies, 25 digits.
constexpr double kIdfClean = 1.405465108108164381978013;
constexpr double kWeightCode = 0.5797386715376657305700936;
constexpr double kWeightClean = 0.8148024746671689671992214;

}  // namespace

TEST_CASE("vocabulary counts document frequency and indexes lexicographically") {
  std::vector<TokenDoc> docs{doc_of("d1", {"code", "clean"}), doc_of("d2", {"code", "dirty"})};
  auto vocab = build_vocabulary(docs);
  CHECK(vocab.size() == 3);
  CHECK(vocab.n_docs == 2);
  CHECK(vocab.doc_freq.at("code") == 2);
  CHECK(vocab.doc_freq.at("clean") == 1);
  CHECK(vocab.doc_freq.at("dirty") == 1);
  CHECK(vocab.term_index.at("clean") == 0);
  CHECK(vocab.term_index.at("code") == 1);
  CHECK(vocab.term_index.at("dirty") == 2);

  SUBCASE("min_df filters rare terms") {
    auto filtered = build_vocabulary(docs, 2);
    CHECK(filtered.size() == 1);
    CHECK(filtered.term_index.count("code") == 1);
  }
  SUBCASE("a repeated feature counts once per document") {
    std::vector<TokenDoc> repeated{doc_of("d1", {"code", "code", "code"})};
    CHECK(build_vocabulary(repeated).doc_freq.at("code") == 1);
  }
  SUBCASE("empty docs contribute no terms but count toward n_docs") {
    std::vector<TokenDoc> mixed{doc_of("d1", {}), doc_of("d2", {"a"})};
    auto v = build_vocabulary(mixed);
    CHECK(v.size() == 1);
    CHECK(v.n_docs == 2);
  }
  SUBCASE("empty corpus is an error") {
    CHECK_THROWS_AS(build_vocabulary({}), Error);
  }
  SUBCASE("doc order does not change the index") {
    std::vector<TokenDoc> reversed{docs[1], docs[0]};
    auto again = build_vocabulary(reversed);
    CHECK(again.term_index == vocab.term_index);
    CHECK(again.doc_freq == vocab.doc_freq);
  }
}

TEST_CASE("idf follows the smoothed formula") {
  std::vector<TokenDoc> docs{doc_of("d1", {"code", "clean"}), doc_of("d2", {"code", "dirty"})};
  auto vocab = build_vocabulary(docs);
  CHECK(idf("code", vocab) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(idf("clean", vocab) == doctest::Approx(kIdfClean).epsilon(1e-15));
  CHECK_THROWS_AS(idf("unknown", vocab), Error);

  SUBCASE("strictly decreasing in document frequency") {
    uint32_t n = 12;
    std::vector<TokenDoc> corpus;
    for (uint32_t i = 0; i < n; ++i) {
      std::vector<std::string> features;
      for (uint32_t df = 1; df <= n; ++df) {
        if (i < df) features.push_back("t" + std::to_string(df));
      }
      corpus.push_back(doc_of("d" + std::to_string(i), features));
    }
    auto v = build_vocabulary(corpus);
    double previous = idf("t1", v);
    for (uint32_t df = 2; df <= n; ++df) {
      double current = idf("t" + std::to_string(df), v);
      CHECK(current < previous);
      previous = current;
    }
  }
}

TEST_CASE("tfidf vectors weight counts by idf and normalize") {
  std::vector<TokenDoc> docs{doc_of("d1", {"code", "clean"}), doc_of("d2", {"code", "dirty"})};
  auto vocab = build_vocabulary(docs);
  auto v1 = tfidf_vector(docs[0], vocab);
  CHECK(v1.dimension == 3);
  REQUIRE(v1.entries.size() == 2);
  CHECK(v1.entries.at(vocab.term_index.at("code")) ==
        doctest::Approx(kWeightCode).epsilon(1e-12));
  CHECK(v1.entries.at(vocab.term_index.at("clean")) ==
        doctest::Approx(kWeightClean).epsilon(1e-12));
  CHECK(v1.norm() == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("out-of-vocabulary features are skipped") {
    auto v = tfidf_vector(doc_of("q", {"novel", "unseen"}), vocab);
    CHECK(v.empty());
    CHECK(v.dimension == 3);
    auto mixed = tfidf_vector(doc_of("q2", {"novel", "code"}), vocab);
    CHECK(mixed.entries.size() == 1);
    CHECK(mixed.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("identical docs get identical vectors") {
    std::vector<TokenDoc> same;
    for (int i = 0; i < 5; ++i) same.push_back(doc_of("d" + std::to_string(i), {"x", "y"}));
    auto v = build_vocabulary(same);
    auto first = tfidf_vector(same[0], v);
    for (const auto& doc : same) {
      auto other = tfidf_vector(doc, v);
      CHECK(other.entries == first.entries);
    }
  }
  SUBCASE("repeated features scale by raw count before normalization") {
    std::vector<TokenDoc> corpus{doc_of("d1", {"a", "b"}), doc_of("d2", {"b"})};
    auto v = build_vocabulary(corpus);
    auto vec = tfidf_vector(doc_of("q", {"a", "a", "b"}), v);
    double ratio = vec.entries.at(v.term_index.at("a")) / vec.entries.at(v.term_index.at("b"));
    CHECK(ratio == doctest::Approx(2.0 * idf("a", v) / idf("b", v)).epsilon(1e-12));
  }
  SUBCASE("entry incidence count matches a brute-force scan") {
    Rng rng(91);
    std::vector<std::string> pool{"aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh"};
    std::vector<TokenDoc> corpus;
    for (int i = 0; i < 40; ++i) {
      std::vector<std::string> features;
      size_t count = 1 + rng.below(6);
      for (size_t j = 0; j < count; ++j) features.push_back(pool[rng.index(pool.size())]);
      corpus.push_back(doc_of("d" + std::to_string(i), std::move(features)));
    }
    auto vocab2 = build_vocabulary(corpus, 2);
    size_t entries = 0;
    size_t incidences = 0;
    for (const auto& doc : corpus) {
      entries += tfidf_vector(doc, vocab2).entries.size();
      std::set<std::string> distinct(doc.features.begin(), doc.features.end());
      for (const auto& term : distinct) {
        if (vocab2.term_index.count(term)) ++incidences;
      }
    }
    CHECK(entries == incidences);
  }
}

TEST_CASE("external vector files parse into a fixed-dimension map") {
  auto vectors = parse_external_vectors("r1\t0.5 0.5\nr2\t1.0 0.0\n");
  CHECK(vectors.dimension == 2);
  CHECK(vectors.by_review.size() == 2);
  CHECK(vectors.by_review.at("r1") == std::vector<double>{0.5, 0.5});

  SUBCASE("dimension mismatch names the row") {
    try {
      parse_external_vectors("r1\t0.5 0.5\nr2\t1.0 0.0 0.25\n");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("r2") != std::string::npos);
    }
  }
  SUBCASE("duplicate review id is rejected") {
    CHECK_THROWS_AS(parse_external_vectors("r1\t0.5\nr1\t0.5\n"), Error);
  }
  SUBCASE("malformed number is rejected") {
    CHECK_THROWS_AS(parse_external_vectors("r1\t0.5 oops\n"), Error);
  }
  SUBCASE("missing tab is rejected") {
    CHECK_THROWS_AS(parse_external_vectors("r1 0.5 0.5\n"), Error);
  }
  SUBCASE("a fixture of unit vectors keeps its norms") {
    edre::test::TempDir dir;
    std::string content;
    for (int i = 0; i < 10; ++i) {
      double angle = 0.31 * i;
      content += "u" + std::to_string(i) + "\t" + format_double(std::cos(angle), 17) + " " +
                 format_double(std::sin(angle), 17) + "\n";
    }
    auto path = dir.file("vectors.tsv");
    write_file(path, content);
    auto source = load_external_vectors(path);
    CHECK(source.kind == EmbeddingSource::Kind::External);
    CHECK(source.dimension() == 2);
    for (const auto& [id, row] : source.external.by_review) {
      double norm = std::sqrt(row[0] * row[0] + row[1] * row[1]);
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("embedding sources dispatch on kind") {
  std::vector<TokenDoc> docs{doc_of("d1", {"code", "clean"}), doc_of("d2", {"code", "dirty"})};
  auto tfidf = tfidf_source(build_vocabulary(docs));
  CHECK(tfidf.kind == EmbeddingSource::Kind::Tfidf);
  CHECK(tfidf.dimension() == 3);
  CHECK_FALSE(embed_doc(tfidf, docs[0]).empty());

  ExternalVectors ext;
  ext.dimension = 2;
  ext.by_review["d1"] = {0.25, 0.75};
  EmbeddingSource external;
  external.kind = EmbeddingSource::Kind::External;
  external.external = ext;
  auto vec = embed_doc(external, doc_of("d1", {}));
  CHECK(vec.dimension == 2);
  CHECK(vec.entries.at(0) == doctest::Approx(0.25));
  CHECK(vec.entries.at(1) == doctest::Approx(0.75));
  CHECK_THROWS_AS(embed_doc(external, doc_of("missing", {})), Error);
}

TEST_CASE("fingerprints are stable and input-sensitive") {
  std::vector<TokenDoc> docs{doc_of("d1", {"code", "clean"}), doc_of("d2", {"code", "dirty"})};
  auto vocab = build_vocabulary(docs);
  uint64_t base = fingerprint_of(vocab);
  CHECK(base == fingerprint_of(build_vocabulary(docs)));

  std::vector<TokenDoc> other{doc_of("d1", {"code", "clean"}), doc_of("d2", {"code", "murky"})};
  CHECK(fingerprint_of(build_vocabulary(other)) != base);

  auto changed_counts = vocab;
  changed_counts.doc_freq["code"] = 1;
  CHECK(fingerprint_of(changed_counts) != base);

  ExternalVectors ext;
  ext.dimension = 2;
  ext.by_review["r1"] = {0.5, 0.5};
  uint64_t ext_base = fingerprint_of(ext);
  ext.by_review["r1"][1] = 0.5000001;
  CHECK(fingerprint_of(ext) != ext_base);
}

TEST_CASE("source serialization round-trips byte-identically") {
  std::vector<TokenDoc> docs{doc_of("d1", {"code", "clean"}), doc_of("d2", {"code", "dirty"})};
  auto source = tfidf_source(build_vocabulary(docs));

  ByteWriter first;
  write_source(first, source);
  ByteWriter second;
  write_source(second, source);
  CHECK(first.bytes() == second.bytes());

  ByteReader in(first.bytes());
  auto loaded = read_source(in);
  CHECK(loaded.kind == source.kind);
  CHECK(loaded.vocab.term_index == source.vocab.term_index);
  CHECK(loaded.vocab.doc_freq == source.vocab.doc_freq);
  CHECK(loaded.vocab.n_docs == source.vocab.n_docs);
  CHECK(loaded.fingerprint() == source.fingerprint());

  SUBCASE("external sources round-trip too") {
    EmbeddingSource external;
    external.kind = EmbeddingSource::Kind::External;
    external.external.dimension = 3;
    external.external.by_review["r1"] = {0.1, 0.2, 0.3};
    external.external.by_review["r2"] = {-1.0, 0.0, 1.0};
    ByteWriter out;
    write_source(out, external);
    ByteReader reader(out.bytes());
    auto back = read_source(reader);
    CHECK(back.kind == EmbeddingSource::Kind::External);
    CHECK(back.external.by_review == external.external.by_review);
    CHECK(back.fingerprint() == external.fingerprint());
  }
}
