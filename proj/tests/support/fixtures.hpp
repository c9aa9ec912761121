#pragma once

#include <string>
#include <vector>

#include "corpus.hpp"
#include "embed.hpp"
#include "learners.hpp"
#include "retrieval.hpp"
#include "textprep.hpp"

namespace edre::test {

inline corpus::LabeledReview fixture_review(const std::string& id, const std::string& body,
                                            Clarity clarity,
                                            const std::string& project = "fixture") {
  corpus::LabeledReview review;
  review.comment.id = id;
  review.comment.project = project;
  review.comment.author = "gen";
  review.comment.created_at = 1640995200;
  review.comment.body = body;
  review.comment.thread_url = "https://host.test/" + project + "/pull/1#" + id;
  review.clarity = clarity;
  review.vote_counts[static_cast<size_t>(clarity)] = 1;
  return review;
}

struct ArtifactFixture {
  std::vector<corpus::LabeledReview> reviews;
  learners::TrainedModel model;
  retrieval::RetrievalIndex index;
  textprep::PrepConfig prep = textprep::PrepConfig::defaults();
};

// Small labeled corpus, an NB model carrying its TF-IDF source, and the
// index over its clear side. `unclear_majority` flips the prior toward
// Unclear (and shifts the vocabulary, so fingerprints differ too).
inline ArtifactFixture make_artifact_fixture(bool unclear_majority = false) {
  ArtifactFixture f;
  f.reviews = {
      fixture_review("c1", "Please rename this variable to count.", Clarity::Clear),
      fixture_review("c2", "Rename the helper to parse duration.", Clarity::Clear),
      fixture_review("c3", "Extract this block into a helper function.", Clarity::Clear),
      fixture_review("s1", "Maybe cache the parsed result somewhere.", Clarity::SomewhatClear),
      fixture_review("s2", "Consider caching this lookup result.", Clarity::SomewhatClear),
      fixture_review("u1", "wat gibberish baffling", Clarity::Unclear),
      fixture_review("u2", "huh cryptic gibberish", Clarity::Unclear),
      fixture_review("u3", "baffling wat cryptic", Clarity::Unclear),
  };
  if (unclear_majority) {
    for (int i = 4; i <= 9; ++i) {
      f.reviews.push_back(
          fixture_review("u" + std::to_string(i), "cryptic huh wat", Clarity::Unclear));
    }
  }

  std::vector<textprep::TokenDoc> docs;
  for (const auto& review : f.reviews) docs.push_back(textprep::preprocess(review.comment, f.prep));
  auto source = embed::tfidf_source(embed::build_vocabulary(docs));

  learners::TrainSet data;
  for (size_t i = 0; i < f.reviews.size(); ++i) {
    data.vectors.push_back(embed::embed_doc(source, docs[i]));
    data.labels.push_back(f.reviews[i].clarity);
    data.review_ids.push_back(f.reviews[i].comment.id);
  }
  learners::HyperParams hp;
  hp.algorithm = learners::Algorithm::NB;
  f.model = learners::train(data, hp, 3, source.fingerprint());
  f.model.embedding = source;
  f.index = retrieval::build_index(f.reviews, source, f.prep);
  return f;
}

}  // namespace edre::test
