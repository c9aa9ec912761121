#include <doctest.h>

#include <cmath>
#include <set>

#include "embed.hpp"
#include "error.hpp"
#include "learners.hpp"
#include "rng.hpp"
#include "temp.hpp"

using namespace edre;
using namespace edre::learners;
using edre::embed::SparseVector;

namespace {

SparseVector sparse(uint32_t dimension, std::map<uint32_t, double> entries) {
  SparseVector v;
  v.dimension = dimension;
  v.entries = std::move(entries);
  return v;
}

// Two documents, three features (bad=0, code=1, good=2). Laplace smoothing
// with alpha=1 gives P(Clear | "good") = 2/3 by hand.
TrainSet nb_toy() {
  TrainSet data;
  data.vectors = {sparse(3, {{1, 1.0}, {2, 1.0}}), sparse(3, {{0, 1.0}, {1, 1.0}})};
  data.labels = {Clarity::Clear, Clarity::Unclear};
  data.review_ids = {"good-code", "bad-code"};
  return data;
}

// Four classes, each tied to one block of three features. Strong signal so
// every algorithm separates it.
TrainSet block_set(size_t n, uint64_t seed) {
  Rng rng(seed);
  TrainSet data;
  const uint32_t dimension = 12;
  for (size_t i = 0; i < n; ++i) {
    uint32_t cls = static_cast<uint32_t>(i % kClarityCount);
    std::map<uint32_t, double> entries;
    for (int j = 0; j < 3; ++j) {
      entries[cls * 3 + rng.below(3)] += 1.0 + rng.next_double();
    }
    if (rng.next_double() < 0.3) entries[rng.below(dimension)] += rng.next_double();
    data.vectors.push_back(sparse(dimension, std::move(entries)));
    data.labels.push_back(static_cast<Clarity>(cls));
    data.review_ids.push_back("b" + std::to_string(i));
  }
  return data;
}

SparseVector random_query(Rng& rng, uint32_t dimension) {
  std::map<uint32_t, double> entries;
  size_t count = rng.below(5);
  for (size_t j = 0; j < count; ++j) entries[rng.below(dimension)] = 2.0 * rng.next_double();
  return sparse(dimension, std::move(entries));
}

HyperParams params_for(Algorithm algorithm) {
  HyperParams hp;
  hp.algorithm = algorithm;
  hp.forest.trees = 15;
  hp.forest.max_depth = 6;
  hp.gbrt.rounds = 15;
  return hp;
}

size_t argmax_low(const std::vector<double>& scores) {
  size_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double weighted_gini(const std::vector<double>& values, const std::vector<int>& labels,
                     double threshold) {
  auto gini = [](int a, int b) {
    int total = a + b;
    if (total == 0) return 0.0;
    double pa = static_cast<double>(a) / total;
    double pb = static_cast<double>(b) / total;
    return 1.0 - pa * pa - pb * pb;
  };
  int left_a = 0, left_b = 0, right_a = 0, right_b = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= threshold) {
      (labels[i] == 0 ? left_a : left_b)++;
    } else {
      (labels[i] == 0 ? right_a : right_b)++;
    }
  }
  double n = static_cast<double>(values.size());
  return (left_a + left_b) / n * gini(left_a, left_b) + (right_a + right_b) / n * gini(right_a, right_b);
}

}  // namespace

TEST_CASE("naive bayes reproduces hand-computed posteriors") {
  HyperParams hp = params_for(Algorithm::NB);
  auto model = train(nb_toy(), hp, 1, 0);
  REQUIRE(model.classes == std::vector<Clarity>{Clarity::Unclear, Clarity::Clear});

  auto good = predict(model, sparse(3, {{2, 1.0}}));
  CHECK(good.label == Clarity::Clear);
  CHECK(good.scores[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(good.scores[0] + good.scores[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(good.low_confidence);

  SUBCASE("a duplicated training point keeps its label") {
    auto again = predict(model, nb_toy().vectors[0]);
    CHECK(again.label == Clarity::Clear);
    CHECK(again.scores[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("empty vector falls back to priors, flagged, tie to less clear") {
    auto empty = predict(model, sparse(3, {}));
    CHECK(empty.low_confidence);
    CHECK(empty.scores == std::vector<double>{0.5, 0.5});
    CHECK(empty.label == Clarity::Unclear);
  }
  SUBCASE("symmetric scores tie toward the less clear class") {
    TrainSet data;
    data.vectors = {sparse(2, {{0, 1.0}}), sparse(2, {{1, 1.0}})};
    data.labels = {Clarity::Clear, Clarity::Unclear};
    data.review_ids = {"a", "b"};
    auto symmetric = train(data, hp, 1, 0);
    auto tied = predict(symmetric, sparse(2, {{0, 1.0}, {1, 1.0}}));
    CHECK(tied.scores[0] == doctest::Approx(tied.scores[1]).epsilon(1e-12));
    CHECK(tied.label == Clarity::Unclear);
  }
  SUBCASE("log-space scoring survives long documents") {
    auto data = block_set(40, 5);
    auto big = train(data, hp, 1, 0);
    std::map<uint32_t, double> heavy;
    for (uint32_t j = 0; j < 12; ++j) heavy[j] = 500.0;
    auto p = predict(big, sparse(12, std::move(heavy)));
    double sum = 0;
    for (double s : p.scores) {
      CHECK(std::isfinite(s));
      sum += s;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("negative features are rejected") {
    TrainSet data = nb_toy();
    data.vectors[0].entries[0] = -1.0;
    CHECK_THROWS_AS(train(data, hp, 1, 0), Error);
  }
}

TEST_CASE("training set validation") {
  HyperParams hp;
  SUBCASE("empty set") {
    CHECK_THROWS_AS(train(TrainSet{}, hp, 1, 0), Error);
  }
  SUBCASE("single class") {
    TrainSet data = nb_toy();
    data.labels = {Clarity::Clear, Clarity::Clear};
    CHECK_THROWS_AS(train(data, hp, 1, 0), Error);
  }
  SUBCASE("misaligned lists") {
    TrainSet data = nb_toy();
    data.labels.pop_back();
    CHECK_THROWS_AS(train(data, hp, 1, 0), Error);
  }
  SUBCASE("non-finite feature") {
    TrainSet data = nb_toy();
    data.vectors[0].entries[1] = std::nan("");
    CHECK_THROWS_AS(train(data, hp, 1, 0), Error);
  }
  SUBCASE("mixed dimensions") {
    TrainSet data = nb_toy();
    data.vectors[1].dimension = 7;
    CHECK_THROWS_AS(train(data, hp, 1, 0), Error);
  }
  SUBCASE("bad hyperparameters") {
    HyperParams bad = params_for(Algorithm::NB);
    bad.nb.alpha = 0.0;
    CHECK_THROWS_AS(train(nb_toy(), bad, 1, 0), Error);
    bad = params_for(Algorithm::GBRT);
    bad.gbrt.subsample = 1.5;
    CHECK_THROWS_AS(train(nb_toy(), bad, 1, 0), Error);
  }
  SUBCASE("query dimension mismatch") {
    auto model = train(nb_toy(), params_for(Algorithm::NB), 1, 0);
    CHECK_THROWS_AS(predict(model, sparse(5, {{0, 1.0}})), Error);
  }
  SUBCASE("algorithm names") {
    CHECK(algorithm_from_string("RF") == Algorithm::RF);
    CHECK(algorithm_from_string("gbrt") == Algorithm::GBRT);
    CHECK_THROWS_AS(algorithm_from_string("perceptron"), Error);
  }
}

TEST_CASE("svm separates a linearly separable toy set") {
  TrainSet data;
  for (int i = 0; i < 10; ++i) {
    data.vectors.push_back(sparse(2, {{0, 1.0 + 0.05 * i}, {1, 0.1}}));
    data.labels.push_back(Clarity::Clear);
    data.review_ids.push_back("c" + std::to_string(i));
  }
  for (int i = 0; i < 10; ++i) {
    data.vectors.push_back(sparse(2, {{0, 0.1}, {1, 1.0 + 0.05 * i}}));
    data.labels.push_back(Clarity::Unclear);
    data.review_ids.push_back("u" + std::to_string(i));
  }
  auto model = train(data, params_for(Algorithm::SVM), 7, 0);
  for (size_t i = 0; i < data.size(); ++i) {
    CHECK(predict(model, data.vectors[i]).label == data.labels[i]);
  }
}

TEST_CASE("logreg gradient matches central finite differences") {
  Rng rng(2024);
  for (int problem = 0; problem < 5; ++problem) {
    const uint32_t dimension = 10;
    TrainSet data;
    for (int i = 0; i < 24; ++i) {
      std::map<uint32_t, double> entries;
      for (uint32_t j = 0; j < dimension; ++j) {
        if (rng.next_double() < 0.6) entries[j] = 2.0 * rng.next_double() - 1.0;
      }
      data.vectors.push_back(sparse(dimension, std::move(entries)));
      data.labels.push_back(static_cast<Clarity>(i % kClarityCount));
      data.review_ids.push_back("g" + std::to_string(i));
    }
    std::vector<Clarity> classes{Clarity::Unclear, Clarity::SomewhatUnclear,
                                 Clarity::SomewhatClear, Clarity::Clear};
    LinearParams params;
    params.weights.assign(classes.size(), std::vector<double>(dimension));
    params.bias.assign(classes.size(), 0.0);
    for (auto& row : params.weights) {
      for (auto& w : row) w = rng.next_double() - 0.5;
    }
    for (auto& b : params.bias) b = rng.next_double() - 0.5;
    double lambda = 1e-3;

    LinearParams grad;
    logreg_gradient(data, classes, params, lambda, grad);

    const double h = 1e-5;
    auto check_coord = [&](double& slot, double analytic) {
      double saved = slot;
      slot = saved + h;
      double up = logreg_loss(data, classes, params, lambda);
      slot = saved - h;
      double down = logreg_loss(data, classes, params, lambda);
      slot = saved;
      double numeric = (up - down) / (2 * h);
      double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      CHECK(std::abs(analytic - numeric) / scale < 1e-4);
    };
    for (size_t k = 0; k < classes.size(); ++k) {
      for (uint32_t j = 0; j < dimension; ++j) {
        check_coord(params.weights[k][j], grad.weights[k][j]);
      }
      check_coord(params.bias[k], grad.bias[k]);
    }
  }
}

TEST_CASE("logreg training loss never increases") {
  auto data = block_set(60, 11);
  LogRegTrace trace;
  auto model = train_logreg_traced(data, params_for(Algorithm::LOGREG), 3, 0, &trace);
  REQUIRE(trace.losses.size() > 1);
  for (size_t i = 1; i < trace.losses.size(); ++i) {
    CHECK(trace.losses[i] <= trace.losses[i - 1] + 1e-12);
  }

  SUBCASE("softmax scores sum to one on random inputs") {
    Rng rng(55);
    for (int i = 0; i < 100; ++i) {
      auto p = predict(model, random_query(rng, 12));
      double sum = 0;
      for (double s : p.scores) sum += s;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("forest stump matches the exhaustive gini split") {
  std::vector<double> values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<int> labels01{0, 0, 0, 0, 1, 0, 1, 1, 1, 1};
  TrainSet data;
  for (size_t i = 0; i < values.size(); ++i) {
    data.vectors.push_back(sparse(1, {{0, values[i]}}));
    data.labels.push_back(labels01[i] == 0 ? Clarity::Unclear : Clarity::Clear);
    data.review_ids.push_back("p" + std::to_string(i));
  }
  HyperParams hp = params_for(Algorithm::RF);
  hp.forest.trees = 1;
  hp.forest.max_depth = 1;
  hp.forest.bootstrap = false;
  auto model = train(data, hp, 9, 0);
  REQUIRE(model.forest.trees.size() == 1);
  const auto& root = model.forest.trees[0].nodes[0];
  REQUIRE(root.feature == 0);

  double achieved = weighted_gini(values, labels01, root.threshold);
  double best = 1e9;
  for (size_t i = 0; i + 1 < values.size(); ++i) {
    best = std::min(best, weighted_gini(values, labels01, (values[i] + values[i + 1]) / 2));
  }
  CHECK(achieved == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("gbrt pseudo-residuals are the negative logistic gradient") {
  std::vector<double> y01{1.0, 0.0, 1.0, 1.0};
  double prior = std::log(3.0);  // logit of p = 3/4
  std::vector<double> f(4, prior);
  auto residuals = logistic_pseudo_residuals(y01, f);
  REQUIRE(residuals.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    double sigma = 1.0 / (1.0 + std::exp(-f[i]));
    CHECK(residuals[i] == doctest::Approx(y01[i] - sigma).epsilon(1e-12));

    const double h = 1e-6;
    auto loss = [&](double fi) { return std::log(1.0 + std::exp(fi)) - y01[i] * fi; };
    double numeric = (loss(f[i] + h) - loss(f[i] - h)) / (2 * h);
    CHECK(residuals[i] == doctest::Approx(-numeric).epsilon(1e-7));
  }
}

TEST_CASE("every algorithm is deterministic for a fixed seed") {
  auto data = block_set(48, 21);
  for (Algorithm algorithm : kAllAlgorithms) {
    CAPTURE(to_string(algorithm));
    HyperParams hp = params_for(algorithm);
    auto first = serialize_model(train(data, hp, 77, 42));
    auto second = serialize_model(train(data, hp, 77, 42));
    CHECK(first == second);
  }

  SUBCASE("randomized trainers respond to the seed") {
    HyperParams rf = params_for(Algorithm::RF);
    CHECK(serialize_model(train(data, rf, 77, 42)) != serialize_model(train(data, rf, 78, 42)));
    HyperParams gb = params_for(Algorithm::GBRT);
    CHECK(serialize_model(train(data, gb, 77, 42)) != serialize_model(train(data, gb, 78, 42)));
  }
}

TEST_CASE("prediction label is the argmax of its scores") {
  auto data = block_set(80, 31);
  Rng rng(99);
  for (Algorithm algorithm : kAllAlgorithms) {
    CAPTURE(to_string(algorithm));
    auto model = train(data, params_for(algorithm), 5, 0);
    for (int i = 0; i < 200; ++i) {
      auto query = random_query(rng, 12);
      auto p = predict(model, query);
      REQUIRE(p.scores.size() == model.classes.size());
      CHECK(p.label == model.classes[argmax_low(p.scores)]);
      CHECK(p.low_confidence == query.entries.empty());
    }
  }
}

TEST_CASE("scaling all features leaves nb and rf labels unchanged") {
  auto data = block_set(80, 41);
  const double scale = 2.5;
  TrainSet scaled = data;
  for (auto& v : scaled.vectors) {
    for (auto& [index, value] : v.entries) value *= scale;
  }
  for (Algorithm algorithm : {Algorithm::NB, Algorithm::RF}) {
    CAPTURE(to_string(algorithm));
    auto base = train(data, params_for(algorithm), 13, 0);
    auto rescaled = train(scaled, params_for(algorithm), 13, 0);
    for (size_t i = 0; i < data.size(); ++i) {
      CHECK(predict(base, data.vectors[i]).label ==
            predict(rescaled, scaled.vectors[i]).label);
    }
  }
}

TEST_CASE("duplicating a correctly predicted example preserves nb's answer") {
  auto data = block_set(24, 61);
  HyperParams hp = params_for(Algorithm::NB);
  auto model = train(data, hp, 1, 0);
  int checked = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    if (predict(model, data.vectors[i]).label != data.labels[i]) continue;
    TrainSet grown = data;
    grown.vectors.push_back(data.vectors[i]);
    grown.labels.push_back(data.labels[i]);
    grown.review_ids.push_back(data.review_ids[i] + "-dup");
    auto retrained = train(grown, hp, 1, 0);
    CHECK(predict(retrained, data.vectors[i]).label == data.labels[i]);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("models round-trip through bytes and files") {
  auto data = block_set(48, 71);
  Rng rng(17);
  edre::test::TempDir dir;
  for (Algorithm algorithm : kAllAlgorithms) {
    CAPTURE(to_string(algorithm));
    auto model = train(data, params_for(algorithm), 23, 987654321);
    auto path = dir.file(std::string(to_string(algorithm)) + ".model");
    save_model(model, path);
    auto loaded = load_model(path);
    CHECK(loaded.algorithm == model.algorithm);
    CHECK(loaded.classes == model.classes);
    CHECK(loaded.dimension == model.dimension);
    CHECK(loaded.embedding_fingerprint == model.embedding_fingerprint);
    CHECK(loaded.seed == model.seed);
    for (int i = 0; i < 20; ++i) {
      auto query = random_query(rng, 12);
      auto a = predict(model, query);
      auto b = predict(loaded, query);
      CHECK(a.label == b.label);
      CHECK(a.scores == b.scores);
    }
    CHECK(serialize_model(loaded) == serialize_model(model));
  }
}

TEST_CASE("model files fail loudly on damage and future versions") {
  auto model = train(nb_toy(), params_for(Algorithm::NB), 1, 0);
  std::string bytes = serialize_model(model);

  SUBCASE("future version names both versions") {
    std::string future = bytes;
    future[8] = 9;  // version field follows the 8-byte magic
    try {
      deserialize_model(future);
      FAIL("expected a version error");
    } catch (const Error& e) {
      CHECK(e.cls() == ErrorClass::Version);
      std::string message = e.what();
      CHECK(message.find("9") != std::string::npos);
      CHECK(message.find("1") != std::string::npos);
    }
  }
  SUBCASE("truncation is a parse error") {
    try {
      deserialize_model(std::string_view(bytes).substr(0, bytes.size() / 2));
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.cls() == ErrorClass::Parse);
    }
  }
  SUBCASE("bad magic is a parse error") {
    std::string garbage = "NOTMODEL" + bytes.substr(8);
    CHECK_THROWS_AS(deserialize_model(garbage), Error);
  }
  SUBCASE("trailing bytes are rejected") {
    CHECK_THROWS_AS(deserialize_model(bytes + "x"), Error);
  }

  SUBCASE("an attached embedding source survives the round trip") {
    using edre::textprep::TokenDoc;
    TokenDoc d1, d2;
    d1.review_id = "d1";
    d1.features = {"code", "clean"};
    d2.review_id = "d2";
    d2.features = {"code", "dirty"};
    auto source = embed::tfidf_source(embed::build_vocabulary({d1, d2}));
    auto carrier = train(nb_toy(), params_for(Algorithm::NB), 1, source.fingerprint());
    carrier.embedding = source;
    auto back = deserialize_model(serialize_model(carrier));
    REQUIRE(back.embedding.has_value());
    CHECK(back.embedding->fingerprint() == source.fingerprint());
  }
}
