#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "affectpipe/classifiers.hpp"
#include "affectpipe/serialize.hpp"
#include "oracles.hpp"

using namespace affectpipe;
using Catch::Approx;

namespace {

LabeledDataset one_dim(const std::vector<double>& xs, const std::vector<int>& ys) {
  LabeledDataset d;
  d.feature_names = {"x"};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    DatasetRow r;
    r.subject_id = "s" + std::to_string(i % 5);
    r.obs_idx = static_cast<int>(i);
    r.features = {xs[i]};
    r.valence = ys[i] ? ValenceLabel::Positive : ValenceLabel::Negative;
    r.arousal = ys[i] ? ArousalLabel::High : ArousalLabel::Low;
    d.rows.push_back(std::move(r));
  }
  return d;
}

std::vector<int> predict_all(const TrainedModel& m, const LabeledDataset& d) {
  std::vector<int> out;
  for (const auto& r : d.rows) out.push_back(predict_row(m, r.features));
  return out;
}

}  // namespace

TEST_CASE("default grids have the published sizes") {
  REQUIRE(default_grid(AlgorithmId::knn).size() == 5);
  REQUIRE(default_grid(AlgorithmId::j48).size() == 3);
  REQUIRE(default_grid(AlgorithmId::rf).size() == 6);
  REQUIRE(default_grid(AlgorithmId::svm).size() == 3);
  REQUIRE(default_grid(AlgorithmId::mlp).size() == 3);
  REQUIRE(default_grid(AlgorithmId::nb).size() == 2);
}

TEST_CASE("knn with k=1 memorizes the training set") {
  LabeledDataset d = oracles::blob_dataset(25, 4, 0.8, 99);
  TrainedModel m = train(AlgorithmId::knn, {{"k", 1}}, d, Target::Valence, 0);
  for (const auto& r : d.rows) REQUIRE(predict_row(m, r.features) == r.y(Target::Valence));
}

TEST_CASE("nb approaches the analytic Bayes rule on two unit gaussians") {
  // classes centered at -2 and +2, 500 samples each
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> xs;
  std::vector<int> ys;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 500; ++i) {
      xs.push_back(g(rng) + (c ? 2.0 : -2.0));
      ys.push_back(c);
    }
  TrainedModel m = train(AlgorithmId::nb, {{"smoothing", 1e-9}}, one_dim(xs, ys),
                         Target::Valence, 0);

  // decision boundary by scanning: analytic optimum is x = 0
  double boundary = -10.0;
  for (double x = -1.0; x <= 1.0; x += 0.001) {
    if (predict_row(m, {x}) == 1) {
      boundary = x;
      break;
    }
  }
  REQUIRE(boundary == Approx(0.0).margin(0.1));

  // accuracy on a fresh sample vs the closed-form Bayes accuracy Phi(2)
  std::mt19937_64 rng2(8);
  int correct = 0;
  const int n_test = 4000;
  for (int i = 0; i < n_test; ++i) {
    int c = i % 2;
    double x = g(rng2) + (c ? 2.0 : -2.0);
    if (predict_row(m, {x}) == c) ++correct;
  }
  double bayes = 0.5 * std::erfc(-2.0 / std::sqrt(2.0));  // Phi(2)
  REQUIRE(double(correct) / n_test == Approx(bayes).margin(0.02));
}

TEST_CASE("j48 splits separable 1-D data inside the gap") {
  // exhaustive-threshold oracle: any split in (max negative, min positive) is optimal
  std::vector<double> xs{0.1, 0.2, 0.3, 0.42, 0.58, 0.7, 0.8, 0.9};
  std::vector<int> ys{0, 0, 0, 0, 1, 1, 1, 1};
  TrainedModel m = train(AlgorithmId::j48, {{"min_leaf", 2}}, one_dim(xs, ys),
                         Target::Valence, 0);
  const auto& tree = std::get<clfdetail::TreeModel>(m.params);
  REQUIRE(tree.nodes[0].feature == 0);
  REQUIRE(tree.nodes[0].threshold > 0.42);
  REQUIRE(tree.nodes[0].threshold < 0.58);
  for (std::size_t i = 0; i < xs.size(); ++i)
    REQUIRE(predict_row(m, {xs[i]}) == ys[i]);
}

TEST_CASE("nb tie between likelihoods falls to the majority class") {
  // identical class-conditional distributions, 60/40 priors
  std::vector<double> xs;
  std::vector<int> ys;
  for (int i = 0; i < 60; ++i) {
    xs.push_back(i % 10);
    ys.push_back(0);
  }
  for (int i = 0; i < 40; ++i) {
    xs.push_back(i % 10);
    ys.push_back(1);
  }
  TrainedModel m = train(AlgorithmId::nb, {{"smoothing", 1e-9}}, one_dim(xs, ys),
                         Target::Valence, 0);
  REQUIRE(predict_row(m, {4.5}) == 0);  // majority = Negative
}

TEST_CASE("rf with one depth-0 tree predicts the training majority everywhere") {
  LabeledDataset d = one_dim({1, 2, 3, 4, 5, 6, 7}, {1, 1, 1, 1, 0, 0, 0});
  TrainedModel m = train(AlgorithmId::rf, {{"trees", 1}, {"max_depth", 0.0}}, d,
                         Target::Valence, 3);
  for (double x : {-5.0, 0.0, 3.0, 99.0}) REQUIRE(predict_row(m, {x}) == 1);
}

TEST_CASE("row permutation leaves predictions unchanged") {
  LabeledDataset d = oracles::blob_dataset(30, 5, 0.6, 21);
  LabeledDataset shuffled = d;
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), rng);
  LabeledDataset probe = oracles::blob_dataset(10, 5, 0.6, 22);

  for (AlgorithmId alg : {AlgorithmId::nb, AlgorithmId::knn, AlgorithmId::j48,
                          AlgorithmId::svm, AlgorithmId::mlp, AlgorithmId::rf}) {
    HyperParams hp = default_grid(alg)[0];
    TrainedModel a = train(alg, hp, d, Target::Valence, 77);
    TrainedModel b = train(alg, hp, shuffled, Target::Valence, 77);
    CAPTURE(algorithm_name(alg));
    REQUIRE(predict_all(a, probe) == predict_all(b, probe));
  }
}

TEST_CASE("determinism: same algorithm, data, and seed give identical predictions") {
  LabeledDataset d = oracles::blob_dataset(25, 6, 0.5, 31);
  LabeledDataset probe = oracles::blob_dataset(12, 6, 0.5, 32);
  for (AlgorithmId alg : {AlgorithmId::nb, AlgorithmId::knn, AlgorithmId::j48,
                          AlgorithmId::svm, AlgorithmId::mlp, AlgorithmId::rf}) {
    HyperParams hp = default_grid(alg).back();
    TrainedModel a = train(alg, hp, d, Target::Arousal, 123);
    TrainedModel b = train(alg, hp, d, Target::Arousal, 123);
    CAPTURE(algorithm_name(alg));
    REQUIRE(predict_all(a, probe) == predict_all(b, probe));
  }
}

TEST_CASE("knn is invariant to strictly monotone per-feature affine rescaling") {
  LabeledDataset d = oracles::blob_dataset(20, 3, 0.7, 41);
  LabeledDataset scaled = d;
  const std::vector<double> mult{3.0, 0.25, 10.0};
  const std::vector<double> shift{-5.0, 2.0, 100.0};
  for (auto& r : scaled.rows)
    for (std::size_t j = 0; j < 3; ++j) r.features[j] = r.features[j] * mult[j] + shift[j];

  LabeledDataset probe = oracles::blob_dataset(15, 3, 0.7, 42);
  LabeledDataset probe_scaled = probe;
  for (auto& r : probe_scaled.rows)
    for (std::size_t j = 0; j < 3; ++j) r.features[j] = r.features[j] * mult[j] + shift[j];

  TrainedModel a = train(AlgorithmId::knn, {{"k", 3}}, d, Target::Valence, 0);
  TrainedModel b = train(AlgorithmId::knn, {{"k", 3}}, scaled, Target::Valence, 0);
  REQUIRE(predict_all(a, probe) == predict_all(b, probe_scaled));
}

TEST_CASE("training rejects empty and single-class datasets") {
  LabeledDataset empty;
  empty.feature_names = {"x"};
  REQUIRE_THROWS_AS(train(AlgorithmId::nb, {}, empty, Target::Valence, 0), Error);

  LabeledDataset single = one_dim({1, 2, 3}, {1, 1, 1});
  REQUIRE_THROWS_AS(train(AlgorithmId::knn, {{"k", 1}}, single, Target::Valence, 0), Error);
}

TEST_CASE("predict rejects mismatched feature vectors") {
  LabeledDataset d = oracles::blob_dataset(10, 3, 1.0, 51);
  TrainedModel m = train(AlgorithmId::nb, {}, d, Target::Valence, 0);
  FeatureVector x;
  x.names = {"f0", "f2", "f1"};  // permuted
  x.values = {0.0, 0.0, 0.0};
  REQUIRE_THROWS_AS(predict(m, x), Error);
  x.names = {"f0", "f1", "f2"};
  REQUIRE_NOTHROW(predict(m, x));
}

TEST_CASE("knn prediction at a training point returns its label") {
  LabeledDataset d = oracles::blob_dataset(15, 4, 1.2, 61);
  TrainedModel m = train(AlgorithmId::knn, {{"k", 1}}, d, Target::Arousal, 0);
  REQUIRE(predict_row(m, d.rows[7].features) == d.rows[7].y(Target::Arousal));
}

TEST_CASE("all six algorithms separate well-separated blobs") {
  LabeledDataset d = oracles::blob_dataset(40, 6, 1.5, 71);
  LabeledDataset probe = oracles::blob_dataset(20, 6, 1.5, 72);
  for (AlgorithmId alg : {AlgorithmId::nb, AlgorithmId::knn, AlgorithmId::j48,
                          AlgorithmId::svm, AlgorithmId::mlp, AlgorithmId::rf}) {
    HyperParams hp = default_grid(alg)[0];
    TrainedModel m = train(alg, hp, d, Target::Valence, 7);
    auto preds = predict_all(m, probe);
    int correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i] == probe.rows[i].y(Target::Valence)) ++correct;
    CAPTURE(algorithm_name(alg));
    REQUIRE(double(correct) / preds.size() >= 0.9);
  }
}

TEST_CASE("model serialization round-trips predictions exactly") {
  LabeledDataset d = oracles::blob_dataset(25, 5, 0.8, 81);
  LabeledDataset probe = oracles::blob_dataset(15, 5, 0.8, 82);
  for (AlgorithmId alg : {AlgorithmId::nb, AlgorithmId::knn, AlgorithmId::j48,
                          AlgorithmId::svm, AlgorithmId::mlp, AlgorithmId::rf}) {
    HyperParams hp = default_grid(alg)[0];
    TrainedModel m = train(alg, hp, d, Target::Valence, 11);
    json j = to_json(m);
    TrainedModel loaded = model_from_json(json::parse(j.dump()));
    CAPTURE(algorithm_name(alg));
    REQUIRE(predict_all(m, probe) == predict_all(loaded, probe));
  }
}
