#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "affectpipe/dataset.hpp"
#include "affectpipe/errors.hpp"
#include "affectpipe/features.hpp"
#include "affectpipe/util.hpp"

namespace affectpipe {

enum class AlgorithmId { nb, knn, j48, svm, mlp, rf };

inline const char* algorithm_name(AlgorithmId a) {
  switch (a) {
    case AlgorithmId::nb: return "nb";
    case AlgorithmId::knn: return "knn";
    case AlgorithmId::j48: return "j48";
    case AlgorithmId::svm: return "svm";
    case AlgorithmId::mlp: return "mlp";
    case AlgorithmId::rf: return "rf";
  }
  return "?";
}

inline std::optional<AlgorithmId> algorithm_from_name(const std::string& s) {
  for (AlgorithmId a : {AlgorithmId::nb, AlgorithmId::knn, AlgorithmId::j48,
                        AlgorithmId::svm, AlgorithmId::mlp, AlgorithmId::rf})
    if (s == algorithm_name(a)) return a;
  return std::nullopt;
}

using HyperParams = std::map<std::string, double>;

inline std::string hp_to_string(const HyperParams& hp) {
  std::string s;
  for (const auto& [k, v] : hp) {
    if (!s.empty()) s += ",";
    s += k + "=" + format_g9(v);
  }
  return s.empty() ? "-" : s;
}

// Small fixed grids searched by leave-one-out cross validation.
inline std::vector<HyperParams> default_grid(AlgorithmId alg) {
  switch (alg) {
    case AlgorithmId::knn:
      return {{{"k", 1}}, {{"k", 3}}, {{"k", 5}}, {{"k", 7}}, {{"k", 11}}};
    case AlgorithmId::j48:
      return {{{"min_leaf", 2}}, {{"min_leaf", 5}}, {{"min_leaf", 10}}};
    case AlgorithmId::rf: {
      std::vector<HyperParams> g;
      for (double t : {50.0, 100.0, 200.0})
        for (double d : {-1.0, 8.0})  // -1 = unbounded depth
          g.push_back({{"trees", t}, {"max_depth", d}});
      return g;
    }
    case AlgorithmId::svm:
      return {{{"lambda", 1e-3}}, {{"lambda", 1e-2}}, {{"lambda", 1e-1}}};
    case AlgorithmId::mlp:
      return {{{"hidden", 4}}, {{"hidden", 8}}, {{"hidden", 16}}};
    case AlgorithmId::nb:
      return {{{"smoothing", 1e-9}}, {{"smoothing", 1e-6}}};
  }
  return {};
}

namespace clfdetail {

// fitted per-feature affine rescaling (center to mean 0 / std 1)
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    Standardizer s;
    std::size_t p = rows.empty() ? 0 : rows.front().size();
    s.mean.assign(p, 0.0);
    s.scale.assign(p, 1.0);
    for (const auto& r : rows)
      for (std::size_t j = 0; j < p; ++j) s.mean[j] += r[j];
    for (double& m : s.mean) m /= rows.size();
    std::vector<double> var(p, 0.0);
    for (const auto& r : rows)
      for (std::size_t j = 0; j < p; ++j) var[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    for (std::size_t j = 0; j < p; ++j) {
      double sd = std::sqrt(var[j] / rows.size());
      s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }
  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
    return out;
  }
};

struct NbModel {
  std::array<double, 2> log_prior{};
  std::vector<std::array<double, 2>> mean;  // per feature, per class
  std::vector<std::array<double, 2>> var;
};

struct KnnModel {
  int k = 1;
  Standardizer std;
  std::vector<std::vector<double>> x;  // standardized, canonical order
  std::vector<int> y;
};

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  int leaf_class = 0;
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // node 0 is the root
  int predict(const std::vector<double>& x) const {
    int n = 0;
    while (nodes[n].feature >= 0)
      n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
    return nodes[n].leaf_class;
  }
};

struct RfModel {
  std::vector<TreeModel> trees;
};

struct SvmModel {
  Standardizer std;
  std::vector<double> w;
  double bias = 0.0;
};

struct MlpModel {
  Standardizer std;
  // weights layout: hidden x (p+1) then 1 x (hidden+1), bias last
  std::vector<std::vector<double>> w1;
  std::vector<double> w2;
};

using ModelParams = std::variant<NbModel, KnnModel, TreeModel, RfModel, SvmModel, MlpModel>;

}  // namespace clfdetail

struct TrainedModel {
  AlgorithmId algorithm = AlgorithmId::nb;
  HyperParams hp;
  Target target = Target::Valence;
  std::vector<std::string> feature_names;
  std::array<std::size_t, 2> class_counts{};  // y = 0, 1
  int tie_class = 0;  // majority training class, then lexicographic label name
  clfdetail::ModelParams params;
};

namespace clfdetail {

inline int tie_class_for(const std::array<std::size_t, 2>& counts, Target target) {
  if (counts[0] != counts[1]) return counts[0] > counts[1] ? 0 : 1;
  // all-out tie: lexicographically smallest label name
  return class_name(target, 0) < class_name(target, 1) ? 0 : 1;
}

// rows sorted by content; independent of input row order
inline std::vector<std::size_t> canonical_sort(const std::vector<std::vector<double>>& x,
                                               const std::vector<int>& y) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  return idx;
}

// canonical presentation order for iterative learners: content sort followed
// by a seed-derived shuffle, so results depend on (data, seed) only
inline std::vector<std::size_t> canonical_order(const std::vector<std::vector<double>>& x,
                                                const std::vector<int>& y,
                                                std::uint64_t seed) {
  std::vector<std::size_t> idx = canonical_sort(x, y);
  std::mt19937_64 rng(derive_seed(seed, 0x5u));
  for (std::size_t i = idx.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline NbModel train_nb(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                        double smoothing) {
  std::size_t p = x.front().size();
  NbModel m;
  std::array<std::size_t, 2> n{0, 0};
  for (int yi : y) ++n[static_cast<std::size_t>(yi)];
  for (int c = 0; c < 2; ++c)
    m.log_prior[c] = std::log((n[c] + 1.0) / (y.size() + 2.0));  // Laplace-smoothed
  m.mean.assign(p, {0.0, 0.0});
  m.var.assign(p, {0.0, 0.0});
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) m.mean[j][y[i]] += x[i][j];
  for (std::size_t j = 0; j < p; ++j)
    for (int c = 0; c < 2; ++c) m.mean[j][c] /= std::max<std::size_t>(n[c], 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double d = x[i][j] - m.mean[j][y[i]];
      m.var[j][y[i]] += d * d;
    }
  double max_var = 0.0;
  for (std::size_t j = 0; j < p; ++j)
    for (int c = 0; c < 2; ++c) {
      m.var[j][c] /= std::max<std::size_t>(n[c], 1);
      max_var = std::max(max_var, m.var[j][c]);
    }
  for (std::size_t j = 0; j < p; ++j)
    for (int c = 0; c < 2; ++c)
      m.var[j][c] += std::max(smoothing * max_var, 1e-12);
  return m;
}

inline double nb_score(const NbModel& m, const std::vector<double>& x, int c) {
  double s = m.log_prior[c];
  for (std::size_t j = 0; j < x.size(); ++j) {
    double d = x[j] - m.mean[j][c];
    s += -0.5 * std::log(2.0 * M_PI * m.var[j][c]) - d * d / (2.0 * m.var[j][c]);
  }
  return s;
}

struct TreeParams {
  std::size_t min_leaf = 2;
  int max_depth = -1;         // negative = unbounded
  std::size_t n_features = 0; // features drawn per split; 0 = all
};

inline double entropy(std::size_t n0, std::size_t n1) {
  double n = double(n0 + n1);
  if (n0 == 0 || n1 == 0) return 0.0;
  double p0 = n0 / n, p1 = n1 / n;
  return -(p0 * std::log(p0) + p1 * std::log(p1));
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
              TreeParams params, int tie_class, std::mt19937_64* rng)
      : x_(x), y_(y), params_(params), tie_class_(tie_class), rng_(rng) {}

  TreeModel build(std::vector<std::size_t> indices) {
    TreeModel m;
    grow(m, std::move(indices), 0);
    return m;
  }

 private:
  int leaf(TreeModel& m, const std::vector<std::size_t>& idx) {
    std::array<std::size_t, 2> n{0, 0};
    for (std::size_t i : idx) ++n[static_cast<std::size_t>(y_[i])];
    TreeNode node;
    node.leaf_class = n[0] > n[1] ? 0 : n[1] > n[0] ? 1 : tie_class_;
    m.nodes.push_back(node);
    return static_cast<int>(m.nodes.size() - 1);
  }

  int grow(TreeModel& m, std::vector<std::size_t> idx, int depth) {
    std::array<std::size_t, 2> n{0, 0};
    for (std::size_t i : idx) ++n[static_cast<std::size_t>(y_[i])];
    bool pure = n[0] == 0 || n[1] == 0;
    bool too_small = idx.size() < 2 * params_.min_leaf;
    bool too_deep = params_.max_depth >= 0 && depth >= params_.max_depth;
    if (pure || too_small || too_deep) return leaf(m, idx);

    std::size_t p = x_.front().size();
    std::vector<std::size_t> feats(p);
    std::iota(feats.begin(), feats.end(), 0);
    if (params_.n_features > 0 && params_.n_features < p && rng_) {
      for (std::size_t i = 0; i < params_.n_features; ++i) {
        auto j = i + static_cast<std::size_t>((*rng_)() % (p - i));
        std::swap(feats[i], feats[j]);
      }
      feats.resize(params_.n_features);
      std::sort(feats.begin(), feats.end());
    }

    double base = entropy(n[0], n[1]);
    double best_gain = 0.0;
    std::size_t best_f = 0;
    double best_t = 0.0;
    bool found = false;
    std::vector<std::size_t> order = idx;
    for (std::size_t f : feats) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x_[a][f] != x_[b][f]) return x_[a][f] < x_[b][f];
        return a < b;
      });
      std::array<std::size_t, 2> ln{0, 0};
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        ++ln[static_cast<std::size_t>(y_[order[i]])];
        if (x_[order[i]][f] == x_[order[i + 1]][f]) continue;
        std::size_t nl = i + 1, nr = order.size() - nl;
        if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
        double gain = base - (nl * entropy(ln[0], ln[1]) +
                              nr * entropy(n[0] - ln[0], n[1] - ln[1])) /
                                 order.size();
        double thr = (x_[order[i]][f] + x_[order[i + 1]][f]) / 2.0;
        // first strictly-best split wins; scan order (feature, threshold)
        // ascending makes ties deterministic
        if (gain > best_gain + 1e-12 && gain > 1e-12) {
          best_gain = gain;
          best_f = f;
          best_t = thr;
          found = true;
        }
      }
    }
    if (!found) return leaf(m, idx);

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (x_[i][best_f] <= best_t ? left : right).push_back(i);
    TreeNode node;
    node.feature = static_cast<int>(best_f);
    node.threshold = best_t;
    m.nodes.push_back(node);
    auto self = static_cast<int>(m.nodes.size() - 1);
    m.nodes[self].left = grow(m, std::move(left), depth + 1);
    m.nodes[self].right = grow(m, std::move(right), depth + 1);
    return self;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<int>& y_;
  TreeParams params_;
  int tie_class_;
  std::mt19937_64* rng_;
};

inline SvmModel train_svm(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                          double lambda, std::uint64_t seed) {
  SvmModel m;
  m.std = Standardizer::fit(x);
  std::vector<std::vector<double>> xs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xs[i] = m.std.apply(x[i]);
  std::size_t p = xs.front().size();
  m.w.assign(p, 0.0);
  auto order = canonical_order(xs, y, seed);
  const int epochs = 200;
  std::size_t t = 0;
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i : order) {
      ++t;
      double eta = 1.0 / (lambda * t);
      double yi = y[i] == 1 ? 1.0 : -1.0;
      double margin = m.bias;
      for (std::size_t j = 0; j < p; ++j) margin += m.w[j] * xs[i][j];
      margin *= yi;
      for (double& wj : m.w) wj *= (1.0 - eta * lambda);
      if (margin < 1.0) {
        for (std::size_t j = 0; j < p; ++j) m.w[j] += eta * yi * xs[i][j];
        m.bias += eta * yi;  // bias unregularized
      }
    }
  }
  return m;
}

inline MlpModel train_mlp(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                          int hidden, std::uint64_t seed) {
  MlpModel m;
  m.std = Standardizer::fit(x);
  std::vector<std::vector<double>> xs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xs[i] = m.std.apply(x[i]);
  std::size_t n = xs.size(), p = xs.front().size();

  std::mt19937_64 rng(derive_seed(seed, 0x6du));
  auto urand = [&](double a) {
    return a * (2.0 * (rng() >> 11) * (1.0 / 9007199254740992.0) - 1.0);
  };
  double a1 = std::sqrt(6.0 / (p + hidden));
  double a2 = std::sqrt(6.0 / (hidden + 1.0));
  m.w1.assign(hidden, std::vector<double>(p + 1));
  for (auto& row : m.w1)
    for (double& w : row) w = urand(a1);
  m.w2.assign(hidden + 1, 0.0);
  for (double& w : m.w2) w = urand(a2);

  auto order = canonical_order(xs, y, seed);
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const int epochs = 200;
  std::vector<std::vector<double>> g1(hidden, std::vector<double>(p + 1));
  std::vector<double> g2(hidden + 1), h(hidden);
  for (int e = 0; e < epochs; ++e) {
    double lr = 1.0 / (1.0 + 0.01 * e);
    for (auto& row : g1) std::fill(row.begin(), row.end(), 0.0);
    std::fill(g2.begin(), g2.end(), 0.0);
    for (std::size_t i : order) {  // full batch in canonical order
      for (int u = 0; u < hidden; ++u) {
        double z = m.w1[u][p];
        for (std::size_t j = 0; j < p; ++j) z += m.w1[u][j] * xs[i][j];
        h[u] = sigmoid(z);
      }
      double z2 = m.w2[hidden];
      for (int u = 0; u < hidden; ++u) z2 += m.w2[u] * h[u];
      double out = sigmoid(z2);
      double delta = out - y[i];  // dBCE/dz2
      for (int u = 0; u < hidden; ++u) g2[u] += delta * h[u];
      g2[hidden] += delta;
      for (int u = 0; u < hidden; ++u) {
        double dh = delta * m.w2[u] * h[u] * (1.0 - h[u]);
        for (std::size_t j = 0; j < p; ++j) g1[u][j] += dh * xs[i][j];
        g1[u][p] += dh;
      }
    }
    for (int u = 0; u <= hidden; ++u) m.w2[u] -= lr * g2[u] / n;
    for (int u = 0; u < hidden; ++u)
      for (std::size_t j = 0; j <= p; ++j) m.w1[u][j] -= lr * g1[u][j] / n;
  }
  return m;
}

inline double mlp_prob(const MlpModel& m, const std::vector<double>& raw) {
  std::vector<double> x = m.std.apply(raw);
  std::size_t p = x.size();
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  int hidden = static_cast<int>(m.w1.size());
  double z2 = m.w2[hidden];
  for (int u = 0; u < hidden; ++u) {
    double z = m.w1[u][p];
    for (std::size_t j = 0; j < p; ++j) z += m.w1[u][j] * x[j];
    z2 += m.w2[u] * sigmoid(z);
  }
  return sigmoid(z2);
}

inline double hp_get(const HyperParams& hp, const std::string& key, double fallback) {
  auto it = hp.find(key);
  return it == hp.end() ? fallback : it->second;
}

}  // namespace clfdetail

inline TrainedModel train(AlgorithmId alg, const HyperParams& hp, const LabeledDataset& d,
                          Target target, std::uint64_t seed) {
  using namespace clfdetail;
  if (d.empty()) fail(Errc::EmptyDataset, "cannot train on an empty dataset");
  auto counts = d.class_counts(target);
  if (counts[0] == 0 || counts[1] == 0)
    fail(Errc::SingleClass, std::string("training set has a single ") + target_name(target) +
                                " class (" + std::to_string(counts[0]) + "/" +
                                std::to_string(counts[1]) + ")");

  std::vector<std::vector<double>> x;
  std::vector<int> y;
  x.reserve(d.size());
  for (const auto& r : d.rows) {
    x.push_back(r.features);
    y.push_back(r.y(target));
  }

  TrainedModel m;
  m.algorithm = alg;
  m.hp = hp;
  m.target = target;
  m.feature_names = d.feature_names;
  m.class_counts = counts;
  m.tie_class = tie_class_for(counts, target);

  switch (alg) {
    case AlgorithmId::nb:
      m.params = train_nb(x, y, hp_get(hp, "smoothing", 1e-9));
      break;
    case AlgorithmId::knn: {
      KnnModel km;
      km.k = static_cast<int>(hp_get(hp, "k", 5));
      km.std = Standardizer::fit(x);
      auto order = canonical_sort(x, y);
      for (std::size_t i : order) {
        km.x.push_back(km.std.apply(x[i]));
        km.y.push_back(y[i]);
      }
      m.params = std::move(km);
      break;
    }
    case AlgorithmId::j48: {
      TreeParams tp;
      tp.min_leaf = static_cast<std::size_t>(hp_get(hp, "min_leaf", 2));
      tp.max_depth = static_cast<int>(hp_get(hp, "max_depth", -1));
      TreeBuilder builder(x, y, tp, m.tie_class, nullptr);
      std::vector<std::size_t> all(x.size());
      std::iota(all.begin(), all.end(), 0);
      m.params = builder.build(all);
      break;
    }
    case AlgorithmId::rf: {
      RfModel rf;
      auto ntrees = static_cast<std::size_t>(hp_get(hp, "trees", 100));
      TreeParams tp;
      tp.min_leaf = 1;
      tp.max_depth = static_cast<int>(hp_get(hp, "max_depth", -1));
      tp.n_features =
          static_cast<std::size_t>(std::ceil(std::sqrt(double(x.front().size()))));
      auto base = canonical_order(x, y, seed);
      for (std::size_t t = 0; t < ntrees; ++t) {
        std::mt19937_64 rng(derive_seed(seed, 0x7200 + t));
        std::vector<std::size_t> boot(x.size());
        for (auto& b : boot) b = base[rng() % base.size()];
        TreeBuilder builder(x, y, tp, m.tie_class, &rng);
        rf.trees.push_back(builder.build(std::move(boot)));
      }
      m.params = std::move(rf);
      break;
    }
    case AlgorithmId::svm:
      m.params = train_svm(x, y, hp_get(hp, "lambda", 1e-2), seed);
      break;
    case AlgorithmId::mlp:
      m.params = train_mlp(x, y, static_cast<int>(hp_get(hp, "hidden", 8)), seed);
      break;
  }
  return m;
}

// Binary prediction on a feature row already in the model's training order.
inline int predict_row(const TrainedModel& m, const std::vector<double>& x) {
  using namespace clfdetail;
  if (x.size() != m.feature_names.size())
    fail(Errc::SchemaMismatch, "feature count differs from training");
  return std::visit(
      [&](const auto& params) -> int {
        using T = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<T, NbModel>) {
          double s0 = nb_score(params, x, 0), s1 = nb_score(params, x, 1);
          if (s0 == s1) return m.tie_class;
          return s1 > s0 ? 1 : 0;
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          std::vector<double> xs = params.std.apply(x);
          std::vector<std::pair<double, std::size_t>> dist(params.x.size());
          for (std::size_t i = 0; i < params.x.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < xs.size(); ++j) {
              double d = xs[j] - params.x[i][j];
              d2 += d * d;
            }
            dist[i] = {d2, i};
          }
          auto k = std::min<std::size_t>(params.k, dist.size());
          std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
          std::array<std::size_t, 2> votes{0, 0};
          for (std::size_t i = 0; i < k; ++i)
            ++votes[static_cast<std::size_t>(params.y[dist[i].second])];
          if (votes[0] == votes[1]) return m.tie_class;
          return votes[1] > votes[0] ? 1 : 0;
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          return params.predict(x);
        } else if constexpr (std::is_same_v<T, RfModel>) {
          std::array<std::size_t, 2> votes{0, 0};
          for (const auto& t : params.trees)
            ++votes[static_cast<std::size_t>(t.predict(x))];
          if (votes[0] == votes[1]) return m.tie_class;
          return votes[1] > votes[0] ? 1 : 0;
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          std::vector<double> xs = params.std.apply(x);
          double margin = params.bias;
          for (std::size_t j = 0; j < xs.size(); ++j) margin += params.w[j] * xs[j];
          if (margin == 0.0) return m.tie_class;
          return margin > 0.0 ? 1 : 0;
        } else {
          double pr = mlp_prob(params, x);
          if (pr == 0.5) return m.tie_class;
          return pr > 0.5 ? 1 : 0;
        }
      },
      m.params);
}

// Prediction for a named feature vector; the name order must match training.
inline std::string predict(const TrainedModel& m, const FeatureVector& x) {
  if (x.names != m.feature_names)
    fail(Errc::SchemaMismatch, "feature vector order differs from the training order");
  return class_name(m.target, predict_row(m, x.values));
}

}  // namespace affectpipe
