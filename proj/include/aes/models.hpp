#pragma once

// The four classical regressors: ridge-stabilized linear regression,
// linear epsilon-insensitive SVR trained by seeded subgradient descent,
// bootstrap random forests, and first-order gradient boosting with
// squared loss. All fits are deterministic functions of
// (data, hyperparameters, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aes/corpus.hpp"
#include "aes/error.hpp"
#include "aes/features.hpp"
#include "aes/random.hpp"

namespace aes {

using Matrix = std::vector<std::vector<double>>;

enum class ModelKind { linear, svr, random_forest, gbt };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::svr: return "svr";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::gbt: return "gbt";
  }
  return "unknown";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "svr") return ModelKind::svr;
  if (s == "random_forest") return ModelKind::random_forest;
  if (s == "gbt") return ModelKind::gbt;
  throw ValidationError("unknown model kind '" + s + "'");
}

// feature < 0 marks a leaf. Internal nodes always have both children, so
// routing is total.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                   : nd.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

struct TrainedModel {
  ModelKind kind = ModelKind::linear;
  std::size_t n_features = 0;

  // linear / svr
  std::vector<double> coefficients;
  double intercept = 0.0;

  // random_forest / gbt
  std::vector<RegressionTree> trees;
  double base = 0.0;           // gbt initial prediction
  double learning_rate = 1.0;  // gbt shrinkage

  nlohmann::ordered_json hyperparameters;
  FeatureScaler scaler;  // identity unless the pipeline sets one
  PromptSpec prompt;
  std::uint64_t train_seed = 0;
  bool includes_juk = false;
};

namespace detail {

inline void check_design(const Matrix& X, const std::vector<double>& y,
                         const char* op) {
  if (X.empty() || y.empty()) {
    throw ValidationError(std::string(op) + ": empty training data");
  }
  if (X.size() != y.size()) {
    throw ValidationError(std::string(op) + ": X has " +
                          std::to_string(X.size()) + " rows but y has " +
                          std::to_string(y.size()));
  }
  const std::size_t d = X[0].size();
  if (d == 0) throw ValidationError(std::string(op) + ": zero-width rows");
  for (const auto& row : X) {
    if (row.size() != d) {
      throw ValidationError(std::string(op) + ": ragged design matrix");
    }
  }
}

inline void check_finite(const Matrix& X, const std::vector<double>& y,
                         const char* op) {
  for (const auto& row : X) {
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw ValidationError(std::string(op) + ": non-finite feature value");
      }
    }
  }
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(op) + ": non-finite target value");
    }
  }
}

// Cholesky solve of an SPD system; returns false on a non-positive pivot.
inline bool solve_spd(Matrix a, std::vector<double> b,
                      std::vector<double>& out) {
  const std::size_t d = a.size();
  for (std::size_t j = 0; j < d; ++j) {
    double diag = a[j][j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j][k] * a[j][k];
    if (diag <= 0.0) return false;
    a[j][j] = std::sqrt(diag);
    for (std::size_t i = j + 1; i < d; ++i) {
      double v = a[i][j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i][k] * a[j][k];
      a[i][j] = v / a[j][j];
    }
  }
  // forward substitution L z = b
  for (std::size_t i = 0; i < d; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i][k] * b[k];
    b[i] = v / a[i][i];
  }
  // back substitution L^T x = z
  out.assign(d, 0.0);
  for (std::size_t ii = d; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    double v = b[i];
    for (std::size_t k = i + 1; k < d; ++k) v -= a[k][i] * out[k];
    out[i] = v / a[i][i];
  }
  return true;
}

// Depth-bounded SSE-minimizing regression tree. Split thresholds are
// midpoints between consecutive distinct sorted values; ties break toward
// the lowest feature index, then the lowest threshold (features are
// scanned in ascending order with strict improvement, which realizes that
// rule).
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<double>& y, int max_depth,
              int features_per_split, rng::Engine* engine)
      : x_(x),
        y_(y),
        max_depth_(max_depth),
        features_per_split_(features_per_split),
        engine_(engine) {}

  RegressionTree build(const std::vector<int>& indices) {
    RegressionTree tree;
    grow(tree, indices, 0);
    return tree;
  }

 private:
  static double node_sse(double sum, double sumsq, double n) {
    return std::max(0.0, sumsq - sum * sum / n);
  }

  std::vector<int> candidate_features() const {
    const int d = static_cast<int>(x_[0].size());
    if (engine_ == nullptr || features_per_split_ <= 0 ||
        features_per_split_ >= d) {
      std::vector<int> all(static_cast<std::size_t>(d));
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    std::vector<int> pool(static_cast<std::size_t>(d));
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k < features_per_split_; ++k) {
      const auto j = static_cast<std::size_t>(k) +
                     engine_->below(static_cast<std::uint64_t>(d - k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(features_per_split_));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  int grow(RegressionTree& tree, const std::vector<int>& indices, int depth) {
    const double n = static_cast<double>(indices.size());
    double sum = 0.0, sumsq = 0.0;
    for (int i : indices) {
      sum += y_[static_cast<std::size_t>(i)];
      sumsq += y_[static_cast<std::size_t>(i)] * y_[static_cast<std::size_t>(i)];
    }
    const double parent_sse = node_sse(sum, sumsq, n);

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().value = sum / n;

    if (depth >= max_depth_ || indices.size() < 2 || parent_sse <= 0.0) {
      return node_id;
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_sse = parent_sse;
    for (int f : candidate_features()) {
      std::vector<std::pair<double, int>> order;
      order.reserve(indices.size());
      for (int i : indices) {
        order.emplace_back(x_[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)], i);
      }
      std::sort(order.begin(), order.end());
      double left_sum = 0.0, left_sumsq = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const double yi = y_[static_cast<std::size_t>(order[k].second)];
        left_sum += yi;
        left_sumsq += yi * yi;
        if (order[k].first == order[k + 1].first) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = n - nl;
        const double sse = node_sse(left_sum, left_sumsq, nl) +
                           node_sse(sum - left_sum, sumsq - left_sumsq, nr);
        if (sse < best_sse) {
          best_sse = sse;
          best_feature = f;
          best_threshold = (order[k].first + order[k + 1].first) / 2.0;
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<int> left_idx, right_idx;
    for (int i : indices) {
      const double v =
          x_[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_feature)];
      (v <= best_threshold ? left_idx : right_idx).push_back(i);
    }
    tree.nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
    tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
    const int left = grow(tree, left_idx, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].left = left;
    const int right = grow(tree, right_idx, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].right = right;
    return node_id;
  }

  const Matrix& x_;
  const std::vector<double>& y_;
  int max_depth_;
  int features_per_split_;
  rng::Engine* engine_;
};

}  // namespace detail

// Least squares via normal equations with a small ridge term for
// conditioning; the intercept is handled internally and never penalized.
inline TrainedModel fit_linear(const Matrix& X, const std::vector<double>& y,
                               double ridge = 1e-8) {
  detail::check_design(X, y, "fit_linear");
  if (ridge < 0.0) throw ValidationError("fit_linear: ridge must be >= 0");
  const std::size_t n = X.size();
  const std::size_t d = X[0].size();
  const std::size_t m = d + 1;  // augmented with the intercept column

  Matrix gram(m, std::vector<double>(m, 0.0));
  std::vector<double> rhs(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = X[i][a];
      for (std::size_t b = a; b < d; ++b) gram[a][b] += xa * X[i][b];
      gram[a][m - 1] += xa;
      rhs[a] += xa * y[i];
    }
    gram[m - 1][m - 1] += 1.0;
    rhs[m - 1] += y[i];
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < a; ++b) gram[a][b] = gram[b][a];
  }
  for (std::size_t a = 0; a < d; ++a) gram[a][a] += ridge;

  std::vector<double> theta;
  double jitter = ridge > 0.0 ? ridge : 1e-12;
  bool ok = detail::solve_spd(gram, rhs, theta);
  while (!ok && jitter < 1.0) {
    jitter *= 100.0;
    Matrix g2 = gram;
    for (std::size_t a = 0; a < d; ++a) g2[a][a] += jitter;
    ok = detail::solve_spd(g2, rhs, theta);
  }
  if (!ok) throw ValidationError("fit_linear: singular normal equations");

  TrainedModel model;
  model.kind = ModelKind::linear;
  model.n_features = d;
  model.coefficients.assign(theta.begin(), theta.begin() + static_cast<long>(d));
  model.intercept = theta[d];
  model.hyperparameters = {{"ridge", ridge}};
  return model;
}

// Objective of linear epsilon-insensitive SVR:
//   c * sum_i max(0, |x_i . beta + b - y_i| - epsilon) + 0.5 * |beta|^2
inline double svr_objective(const Matrix& X, const std::vector<double>& y,
                            std::span<const double> beta, double intercept,
                            double epsilon, double c) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double pred = intercept;
    for (std::size_t j = 0; j < beta.size(); ++j) pred += beta[j] * X[i][j];
    loss += std::max(0.0, std::abs(pred - y[i]) - epsilon);
  }
  double reg = 0.0;
  for (double b : beta) reg += b * b;
  return c * loss + 0.5 * reg;
}

// Gradient of svr_objective w.r.t. (beta..., intercept); exact wherever no
// residual sits on a tube boundary.
inline std::vector<double> svr_gradient(const Matrix& X,
                                        const std::vector<double>& y,
                                        std::span<const double> beta,
                                        double intercept, double epsilon,
                                        double c) {
  std::vector<double> grad(beta.size() + 1, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    double pred = intercept;
    for (std::size_t j = 0; j < beta.size(); ++j) pred += beta[j] * X[i][j];
    const double r = pred - y[i];
    if (std::abs(r) <= epsilon) continue;
    const double s = r > 0.0 ? c : -c;
    for (std::size_t j = 0; j < beta.size(); ++j) grad[j] += s * X[i][j];
    grad[beta.size()] += s;
  }
  for (std::size_t j = 0; j < beta.size(); ++j) grad[j] += beta[j];
  return grad;
}

inline TrainedModel fit_svr(const Matrix& X, const std::vector<double>& y,
                            double epsilon = 0.1, double c = 1.0,
                            int epochs = 200, std::uint64_t seed = 0) {
  detail::check_design(X, y, "fit_svr");
  detail::check_finite(X, y, "fit_svr");
  if (epsilon < 0.0) throw ValidationError("fit_svr: epsilon must be >= 0");
  if (c <= 0.0) throw ValidationError("fit_svr: c must be > 0");
  if (epochs < 1) throw ValidationError("fit_svr: epochs must be >= 1");

  const std::size_t n = X.size();
  const std::size_t d = X[0].size();
  std::vector<double> beta(d, 0.0);
  double intercept =
      std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  rng::Engine engine(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  const double eta0 = 0.1;
  const double tau = 10.0 * static_cast<double>(n);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    engine.shuffle(order);
    for (int idx : order) {
      const auto i = static_cast<std::size_t>(idx);
      const double eta = eta0 / (1.0 + static_cast<double>(t) / tau);
      ++t;
      double pred = intercept;
      for (std::size_t j = 0; j < d; ++j) pred += beta[j] * X[i][j];
      const double r = pred - y[i];
      double s = 0.0;
      if (r > epsilon) {
        s = c;
      } else if (r < -epsilon) {
        s = -c;
      }
      for (std::size_t j = 0; j < d; ++j) {
        beta[j] -= eta * (beta[j] / static_cast<double>(n) + s * X[i][j]);
      }
      intercept -= eta * s;
    }
  }

  TrainedModel model;
  model.kind = ModelKind::svr;
  model.n_features = d;
  model.coefficients = std::move(beta);
  model.intercept = intercept;
  model.train_seed = seed;
  model.hyperparameters = {
      {"epsilon", epsilon}, {"c", c}, {"epochs", epochs}};
  return model;
}

// Bootstrap bagging of SSE trees with per-split feature subsampling.
inline TrainedModel fit_random_forest(const Matrix& X,
                                      const std::vector<double>& y,
                                      int n_trees = 100, int max_depth = 8,
                                      double feature_subsample = 1.0 / 3.0,
                                      std::uint64_t seed = 0) {
  detail::check_design(X, y, "fit_random_forest");
  if (n_trees < 1) throw ValidationError("fit_random_forest: n_trees >= 1");
  if (max_depth < 0) throw ValidationError("fit_random_forest: max_depth >= 0");
  if (feature_subsample <= 0.0 || feature_subsample > 1.0) {
    throw ValidationError("fit_random_forest: feature_subsample in (0, 1]");
  }
  const std::size_t n = X.size();
  const int d = static_cast<int>(X[0].size());
  const int per_split = std::clamp(
      static_cast<int>(std::ceil(feature_subsample * d)), 1, d);

  TrainedModel model;
  model.kind = ModelKind::random_forest;
  model.n_features = static_cast<std::size_t>(d);
  model.train_seed = seed;
  model.hyperparameters = {{"n_trees", n_trees},
                           {"max_depth", max_depth},
                           {"feature_subsample", feature_subsample}};
  model.trees.reserve(static_cast<std::size_t>(n_trees));
  for (int tree_idx = 0; tree_idx < n_trees; ++tree_idx) {
    rng::Engine engine(
        rng::derive_seed(seed, static_cast<std::uint64_t>(tree_idx)));
    std::vector<int> sample(n);
    for (auto& s : sample) {
      s = static_cast<int>(engine.below(static_cast<std::uint64_t>(n)));
    }
    detail::TreeBuilder builder(X, y, max_depth, per_split, &engine);
    model.trees.push_back(builder.build(sample));
  }
  return model;
}

// First-order gradient boosting with squared loss: F0 = mean(y), each
// round fits a depth-bounded tree to the residuals.
inline TrainedModel fit_gbt(const Matrix& X, const std::vector<double>& y,
                            int n_rounds = 200, double learning_rate = 0.1,
                            int max_depth = 3, std::uint64_t seed = 0) {
  detail::check_design(X, y, "fit_gbt");
  if (n_rounds < 1) throw ValidationError("fit_gbt: n_rounds must be >= 1");
  if (learning_rate <= 0.0 || learning_rate > 1.0) {
    throw ValidationError("fit_gbt: learning_rate in (0, 1]");
  }
  if (max_depth < 0) throw ValidationError("fit_gbt: max_depth >= 0");

  const std::size_t n = X.size();
  TrainedModel model;
  model.kind = ModelKind::gbt;
  model.n_features = X[0].size();
  model.train_seed = seed;
  model.base =
      std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  model.learning_rate = learning_rate;
  model.hyperparameters = {{"n_rounds", n_rounds},
                           {"learning_rate", learning_rate},
                           {"max_depth", max_depth}};

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.base;
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  model.trees.reserve(static_cast<std::size_t>(n_rounds));
  for (int round = 0; round < n_rounds; ++round) {
    detail::TreeBuilder builder(X, residual, max_depth, 0, nullptr);
    RegressionTree tree = builder.build(all);
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] -= learning_rate * tree.predict(X[i]);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

// Applies the stored scaler, then the model parameters.
inline double predict_row(const TrainedModel& model,
                          const std::vector<double>& raw_row) {
  const std::vector<double>& x =
      model.scaler.identity() ? raw_row : model.scaler.apply(raw_row);
  if (x.size() != model.n_features) {
    throw ValidationError("predict: model expects " +
                          std::to_string(model.n_features) +
                          " features, got " + std::to_string(x.size()));
  }
  switch (model.kind) {
    case ModelKind::linear:
    case ModelKind::svr: {
      double out = model.intercept;
      for (std::size_t j = 0; j < x.size(); ++j) {
        out += model.coefficients[j] * x[j];
      }
      return out;
    }
    case ModelKind::random_forest: {
      double sum = 0.0;
      for (const auto& tree : model.trees) sum += tree.predict(x);
      return sum / static_cast<double>(model.trees.size());
    }
    case ModelKind::gbt: {
      double out = model.base;
      for (const auto& tree : model.trees) {
        out += model.learning_rate * tree.predict(x);
      }
      return out;
    }
  }
  throw Error("predict: unreachable model kind");
}

inline double predict(const TrainedModel& model, const FeatureVector& fv) {
  return predict_row(model, feature_row(fv, model.includes_juk));
}

namespace detail {

inline nlohmann::ordered_json tree_to_json(const RegressionTree& tree) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& nd : tree.nodes) {
    nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
  }
  return nodes;
}

inline RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree tree;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 5) {
      throw ParseError("model: malformed tree node");
    }
    TreeNode nd;
    nd.feature = item[0].get<int>();
    nd.threshold = item[1].get<double>();
    nd.left = item[2].get<int>();
    nd.right = item[3].get<int>();
    nd.value = item[4].get<double>();
    tree.nodes.push_back(nd);
  }
  if (tree.nodes.empty()) throw ParseError("model: empty tree");
  return tree;
}

}  // namespace detail

inline std::string model_to_json(const TrainedModel& model) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["kind"] = to_string(model.kind);
  j["hyperparameters"] = model.hyperparameters;
  j["n_features"] = model.n_features;
  j["includes_juk"] = model.includes_juk;
  j["train_seed"] = model.train_seed;
  if (!model.prompt.prompt_id.empty()) {
    j["prompt"] = {{"prompt_id", model.prompt.prompt_id},
                   {"score_min", model.prompt.score_min},
                   {"score_max", model.prompt.score_max}};
  } else {
    j["prompt"] = nullptr;
  }
  if (model.scaler.identity()) {
    j["scaler"] = nullptr;
  } else {
    j["scaler"] = {{"mean", model.scaler.mean},
                   {"stddev", model.scaler.stddev},
                   {"passthrough", model.scaler.passthrough}};
  }
  nlohmann::ordered_json params;
  switch (model.kind) {
    case ModelKind::linear:
    case ModelKind::svr:
      params["coefficients"] = model.coefficients;
      params["intercept"] = model.intercept;
      break;
    case ModelKind::random_forest: {
      nlohmann::ordered_json trees = nlohmann::ordered_json::array();
      for (const auto& t : model.trees) trees.push_back(detail::tree_to_json(t));
      params["trees"] = std::move(trees);
      break;
    }
    case ModelKind::gbt: {
      params["base"] = model.base;
      params["learning_rate"] = model.learning_rate;
      nlohmann::ordered_json trees = nlohmann::ordered_json::array();
      for (const auto& t : model.trees) trees.push_back(detail::tree_to_json(t));
      params["trees"] = std::move(trees);
      break;
    }
  }
  j["parameters"] = std::move(params);
  return j.dump(2) + "\n";
}

inline TrainedModel model_from_json(std::string_view text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model: invalid JSON: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw ValidationError("model: unsupported format_version");
  }
  TrainedModel model;
  model.kind = model_kind_from_string(j.at("kind").get<std::string>());
  model.hyperparameters = j.at("hyperparameters");
  model.n_features = j.at("n_features").get<std::size_t>();
  model.includes_juk = j.at("includes_juk").get<bool>();
  model.train_seed = j.at("train_seed").get<std::uint64_t>();
  if (j.contains("prompt") && !j["prompt"].is_null()) {
    const auto& p = j["prompt"];
    model.prompt.prompt_id = p.at("prompt_id").get<std::string>();
    model.prompt.score_min = p.at("score_min").get<int>();
    model.prompt.score_max = p.at("score_max").get<int>();
  }
  if (j.contains("scaler") && !j["scaler"].is_null()) {
    const auto& s = j["scaler"];
    model.scaler.mean = s.at("mean").get<std::vector<double>>();
    model.scaler.stddev = s.at("stddev").get<std::vector<double>>();
    model.scaler.passthrough = s.at("passthrough").get<std::vector<bool>>();
  }
  const auto& params = j.at("parameters");
  switch (model.kind) {
    case ModelKind::linear:
    case ModelKind::svr:
      model.coefficients = params.at("coefficients").get<std::vector<double>>();
      model.intercept = params.at("intercept").get<double>();
      if (model.coefficients.size() != model.n_features) {
        throw ValidationError("model: coefficient count mismatch");
      }
      break;
    case ModelKind::gbt:
      model.base = params.at("base").get<double>();
      model.learning_rate = params.at("learning_rate").get<double>();
      [[fallthrough]];
    case ModelKind::random_forest:
      for (const auto& t : params.at("trees")) {
        model.trees.push_back(detail::tree_from_json(t));
      }
      break;
  }
  return model;
}

}  // namespace aes
