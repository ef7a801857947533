#include <cmath>
#include <vector>

#include <catch_amalgamated.hpp>

#include "aes/models.hpp"
#include "aes/random.hpp"

using aes::Matrix;
using aes::TrainedModel;

namespace {

// brute-force MSE used as the reference for the tree-model checks
double mse(const TrainedModel& model, const Matrix& x,
           const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = aes::predict_row(model, x[i]) - y[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.size());
}

double mse_of(const std::vector<double>& pred, const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - y[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

double variance(const std::vector<double>& y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(y.size());
}

Matrix random_matrix(aes::rng::Engine& eng, std::size_t n, std::size_t d,
                     double lo = -2.0, double hi = 2.0) {
  Matrix x(n, std::vector<double>(d));
  for (auto& row : x) {
    for (auto& v : row) v = eng.uniform(lo, hi);
  }
  return x;
}

}  // namespace

TEST_CASE("linear fit recovers y = 2x exactly") {
  Matrix x = {{1.0}, {2.0}, {3.0}, {4.0}, {5.0}};
  std::vector<double> y = {2.0, 4.0, 6.0, 8.0, 10.0};
  const auto model = aes::fit_linear(x, y);
  CHECK_THAT(model.coefficients[0], Catch::Matchers::WithinAbs(2.0, 1e-6));
  CHECK_THAT(model.intercept, Catch::Matchers::WithinAbs(0.0, 1e-6));
}

TEST_CASE("linear fit on constant targets returns the constant") {
  Matrix x = {{1.0}, {-3.0}, {2.5}, {0.0}};
  std::vector<double> y(4, 7.25);
  const auto model = aes::fit_linear(x, y);
  CHECK_THAT(model.coefficients[0], Catch::Matchers::WithinAbs(0.0, 1e-6));
  CHECK_THAT(model.intercept, Catch::Matchers::WithinAbs(7.25, 1e-6));
}

TEST_CASE("linear fit recovers a known affine target on random points") {
  aes::rng::Engine eng(11);
  Matrix x = random_matrix(eng, 50, 2);
  std::vector<double> y;
  for (const auto& row : x) y.push_back(3.0 * row[0] - row[1] + 1.0);
  const auto model = aes::fit_linear(x, y);
  CHECK_THAT(model.coefficients[0], Catch::Matchers::WithinAbs(3.0, 1e-5));
  CHECK_THAT(model.coefficients[1], Catch::Matchers::WithinAbs(-1.0, 1e-5));
  CHECK_THAT(model.intercept, Catch::Matchers::WithinAbs(1.0, 1e-5));
}

TEST_CASE("ridge-free linear fit satisfies the normal equations") {
  aes::rng::Engine eng(13);
  Matrix x = random_matrix(eng, 40, 3);
  std::vector<double> y;
  for (const auto& row : x) {
    y.push_back(0.5 * row[0] - 2.0 * row[1] + row[2] + eng.normal() * 0.1);
  }
  const auto model = aes::fit_linear(x, y, 0.0);

  // residual of the augmented system: A^T (A theta - y), A = [X 1]
  const std::size_t d = 3;
  std::vector<double> theta = model.coefficients;
  theta.push_back(model.intercept);
  std::vector<double> aty(d + 1, 0.0), resid(d + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pred = theta[d];
    for (std::size_t j = 0; j < d; ++j) pred += theta[j] * x[i][j];
    const double r = pred - y[i];
    for (std::size_t j = 0; j < d; ++j) {
      resid[j] += x[i][j] * r;
      aty[j] += x[i][j] * y[i];
    }
    resid[d] += r;
    aty[d] += y[i];
  }
  double resid_inf = 0.0, aty_inf = 0.0;
  for (std::size_t j = 0; j <= d; ++j) {
    resid_inf = std::max(resid_inf, std::abs(resid[j]));
    aty_inf = std::max(aty_inf, std::abs(aty[j]));
  }
  CHECK(resid_inf <= 1e-6 * aty_inf);
}

TEST_CASE("linear fit rejects empty data") {
  CHECK_THROWS_AS(aes::fit_linear({}, {}), aes::ValidationError);
}

TEST_CASE("svr tracks noise-free linear data within the tube") {
  aes::rng::Engine eng(5);
  Matrix x = random_matrix(eng, 50, 1, 0.0, 2.0);
  std::vector<double> y;
  for (const auto& row : x) y.push_back(2.0 * row[0]);
  const auto model = aes::fit_svr(x, y, 0.01, 10.0, 500, 42);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(aes::predict_row(model, x[i]) - y[i]) <= 0.1);
  }
}

TEST_CASE("svr with a wide tube collapses to the mean") {
  Matrix x = {{0.0}, {1.0}, {2.0}, {3.0}};
  std::vector<double> y(4, 3.0);
  const auto model = aes::fit_svr(x, y, 1.0, 1.0, 100, 0);
  CHECK(model.intercept == 3.0);  // never leaves the tube
  CHECK(std::abs(model.coefficients[0]) < 1e-6);
}

TEST_CASE("svr fits are deterministic given the seed") {
  aes::rng::Engine eng(17);
  Matrix x = random_matrix(eng, 30, 3);
  std::vector<double> y;
  for (const auto& row : x) y.push_back(row[0] - row[2] + eng.normal() * 0.2);
  const auto a = aes::fit_svr(x, y, 0.1, 1.0, 50, 123);
  const auto b = aes::fit_svr(x, y, 0.1, 1.0, 50, 123);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.intercept == b.intercept);
}

TEST_CASE("svr rejects non-finite inputs") {
  Matrix x = {{1.0}, {std::nan("")}};
  std::vector<double> y = {0.0, 1.0};
  CHECK_THROWS_AS(aes::fit_svr(x, y), aes::ValidationError);
}

TEST_CASE("svr analytic gradient agrees with central differences") {
  aes::rng::Engine eng(29);
  const std::size_t n = 20, d = 3;
  const double epsilon = 0.1, c = 2.0, h = 1e-6;
  int checked = 0;
  while (checked < 25) {
    Matrix x = random_matrix(eng, n, d);
    std::vector<double> y;
    for (const auto& row : x) y.push_back(row[0] + eng.normal());
    std::vector<double> beta(d);
    for (auto& b : beta) b = eng.uniform(-1.0, 1.0);
    const double intercept = eng.uniform(-1.0, 1.0);

    // stay away from tube-boundary kinks
    bool near_kink = false;
    for (std::size_t i = 0; i < n; ++i) {
      double pred = intercept;
      for (std::size_t j = 0; j < d; ++j) pred += beta[j] * x[i][j];
      if (std::abs(std::abs(pred - y[i]) - epsilon) < 1e-3) {
        near_kink = true;
        break;
      }
    }
    if (near_kink) continue;
    ++checked;

    const auto grad = aes::svr_gradient(x, y, beta, intercept, epsilon, c);
    for (std::size_t j = 0; j <= d; ++j) {
      auto perturbed = [&](double delta) {
        std::vector<double> b = beta;
        double b0 = intercept;
        if (j < d) {
          b[j] += delta;
        } else {
          b0 += delta;
        }
        return aes::svr_objective(x, y, b, b0, epsilon, c);
      };
      const double numeric = (perturbed(h) - perturbed(-h)) / (2.0 * h);
      CHECK_THAT(grad[j], Catch::Matchers::WithinAbs(numeric, 1e-4));
    }
  }
}

TEST_CASE("single zero-depth forest tree predicts the training mean") {
  // constant targets: every bootstrap resample has the same mean
  Matrix x = {{0.0}, {1.0}, {2.0}, {3.0}, {4.0}};
  std::vector<double> y(5, 1.5);
  const auto model = aes::fit_random_forest(x, y, 1, 0, 1.0, 9);
  CHECK(aes::predict_row(model, {100.0}) == 1.5);

  // a single sample bootstraps to itself
  const auto tiny = aes::fit_random_forest({{3.0}}, {0.75}, 1, 0, 1.0, 9);
  CHECK(aes::predict_row(tiny, {0.0}) == 0.75);
}

TEST_CASE("forest beats the mean predictor on a step function") {
  Matrix x;
  std::vector<double> y;
  for (int i = 0; i < 60; ++i) {
    const double v = static_cast<double>(i) / 59.0;
    x.push_back({v});
    y.push_back(v > 0.5 ? 1.0 : 0.0);
  }
  const auto model = aes::fit_random_forest(x, y, 30, 4, 1.0, 7);

  const double mean_mse = variance(y);  // MSE of the mean predictor
  CHECK(mse(model, x, y) < mean_mse);
}

TEST_CASE("forest fits are deterministic given the seed") {
  aes::rng::Engine eng(31);
  Matrix x = random_matrix(eng, 40, 4);
  std::vector<double> y;
  for (const auto& row : x) y.push_back(row[0] * row[1] + row[2]);
  const auto a = aes::fit_random_forest(x, y, 12, 5, 0.5, 77);
  const auto b = aes::fit_random_forest(x, y, 12, 5, 0.5, 77);
  Matrix probes = random_matrix(eng, 20, 4);
  for (const auto& probe : probes) {
    CHECK(aes::predict_row(a, probe) == aes::predict_row(b, probe));
  }
}

TEST_CASE("forest rejects empty data") {
  CHECK_THROWS_AS(aes::fit_random_forest({}, {}), aes::ValidationError);
}

TEST_CASE("one zero-depth boosting round reproduces the mean") {
  Matrix x = {{0.0}, {1.0}, {2.0}, {3.0}};
  std::vector<double> y = {1.0, 2.0, 4.0, 5.0};
  const auto model = aes::fit_gbt(x, y, 1, 1.0, 0, 0);
  CHECK_THAT(aes::predict_row(model, {9.0}),
             Catch::Matchers::WithinAbs(3.0, 1e-12));
}

TEST_CASE("gbt training error is non-increasing round by round") {
  aes::rng::Engine eng(37);
  Matrix x = random_matrix(eng, 60, 3);
  std::vector<double> y;
  for (const auto& row : x) {
    y.push_back(std::sin(row[0]) + row[1] * row[2] + 0.1 * eng.normal());
  }
  const auto model = aes::fit_gbt(x, y, 80, 0.1, 3, 0);

  // staged predictions reconstructed tree by tree
  std::vector<double> staged(x.size(), model.base);
  double prev = mse_of(staged, y);
  for (const auto& tree : model.trees) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      staged[i] += model.learning_rate * tree.predict(x[i]);
    }
    const double cur = mse_of(staged, y);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("gbt drives the quadratic fixture below 5% of variance") {
  Matrix x;
  std::vector<double> y;
  for (int i = 0; i <= 100; ++i) {
    const double v = -2.0 + 4.0 * static_cast<double>(i) / 100.0;
    x.push_back({v});
    y.push_back(v * v);
  }
  const auto model = aes::fit_gbt(x, y, 50, 0.3, 3, 0);
  CHECK(mse(model, x, y) < 0.05 * variance(y));
}

TEST_CASE("gbt validates its hyperparameters") {
  Matrix x = {{0.0}};
  std::vector<double> y = {1.0};
  CHECK_THROWS_AS(aes::fit_gbt({}, {}), aes::ValidationError);
  CHECK_THROWS_AS(aes::fit_gbt(x, y, 0), aes::ValidationError);
  CHECK_THROWS_AS(aes::fit_gbt(x, y, 10, 1.5), aes::ValidationError);
  CHECK_THROWS_AS(aes::fit_gbt(x, y, 10, 0.0), aes::ValidationError);
}

TEST_CASE("predict applies the stored scaler before the parameters") {
  TrainedModel model;
  model.kind = aes::ModelKind::linear;
  model.n_features = 1;
  model.coefficients = {2.0};
  model.intercept = 0.0;
  CHECK(aes::predict_row(model, {1.0}) == 2.0);

  model.scaler.mean = {5.0};
  model.scaler.stddev = {2.0};
  model.scaler.passthrough = {false};
  CHECK(aes::predict_row(model, {7.0}) == 2.0);  // (7-5)/2 = 1, then *2
}

TEST_CASE("a forest of identical trees predicts like a single tree") {
  aes::RegressionTree tree;
  tree.nodes.push_back({0, 0.5, 1, 2, 0.0});
  tree.nodes.push_back({-1, 0.0, -1, -1, 10.0});
  tree.nodes.push_back({-1, 0.0, -1, -1, 20.0});
  TrainedModel model;
  model.kind = aes::ModelKind::random_forest;
  model.n_features = 1;
  model.trees = {tree, tree, tree};
  const std::vector<double> low = {0.2};
  const std::vector<double> high = {0.9};
  CHECK(aes::predict_row(model, low) == tree.predict(low));
  CHECK(aes::predict_row(model, high) == 20.0);
}

TEST_CASE("predict rejects dimension mismatches") {
  TrainedModel model;
  model.kind = aes::ModelKind::linear;
  model.n_features = 2;
  model.coefficients = {1.0, 1.0};
  CHECK_THROWS_AS(aes::predict_row(model, {1.0}), aes::ValidationError);
}

TEST_CASE("tree routing is total over random inputs") {
  aes::rng::Engine eng(41);
  Matrix x = random_matrix(eng, 50, 3);
  std::vector<double> y;
  for (const auto& row : x) y.push_back(row[0] - 2.0 * row[1]);
  const auto model = aes::fit_random_forest(x, y, 5, 6, 1.0, 3);
  for (int rep = 0; rep < 200; ++rep) {
    const std::vector<double> probe = {eng.uniform(-1e6, 1e6),
                                       eng.uniform(-1e6, 1e6),
                                       eng.uniform(-1e6, 1e6)};
    CHECK(std::isfinite(aes::predict_row(model, probe)));
  }
}

TEST_CASE("serialization round-trips predictions bit for bit") {
  aes::rng::Engine eng(43);
  Matrix x = random_matrix(eng, 40, 4);
  std::vector<double> y;
  for (const auto& row : x) y.push_back(row[0] * row[0] - row[3]);

  std::vector<TrainedModel> models;
  models.push_back(aes::fit_linear(x, y));
  models.push_back(aes::fit_svr(x, y, 0.1, 1.0, 40, 1));
  models.push_back(aes::fit_random_forest(x, y, 8, 5, 0.5, 2));
  models.push_back(aes::fit_gbt(x, y, 30, 0.2, 3, 3));

  // attach pipeline metadata to one of them
  models[0].prompt = {"P1", 0, 4};
  models[0].scaler.mean = {0.0, 1.0, 2.0, 3.0};
  models[0].scaler.stddev = {1.0, 2.0, 3.0, 4.0};
  models[0].scaler.passthrough = {false, false, true, false};

  for (const auto& model : models) {
    const std::string json = aes::model_to_json(model);
    const auto restored = aes::model_from_json(json);
    CHECK(restored.kind == model.kind);
    CHECK(restored.prompt.prompt_id == model.prompt.prompt_id);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> probe = {eng.uniform(-3.0, 3.0),
                                   eng.uniform(-3.0, 3.0),
                                   eng.uniform(-3.0, 3.0),
                                   eng.uniform(-3.0, 3.0)};
      CHECK(aes::predict_row(restored, probe) ==
            aes::predict_row(model, probe));
    }
    CHECK(aes::model_to_json(restored) == json);
  }
}

TEST_CASE("all four fits are deterministic functions of data and seed") {
  aes::rng::Engine eng(47);
  Matrix x = random_matrix(eng, 30, 3);
  std::vector<double> y;
  for (const auto& row : x) y.push_back(row[1] + 0.5 * row[2]);

  CHECK(aes::model_to_json(aes::fit_linear(x, y)) ==
        aes::model_to_json(aes::fit_linear(x, y)));
  CHECK(aes::model_to_json(aes::fit_svr(x, y, 0.05, 2.0, 30, 5)) ==
        aes::model_to_json(aes::fit_svr(x, y, 0.05, 2.0, 30, 5)));
  CHECK(aes::model_to_json(aes::fit_random_forest(x, y, 6, 4, 0.4, 5)) ==
        aes::model_to_json(aes::fit_random_forest(x, y, 6, 4, 0.4, 5)));
  CHECK(aes::model_to_json(aes::fit_gbt(x, y, 20, 0.1, 2, 5)) ==
        aes::model_to_json(aes::fit_gbt(x, y, 20, 0.1, 2, 5)));
}
