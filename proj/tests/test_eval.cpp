#include <algorithm>
#include <cmath>
#include <vector>

#include <catch_amalgamated.hpp>

#include "aes/eval.hpp"
#include "aes/random.hpp"

using aes::PromptSpec;
using aes::quadratic_weighted_kappa;

namespace {

// Independent naive QWK oracle, written before the histogram-based
// implementation. The expected-agreement denominator is accumulated over
// all n^2 sample pairs instead of histogram outer products.
double naive_qwk(const std::vector<int>& reference,
                 const std::vector<int>& hypothesis, int score_min,
                 int score_max) {
  const double n_ratings = score_max - score_min + 1;
  const double scale = (n_ratings - 1) * (n_ratings - 1);
  auto weight = [&](int a, int b) {
    const double diff = a - b;
    return diff * diff / scale;
  };
  const std::size_t n = reference.size();
  double observed = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    observed += weight(reference[k], hypothesis[k]);
  }
  double expected = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      expected += weight(reference[a], hypothesis[b]);
    }
  }
  expected /= static_cast<double>(n);
  if (expected == 0.0) return observed == 0.0 ? 1.0 : 0.0;
  return 1.0 - observed / expected;
}

PromptSpec prompt(int lo, int hi, const std::string& id = "P") {
  PromptSpec p;
  p.prompt_id = id;
  p.score_min = lo;
  p.score_max = hi;
  return p;
}

std::vector<int> random_ratings(aes::rng::Engine& eng, std::size_t n, int lo,
                                int hi) {
  std::vector<int> out(n);
  for (auto& v : out) {
    v = lo + static_cast<int>(eng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
  return out;
}

}  // namespace

TEST_CASE("weight matrix matches the quadratic formula") {
  const auto w2 = aes::weight_matrix(2);
  CHECK(w2[0][0] == 0.0);
  CHECK(w2[0][1] == 1.0);
  CHECK(w2[1][0] == 1.0);
  CHECK(w2[1][1] == 0.0);

  const auto w3 = aes::weight_matrix(3);
  CHECK(w3[0][1] == 0.25);
  CHECK(w3[1][0] == 0.25);
  CHECK(w3[0][2] == 1.0);

  for (int n : {2, 5, 11, 61}) {
    const auto w = aes::weight_matrix(n);
    for (int i = 0; i < n; ++i) CHECK(w[i][i] == 0.0);
    CHECK(w[0][n - 1] == 1.0);
  }
}

TEST_CASE("weight matrix entries strictly increase with |i-j|") {
  const auto w = aes::weight_matrix(7);
  for (int i = 0; i < 7; ++i) {
    for (int d = 1; i + d < 7; ++d) {
      if (i + d - 1 > i) {
        CHECK(w[i][i + d] > w[i][i + d - 1]);
      }
    }
  }
}

TEST_CASE("weight matrix rejects degenerate scales") {
  CHECK_THROWS_AS(aes::weight_matrix(1), aes::ValidationError);
  CHECK_THROWS_AS(aes::weight_matrix(0), aes::ValidationError);
}

TEST_CASE("rating matrices satisfy their structural invariants") {
  aes::rng::Engine eng(99);
  const auto p = prompt(0, 6);
  const auto ref = random_ratings(eng, 120, 0, 6);
  const auto hyp = random_ratings(eng, 120, 0, 6);
  const auto m = aes::rating_matrices(ref, hyp, p);

  double sum_o = 0.0, sum_e = 0.0;
  for (int i = 0; i < m.n_ratings; ++i) {
    for (int j = 0; j < m.n_ratings; ++j) {
      CHECK(m.weights[i][j] == m.weights[j][i]);
      CHECK(m.weights[i][j] >= 0.0);
      CHECK(m.weights[i][j] <= 1.0);
      sum_o += m.observed[i][j];
      sum_e += m.expected[i][j];
    }
  }
  CHECK(sum_o == 120.0);
  CHECK_THAT(sum_e, Catch::Matchers::WithinAbs(sum_o, 1e-9));
}

TEST_CASE("perfect agreement scores exactly 1") {
  const auto p = prompt(0, 3);
  CHECK(quadratic_weighted_kappa({0, 1, 2, 3, 2}, {0, 1, 2, 3, 2}, p) == 1.0);
  CHECK(quadratic_weighted_kappa({2, 2, 2}, {2, 2, 2}, p) == 1.0);
  const auto p8 = prompt(0, 60);
  std::vector<int> r;
  for (int i = 0; i <= 60; ++i) r.push_back(i);
  CHECK(quadratic_weighted_kappa(r, r, p8) == 1.0);
}

TEST_CASE("four-sample anti-diagonal case scores exactly -1") {
  const auto p = prompt(0, 1);
  CHECK(quadratic_weighted_kappa({0, 0, 1, 1}, {1, 1, 0, 0}, p) == -1.0);
}

TEST_CASE("qwk matches the naive oracle on random 200-point vectors") {
  aes::rng::Engine eng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int lo = static_cast<int>(eng.below(5));
    const int hi = lo + 1 + static_cast<int>(eng.below(12));
    const auto p = prompt(lo, hi);
    const auto ref = random_ratings(eng, 200, lo, hi);
    const auto hyp = random_ratings(eng, 200, lo, hi);
    const double got = quadratic_weighted_kappa(ref, hyp, p);
    const double want = naive_qwk(ref, hyp, lo, hi);
    CHECK_THAT(got, Catch::Matchers::WithinAbs(want, 1e-9));
  }
}

TEST_CASE("qwk is symmetric and invariant under paired permutation") {
  aes::rng::Engine eng(21);
  for (int rep = 0; rep < 50; ++rep) {
    const auto p = prompt(0, 8);
    auto ref = random_ratings(eng, 60, 0, 8);
    auto hyp = random_ratings(eng, 60, 0, 8);
    const double forward = quadratic_weighted_kappa(ref, hyp, p);
    const double backward = quadratic_weighted_kappa(hyp, ref, p);
    CHECK_THAT(forward, Catch::Matchers::WithinAbs(backward, 1e-12));

    std::vector<std::size_t> perm(ref.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    eng.shuffle(perm);
    std::vector<int> ref2(ref.size()), hyp2(hyp.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      ref2[i] = ref[perm[i]];
      hyp2[i] = hyp[perm[i]];
    }
    CHECK(quadratic_weighted_kappa(ref2, hyp2, p) == forward);
  }
}

TEST_CASE("self agreement is 1 for every non-empty rating list") {
  aes::rng::Engine eng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = prompt(1, 6);
    const auto r = random_ratings(eng, 1 + eng.below(40), 1, 6);
    CHECK(quadratic_weighted_kappa(r, r, p) == 1.0);
  }
}

TEST_CASE("ratings shifted by score_min build the compact matrix") {
  // range [2,12] yields an 11x11 matrix, indices 0..10
  const auto p = prompt(2, 12);
  const auto m = aes::rating_matrices({2, 12, 7}, {2, 12, 7}, p);
  CHECK(m.n_ratings == 11);
  CHECK(m.observed[0][0] == 1.0);
  CHECK(m.observed[10][10] == 1.0);
  CHECK(m.observed[5][5] == 1.0);
}

TEST_CASE("qwk input validation") {
  const auto p = prompt(0, 3);
  CHECK_THROWS_AS(quadratic_weighted_kappa({0, 1}, {0}, p),
                  aes::ValidationError);
  CHECK_THROWS_AS(quadratic_weighted_kappa({}, {}, p), aes::ValidationError);
  CHECK_THROWS_AS(quadratic_weighted_kappa({0, 4}, {0, 1}, p),
                  aes::ValidationError);
  CHECK_THROWS_AS(quadratic_weighted_kappa({0, 1}, {-1, 1}, p),
                  aes::ValidationError);
}

TEST_CASE("constant raters: equal constants agree, kappa 1") {
  const auto p = prompt(0, 4);
  CHECK(quadratic_weighted_kappa({3, 3, 3}, {3, 3, 3}, p) == 1.0);
  // disagreeing constants leave a nonzero denominator and land at 0
  const double k = quadratic_weighted_kappa({3, 3, 3}, {1, 1, 1}, p);
  CHECK(k == naive_qwk({3, 3, 3}, {1, 1, 1}, 0, 4));
}

namespace {

aes::EssayRecord rated_essay(const std::string& id,
                             std::vector<std::optional<int>> raters) {
  aes::EssayRecord e;
  e.essay_id = id;
  e.prompt_id = "P";
  e.rater_scores = std::move(raters);
  return e;
}

}  // namespace

TEST_CASE("inter-rater report: duplicated rater pairs score 1") {
  const auto p = prompt(0, 3);
  std::vector<aes::EssayRecord> essays = {
      rated_essay("e1", {0, 0, 3}), rated_essay("e2", {1, 1, 2}),
      rated_essay("e3", {3, 3, 0}), rated_essay("e4", {2, 2, 2})};
  const auto pairs = aes::inter_rater_report(essays, p);
  REQUIRE(pairs.size() == 3);  // (1,2), (1,3), (2,3)
  CHECK(pairs[0].rater_a == 1);
  CHECK(pairs[0].rater_b == 2);
  CHECK(pairs[0].kappa == 1.0);
}

TEST_CASE("inter-rater report: two identical raters") {
  const auto p = prompt(0, 2);
  std::vector<aes::EssayRecord> essays = {rated_essay("a", {0, 0}),
                                          rated_essay("b", {1, 1}),
                                          rated_essay("c", {2, 2})};
  const auto pairs = aes::inter_rater_report(essays, p);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].kappa == 1.0);
}

TEST_CASE("inter-rater report names the essay with missing ratings") {
  const auto p = prompt(0, 2);
  std::vector<aes::EssayRecord> essays = {rated_essay("a", {0, 0}),
                                          rated_essay("bad", {1, std::nullopt}),
                                          rated_essay("c", {2, 2})};
  CHECK_THROWS_WITH(aes::inter_rater_report(essays, p),
                    Catch::Matchers::ContainsSubstring("bad"));
  CHECK_THROWS_AS(aes::inter_rater_report({rated_essay("a", {1})}, p),
                  aes::ValidationError);
}

namespace {

// single-feature linear model: prediction = coef * x + intercept
aes::TrainedModel manual_linear(double coef, double intercept,
                                const PromptSpec& p) {
  aes::TrainedModel m;
  m.kind = aes::ModelKind::linear;
  m.n_features = 7;
  m.coefficients.assign(7, 0.0);
  m.coefficients[0] = coef;
  m.intercept = intercept;
  m.prompt = p;
  return m;
}

aes::FeatureVector fv_with_length(int length) {
  aes::FeatureVector fv;
  fv.essay_length = length;
  return fv;
}

}  // namespace

TEST_CASE("evaluate_model: a model that memorizes gold scores reaches 1") {
  const auto p = prompt(0, 4);
  // gold normalized equals essay_length / 4, so coef 0.25 reproduces it
  std::vector<aes::EssayRecord> test;
  std::vector<aes::FeatureVector> features;
  for (int s = 0; s <= 4; ++s) {
    aes::EssayRecord e;
    e.essay_id = "e" + std::to_string(s);
    e.prompt_id = "P";
    e.gold_score = s;
    test.push_back(e);
    features.push_back(fv_with_length(s));
  }
  const auto ev = aes::evaluate_model(manual_linear(0.25, 0.0, p), test,
                                      features);
  CHECK(ev.qwk == 1.0);
  CHECK(ev.n == 5);
  CHECK(ev.gold_histogram == std::vector<int>{1, 1, 1, 1, 1});
  CHECK(ev.prediction_histogram == std::vector<int>{1, 1, 1, 1, 1});
}

TEST_CASE("evaluate_model: constant predictions match the oracle value") {
  const auto p = prompt(0, 4);
  std::vector<aes::EssayRecord> test;
  std::vector<aes::FeatureVector> features;
  const std::vector<int> gold = {0, 1, 2, 3, 4, 4, 0};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    aes::EssayRecord e;
    e.essay_id = "e" + std::to_string(i);
    e.prompt_id = "P";
    e.gold_score = gold[i];
    test.push_back(e);
    features.push_back(fv_with_length(0));
  }
  const auto ev = aes::evaluate_model(manual_linear(0.0, 0.5, p), test,
                                      features);
  const std::vector<int> constant_pred(gold.size(), 2);
  CHECK(ev.qwk == naive_qwk(gold, constant_pred, 0, 4));
  CHECK(ev.qwk <= 0.0);
}

TEST_CASE("evaluate_model rejects essays without gold scores") {
  const auto p = prompt(0, 4);
  aes::EssayRecord e;
  e.essay_id = "nogold";
  e.prompt_id = "P";
  CHECK_THROWS_WITH(
      aes::evaluate_model(manual_linear(0.0, 0.0, p), {e},
                          {fv_with_length(0)}),
      Catch::Matchers::ContainsSubstring("nogold"));
}
