#pragma once

// Quadratic Weighted Kappa, inter-rater reliability and per-prompt model
// evaluation.

#include <cstddef>
#include <string>
#include <vector>

#include "aes/corpus.hpp"
#include "aes/error.hpp"
#include "aes/features.hpp"
#include "aes/models.hpp"

namespace aes {

// The matrices behind one kappa computation, with ratings shifted to
// 0-based indices via the prompt's score_min.
struct RatingMatrixSet {
  int n_ratings = 0;
  std::vector<std::vector<double>> weights;   // W
  std::vector<std::vector<double>> observed;  // O, contingency counts
  std::vector<std::vector<double>> expected;  // E, scaled so sum(E) = sum(O)
};

// W[i][j] = (i - j)^2 / (N - 1)^2
inline std::vector<std::vector<double>> weight_matrix(int n_ratings) {
  if (n_ratings < 2) {
    throw ValidationError("weight_matrix: needs at least 2 ratings, got " +
                          std::to_string(n_ratings));
  }
  const double denom = static_cast<double>(n_ratings - 1) *
                       static_cast<double>(n_ratings - 1);
  std::vector<std::vector<double>> w(
      static_cast<std::size_t>(n_ratings),
      std::vector<double>(static_cast<std::size_t>(n_ratings), 0.0));
  for (int i = 0; i < n_ratings; ++i) {
    for (int j = 0; j < n_ratings; ++j) {
      const double diff = static_cast<double>(i - j);
      w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          diff * diff / denom;
    }
  }
  return w;
}

inline RatingMatrixSet rating_matrices(const std::vector<int>& reference,
                                       const std::vector<int>& hypothesis,
                                       const PromptSpec& prompt) {
  if (reference.size() != hypothesis.size()) {
    throw ValidationError("qwk: length mismatch (" +
                          std::to_string(reference.size()) + " vs " +
                          std::to_string(hypothesis.size()) + ")");
  }
  if (reference.empty()) throw ValidationError("qwk: empty rating lists");
  const int n_ratings = prompt.rating_count();

  RatingMatrixSet m;
  m.n_ratings = n_ratings;
  m.weights = weight_matrix(n_ratings);
  m.observed.assign(static_cast<std::size_t>(n_ratings),
                    std::vector<double>(static_cast<std::size_t>(n_ratings), 0.0));
  m.expected = m.observed;

  std::vector<double> ref_hist(static_cast<std::size_t>(n_ratings), 0.0);
  std::vector<double> hyp_hist(static_cast<std::size_t>(n_ratings), 0.0);
  auto to_index = [&](int rating, const char* who) {
    if (rating < prompt.score_min || rating > prompt.score_max) {
      throw ValidationError("qwk: " + std::string(who) + " rating " +
                            std::to_string(rating) + " outside range [" +
                            std::to_string(prompt.score_min) + "," +
                            std::to_string(prompt.score_max) + "]");
    }
    return static_cast<std::size_t>(rating - prompt.score_min);
  };
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const std::size_t i = to_index(reference[k], "reference");
    const std::size_t j = to_index(hypothesis[k], "hypothesis");
    m.observed[i][j] += 1.0;
    ref_hist[i] += 1.0;
    hyp_hist[j] += 1.0;
  }
  // outer product of the histograms, normalized so sum(E) equals sum(O)
  const double n = static_cast<double>(reference.size());
  for (std::size_t i = 0; i < ref_hist.size(); ++i) {
    for (std::size_t j = 0; j < hyp_hist.size(); ++j) {
      m.expected[i][j] = ref_hist[i] * hyp_hist[j] / n;
    }
  }
  return m;
}

inline double qwk_from_matrices(const RatingMatrixSet& m) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    for (std::size_t j = 0; j < m.weights.size(); ++j) {
      num += m.weights[i][j] * m.observed[i][j];
      den += m.weights[i][j] * m.expected[i][j];
    }
  }
  if (den == 0.0) {
    // Both raters constant. Identical constants mean perfect agreement;
    // the disagreeing variant cannot produce a zero denominator with E
    // built from histograms, but is pinned to 0 rather than left NaN.
    return num == 0.0 ? 1.0 : 0.0;
  }
  return 1.0 - num / den;
}

// kappa = 1 - sum(W*O) / sum(W*E), ratings shifted to 0-based indices.
inline double quadratic_weighted_kappa(const std::vector<int>& reference,
                                       const std::vector<int>& hypothesis,
                                       const PromptSpec& prompt) {
  return qwk_from_matrices(rating_matrices(reference, hypothesis, prompt));
}

struct RaterPairKappa {
  int rater_a = 0;  // 1-based rater indices
  int rater_b = 0;
  double kappa = 0.0;
};

// Pairwise QWK between raters; every essay must carry a rating from every
// rater.
inline std::vector<RaterPairKappa> inter_rater_report(
    const std::vector<EssayRecord>& essays, const PromptSpec& prompt) {
  if (essays.empty()) {
    throw ValidationError("inter_rater_report: no essays");
  }
  std::size_t n_raters = 0;
  for (const auto& e : essays) {
    n_raters = std::max(n_raters, e.rater_scores.size());
  }
  if (n_raters < 2) {
    throw ValidationError("inter_rater_report: needs at least 2 raters");
  }
  std::vector<std::vector<int>> by_rater(n_raters);
  for (const auto& e : essays) {
    for (std::size_t r = 0; r < n_raters; ++r) {
      if (r >= e.rater_scores.size() || !e.rater_scores[r]) {
        throw ValidationError("inter_rater_report: essay '" + e.essay_id +
                              "' is missing a rating from rater " +
                              std::to_string(r + 1));
      }
      by_rater[r].push_back(*e.rater_scores[r]);
    }
  }
  std::vector<RaterPairKappa> out;
  for (std::size_t a = 0; a < n_raters; ++a) {
    for (std::size_t b = a + 1; b < n_raters; ++b) {
      RaterPairKappa pair;
      pair.rater_a = static_cast<int>(a + 1);
      pair.rater_b = static_cast<int>(b + 1);
      pair.kappa =
          quadratic_weighted_kappa(by_rater[a], by_rater[b], prompt);
      out.push_back(pair);
    }
  }
  return out;
}

struct PromptEvaluation {
  std::string prompt_id;
  int n = 0;
  double qwk = 0.0;
  int score_min = 0;
  int score_max = 0;
  std::vector<int> prediction_histogram;
  std::vector<int> gold_histogram;
};

// predict -> rescale to the prompt scale -> QWK against gold.
inline PromptEvaluation evaluate_model(
    const TrainedModel& model, const std::vector<EssayRecord>& test,
    const std::vector<FeatureVector>& features) {
  if (test.size() != features.size()) {
    throw ValidationError("evaluate_model: " + std::to_string(test.size()) +
                          " essays but " + std::to_string(features.size()) +
                          " feature vectors");
  }
  if (test.empty()) throw ValidationError("evaluate_model: empty test set");
  const PromptSpec& prompt = model.prompt;

  std::vector<int> gold, predicted;
  gold.reserve(test.size());
  predicted.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!test[i].gold_score) {
      throw ValidationError("evaluate_model: essay '" + test[i].essay_id +
                            "' has no gold score");
    }
    gold.push_back(*test[i].gold_score);
    predicted.push_back(rescale_score(predict(model, features[i]), prompt));
  }

  PromptEvaluation ev;
  ev.prompt_id = prompt.prompt_id;
  ev.n = static_cast<int>(test.size());
  ev.qwk = quadratic_weighted_kappa(gold, predicted, prompt);
  ev.score_min = prompt.score_min;
  ev.score_max = prompt.score_max;
  ev.prediction_histogram.assign(
      static_cast<std::size_t>(prompt.rating_count()), 0);
  ev.gold_histogram.assign(static_cast<std::size_t>(prompt.rating_count()), 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ev.gold_histogram[static_cast<std::size_t>(gold[i] - prompt.score_min)]++;
    ev.prediction_histogram[static_cast<std::size_t>(predicted[i] -
                                                     prompt.score_min)]++;
  }
  return ev;
}

}  // namespace aes
