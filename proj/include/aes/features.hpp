#pragma once

// The six feature families computed per essay, plus the train-split
// z-score scaler.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aes/embeddings.hpp"
#include "aes/error.hpp"
#include "aes/textseg.hpp"

namespace aes {

struct FeatureVector {
  int essay_length = 0;          // word tokens
  double avg_sentence_length = 0.0;  // words per sentence
  double avg_word_length = 0.0;      // grapheme clusters per word (AWL)
  double readability = 0.0;
  int vocab_size = 0;            // distinct tokens
  int oov_count = 0;             // distinct rare out-of-vocabulary tokens
  double coherence = 0.0;        // mean offset-4 cosine, in [-1, 1]
  int juk_count = 0;             // conjunct total; model use is config-gated
};

// Column order of the numeric representation. juk_count participates only
// when enabled.
inline const std::array<std::string, 8>& feature_names() {
  static const std::array<std::string, 8> names = {
      "essay_length", "avg_sentence_length", "avg_word_length",
      "readability",  "vocab_size",          "oov_count",
      "coherence",    "juk_count"};
  return names;
}

inline std::vector<double> feature_row(const FeatureVector& fv,
                                       bool include_juk) {
  std::vector<double> row = {static_cast<double>(fv.essay_length),
                             fv.avg_sentence_length,
                             fv.avg_word_length,
                             fv.readability,
                             static_cast<double>(fv.vocab_size),
                             static_cast<double>(fv.oov_count),
                             fv.coherence};
  if (include_juk) row.push_back(static_cast<double>(fv.juk_count));
  return row;
}

inline int essay_length(const SegmentedText& seg) { return seg.word_count(); }

inline double avg_sentence_length(const SegmentedText& seg) {
  if (seg.sentences.empty()) {
    throw ValidationError("avg_sentence_length: no sentences");
  }
  return static_cast<double>(seg.word_count()) /
         static_cast<double>(seg.sentences.size());
}

inline double avg_word_length(const SegmentedText& seg) {
  long long graphemes = 0;
  long long words = 0;
  for (const auto& sentence : seg.sentences) {
    for (const auto& w : sentence) {
      graphemes += w.grapheme_count;
      ++words;
    }
  }
  if (words == 0) throw ValidationError("avg_word_length: no words");
  return static_cast<double>(graphemes) / static_cast<double>(words);
}

// Hindi readability from structural features.
inline double readability_score(double awl, int psw) {
  return -2.34 + 2.14 * awl + 0.01 * static_cast<double>(psw);
}

// Words with at least `akshara_threshold` orthographic syllables.
inline int polysyllable_count(const SegmentedText& seg, int akshara_threshold) {
  int count = 0;
  for (const auto& sentence : seg.sentences) {
    for (const auto& w : sentence) {
      if (w.akshara_count >= akshara_threshold) ++count;
    }
  }
  return count;
}

inline int conjunct_total(const SegmentedText& seg) {
  int count = 0;
  for (const auto& sentence : seg.sentences) {
    for (const auto& w : sentence) count += w.conjunct_count;
  }
  return count;
}

// vocab_size: distinct tokens. oov_count: distinct tokens missing from the
// lexicon whose training-split document frequency stays below the
// threshold; frequent OOV tokens are discarded from the count.
inline std::pair<int, int> vocabulary_counts(
    const SegmentedText& seg, const std::unordered_set<std::string>& lexicon,
    const std::unordered_map<std::string, int>& corpus_freq,
    int oov_freq_threshold) {
  std::unordered_set<std::string> distinct;
  for (const auto& sentence : seg.sentences) {
    for (const auto& w : sentence) distinct.insert(w.text);
  }
  int oov = 0;
  for (const auto& tok : distinct) {
    if (lexicon.count(tok) != 0) continue;
    auto it = corpus_freq.find(tok);
    const int freq = it == corpus_freq.end() ? 0 : it->second;
    if (freq < oov_freq_threshold) ++oov;
  }
  return {static_cast<int>(distinct.size()), oov};
}

// Mean cosine of sentence-embedding pairs at offset 4. Shorter essays fall
// back to the largest available offset; fewer than two sentences yield 0.
inline double coherence_score(
    const std::vector<std::vector<double>>& sentence_embeddings) {
  const std::size_t n = sentence_embeddings.size();
  if (n < 2) return 0.0;
  const std::size_t offset = std::min<std::size_t>(4, n - 1);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i + offset < n; ++i) {
    sum += cosine_similarity(sentence_embeddings[i],
                             sentence_embeddings[i + offset]);
    ++pairs;
  }
  return sum / static_cast<double>(pairs);
}

inline FeatureVector extract_features(
    const SegmentedText& seg, const std::unordered_set<std::string>& lexicon,
    const std::unordered_map<std::string, int>& corpus_freq,
    int oov_freq_threshold, int psw_threshold,
    const std::vector<std::vector<double>>& sentence_embeddings) {
  FeatureVector fv;
  fv.essay_length = essay_length(seg);
  if (!seg.sentences.empty()) {
    fv.avg_sentence_length = avg_sentence_length(seg);
    fv.avg_word_length = avg_word_length(seg);
  }
  fv.readability = readability_score(fv.avg_word_length,
                                     polysyllable_count(seg, psw_threshold));
  auto [vocab, oov] =
      vocabulary_counts(seg, lexicon, corpus_freq, oov_freq_threshold);
  fv.vocab_size = vocab;
  fv.oov_count = oov;
  fv.coherence = coherence_score(sentence_embeddings);
  fv.juk_count = conjunct_total(seg);
  return fv;
}

// Per-feature z-score fitted on the training split (population convention).
// Constant columns pass through unchanged.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> passthrough;

  std::size_t dim() const { return mean.size(); }
  bool identity() const { return mean.empty(); }

  static FeatureScaler fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
      throw ValidationError("FeatureScaler::fit: empty training set");
    }
    const std::size_t d = rows[0].size();
    FeatureScaler s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 1.0);
    s.passthrough.assign(d, false);
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < d; ++j) {
      double lo = rows[0][j], hi = rows[0][j], sum = 0.0;
      for (const auto& r : rows) {
        lo = std::min(lo, r[j]);
        hi = std::max(hi, r[j]);
        sum += r[j];
      }
      if (lo == hi) {
        s.passthrough[j] = true;
        continue;
      }
      const double mu = sum / n;
      double ss = 0.0;
      for (const auto& r : rows) {
        const double delta = r[j] - mu;
        ss += delta * delta;
      }
      s.mean[j] = mu;
      s.stddev[j] = std::sqrt(ss / n);
    }
    return s;
  }

  std::vector<double> apply(const std::vector<double>& row) const {
    if (identity()) return row;
    if (row.size() != dim()) {
      throw ValidationError("FeatureScaler::apply: expected " +
                            std::to_string(dim()) + " features, got " +
                            std::to_string(row.size()));
    }
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      out[j] = passthrough[j] ? row[j] : (row[j] - mean[j]) / stddev[j];
    }
    return out;
  }
};

inline FeatureScaler fit_scaler(const std::vector<FeatureVector>& train,
                                bool include_juk) {
  std::vector<std::vector<double>> rows;
  rows.reserve(train.size());
  for (const auto& fv : train) rows.push_back(feature_row(fv, include_juk));
  return FeatureScaler::fit(rows);
}

}  // namespace aes
