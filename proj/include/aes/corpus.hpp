#pragma once

// Corpus ingestion: TSV parsing, prompt score ranges, seeded 60/20/20
// splits, score normalization and rescaling.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "aes/error.hpp"
#include "aes/random.hpp"
#include "aes/unicode.hpp"

namespace aes {

struct PromptSpec {
  std::string prompt_id;
  int score_min = 0;
  int score_max = 0;

  // N of the rating scale; always >= 2 for a valid spec.
  int rating_count() const { return score_max - score_min + 1; }
};

struct EssayRecord {
  std::string essay_id;
  std::string prompt_id;
  std::string text;
  std::optional<int> gold_score;
  // Aligned to the corpus rater columns; empty when none exist.
  std::vector<std::optional<int>> rater_scores;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;
};

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                       : eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  // a trailing newline does not add a row
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return fields;
}

inline int parse_int_field(std::string_view field, std::size_t line_no,
                           std::string_view what) {
  int value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line_no) + ": " +
                     std::string(what) + " is not an integer: '" +
                     std::string(field) + "'");
  }
  return value;
}

inline int round_half_away_from_zero(double x) {
  return static_cast<int>(std::round(x));
}

}  // namespace detail

// Prompt table format: TSV with header `prompt_id  score_min  score_max`.
inline std::vector<PromptSpec> parse_prompt_table(std::string_view tsv) {
  if (!uni::is_valid_utf8(tsv)) {
    throw DecodeError("prompt table is not valid UTF-8");
  }
  auto lines = detail::split_lines(tsv);
  if (lines.empty()) throw ParseError("prompt table: missing header row");
  auto header = detail::split_fields(lines[0]);
  if (header.size() != 3 || header[0] != "prompt_id" ||
      header[1] != "score_min" || header[2] != "score_max") {
    throw ParseError(
        "prompt table: expected header 'prompt_id\tscore_min\tscore_max'");
  }
  std::vector<PromptSpec> prompts;
  std::unordered_set<std::string> seen;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto fields = detail::split_fields(lines[li]);
    if (fields.size() != 3) {
      throw ParseError("prompt table line " + std::to_string(li + 1) +
                       ": expected 3 fields, got " +
                       std::to_string(fields.size()));
    }
    PromptSpec p;
    p.prompt_id = std::string(fields[0]);
    p.score_min = detail::parse_int_field(fields[1], li + 1, "score_min");
    p.score_max = detail::parse_int_field(fields[2], li + 1, "score_max");
    if (p.prompt_id.empty()) {
      throw ValidationError("prompt table line " + std::to_string(li + 1) +
                            ": empty prompt_id");
    }
    if (!seen.insert(p.prompt_id).second) {
      throw ValidationError("duplicate prompt_id '" + p.prompt_id + "'");
    }
    if (p.score_min >= p.score_max) {
      throw ValidationError("prompt '" + p.prompt_id +
                            "': score_min must be < score_max");
    }
    prompts.push_back(std::move(p));
  }
  return prompts;
}

// Corpus format: TSV with header `essay_id  prompt_id  essay  score`;
// the score column is optional and `rater_<k>` columns may follow. Rows
// whose prompt_id has no PromptSpec are rejected (skipped).
inline std::vector<EssayRecord> parse_corpus(
    std::string_view tsv_bytes, const std::vector<PromptSpec>& prompts) {
  if (!uni::is_valid_utf8(tsv_bytes)) {
    throw DecodeError("corpus is not valid UTF-8");
  }
  std::unordered_map<std::string, const PromptSpec*> by_prompt;
  for (const auto& p : prompts) by_prompt.emplace(p.prompt_id, &p);

  auto lines = detail::split_lines(tsv_bytes);
  if (lines.empty()) throw ParseError("corpus: missing header row");

  auto header = detail::split_fields(lines[0]);
  int col_essay_id = -1, col_prompt_id = -1, col_essay = -1, col_score = -1;
  std::vector<int> rater_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string_view name = header[c];
    if (name == "essay_id") {
      col_essay_id = static_cast<int>(c);
    } else if (name == "prompt_id") {
      col_prompt_id = static_cast<int>(c);
    } else if (name == "essay") {
      col_essay = static_cast<int>(c);
    } else if (name == "score") {
      col_score = static_cast<int>(c);
    } else if (name.substr(0, 6) == "rater_" && name.size() > 6 &&
               std::all_of(name.begin() + 6, name.end(),
                           [](char ch) { return ch >= '0' && ch <= '9'; })) {
      rater_cols.push_back(static_cast<int>(c));
    } else {
      throw ParseError("corpus: unknown column '" + std::string(name) + "'");
    }
  }
  if (col_essay_id < 0 || col_prompt_id < 0 || col_essay < 0) {
    throw ParseError(
        "corpus: header must contain essay_id, prompt_id and essay");
  }

  std::vector<EssayRecord> records;
  std::unordered_set<std::string> seen_ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    auto fields = detail::split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw ParseError("corpus line " + std::to_string(line_no) +
                       ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(fields.size()));
    }
    EssayRecord rec;
    rec.essay_id = std::string(fields[static_cast<std::size_t>(col_essay_id)]);
    rec.prompt_id =
        std::string(fields[static_cast<std::size_t>(col_prompt_id)]);
    rec.text = std::string(fields[static_cast<std::size_t>(col_essay)]);
    if (rec.essay_id.empty()) {
      throw ValidationError("corpus line " + std::to_string(line_no) +
                            ": empty essay_id");
    }
    auto it = by_prompt.find(rec.prompt_id);
    if (it == by_prompt.end()) continue;  // unknown prompt: row rejected
    const PromptSpec& prompt = *it->second;

    if (!seen_ids.insert(rec.essay_id).second) {
      throw ValidationError("corpus line " + std::to_string(line_no) +
                            ": duplicate essay_id '" + rec.essay_id + "'");
    }

    auto check_range = [&](int value, std::string_view what) {
      if (value < prompt.score_min || value > prompt.score_max) {
        throw ValidationError(
            "corpus line " + std::to_string(line_no) + ": " +
            std::string(what) + " " + std::to_string(value) +
            " outside range [" + std::to_string(prompt.score_min) + "," +
            std::to_string(prompt.score_max) + "] of prompt '" +
            rec.prompt_id + "'");
      }
    };

    if (col_score >= 0) {
      std::string_view cell = fields[static_cast<std::size_t>(col_score)];
      if (!cell.empty()) {
        int s = detail::parse_int_field(cell, line_no, "score");
        check_range(s, "score");
        rec.gold_score = s;
      }
    }
    for (int rc : rater_cols) {
      std::string_view cell = fields[static_cast<std::size_t>(rc)];
      if (cell.empty()) {
        rec.rater_scores.push_back(std::nullopt);
      } else {
        int s = detail::parse_int_field(cell, line_no, "rater score");
        check_range(s, "rater score");
        rec.rater_scores.push_back(s);
      }
    }
    // No score column: the rater average (rounded half away from zero)
    // becomes the gold score when every rater scored the essay.
    if (col_score < 0 && !rec.rater_scores.empty()) {
      double sum = 0.0;
      bool complete = true;
      for (const auto& r : rec.rater_scores) {
        if (!r) {
          complete = false;
          break;
        }
        sum += *r;
      }
      if (complete) {
        rec.gold_score = detail::round_half_away_from_zero(
            sum / static_cast<double>(rec.rater_scores.size()));
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// Seeded shuffle-then-cut at 60% / 80%. Deterministic for a fixed
// (corpus order, seed).
inline SplitAssignment split_corpus(const std::vector<EssayRecord>& corpus,
                                    std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (n < 5) {
    throw ValidationError(
        "split requires at least 5 essays, got " + std::to_string(n));
  }
  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& r : corpus) ids.push_back(r.essay_id);
  rng::Engine engine(seed);
  engine.shuffle(ids);
  const std::size_t cut_train = 6 * n / 10;
  const std::size_t cut_validation = 8 * n / 10;
  SplitAssignment out;
  out.seed = seed;
  out.train_ids.assign(ids.begin(), ids.begin() + cut_train);
  out.validation_ids.assign(ids.begin() + cut_train,
                            ids.begin() + cut_validation);
  out.test_ids.assign(ids.begin() + cut_validation, ids.end());
  return out;
}

inline double normalize_score(int score, const PromptSpec& prompt) {
  if (score < prompt.score_min || score > prompt.score_max) {
    throw ValidationError("score " + std::to_string(score) +
                          " outside range [" +
                          std::to_string(prompt.score_min) + "," +
                          std::to_string(prompt.score_max) + "]");
  }
  return static_cast<double>(score - prompt.score_min) /
         static_cast<double>(prompt.score_max - prompt.score_min);
}

// Total over the reals: round half away from zero, then clamp into range.
inline int rescale_score(double y, const PromptSpec& prompt) {
  const double raw =
      y * static_cast<double>(prompt.score_max - prompt.score_min) +
      static_cast<double>(prompt.score_min);
  int s = static_cast<int>(std::round(raw));
  return std::clamp(s, prompt.score_min, prompt.score_max);
}

inline nlohmann::ordered_json split_to_json(const SplitAssignment& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["train"] = split.train_ids;
  j["validation"] = split.validation_ids;
  j["test"] = split.test_ids;
  return j;
}

inline SplitAssignment split_from_json(const nlohmann::json& j) {
  SplitAssignment s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_ids = j.at("train").get<std::vector<std::string>>();
  s.validation_ids = j.at("validation").get<std::vector<std::string>>();
  s.test_ids = j.at("test").get<std::vector<std::string>>();
  return s;
}

}  // namespace aes
