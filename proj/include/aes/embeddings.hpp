#pragma once

// Word-vector tables, mean-pooled sentence embeddings and cosine similarity
// for the coherence feature.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aes/corpus.hpp"
#include "aes/error.hpp"

namespace aes {

struct VectorTable {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> entries;

  const std::vector<double>* find(const std::string& token) const {
    auto it = entries.find(token);
    return it == entries.end() ? nullptr : &it->second;
  }
};

namespace detail {

inline double parse_double_field(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": non-numeric component '" + std::string(field) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t b = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

}  // namespace detail

// Text format: first line `<count> <dim>`, then `token v1 ... v_dim` lines.
// Later duplicates of a token are ignored; parsing stops after
// min(count, max_tokens) data lines.
inline VectorTable load_vectors(
    std::string_view bytes,
    std::optional<std::size_t> max_tokens = std::nullopt) {
  if (!uni::is_valid_utf8(bytes)) {
    throw DecodeError("vector file is not valid UTF-8");
  }
  auto lines = detail::split_lines(bytes);
  if (lines.empty()) throw ParseError("vector file: missing header line");
  auto header = detail::split_spaces(lines[0]);
  if (header.size() != 2) {
    throw ParseError("vector file line 1: expected '<count> <dim>'");
  }
  const int count = detail::parse_int_field(header[0], 1, "count");
  const int dim = detail::parse_int_field(header[1], 1, "dim");
  if (count < 0 || dim < 1) {
    throw ParseError("vector file line 1: invalid count/dim");
  }

  VectorTable table;
  table.dim = dim;
  std::size_t budget = static_cast<std::size_t>(count);
  if (max_tokens) budget = std::min(budget, *max_tokens);

  std::size_t consumed = 0;
  for (std::size_t li = 1; li < lines.size() && consumed < budget; ++li) {
    if (lines[li].empty()) continue;
    const std::size_t line_no = li + 1;
    auto fields = detail::split_spaces(lines[li]);
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " components, got " +
                       std::to_string(fields.size() - 1));
    }
    ++consumed;
    std::string token(fields[0]);
    if (table.entries.count(token) != 0) continue;
    std::vector<double> vec(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      vec[static_cast<std::size_t>(k)] = detail::parse_double_field(
          fields[static_cast<std::size_t>(k) + 1], line_no);
    }
    table.entries.emplace(std::move(token), std::move(vec));
  }
  return table;
}

// Mean of the in-vocabulary token vectors; the zero vector when no token
// is known.
inline std::vector<double> sentence_embedding(
    const std::vector<std::string>& tokens, const VectorTable& table) {
  std::vector<double> acc(static_cast<std::size_t>(table.dim), 0.0);
  std::size_t hits = 0;
  for (const auto& tok : tokens) {
    if (const auto* vec = table.find(tok)) {
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += (*vec)[k];
      ++hits;
    }
  }
  if (hits > 0) {
    for (auto& v : acc) v /= static_cast<double>(hits);
  }
  return acc;
}

// 0.0 when either vector has zero norm; clamped into [-1, 1].
inline double cosine_similarity(std::span<const double> u,
                                std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine_similarity: length mismatch (" +
                                std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

// Precomputed sentence embeddings: one row per sentence,
// `sentence_index<TAB>v1 v2 ... v_dim`, indices 0..n-1 in segmentation
// order across the corpus. Rows may appear in any order.
inline std::vector<std::vector<double>> load_sentence_embeddings(
    std::string_view bytes) {
  if (!uni::is_valid_utf8(bytes)) {
    throw DecodeError("sentence embedding file is not valid UTF-8");
  }
  auto lines = detail::split_lines(bytes);
  std::vector<std::vector<double>> rows;
  std::vector<bool> filled;
  std::size_t dim = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty() || lines[li][0] == '#') continue;
    const std::size_t line_no = li + 1;
    auto fields = detail::split_fields(lines[li]);
    if (fields.size() != 2) {
      throw ParseError("sentence embeddings line " + std::to_string(line_no) +
                       ": expected 'index<TAB>components'");
    }
    const int idx = detail::parse_int_field(fields[0], line_no, "index");
    if (idx < 0) {
      throw ParseError("sentence embeddings line " + std::to_string(line_no) +
                       ": negative index");
    }
    auto comps = detail::split_spaces(fields[1]);
    if (comps.empty()) {
      throw ParseError("sentence embeddings line " + std::to_string(line_no) +
                       ": empty vector");
    }
    if (dim == 0) dim = comps.size();
    if (comps.size() != dim) {
      throw ParseError("sentence embeddings line " + std::to_string(line_no) +
                       ": expected " + std::to_string(dim) +
                       " components, got " + std::to_string(comps.size()));
    }
    std::vector<double> vec(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      vec[k] = detail::parse_double_field(comps[k], line_no);
    }
    const auto u = static_cast<std::size_t>(idx);
    if (u >= rows.size()) {
      rows.resize(u + 1);
      filled.resize(u + 1, false);
    }
    if (filled[u]) {
      throw ValidationError("sentence embeddings: duplicate index " +
                            std::to_string(idx));
    }
    rows[u] = std::move(vec);
    filled[u] = true;
  }
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (!filled[i]) {
      throw ValidationError("sentence embeddings: missing index " +
                            std::to_string(i));
    }
  }
  return rows;
}

}  // namespace aes
