#pragma once

// Devanagari-aware segmentation: sentences, word tokens, grapheme clusters,
// orthographic syllables (aksharas) and conjuncts (jukta-akshars).

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "aes/error.hpp"
#include "aes/unicode.hpp"

namespace aes {

struct WordStats {
  std::string text;
  int grapheme_count = 0;
  int akshara_count = 0;
  int conjunct_count = 0;
};

// Sentences of filtered word tokens with per-word counts.
struct SegmentedText {
  std::vector<std::vector<WordStats>> sentences;

  int sentence_count() const { return static_cast<int>(sentences.size()); }
  int word_count() const {
    int n = 0;
    for (const auto& s : sentences) n += static_cast<int>(s.size());
    return n;
  }
};

namespace detail {

inline bool is_sentence_terminator(CodePoint cp) {
  return cp == uni::kDanda || cp == uni::kDoubleDanda || cp == '.' ||
         cp == '?' || cp == '!';
}

// Stripped from token edges: dandas, commas, quotes, brackets and the other
// clause punctuation that clings to words in mixed-punctuation corpora.
inline bool is_strippable_punct(CodePoint cp) {
  switch (cp) {
    case uni::kDanda:
    case uni::kDoubleDanda:
    case '.':
    case ',':
    case ';':
    case ':':
    case '!':
    case '?':
    case '"':
    case '\'':
    case '(':
    case ')':
    case '[':
    case ']':
    case '{':
    case '}':
    case '-':
    case 0x2018:  // left/right single quotes
    case 0x2019:
    case 0x201C:  // left/right double quotes
    case 0x201D:
    case 0x00AB:  // guillemets
    case 0x00BB:
    case 0x2010:  // hyphens and dashes
    case 0x2011:
    case 0x2013:
    case 0x2014:
    case 0x2026:  // ellipsis
      return true;
    default:
      return false;
  }
}

inline std::string trim_spaces(const std::vector<CodePoint>& cps) {
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && uni::is_space(cps[b])) ++b;
  while (e > b && uni::is_space(cps[e - 1])) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) uni::append_utf8(out, cps[i]);
  return out;
}

}  // namespace detail

// Splits on danda, double danda, '.', '?' and '!'. Terminators are consumed,
// segments trimmed, empty segments dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
  const auto cps = uni::decode_utf8(text);
  std::vector<std::string> out;
  std::vector<CodePoint> current;
  auto flush = [&] {
    std::string s = detail::trim_spaces(current);
    if (!s.empty()) out.push_back(std::move(s));
    current.clear();
  };
  for (CodePoint cp : cps) {
    if (detail::is_sentence_terminator(cp)) {
      flush();
    } else {
      current.push_back(cp);
    }
  }
  flush();
  return out;
}

// Whitespace split with leading/trailing punctuation stripped per token.
inline std::vector<std::string> tokenize_words(std::string_view sentence) {
  const auto cps = uni::decode_utf8(sentence);
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = cps.size();
  while (i < n) {
    while (i < n && uni::is_space(cps[i])) ++i;
    std::size_t b = i;
    while (i < n && !uni::is_space(cps[i])) ++i;
    std::size_t e = i;
    while (b < e && detail::is_strippable_punct(cps[b])) ++b;
    while (e > b && detail::is_strippable_punct(cps[e - 1])) --e;
    if (b < e) {
      std::string tok;
      for (std::size_t k = b; k < e; ++k) uni::append_utf8(tok, cps[k]);
      out.push_back(std::move(tok));
    }
  }
  return out;
}

inline int count_graphemes(std::string_view word) {
  return static_cast<int>(uni::grapheme_count(uni::decode_utf8(word)));
}

// Orthographic syllables. A consonant opens an akshara and absorbs any
// virama-joined consonant chain plus trailing matras and modifiers; an
// independent vowel stands as its own akshara. Non-Devanagari bases count
// one apiece so mixed-script tokens stay well-defined.
inline int count_aksharas(std::string_view word) {
  const auto cps = uni::decode_utf8(word);
  if (cps.empty()) throw ValidationError("count_aksharas: empty word");
  const std::size_t n = cps.size();
  std::size_t i = 0;
  int count = 0;
  while (i < n) {
    const CodePoint cp = cps[i];
    if (uni::is_devanagari_consonant(cp)) {
      ++count;
      ++i;
      while (i < n && uni::is_nukta(cps[i])) ++i;
      // virama-joined consonants fuse into the same akshara
      while (i + 1 < n && cps[i] == uni::kVirama &&
             uni::is_devanagari_consonant(cps[i + 1])) {
        i += 2;
        while (i < n && uni::is_nukta(cps[i])) ++i;
      }
      // word-final halant attaches to the cluster it kills
      if (i < n && cps[i] == uni::kVirama) ++i;
      while (i < n && (uni::is_devanagari_matra(cps[i]) ||
                       uni::is_devanagari_modifier(cps[i]) ||
                       cps[i] == uni::kZwnj || cps[i] == uni::kZwj)) {
        ++i;
      }
    } else if (uni::is_devanagari_independent_vowel(cp)) {
      ++count;
      ++i;
      while (i < n && (uni::is_devanagari_matra(cps[i]) ||
                       uni::is_devanagari_modifier(cps[i]) ||
                       uni::is_nukta(cps[i]))) {
        ++i;
      }
    } else {
      ++count;
      ++i;
      while (i < n && uni::is_combining(cps[i])) ++i;
    }
  }
  return count;
}

// Consonant + virama + consonant junctions; a chain of k viramas counts k.
inline int count_conjuncts(std::string_view word) {
  const auto cps = uni::decode_utf8(word);
  if (cps.empty()) throw ValidationError("count_conjuncts: empty word");
  int count = 0;
  for (std::size_t i = 1; i + 1 < cps.size(); ++i) {
    if (cps[i] == uni::kVirama && uni::is_devanagari_consonant(cps[i - 1]) &&
        uni::is_devanagari_consonant(cps[i + 1])) {
      ++count;
    }
  }
  return count;
}

// ASAP-style anonymized entity: '@' + capitals + optional digits.
inline bool is_mention(std::string_view token) {
  if (token.size() < 2 || token[0] != '@') return false;
  std::size_t i = 1;
  while (i < token.size() && token[i] >= 'A' && token[i] <= 'Z') ++i;
  if (i == 1) return false;
  while (i < token.size() && token[i] >= '0' && token[i] <= '9') ++i;
  return i == token.size();
}

inline std::vector<std::string> filter_tokens(
    const std::vector<std::string>& tokens,
    const std::unordered_set<std::string>& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (is_mention(t)) continue;
    if (stopwords.count(t) != 0) continue;
    out.push_back(t);
  }
  return out;
}

// Stopword list format: UTF-8, one token per line, '#' comments.
inline std::unordered_set<std::string> parse_stopword_list(
    std::string_view contents) {
  if (!uni::is_valid_utf8(contents)) {
    throw DecodeError("stopword list is not valid UTF-8");
  }
  std::unordered_set<std::string> out;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t eol = contents.find('\n', pos);
    std::string_view line = contents.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos
                                           : eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) {
      line.remove_prefix(1);
    }
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) {
      line.remove_suffix(1);
    }
    if (!line.empty()) out.emplace(line);
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return out;
}

// Full segmentation of one essay: sentence split, tokenize, stopword and
// mention filtering, per-word counts. Sentences emptied by filtering are
// dropped so downstream ratios stay over real content.
inline SegmentedText segment_essay(
    std::string_view text, const std::unordered_set<std::string>& stopwords) {
  SegmentedText seg;
  for (const auto& sentence : split_sentences(text)) {
    auto tokens = filter_tokens(tokenize_words(sentence), stopwords);
    if (tokens.empty()) continue;
    std::vector<WordStats> words;
    words.reserve(tokens.size());
    for (auto& tok : tokens) {
      WordStats w;
      w.grapheme_count = count_graphemes(tok);
      w.akshara_count = count_aksharas(tok);
      w.conjunct_count = count_conjuncts(tok);
      w.text = std::move(tok);
      words.push_back(std::move(w));
    }
    seg.sentences.push_back(std::move(words));
  }
  return seg;
}

}  // namespace aes
