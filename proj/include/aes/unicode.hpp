#pragma once

// UTF-8 decoding plus the Devanagari code point classes needed for
// segmentation. Grapheme clustering is the extended-cluster rule restricted
// to the scripts this engine handles: a cluster is a base code point plus
// any run of combining marks (and ZWJ/ZWNJ) after it.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "aes/error.hpp"

namespace aes {

using CodePoint = char32_t;

namespace uni {

constexpr CodePoint kDanda = 0x0964;
constexpr CodePoint kDoubleDanda = 0x0965;
constexpr CodePoint kVirama = 0x094D;
constexpr CodePoint kNukta = 0x093C;
constexpr CodePoint kZwnj = 0x200C;
constexpr CodePoint kZwj = 0x200D;

// Strict decoder: rejects overlong forms, surrogates, values past U+10FFFF
// and truncated sequences.
inline std::vector<CodePoint> decode_utf8(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  const auto* p = reinterpret_cast<const unsigned char*>(text.data());
  std::size_t n = text.size();
  std::size_t i = 0;
  auto fail = [&](std::size_t at) -> void {
    throw DecodeError("invalid UTF-8 at byte offset " + std::to_string(at));
  };
  while (i < n) {
    unsigned char b0 = p[i];
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    int len;
    CodePoint cp;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      fail(i);
      return out;  // unreachable
    }
    if (i + static_cast<std::size_t>(len) > n) fail(i);
    for (int k = 1; k < len; ++k) {
      unsigned char bk = p[i + static_cast<std::size_t>(k)];
      if ((bk & 0xC0) != 0x80) fail(i);
      cp = (cp << 6) | (bk & 0x3F);
    }
    static constexpr CodePoint kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len]) fail(i);                  // overlong
    if (cp >= 0xD800 && cp <= 0xDFFF) fail(i);    // surrogate
    if (cp > 0x10FFFF) fail(i);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline bool is_valid_utf8(std::string_view text) {
  try {
    decode_utf8(text);
    return true;
  } catch (const DecodeError&) {
    return false;
  }
}

inline void append_utf8(std::string& out, CodePoint cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode_utf8(const std::vector<CodePoint>& cps) {
  std::string out;
  out.reserve(cps.size() * 3);
  for (CodePoint cp : cps) append_utf8(out, cp);
  return out;
}

inline bool is_devanagari_consonant(CodePoint cp) {
  return (cp >= 0x0915 && cp <= 0x0939) || (cp >= 0x0958 && cp <= 0x095F) ||
         (cp >= 0x0978 && cp <= 0x097F);
}

inline bool is_devanagari_independent_vowel(CodePoint cp) {
  return (cp >= 0x0904 && cp <= 0x0914) || cp == 0x0950 ||
         cp == 0x0960 || cp == 0x0961 || (cp >= 0x0972 && cp <= 0x0977);
}

// Dependent vowel signs (matras).
inline bool is_devanagari_matra(CodePoint cp) {
  return cp == 0x093A || cp == 0x093B || (cp >= 0x093E && cp <= 0x094C) ||
         cp == 0x094E || cp == 0x094F || (cp >= 0x0955 && cp <= 0x0957) ||
         cp == 0x0962 || cp == 0x0963;
}

// Candrabindu, anusvara, visarga and the Vedic stress marks.
inline bool is_devanagari_modifier(CodePoint cp) {
  return (cp >= 0x0900 && cp <= 0x0903) || (cp >= 0x0951 && cp <= 0x0954);
}

inline bool is_nukta(CodePoint cp) { return cp == kNukta; }

// Cluster-extending code points: everything a grapheme cluster absorbs
// after its base.
inline bool is_combining(CodePoint cp) {
  return is_devanagari_matra(cp) || is_devanagari_modifier(cp) ||
         is_nukta(cp) || cp == kVirama || cp == kZwnj || cp == kZwj ||
         (cp >= 0x0300 && cp <= 0x036F);
}

inline bool is_space(CodePoint cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 ||
         cp == 0xA0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) ||
         cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F ||
         cp == 0x3000;
}

inline std::size_t grapheme_count(const std::vector<CodePoint>& cps) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (i == 0 || !is_combining(cps[i])) ++count;
  }
  return count;
}

}  // namespace uni
}  // namespace aes
