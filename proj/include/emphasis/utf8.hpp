#pragma once

#include <clocale>
#include <cstddef>
#include <locale.h>
#include <string>
#include <string_view>
#include <vector>
#include <wctype.h>

namespace emphasis::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Byte length of the sequence starting at s[i]; malformed input counts as 1 byte.
inline std::size_t sequence_length(std::string_view s, std::size_t i) noexcept {
  const auto lead = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  if (lead >= 0xF0 && lead < 0xF8) len = 4;
  else if (lead >= 0xE0) len = lead < 0xF0 ? 3 : 1;
  else if (lead >= 0xC2) len = 2;
  if (i + len > s.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

/// Byte offsets of every code point boundary, including 0 and s.size().
inline std::vector<std::size_t> boundaries(std::string_view s) {
  std::vector<std::size_t> out;
  out.reserve(s.size() + 1);
  std::size_t i = 0;
  while (i < s.size()) {
    out.push_back(i);
    i += sequence_length(s, i);
  }
  out.push_back(s.size());
  return out;
}

inline char32_t decode_at(std::string_view s, std::size_t i, std::size_t len) noexcept {
  const auto b = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k])); };
  switch (len) {
    case 1: return b(0) < 0x80 ? b(0) : kReplacement;
    case 2: return ((b(0) & 0x1F) << 6) | (b(1) & 0x3F);
    case 3: return ((b(0) & 0x0F) << 12) | ((b(1) & 0x3F) << 6) | (b(2) & 0x3F);
    default: return ((b(0) & 0x07) << 18) | ((b(1) & 0x3F) << 12) | ((b(2) & 0x3F) << 6) | (b(3) & 0x3F);
  }
}

inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t len = sequence_length(s, i);
    out.push_back(decode_at(s, i, len));
    i += len;
  }
  return out;
}

inline void append(std::string& out, char32_t c) {
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
}

inline std::string encode(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t c : cps) append(out, c);
  return out;
}

namespace detail {

// Unicode case tables come from the C library's UTF-8 locale; the process
// global locale is never touched. Falls back to ASCII when unavailable.
inline locale_t unicode_locale() noexcept {
  static const locale_t loc = [] {
    locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(nullptr));
    if (l == static_cast<locale_t>(nullptr)) l = newlocale(LC_CTYPE_MASK, "C.utf8", static_cast<locale_t>(nullptr));
    return l;
  }();
  return loc;
}

}  // namespace detail

inline bool is_upper(char32_t c) noexcept {
  if (auto loc = detail::unicode_locale()) return iswupper_l(static_cast<wint_t>(c), loc) != 0;
  return c >= U'A' && c <= U'Z';
}

inline bool is_lower(char32_t c) noexcept {
  if (auto loc = detail::unicode_locale()) return iswlower_l(static_cast<wint_t>(c), loc) != 0;
  return c >= U'a' && c <= U'z';
}

inline bool is_space(char32_t c) noexcept {
  if (auto loc = detail::unicode_locale()) return iswspace_l(static_cast<wint_t>(c), loc) != 0;
  return c == U' ' || (c >= U'\t' && c <= U'\r');
}

inline char32_t to_upper(char32_t c) noexcept {
  if (auto loc = detail::unicode_locale()) return static_cast<char32_t>(towupper_l(static_cast<wint_t>(c), loc));
  return (c >= U'a' && c <= U'z') ? c - 32 : c;
}

/// Simple (one-to-one) uppercase mapping per code point.
inline std::string to_upper(std::string_view s) {
  std::u32string cps = decode(s);
  for (auto& c : cps) c = to_upper(c);
  return encode(cps);
}

inline bool contains_space(std::string_view s) {
  for (char32_t c : decode(s)) {
    if (is_space(c)) return true;
  }
  return false;
}

}  // namespace emphasis::utf8
