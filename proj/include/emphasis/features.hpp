#pragma once

#include <array>
#include <string_view>

#include "emphasis/utf8.hpp"

namespace emphasis {

/// Per-word 0-1 lexical indicators, in fixed vector order
/// (caps_initial, all_upper, hashtag).
struct LexicalFeatures {
  static constexpr std::size_t kWidth = 3;

  bool caps_initial = false;
  bool all_upper = false;
  bool hashtag = false;

  std::array<double, kWidth> as_vector() const noexcept {
    return {caps_initial ? 1.0 : 0.0, all_upper ? 1.0 : 0.0, hashtag ? 1.0 : 0.0};
  }

  friend bool operator==(const LexicalFeatures&, const LexicalFeatures&) = default;
};

/// The capital test looks at the literal first character, so "#Plant" is not
/// capital-initial. A word is all-uppercase when it has at least one cased
/// letter and no lowercase letter.
inline LexicalFeatures extract_features(std::string_view word) {
  LexicalFeatures f;
  if (word.empty()) return f;
  const std::u32string cps = utf8::decode(word);
  f.caps_initial = utf8::is_upper(cps.front());
  f.hashtag = cps.front() == U'#';
  bool any_upper = false;
  bool any_lower = false;
  for (char32_t c : cps) {
    any_upper = any_upper || utf8::is_upper(c);
    any_lower = any_lower || utf8::is_lower(c);
  }
  f.all_upper = any_upper && !any_lower;
  return f;
}

}  // namespace emphasis
