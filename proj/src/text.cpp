#include "feclust/text.hpp"

#include <algorithm>
#include <array>

namespace feclust::text {

namespace {

struct Range {
  char32_t lo;
  char32_t hi;
};

// Extended_Pictographic ranges from Unicode emoji-data.txt (includes code
// points reserved for future pictographs, per the property definition).
constexpr std::array<Range, 78> kExtendedPictographic = {{
    {0x00A9, 0x00A9},   {0x00AE, 0x00AE},   {0x203C, 0x203C},   {0x2049, 0x2049},
    {0x2122, 0x2122},   {0x2139, 0x2139},   {0x2194, 0x2199},   {0x21A9, 0x21AA},
    {0x231A, 0x231B},   {0x2328, 0x2328},   {0x2388, 0x2388},   {0x23CF, 0x23CF},
    {0x23E9, 0x23F3},   {0x23F8, 0x23FA},   {0x24C2, 0x24C2},   {0x25AA, 0x25AB},
    {0x25B6, 0x25B6},   {0x25C0, 0x25C0},   {0x25FB, 0x25FE},   {0x2600, 0x2605},
    {0x2607, 0x2612},   {0x2614, 0x2685},   {0x2690, 0x2705},   {0x2708, 0x2712},
    {0x2714, 0x2714},   {0x2716, 0x2716},   {0x271D, 0x271D},   {0x2721, 0x2721},
    {0x2728, 0x2728},   {0x2733, 0x2734},   {0x2744, 0x2744},   {0x2747, 0x2747},
    {0x274C, 0x274C},   {0x274E, 0x274E},   {0x2753, 0x2755},   {0x2757, 0x2757},
    {0x2763, 0x2767},   {0x2795, 0x2797},   {0x27A1, 0x27A1},   {0x27B0, 0x27B0},
    {0x27BF, 0x27BF},   {0x2934, 0x2935},   {0x2B05, 0x2B07},   {0x2B1B, 0x2B1C},
    {0x2B50, 0x2B50},   {0x2B55, 0x2B55},   {0x3030, 0x3030},   {0x303D, 0x303D},
    {0x3297, 0x3297},   {0x3299, 0x3299},   {0x1F000, 0x1F0FF}, {0x1F10D, 0x1F10F},
    {0x1F12F, 0x1F12F}, {0x1F16C, 0x1F171}, {0x1F17E, 0x1F17F}, {0x1F18E, 0x1F18E},
    {0x1F191, 0x1F19A}, {0x1F1AD, 0x1F1E5}, {0x1F201, 0x1F20F}, {0x1F21A, 0x1F21A},
    {0x1F22F, 0x1F22F}, {0x1F232, 0x1F23A}, {0x1F23C, 0x1F23F}, {0x1F249, 0x1F3FA},
    {0x1F400, 0x1F53D}, {0x1F546, 0x1F64F}, {0x1F680, 0x1F6FF}, {0x1F774, 0x1F77F},
    {0x1F7D5, 0x1F7FF}, {0x1F80C, 0x1F80F}, {0x1F848, 0x1F84F}, {0x1F85A, 0x1F85F},
    {0x1F888, 0x1F88F}, {0x1F8AE, 0x1F8FF}, {0x1F90C, 0x1F93A}, {0x1F93C, 0x1F945},
    {0x1F947, 0x1FAFF}, {0x1FC00, 0x1FFFD},
}};

bool in_ranges(const Range* first, const Range* last, char32_t cp) {
  auto it = std::upper_bound(first, last, cp,
                             [](char32_t v, const Range& r) { return v < r.lo; });
  return it != first && cp <= (it - 1)->hi;
}

bool is_url_anchor(std::string_view s, std::size_t pos) {
  auto starts_with_ci = [&](std::string_view prefix) {
    if (s.size() - pos < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      char c = s[pos + i];
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      if (c != prefix[i]) return false;
    }
    return true;
  };
  return starts_with_ci("http://") || starts_with_ci("https://") || starts_with_ci("www.");
}

}  // namespace

char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  unsigned char b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
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
    ++pos;
    return 0xFFFD;
  }
  if (pos + static_cast<std::size_t>(len) > s.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (int i = 1; i < len; ++i) {
    unsigned char b = byte(pos + static_cast<std::size_t>(i));
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
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

bool is_extended_pictographic(char32_t cp) {
  return in_ranges(kExtendedPictographic.data(),
                   kExtendedPictographic.data() + kExtendedPictographic.size(), cp);
}

bool is_emoji_component(char32_t cp) {
  if (is_extended_pictographic(cp)) return true;
  if (cp >= 0xFE00 && cp <= 0xFE0F) return true;   // variation selectors
  if (cp == 0x200D) return true;                   // zero-width joiner
  if (cp >= 0x1F1E6 && cp <= 0x1F1FF) return true; // regional indicators (flags)
  if (cp == 0x20E3) return true;                   // combining enclosing keycap
  return false;
}

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case ' ':
    case '\t':
    case '\n':
    case '\r':
    case '\f':
    case '\v':
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200B;
  }
}

bool is_punctuation(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') ||
           (cp >= '[' && cp <= '`') || (cp >= '{' && cp <= '~');
  }
  // General punctuation, CJK symbols, fullwidth forms, common quote marks.
  if (cp >= 0x2010 && cp <= 0x205E) return true;
  if (cp >= 0x3001 && cp <= 0x303F) return true;
  if (cp >= 0xFF01 && cp <= 0xFF0F) return true;
  if (cp >= 0xFF1A && cp <= 0xFF20) return true;
  if (cp >= 0xFF3B && cp <= 0xFF40) return true;
  if (cp >= 0xFF5B && cp <= 0xFF65) return true;
  switch (cp) {
    case 0x00A1:  // inverted exclamation
    case 0x00BF:  // inverted question
    case 0x00AB:  // left guillemet
    case 0x00BB:  // right guillemet
      return true;
    default:
      return false;
  }
}

bool is_word_char(char32_t cp) {
  return !is_whitespace(cp) && !is_punctuation(cp);
}

std::string lowercase(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

std::optional<std::string> preprocess_review(std::string_view raw) {
  // URL spans first so an emoji inside a URL cannot split it.
  std::string no_urls;
  no_urls.reserve(raw.size());
  std::size_t pos = 0;
  while (pos < raw.size()) {
    if (is_url_anchor(raw, pos)) {
      std::size_t end = pos;
      while (end < raw.size()) {
        std::size_t probe = end;
        char32_t cp = decode_utf8(raw, probe);
        if (is_whitespace(cp)) break;
        end = probe;
      }
      pos = end;
      no_urls.push_back(' ');
      continue;
    }
    no_urls.push_back(raw[pos]);
    ++pos;
  }

  std::string out;
  out.reserve(no_urls.size());
  bool pending_space = false;
  bool any = false;
  pos = 0;
  while (pos < no_urls.size()) {
    char32_t cp = decode_utf8(no_urls, pos);
    if (is_whitespace(cp) || is_emoji_component(cp) || cp == 0xFFFD) {
      pending_space = true;
      continue;
    }
    if (pending_space && any) out.push_back(' ');
    pending_space = false;
    any = true;
    append_utf8(out, cp);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::optional<std::string> normalize_feature(std::string_view raw) {
  const std::string lowered = lowercase(raw);

  // One pass: emit tokens, splitting punctuation runs into their own tokens.
  // A '-' or '\'' between two word characters stays inside the token.
  std::vector<std::string> tokens;
  std::string current;
  bool current_is_punct = false;
  const auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };

  std::size_t pos = 0;
  char32_t prev = 0;
  while (pos < lowered.size()) {
    char32_t cp = decode_utf8(lowered, pos);
    if (is_whitespace(cp)) {
      flush();
      prev = cp;
      continue;
    }
    bool punct = is_punctuation(cp);
    if (punct && (cp == '-' || cp == '\'') && is_word_char(prev) && !current.empty() &&
        !current_is_punct) {
      std::size_t probe = pos;
      if (probe < lowered.size() && is_word_char(decode_utf8(lowered, probe))) {
        punct = false;  // in-word hyphen/apostrophe
      }
    }
    if (!current.empty() && punct != current_is_punct) flush();
    current_is_punct = punct;
    append_utf8(current, cp);
    prev = cp;
  }
  flush();

  const auto is_punct_token = [](const std::string& t) {
    std::size_t p = 0;
    while (p < t.size()) {
      if (!is_punctuation(decode_utf8(t, p))) return false;
    }
    return true;
  };
  std::size_t begin = 0;
  std::size_t end = tokens.size();
  while (begin < end && is_punct_token(tokens[begin])) ++begin;
  while (end > begin && is_punct_token(tokens[end - 1])) --end;
  if (begin == end) return std::nullopt;

  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view normalized_surface) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < normalized_surface.size()) {
    std::size_t space = normalized_surface.find(' ', start);
    if (space == std::string_view::npos) space = normalized_surface.size();
    if (space > start) {
      tokens.emplace_back(normalized_surface.substr(start, space - start));
    }
    start = space + 1;
  }
  return tokens;
}

}  // namespace feclust::text
