#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace feclust::text {

// ---- UTF-8 primitives ------------------------------------------------------

/// Decodes one code point starting at `pos`; advances `pos` past it.
/// Invalid sequences decode as U+FFFD and advance one byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);

// ---- Character classes -----------------------------------------------------

/// Unicode Extended_Pictographic, per UTS #51.
bool is_extended_pictographic(char32_t cp);

/// Everything stripped during emoji removal: Extended_Pictographic code
/// points plus the sequence glue around them (variation selectors, ZWJ,
/// regional indicators, combining keycap).
bool is_emoji_component(char32_t cp);

bool is_whitespace(char32_t cp);

/// ASCII punctuation plus common general/CJK/fullwidth punctuation blocks.
bool is_punctuation(char32_t cp);

bool is_word_char(char32_t cp);

// ---- Stage-1 operations ----------------------------------------------------

/// Review cleaning: URL spans and emoji removed, whitespace collapsed,
/// punctuation kept. Returns nullopt when nothing is left (skippable review).
std::optional<std::string> preprocess_review(std::string_view raw);

/// Feature surface canonicalization: lowercase, punctuation split into
/// standalone tokens (in-word hyphens/apostrophes kept), whitespace
/// collapsed, leading/trailing punctuation tokens stripped. Returns nullopt
/// when the input was pure punctuation.
std::optional<std::string> normalize_feature(std::string_view raw);

/// Splits a normalized surface on single spaces. Inverse of joining the
/// tokens with " "; normalize_feature guarantees that round trip.
std::vector<std::string> tokenize(std::string_view normalized_surface);

std::string lowercase(std::string_view s);

}  // namespace feclust::text
