#pragma once

// Unicode text helpers shared by every stage. All strings are UTF-8.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace settlekit::text {

struct DecodedText {
  std::string text;
  std::size_t replacements = 0;  // ill-formed sequences replaced by U+FFFD
};

/// Decodes arbitrary bytes as UTF-8, replacing ill-formed sequences.
DecodedText decode_utf8_lossy(std::string_view bytes);

/// Canonical form used for hashing, dedup, filtering and length counting:
/// NFC composition, lowercase where case exists, whitespace runs collapsed
/// to a single space, trimmed. Total and idempotent.
std::string normalize(std::string_view s);

/// NFC composition only.
std::string nfc(std::string_view s);

/// Collapses Unicode whitespace runs to one ASCII space and trims.
std::string collapse_whitespace(std::string_view s);

std::string trim(std::string_view s);

std::size_t codepoint_count(std::string_view s);

/// First `n` code points of `s` (whole string when shorter).
std::string truncate_codepoints(std::string_view s, std::size_t n);

std::u32string to_u32(std::string_view s);
std::string to_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

bool is_space(char32_t cp);
bool is_cjk_ideograph(char32_t cp);
/// Ideographs, kana, CJK punctuation and fullwidth forms.
bool is_cjk(char32_t cp);
bool is_alnum(char32_t cp);

/// Lexical terms of a normalized string: each CJK ideograph/kana is one term,
/// maximal runs of other letters/digits are one term, everything else
/// separates terms.
std::vector<std::string> tokenize_terms(std::string_view normalized);

/// Joins sentence texts with one space, except where the boundary touches a
/// CJK character on either side (CJK prose carries no inter-sentence space).
std::string join_sentences(const std::vector<std::string>& sentences);

/// Removes all whitespace code points.
std::string strip_whitespace(std::string_view s);

}  // namespace settlekit::text
