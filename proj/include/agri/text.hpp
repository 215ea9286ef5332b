#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace agri::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Lowercased alphanumeric runs. Everything else (including non-ASCII bytes) separates.
std::vector<std::string> tokenize(std::string_view s);

/// Tokens with common English function words removed.
std::vector<std::string> content_words(std::string_view s);
bool is_stopword(std::string_view word);

/// Sentence units: split on newlines and on . ! ? followed by whitespace or end.
/// A period between two digits ("30.5") never splits.
std::vector<std::string> split_sentences(std::string_view s);

/// First sentence that starts with an uppercase letter or digit (a chunk
/// may begin mid-sentence), falling back to the first sentence; always ends
/// in punctuation. Empty for text without sentences.
std::string lead_sentence(std::string_view s);

/// Decimal numbers appearing in the text, in order. A leading '-' is kept only
/// when it is not preceded by a digit or letter.
std::vector<double> extract_numbers(std::string_view s);

/// Formats with at most `decimals` places and strips trailing zeros ("30.0" -> "30").
std::string format_number(double v, int decimals = 1);

/// Decodes UTF-8; malformed bytes become U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);

} // namespace agri::text
