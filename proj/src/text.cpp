#include "agri/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

namespace agri::text {

namespace {

bool is_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool is_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

constexpr std::array<std::string_view, 58> kStopwords = {
    "a",     "an",   "and",  "are",  "as",    "at",    "be",   "been", "but",   "by",
    "can",   "do",   "does", "for",  "from",  "has",   "have", "i",    "if",    "in",
    "into",  "is",   "it",   "its",  "me",    "my",    "of",   "on",   "or",    "our",
    "shall", "should", "so", "than", "that",  "the",   "their", "then", "there", "these",
    "this",  "to",   "was",  "we",   "were",  "what",  "when", "which", "will", "with",
    "would", "you",  "your", "also", "about", "there", "how",  "any"};

} // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) {
        return {};
    }
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : s) {
        if ((static_cast<unsigned char>(c) < 0x80) && is_alnum(c)) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

bool is_stopword(std::string_view word) {
    return std::find(kStopwords.begin(), kStopwords.end(), word) != kStopwords.end();
}

std::vector<std::string> content_words(std::string_view s) {
    auto tokens = tokenize(s);
    std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
    return tokens;
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        auto t = trim(current);
        if (!t.empty()) {
            out.push_back(std::move(t));
        }
        current.clear();
    };
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\n') {
            flush();
            continue;
        }
        current.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            bool at_end = i + 1 == s.size();
            bool next_space = !at_end && std::isspace(static_cast<unsigned char>(s[i + 1]));
            // Citation markers may trail the terminator: "... 30 %. [R:n1#4]"
            if (at_end || next_space) {
                size_t j = i + 1;
                while (j < s.size() && s[j] == ' ') {
                    ++j;
                }
                while (j < s.size() && s[j] == '[') {
                    auto close = s.find(']', j);
                    if (close == std::string_view::npos) {
                        break;
                    }
                    current.push_back(' ');
                    current.append(s.substr(j, close - j + 1));
                    j = close + 1;
                    while (j < s.size() && s[j] == ' ') {
                        ++j;
                    }
                }
                i = j - 1;
                flush();
            }
        }
    }
    flush();
    return out;
}

std::vector<double> extract_numbers(std::string_view s) {
    std::vector<double> out;
    size_t i = 0;
    while (i < s.size()) {
        if (is_digit(s[i])) {
            // Skip digits glued to identifiers such as "n1" or "P2".
            bool glued = i > 0 && (std::isalpha(static_cast<unsigned char>(s[i - 1])) || s[i - 1] == '_' ||
                                   s[i - 1] == '#');
            size_t start = i;
            if (start > 0 && s[start - 1] == '-' &&
                (start < 2 || !is_alnum(s[start - 2]))) {
                --start;
            }
            size_t j = i;
            while (j < s.size() && (is_digit(s[j]) || s[j] == ',')) {
                ++j;
            }
            if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
                ++j;
                while (j < s.size() && is_digit(s[j])) {
                    ++j;
                }
            }
            if (!glued) {
                std::string num;
                for (size_t k = start; k < j; ++k) {
                    if (s[k] != ',') {
                        num.push_back(s[k]);
                    }
                }
                // A trailing comma belongs to prose, not the number.
                out.push_back(std::strtod(num.c_str(), nullptr));
            }
            while (j < s.size() && is_alnum(s[j]) && glued) {
                ++j;
            }
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

std::string format_number(double v, int decimals) {
    if (std::abs(v) < 0.5 * std::pow(10.0, -decimals)) {
        v = 0.0;
    }
    auto s = fmt::format("{:.{}f}", v, decimals);
    if (s.find('.') != std::string::npos) {
        while (!s.empty() && s.back() == '0') {
            s.pop_back();
        }
        if (!s.empty() && s.back() == '.') {
            s.pop_back();
        }
    }
    return s;
}

std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        auto b = static_cast<unsigned char>(s[i]);
        int len = 0;
        char32_t cp = 0;
        if (b < 0x80) {
            len = 1;
            cp = b;
        } else if ((b & 0xE0) == 0xC0) {
            len = 2;
            cp = b & 0x1F;
        } else if ((b & 0xF0) == 0xE0) {
            len = 3;
            cp = b & 0x0F;
        } else if ((b & 0xF8) == 0xF0) {
            len = 4;
            cp = b & 0x07;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        if (i + static_cast<size_t>(len) > s.size()) {
            out.push_back(0xFFFD);
            break;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            auto cont = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
            if ((cont & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cont & 0x3F);
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<size_t>(len);
    }
    return out;
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

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::string lead_sentence(std::string_view s) {
    auto sentences = split_sentences(s);
    if (sentences.empty()) {
        return {};
    }
    auto it = std::find_if(sentences.begin(), sentences.end(), [](const std::string& x) {
        const auto c = static_cast<unsigned char>(x.front());
        return std::isupper(c) != 0 || std::isdigit(c) != 0;
    });
    auto out = it == sentences.end() ? sentences.front() : *it;
    if (out.back() != '.' && out.back() != '!' && out.back() != '?') {
        out.push_back('.');
    }
    return out;
}

} // namespace agri::text
