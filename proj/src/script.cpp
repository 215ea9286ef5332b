#include "agri/script.hpp"

#include <array>

#include "agri/text.hpp"

namespace agri::llm {

std::string_view script_block_name(ScriptBlock b) {
    switch (b) {
    case ScriptBlock::arabic: return "Arabic";
    case ScriptBlock::gurmukhi: return "Gurmukhi";
    case ScriptBlock::devanagari: return "Devanagari";
    case ScriptBlock::latin: return "Latin";
    case ScriptBlock::other: return "Other";
    }
    return "Other";
}

std::optional<ScriptBlock> letter_block(char32_t cp) {
    if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z') || (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 &&
                                                                  cp != 0x00F7)) {
        return ScriptBlock::latin;
    }
    if (cp >= 0x0600 && cp <= 0x06FF) {
        // Digits, punctuation, signs and combining marks are not letters.
        if ((cp >= 0x0600 && cp <= 0x061F) || (cp >= 0x064B && cp <= 0x066D) || cp == 0x0670 ||
            (cp >= 0x06D4 && cp <= 0x06ED) || (cp >= 0x06F0 && cp <= 0x06F9) || cp == 0x0640) {
            return std::nullopt;
        }
        return ScriptBlock::arabic;
    }
    if ((cp >= 0x0750 && cp <= 0x077F) || (cp >= 0x08A0 && cp <= 0x08C9) || (cp >= 0xFB50 && cp <= 0xFDFB) ||
        (cp >= 0xFE70 && cp <= 0xFEFC)) {
        return ScriptBlock::arabic;
    }
    if (cp >= 0x0A00 && cp <= 0x0A7F) {
        // Signs/vowel marks and digits excluded.
        if ((cp >= 0x0A01 && cp <= 0x0A03) || cp == 0x0A3C || (cp >= 0x0A3E && cp <= 0x0A51) ||
            (cp >= 0x0A66 && cp <= 0x0A71) || cp == 0x0A75) {
            return std::nullopt;
        }
        return ScriptBlock::gurmukhi;
    }
    if (cp >= 0x0900 && cp <= 0x097F) {
        if ((cp >= 0x0900 && cp <= 0x0903) || (cp >= 0x093A && cp <= 0x094F) || (cp >= 0x0951 && cp <= 0x0957) ||
            (cp >= 0x0962 && cp <= 0x0970)) {
            return std::nullopt;
        }
        return ScriptBlock::devanagari;
    }
    if ((cp >= 0x0370 && cp <= 0x03FF) || (cp >= 0x0400 && cp <= 0x04FF) || (cp >= 0x0980 && cp <= 0x09FF) ||
        (cp >= 0x4E00 && cp <= 0x9FFF)) {
        return ScriptBlock::other;
    }
    return std::nullopt;
}

ScriptCheck validate_script(std::string_view input, Language lang) {
    auto cps = text::decode_utf8(input);
    std::size_t start = 0;
    if (!cps.empty() && cps[0] == U'⟪') {
        for (std::size_t i = 1; i < cps.size(); ++i) {
            if (cps[i] == U'⟫') {
                start = i + 1;
                break;
            }
        }
    }
    const ScriptBlock required = uses_arabic_script(lang) ? ScriptBlock::arabic : ScriptBlock::latin;
    std::array<std::size_t, 5> counts{};
    ScriptCheck check;
    for (std::size_t i = start; i < cps.size(); ++i) {
        if (auto b = letter_block(cps[i])) {
            ++counts[static_cast<std::size_t>(*b)];
            ++check.letters;
        }
    }
    check.in_script = counts[static_cast<std::size_t>(required)];
    check.detected = required;
    if (check.letters == 0) {
        return check;
    }
    check.valid = static_cast<double>(check.in_script) >= kScriptThreshold * static_cast<double>(check.letters);
    if (!check.valid) {
        std::size_t best = 0;
        for (std::size_t b = 0; b < counts.size(); ++b) {
            if (b != static_cast<std::size_t>(required) && counts[b] > best) {
                best = counts[b];
                check.detected = static_cast<ScriptBlock>(b);
            }
        }
    }
    return check;
}

} // namespace agri::llm
