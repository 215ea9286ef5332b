#pragma once

#include <cstddef>
#include <string_view>

#include "agri/common.hpp"

namespace agri::llm {

enum class ScriptBlock : std::uint8_t { arabic, gurmukhi, devanagari, latin, other };

[[nodiscard]] std::string_view script_block_name(ScriptBlock b);
/// Block of a letter codepoint, or std::nullopt for digits, punctuation,
/// whitespace, symbols and marks.
[[nodiscard]] std::optional<ScriptBlock> letter_block(char32_t cp);

/// Minimum share of letters that must be in the language's script.
inline constexpr double kScriptThreshold = 0.90;

struct ScriptCheck {
    bool valid = true;
    /// Dominant letter block that is not the required one, when invalid.
    ScriptBlock detected = ScriptBlock::arabic;
    std::size_t letters = 0;
    std::size_t in_script = 0;
};

/// Urdu, Punjabi and Sindhi require Arabic-script letters (Shahmukhi for
/// Punjabi); English requires Latin. Valid iff at least 90% of letter
/// codepoints fall in the required script. Text inside a leading "⟪xx⟫"
/// pseudo-translation tag is ignored. Text without letters is valid.
[[nodiscard]] ScriptCheck validate_script(std::string_view text, Language lang);

} // namespace agri::llm
