#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace factcheck {

struct TokenizerOptions {
    bool remove_stopwords = false;
    /// Harman "S" plural stemmer; off by default.
    bool stem = false;
};

/// Lowercases ASCII, splits on every byte that is not an ASCII letter or digit, drops
/// empty tokens. Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts = {});

bool is_stopword(std::string_view term);
std::string s_stem(std::string_view term);

/// Lowercase, ASCII punctuation replaced by spaces, whitespace collapsed and trimmed.
std::string normalize_for_match(std::string_view text);

std::string trim(std::string_view s);

}  // namespace factcheck
