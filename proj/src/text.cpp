#include "factcheck/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace factcheck {

namespace {

bool is_token_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

// Short English function-word list; only consulted when remove_stopwords is set.
constexpr std::array<std::string_view, 64> kStopwords = {
    "a",     "about", "after", "all",   "an",    "and",  "any",   "are",   "as",    "at",
    "be",    "been",  "but",   "by",    "can",   "could", "did",  "do",    "does",  "for",
    "from",  "had",   "has",   "have",  "he",    "her",  "his",   "how",   "i",     "if",
    "in",    "into",  "is",    "it",    "its",   "more", "no",    "not",   "of",    "on",
    "or",    "our",   "she",   "so",    "some",  "than", "that",  "the",   "their", "them",
    "then",  "there", "these", "they",  "this",  "to",   "was",   "we",    "were",  "what",
    "when",  "which", "who",   "with"};

}  // namespace

bool is_stopword(std::string_view term) {
    return std::binary_search(kStopwords.begin(), kStopwords.end(), term);
}

std::string s_stem(std::string_view t) {
    // A rule fires only when something is left before the suffix; exclusions match anywhere.
    auto ends = [&](std::string_view suf) {
        return t.size() > suf.size() && t.substr(t.size() - suf.size()) == suf;
    };
    auto excluded = [&](std::string_view suf) {
        return t.size() >= suf.size() && t.substr(t.size() - suf.size()) == suf;
    };
    if (ends("ies") && !excluded("eies") && !excluded("aies")) {
        return std::string(t.substr(0, t.size() - 3)) + "y";
    }
    if (ends("es") && !excluded("aes") && !excluded("ees") && !excluded("oes")) {
        return std::string(t.substr(0, t.size() - 1));
    }
    if (ends("s") && !excluded("us") && !excluded("ss")) {
        return std::string(t.substr(0, t.size() - 1));
    }
    return std::string(t);
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        if (!(opts.remove_stopwords && is_stopword(current))) {
            tokens.push_back(opts.stem ? s_stem(current) : current);
        }
        current.clear();
    };
    for (unsigned char c : text) {
        if (is_token_byte(c)) {
            current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::string normalize_for_match(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c) || std::ispunct(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace factcheck
