#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace elberto::text {

struct TokenSpan {
    std::string token;
    int start = 0;  // byte offset into the input text
    int end = 0;    // one past the last byte
};

// Rule-based word tokenizer: ASCII-lowercased, whitespace collapsed, every
// ASCII punctuation byte becomes its own token, letter/digit/non-ASCII runs
// form word tokens. Deterministic; empty input yields an empty list.
std::vector<std::string> tokenize(std::string_view text);

// Same rules, with byte offsets into the original (un-normalized) text.
std::vector<TokenSpan> tokenize_with_offsets(std::string_view text);

// Whitespace-collapsed, trimmed copy; case and punctuation untouched.
std::string normalize_whitespace(std::string_view text);

// Splits on terminal . ! ? followed by whitespace. A '.' does not split when
// the word before it is in the shipped abbreviation stoplist. Joining the
// result with single spaces reproduces normalize_whitespace(text).
std::vector<std::string> split_sentences(std::string_view text);

bool is_abbreviation(std::string_view word_without_final_period);

}  // namespace elberto::text
