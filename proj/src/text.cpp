#include "elberto/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

namespace elberto::text {

namespace {

inline bool is_space_byte(unsigned char c) { return std::isspace(c) != 0; }

// ASCII punctuation and symbols split into single-byte tokens; letters,
// digits and all non-ASCII bytes (UTF-8 continuation included) are word bytes.
inline bool is_punct_byte(unsigned char c) {
    return c < 128 && std::ispunct(c) != 0;
}

inline char lower_byte(unsigned char c) {
    return static_cast<char>(c < 128 ? std::tolower(c) : c);
}

// Sentence-splitter stoplist: a '.' after one of these words is an
// abbreviation, not a sentence end. Compared lowercased, final period
// stripped, internal periods kept ("e.g." matches as "e.g").
const std::unordered_set<std::string>& abbreviations() {
    static const std::unordered_set<std::string> set = {
        "mr",   "mrs",  "ms",   "dr",    "prof", "sr",    "jr",   "st",
        "no",   "vs",   "etc",  "e.g",   "i.e",  "cf",    "al",   "fig",
        "eq",   "sec",  "ch",   "vol",   "pp",   "inc",   "ltd",  "co",
        "corp", "dept", "univ", "approx", "est",  "min",   "max",  "avg",
        "jan",  "feb",  "mar",  "apr",   "jun",  "jul",   "aug",  "sep",
        "oct",  "nov",  "dec",  "mon",   "tue",  "wed",   "thu",  "fri",
        "sat",  "sun",  "a.m",  "p.m",   "u.s",  "u.k",
    };
    return set;
}

}  // namespace

bool is_abbreviation(std::string_view word) {
    std::string lowered;
    lowered.reserve(word.size());
    for (unsigned char c : word) lowered.push_back(lower_byte(c));
    return abbreviations().count(lowered) > 0;
}

std::vector<TokenSpan> tokenize_with_offsets(std::string_view s) {
    std::vector<TokenSpan> out;
    const int n = static_cast<int>(s.size());
    int i = 0;
    while (i < n) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (is_space_byte(c)) {
            ++i;
            continue;
        }
        if (is_punct_byte(c)) {
            out.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
            ++i;
            continue;
        }
        const int start = i;
        std::string tok;
        while (i < n) {
            const unsigned char w = static_cast<unsigned char>(s[i]);
            if (is_space_byte(w) || is_punct_byte(w)) break;
            tok.push_back(lower_byte(w));
            ++i;
        }
        out.push_back({std::move(tok), start, i});
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    for (auto& t : tokenize_with_offsets(s)) out.push_back(std::move(t.token));
    return out;
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (is_space_byte(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    const std::string norm = normalize_whitespace(text);
    std::vector<std::string> sentences;
    const int n = static_cast<int>(norm.size());
    int sent_start = 0;
    int i = 0;
    while (i < n) {
        const char c = norm[i];
        if (c == '.' || c == '!' || c == '?') {
            int j = i;
            while (j + 1 < n && (norm[j + 1] == '.' || norm[j + 1] == '!' || norm[j + 1] == '?')) {
                ++j;
            }
            const bool at_end = (j + 1 >= n);
            const bool followed_by_space = !at_end && norm[j + 1] == ' ';
            bool split_here = at_end || followed_by_space;
            if (split_here && c == '.' && j == i) {
                // look back at the word before the period
                int w = i - 1;
                while (w >= 0 && norm[w] != ' ') --w;
                const std::string_view word(norm.data() + w + 1, static_cast<size_t>(i - w - 1));
                if (!word.empty() && is_abbreviation(word)) split_here = false;
            }
            if (split_here && followed_by_space) {
                sentences.emplace_back(norm.substr(sent_start, j + 1 - sent_start));
                sent_start = j + 2;  // skip the single space
            }
            i = j + 1;
            continue;
        }
        ++i;
    }
    if (sent_start < n) sentences.emplace_back(norm.substr(sent_start));
    return sentences;
}

}  // namespace elberto::text
