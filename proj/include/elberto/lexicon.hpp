#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace elberto::taskgen {

// Word -> antonym phrases, symmetric: b in antonyms(a) iff a in antonyms(b).
struct AntonymLexicon {
    std::unordered_map<std::string, std::vector<std::string>> pairs;
    int size = 0;  // unordered word pairs after closure + dedup

    const std::vector<std::string>* antonyms(const std::string& word) const {
        auto it = pairs.find(word);
        return it == pairs.end() ? nullptr : &it->second;
    }
};

struct LexiconReport {
    AntonymLexicon lexicon;
    int raw_pairs = 0;    // data lines in the file, before closure
    int final_pairs = 0;  // unordered pairs after closure + dedup
};

// Format: "word<TAB>antonym" per line, '#' starts a comment line.
// Rejects self-pairs and malformed lines with the offending line number.
LexiconReport load_lexicon(const std::string& path);

LexiconReport parse_lexicon(const std::string& content, const std::string& origin);

}  // namespace elberto::taskgen
