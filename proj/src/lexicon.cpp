#include "elberto/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "elberto/text.hpp"

namespace elberto::taskgen {

namespace {

std::string lower_trim(std::string_view s) {
    std::string out = text::normalize_whitespace(s);
    for (auto& c : out) {
        if (static_cast<unsigned char>(c) < 128) c = static_cast<char>(std::tolower(c));
    }
    return out;
}

}  // namespace

LexiconReport parse_lexicon(const std::string& content, const std::string& origin) {
    LexiconReport report;
    std::set<std::pair<std::string, std::string>> seen;  // canonical (min,max) pairs
    std::istringstream in(content);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string trimmed = text::normalize_whitespace(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(origin + ": line " + std::to_string(lineno) +
                                     ": expected word<TAB>antonym");
        }
        const std::string a = lower_trim(line.substr(0, tab));
        const std::string b = lower_trim(line.substr(tab + 1));
        if (a.empty() || b.empty()) {
            throw std::runtime_error(origin + ": line " + std::to_string(lineno) +
                                     ": empty word");
        }
        if (a == b) {
            throw std::runtime_error(origin + ": line " + std::to_string(lineno) + ": '" + a +
                                     "' paired with itself");
        }
        ++report.raw_pairs;
        seen.insert(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
    }
    for (const auto& [a, b] : seen) {
        report.lexicon.pairs[a].push_back(b);
        report.lexicon.pairs[b].push_back(a);
    }
    for (auto& [word, ants] : report.lexicon.pairs) {
        std::sort(ants.begin(), ants.end());
    }
    report.final_pairs = static_cast<int>(seen.size());
    report.lexicon.size = report.final_pairs;
    return report;
}

LexiconReport load_lexicon(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open lexicon: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_lexicon(buf.str(), path);
}

}  // namespace elberto::taskgen
