#include "elberto/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "elberto/text.hpp"
#include "json.hpp"

namespace elberto::corpus {

using nlohmann::json;

const char* qtype_name(QType t) {
    switch (t) {
        case QType::in_paragraph: return "in_paragraph";
        case QType::out_of_paragraph: return "out_of_paragraph";
        case QType::no_effect: return "no_effect";
        case QType::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::optional<QType> qtype_from_name(const std::string& s) {
    if (s == "in_paragraph") return QType::in_paragraph;
    if (s == "out_of_paragraph") return QType::out_of_paragraph;
    if (s == "no_effect") return QType::no_effect;
    if (s == "unlabeled") return QType::unlabeled;
    return std::nullopt;
}

std::string LoadError::to_string() const {
    std::ostringstream os;
    os << "line " << line;
    if (!id.empty()) os << " (id=" << id << ")";
    if (!field.empty()) os << " field '" << field << "'";
    os << ": " << message;
    return os.str();
}

namespace {

bool nonblank(const std::string& s) {
    return !text::normalize_whitespace(s).empty();
}

// Returns nullopt and appends to errors on any validation failure.
std::optional<QaExample> parse_record(const std::string& line, int lineno,
                                      std::vector<LoadError>& errors) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        errors.push_back({lineno, "", "", std::string("malformed JSON: ") + e.what()});
        return std::nullopt;
    }
    if (!j.is_object()) {
        errors.push_back({lineno, "", "", "record is not a JSON object"});
        return std::nullopt;
    }

    QaExample ex;
    auto fail = [&](const std::string& field, const std::string& msg) {
        errors.push_back({lineno, ex.id, field, msg});
    };

    if (!j.contains("id") || !j["id"].is_string()) {
        fail("id", "missing or non-string");
        return std::nullopt;
    }
    ex.id = j["id"].get<std::string>();

    for (const char* field : {"context", "question"}) {
        if (!j.contains(field) || !j[field].is_string()) {
            fail(field, "missing or non-string");
            return std::nullopt;
        }
    }
    ex.context = j["context"].get<std::string>();
    ex.question = j["question"].get<std::string>();
    if (!nonblank(ex.context)) {
        fail("context", "empty after normalization");
        return std::nullopt;
    }
    if (!nonblank(ex.question)) {
        fail("question", "empty after normalization");
        return std::nullopt;
    }

    if (!j.contains("options") || !j["options"].is_array() || j["options"].size() < 2) {
        fail("options", "missing, non-array, or fewer than 2 entries");
        return std::nullopt;
    }
    for (const auto& o : j["options"]) {
        if (!o.is_string() || !nonblank(o.get<std::string>())) {
            fail("options", "every option must be a non-empty string");
            return std::nullopt;
        }
        ex.options.push_back(o.get<std::string>());
    }

    if (!j.contains("gold") || !j["gold"].is_number_integer()) {
        fail("gold", "missing or non-integer");
        return std::nullopt;
    }
    ex.gold = j["gold"].get<int>();
    if (ex.gold < 0 || ex.gold >= static_cast<int>(ex.options.size())) {
        fail("gold", "index " + std::to_string(ex.gold) + " out of range for " +
                         std::to_string(ex.options.size()) + " options");
        return std::nullopt;
    }

    if (j.contains("qtype")) {
        if (!j["qtype"].is_string()) {
            fail("qtype", "must be a string");
            return std::nullopt;
        }
        auto q = qtype_from_name(j["qtype"].get<std::string>());
        if (!q) {
            fail("qtype", "unknown value '" + j["qtype"].get<std::string>() + "'");
            return std::nullopt;
        }
        ex.qtype = *q;
    }

    if (j.contains("entities")) {
        if (!j["entities"].is_array()) {
            fail("entities", "must be an array of [start,end] pairs");
            return std::nullopt;
        }
        std::vector<CharSpan> spans;
        for (const auto& e : j["entities"]) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
                !e[1].is_number_integer()) {
                fail("entities", "every entry must be an integer pair");
                return std::nullopt;
            }
            spans.push_back({e[0].get<int>(), e[1].get<int>()});
        }
        const int len = static_cast<int>(ex.context.size());
        int prev_end = -1;
        for (const auto& s : spans) {
            if (s.start < 0 || s.end > len || s.start >= s.end) {
                fail("entities", "span out of context bounds");
                return std::nullopt;
            }
            if (s.start < prev_end) {
                fail("entities", "spans overlap or are unsorted");
                return std::nullopt;
            }
            prev_end = s.end;
        }
        ex.entities = std::move(spans);
    }

    return ex;
}

}  // namespace

LoadResult load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);
    LoadResult result;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::normalize_whitespace(line).empty()) continue;
        if (auto ex = parse_record(line, lineno, result.errors)) {
            result.examples.push_back(std::move(*ex));
        }
    }
    return result;
}

std::vector<QaExample> load_dataset_strict(const std::string& path) {
    LoadResult r = load_dataset(path);
    if (!r.errors.empty()) {
        std::ostringstream os;
        os << path << ": " << r.errors.size() << " invalid record(s):";
        for (const auto& e : r.errors) os << "\n  " << e.to_string();
        throw std::runtime_error(os.str());
    }
    return std::move(r.examples);
}

// ---------------------------------------------------------------- Vocabulary

namespace {
const std::array<const char*, 5> kSpecialNames = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

Vocabulary::Vocabulary() {
    for (const char* s : kSpecialNames) push(s, 0);
}

void Vocabulary::push(const std::string& tok, long long count) {
    ids_.emplace(tok, static_cast<int>(tokens_.size()));
    tokens_.push_back(tok);
    counts_.push_back(count);
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? unk_id : it->second;
}

const std::string& Vocabulary::token(int id) const {
    return tokens_.at(static_cast<size_t>(id));
}

Vocabulary Vocabulary::build(const std::vector<QaExample>& examples, int min_count) {
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    std::unordered_map<std::string, long long> freq;
    auto count_text = [&](const std::string& s) {
        for (auto& t : text::tokenize(s)) ++freq[t];
    };
    for (const auto& ex : examples) {
        count_text(ex.context);
        count_text(ex.question);
        for (const auto& o : ex.options) count_text(o);
    }
    std::vector<std::pair<std::string, long long>> kept;
    for (auto& [tok, c] : freq) {
        if (c >= min_count) kept.emplace_back(tok, c);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    for (auto& [tok, c] : kept) v.push(tok, c);
    return v;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id_of(t));
    return out;
}

std::vector<int> Vocabulary::encode_text(const std::string& s) const {
    return encode(text::tokenize(s));
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(token(id));
    return out;
}

std::string Vocabulary::dump_string() const {
    std::ostringstream os;
    for (const char* s : kSpecialNames) os << s << "\n";
    for (int id = n_specials; id < size(); ++id) {
        os << tokens_[static_cast<size_t>(id)] << "\t" << counts_[static_cast<size_t>(id)] << "\n";
    }
    return os.str();
}

void Vocabulary::dump(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
    out << dump_string();
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
    Vocabulary v;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno <= n_specials) {
            if (line != kSpecialNames[static_cast<size_t>(lineno - 1)]) {
                throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                         ": bad specials header");
            }
            continue;
        }
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": expected token<TAB>count");
        }
        v.push(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
    }
    return v;
}

// ---------------------------------------------------------- segmentation

std::vector<int> SegmentedContext::flatten() const {
    std::vector<int> out;
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
}

SegmentedContext segment_context(const QaExample& example, const Vocabulary& vocab) {
    SegmentedContext sc;
    sc.source_id = example.id;
    for (const auto& sent : text::split_sentences(example.context)) {
        auto ids = vocab.encode_text(sent);
        if (!ids.empty()) sc.sentences.push_back(std::move(ids));
    }
    return sc;
}

// ---------------------------------------------------------- entity tagging

namespace {

// Nouns of the procedural/cause-effect domain the shipped corpora use.
// Lowercased whole-token matches.
const std::unordered_set<std::string>& domain_nouns() {
    static const std::unordered_set<std::string> set = {
        "tree",    "trees",   "seed",    "seeds",   "soil",   "water",  "rain",
        "cloud",   "clouds",  "river",   "rivers",  "sun",    "sunlight", "forest",
        "forests", "root",    "roots",   "leaf",    "leaves", "plant",  "plants",
        "flower",  "flowers", "fruit",   "fruits",  "animal", "animals", "bird",
        "birds",   "insect",  "insects", "predator", "predators", "prey", "fish",
        "ice",     "snow",    "wind",    "storm",   "storms", "ocean",  "lake",
        "ground",  "mountain", "mountains", "valley", "glacier", "magma", "lava",
        "rock",    "rocks",   "sand",    "erosion", "oxygen", "carbon", "energy",
        "heat",    "light",   "bacteria", "cell",   "cells",  "blood",  "heart",
        "lungs",   "stomach", "food",    "nutrients", "waste", "eggs",  "larvae",
        "nest",    "hive",    "bees",    "pollen",  "honey",  "queen",  "colony",
        "fern",    "ferns",   "cactus",  "acorns",  "spores", "meadow", "grove",
        "grass",   "brush",   "needles", "hills",   "hillside", "scrubland", "woods",
        "fox",     "foxes",   "hawk",    "hawks",   "wolf",   "wolves", "rabbits",
        "mice",    "voles",   "crows",   "vultures", "badgers", "deer", "turtles",
        "seals",   "trout",   "minnows", "coast",   "cliffs", "dunes",  "gravel",
        "silt",    "mud",     "clay",    "fields",  "plains", "banks",  "wheat",
        "rice",    "corn",    "orchard", "garden",  "field",  "pond",   "waves",
        "smoke",   "air",     "sea",     "farm",    "park",   "village", "region",
        "factory", "plant",   "workshop", "machines", "goods", "chairs", "lamps",
        "toys",    "trucks",  "stores",  "shoppers", "bridge", "cars",  "buses",
        "canal",   "bay",     "district", "quarter", "downtown", "streets",
        "traffic", "market",  "bazaar",  "fair",    "stalls", "vendors", "farmers",
        "apples",  "cheese",  "bread",   "produce", "workers", "habitat", "terrain",
    };
    return set;
}

// Sentence-initial function words are excluded from capitalized-run starts;
// without this every sentence opener would be tagged as an entity.
const std::unordered_set<std::string>& capitalization_stopwords() {
    static const std::unordered_set<std::string> set = {
        "the", "a",  "an",   "if",   "when", "then", "suppose", "during", "as",
        "so",  "it", "its",  "this", "that", "these", "those",  "more",   "less",
        "and", "but", "or",  "in",   "on",   "at",   "after",   "before", "how",
        "what", "why", "while", "they", "there", "some", "each", "every",
    };
    return set;
}

bool starts_capitalized(std::string_view w) {
    return !w.empty() && w[0] >= 'A' && w[0] <= 'Z';
}

bool is_cap_stopword(std::string_view w) {
    std::string lowered;
    for (unsigned char c : w) lowered.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
    return capitalization_stopwords().count(lowered) > 0;
}

}  // namespace

std::vector<CharSpan> tag_entities(const QaExample& example) {
    if (example.entities) return *example.entities;

    const std::string& ctx = example.context;
    // word spans over the raw text: maximal runs of non-space, non-punct bytes
    struct Word {
        std::string_view raw;
        int start;
        int end;
    };
    std::vector<Word> words;
    {
        const int n = static_cast<int>(ctx.size());
        int i = 0;
        while (i < n) {
            const unsigned char c = static_cast<unsigned char>(ctx[static_cast<size_t>(i)]);
            const bool word_byte = !(std::isspace(c) || (c < 128 && std::ispunct(c)));
            if (!word_byte) {
                ++i;
                continue;
            }
            const int start = i;
            while (i < n) {
                const unsigned char w = static_cast<unsigned char>(ctx[static_cast<size_t>(i)]);
                if (std::isspace(w) || (w < 128 && std::ispunct(w))) break;
                ++i;
            }
            words.push_back({std::string_view(ctx).substr(static_cast<size_t>(start),
                                                          static_cast<size_t>(i - start)),
                             start, i});
        }
    }

    std::vector<CharSpan> spans;
    // maximal runs of capitalized words, merged into one span
    size_t i = 0;
    while (i < words.size()) {
        if (!starts_capitalized(words[i].raw) || is_cap_stopword(words[i].raw)) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < words.size() && starts_capitalized(words[j + 1].raw) &&
               words[j + 1].start == words[j].end + 1 &&
               ctx[static_cast<size_t>(words[j].end)] == ' ') {
            ++j;
        }
        spans.push_back({words[i].start, words[j].end});
        i = j + 1;
    }
    // domain-noun words not already covered
    for (const auto& w : words) {
        std::string lowered;
        for (unsigned char c : w.raw) {
            lowered.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
        }
        if (domain_nouns().count(lowered) == 0) continue;
        bool overlaps = false;
        for (const auto& s : spans) {
            if (w.start < s.end && s.start < w.end) {
                overlaps = true;
                break;
            }
        }
        if (!overlaps) spans.push_back({w.start, w.end});
    }
    std::sort(spans.begin(), spans.end(),
              [](const CharSpan& a, const CharSpan& b) { return a.start < b.start; });
    return spans;
}

}  // namespace elberto::corpus
