#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace elberto::corpus {

enum class QType { in_paragraph, out_of_paragraph, no_effect, unlabeled };

const char* qtype_name(QType t);
std::optional<QType> qtype_from_name(const std::string& s);

struct CharSpan {
    int start = 0;
    int end = 0;  // exclusive
};

// One multiple-choice item. gold indexes into options; entities are
// non-overlapping character spans into context, sorted by start.
struct QaExample {
    std::string id;
    std::string context;
    std::string question;
    std::vector<std::string> options;
    int gold = 0;
    QType qtype = QType::unlabeled;
    std::optional<std::vector<CharSpan>> entities;
};

struct LoadError {
    int line = 0;
    std::string id;
    std::string field;
    std::string message;

    std::string to_string() const;
};

struct LoadResult {
    std::vector<QaExample> examples;
    std::vector<LoadError> errors;
};

// JSON Lines, one object per line:
//   {"id", "context", "question", "options", "gold", "qtype"?, "entities"?}
// Records failing validation are reported with line numbers and skipped.
LoadResult load_dataset(const std::string& path);

// Throws std::runtime_error listing every error if any record fails.
std::vector<QaExample> load_dataset_strict(const std::string& path);

// Token <-> id map. Ids 0..4 are the reserved specials and never appear in
// counts; content tokens are ordered by (frequency desc, token asc).
class Vocabulary {
public:
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int cls_id = 2;
    static constexpr int sep_id = 3;
    static constexpr int mask_id = 4;
    static constexpr int n_specials = 5;

    Vocabulary();

    static Vocabulary build(const std::vector<QaExample>& examples, int min_count);

    int size() const { return static_cast<int>(tokens_.size()); }
    int id_of(const std::string& token) const;  // UNK fallback
    const std::string& token(int id) const;
    long long count(int id) const { return counts_[static_cast<size_t>(id)]; }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<int> encode_text(const std::string& text) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

    // Dump format: 5 fixed special-name lines, then "token<TAB>count" lines
    // where line number (0-based, after the header) = id - 5.
    void dump(const std::string& path) const;
    std::string dump_string() const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::vector<long long> counts_;
    std::unordered_map<std::string, int> ids_;

    void push(const std::string& tok, long long count);
};

// Ordered sentences of one context as token ids; concatenating them in order
// reproduces the tokenized context exactly.
struct SegmentedContext {
    std::vector<std::vector<int>> sentences;
    std::string source_id;

    std::vector<int> flatten() const;
};

SegmentedContext segment_context(const QaExample& example, const Vocabulary& vocab);

// Annotation pass-through; falls back to a heuristic tagger (maximal runs of
// capitalized words, plus shipped domain nouns). Spans are sorted and
// non-overlapping.
std::vector<CharSpan> tag_entities(const QaExample& example);

}  // namespace elberto::corpus
