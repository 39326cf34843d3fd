#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "elberto/corpus.hpp"
#include "elberto/lexicon.hpp"
#include "elberto/rng.hpp"

namespace elberto::taskgen {

// Fixed masking policy: select 15%, then MASK 80% / random token 10% / keep 10%.
inline constexpr double kMaskSelectRate = 0.15;
inline constexpr double kMaskBranchMask = 0.80;
inline constexpr double kMaskBranchRandom = 0.10;

struct ContextTooShort : std::runtime_error {
    ContextTooShort() : std::runtime_error("context too short") {}
};

// ------------------------------------------------------------ instances

struct FlippedSpan {
    int pos = 0;               // token position in the original context
    int original = 0;          // token id replaced
    std::vector<int> replacement;  // antonym phrase token ids (>= 1)
};

// Original context vs antonym-flipped copy, presented in coin order.
struct CrlInstance {
    std::vector<std::vector<int>> candidates;  // exactly 2, presentation order
    int label = 0;                             // index of the original
    std::vector<FlippedSpan> flipped_spans;    // positions in the original
    std::string source_id;

    // Applies flipped_spans to the original candidate; must equal the other.
    std::vector<int> rebuild_flipped() const;
};

struct SegmentMeta {
    int merges = 0;
    int splits = 0;
    int fallback_splits = 0;  // splits at the token midpoint (no delimiter found)
};

// K segments of one context plus P distinct orderings; perms[label] is identity.
struct JigsawInstance {
    std::vector<std::vector<int>> segments;  // original order, size K
    std::vector<std::vector<int>> perms;     // P permutations of [0, K)
    int label = 0;
    SegmentMeta meta;
    std::string source_id;

    int candidate_count() const { return static_cast<int>(perms.size()); }
    // Segment sequences of candidate i in presentation order.
    std::vector<std::vector<int>> candidate(int i) const;
};

enum class BsopLabel { original = 0, reversed = 1 };

struct BsopInstance {
    std::vector<int> first;   // presentation order
    std::vector<int> second;
    BsopLabel label = BsopLabel::original;
    std::string source_id;
};

enum class MaskKind { mlm, mem };

// Encoder-ready sequence ([CLS] ... [SEP]) with substitutions applied.
struct MaskedInstance {
    std::vector<int> input_ids;
    std::vector<std::pair<int, int>> targets;  // (position, original id), sorted
    MaskKind kind = MaskKind::mlm;
    std::string source_id;
};

struct MaskStats {
    long long candidates = 0;  // tokens (mlm) or spans (mem) eligible
    long long selected = 0;
    long long branch_mask = 0;
    long long branch_random = 0;
    long long branch_keep = 0;
    bool forced = false;

    void add(const MaskStats& o);
};

struct MaskedResult {
    MaskedInstance instance;
    MaskStats stats;
};

struct TokenRange {
    int begin = 0;
    int end = 0;  // exclusive
};

// ------------------------------------------------------------ constructors

// Flips lexicon words to antonyms; absent when the context has no match.
std::optional<CrlInstance> make_crl(const corpus::SegmentedContext& context,
                                    const corpus::Vocabulary& vocab,
                                    const AntonymLexicon& lexicon, int n_flips, Rng& rng);

struct NormalizedSegments {
    std::vector<std::vector<int>> segments;
    SegmentMeta meta;
};

// Splits the longest segment at the median-nearest comma/semicolon or
// conjunction (midpoint fallback) while count < K; merges the smallest
// adjacent pair while count > K. Throws ContextTooShort when splitting is
// impossible. Concatenation in order always equals the input token stream.
NormalizedSegments normalize_segments(const std::vector<std::vector<int>>& sentences, int K,
                                      const corpus::Vocabulary& vocab);

JigsawInstance make_jigsaw(const corpus::SegmentedContext& context,
                           const corpus::Vocabulary& vocab, int K, int P, Rng& rng);

std::optional<BsopInstance> make_bsop(const corpus::SegmentedContext& context, Rng& rng);

// sequence already contains its specials; they are never selected. For mem,
// spans are token ranges into sequence and must be non-empty.
MaskedResult make_masked(const std::vector<int>& sequence, MaskKind kind,
                         const std::vector<TokenRange>& spans, int vocab_size, Rng& rng);

// ------------------------------------------------------------ streams

struct GenerationConfig {
    bool crl = true;
    bool jp = true;
    bool bsop = true;
    bool mem = true;
    bool mlm = true;
    int K = 5;
    int P = 5;
    int n_flips = 1;
    int max_len = 180;  // masked instances are rendered [CLS] ctx [SEP] within this

    static GenerationConfig from_task_list(const std::string& comma_separated);
    std::vector<std::string> enabled_tasks() const;
};

struct TaskStreams {
    std::vector<CrlInstance> crl;
    std::vector<JigsawInstance> jp;
    std::vector<BsopInstance> bsop;
    std::vector<MaskedInstance> mem;
    std::vector<MaskedInstance> mlm;
};

struct TaskCounters {
    long long emitted = 0;
    std::vector<std::pair<std::string, long long>> skipped;  // reason -> count

    void skip(const std::string& reason);
    long long skipped_total() const;
};

struct GenStats {
    long long examples = 0;
    TaskCounters crl, jp, bsop, mem, mlm;
    std::vector<long long> crl_labels = {0, 0};
    std::vector<long long> jp_labels;
    std::vector<long long> bsop_labels = {0, 0};
    MaskStats mem_mask, mlm_mask;

    std::string to_json() const;
};

// Deterministic in-memory construction; per-example RNG derived from
// (seed, example id, task) so output is independent of iteration order.
TaskStreams build_streams(const std::vector<corpus::QaExample>& examples,
                          const corpus::Vocabulary& vocab, const AntonymLexicon& lexicon,
                          const GenerationConfig& config, uint64_t seed, GenStats* stats = nullptr);

// Writes <out_dir>/{crl,jp,bsop,mem,mlm}.jsonl (enabled tasks only, sorted by
// source id) plus <out_dir>/stats.json.
GenStats generate_stream(const std::vector<corpus::QaExample>& examples,
                         const corpus::Vocabulary& vocab, const AntonymLexicon& lexicon,
                         const GenerationConfig& config, uint64_t seed,
                         const std::string& out_dir);

// Entity char spans mapped to token ranges of the tokenized context,
// truncated to the first max_ctx_tokens tokens, overlaps merged.
std::vector<TokenRange> entity_token_ranges(const corpus::QaExample& example, int max_ctx_tokens);

std::string instance_to_json(const CrlInstance& inst);
std::string instance_to_json(const JigsawInstance& inst);
std::string instance_to_json(const BsopInstance& inst);
std::string instance_to_json(const MaskedInstance& inst);

}  // namespace elberto::taskgen
