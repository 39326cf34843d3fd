#include "elberto/taskgen.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "elberto/text.hpp"
#include "json.hpp"

namespace elberto::taskgen {

using corpus::SegmentedContext;
using corpus::Vocabulary;
using nlohmann::json;

// ---------------------------------------------------------------- CRL

std::vector<int> CrlInstance::rebuild_flipped() const {
    std::vector<int> out = candidates[static_cast<size_t>(label)];
    for (auto it = flipped_spans.rbegin(); it != flipped_spans.rend(); ++it) {
        out.erase(out.begin() + it->pos);
        out.insert(out.begin() + it->pos, it->replacement.begin(), it->replacement.end());
    }
    return out;
}

std::optional<CrlInstance> make_crl(const SegmentedContext& context, const Vocabulary& vocab,
                                    const AntonymLexicon& lexicon, int n_flips, Rng& rng) {
    if (n_flips < 1) throw std::invalid_argument("n_flips must be >= 1");
    const std::vector<int> original = context.flatten();

    // whole-token matches of lexicon headwords
    std::vector<int> match_positions;
    for (int p = 0; p < static_cast<int>(original.size()); ++p) {
        const std::string& tok = vocab.token(original[static_cast<size_t>(p)]);
        if (lexicon.antonyms(tok) != nullptr) match_positions.push_back(p);
    }
    if (match_positions.empty()) return std::nullopt;

    const int n_pick = std::min<int>(n_flips, static_cast<int>(match_positions.size()));
    rng.shuffle(match_positions);
    std::vector<int> picked(match_positions.begin(), match_positions.begin() + n_pick);
    std::sort(picked.begin(), picked.end());

    CrlInstance inst;
    inst.source_id = context.source_id;
    for (int pos : picked) {
        const int orig_id = original[static_cast<size_t>(pos)];
        const auto* ants = lexicon.antonyms(vocab.token(orig_id));
        const std::string& phrase = (*ants)[static_cast<size_t>(rng.next_int(
            static_cast<int>(ants->size())))];
        FlippedSpan span;
        span.pos = pos;
        span.original = orig_id;
        span.replacement = vocab.encode_text(phrase);
        inst.flipped_spans.push_back(std::move(span));
    }

    std::vector<int> flipped = original;
    for (auto it = inst.flipped_spans.rbegin(); it != inst.flipped_spans.rend(); ++it) {
        flipped.erase(flipped.begin() + it->pos);
        flipped.insert(flipped.begin() + it->pos, it->replacement.begin(), it->replacement.end());
    }

    if (rng.coin()) {
        inst.candidates = {original, std::move(flipped)};
        inst.label = 0;
    } else {
        inst.candidates = {std::move(flipped), original};
        inst.label = 1;
    }
    return inst;
}

// ---------------------------------------------------------------- jigsaw

namespace {

bool is_split_delimiter(int id, const Vocabulary& vocab) {
    static const char* kConjunctions[] = {"and", "but", "or", "because", "so", "then"};
    const std::string& tok = vocab.token(id);
    if (tok == "," || tok == ";") return true;
    for (const char* c : kConjunctions) {
        if (tok == c) return true;
    }
    return false;
}

bool is_punct_delimiter(int id, const Vocabulary& vocab) {
    const std::string& tok = vocab.token(id);
    return tok == "," || tok == ";";
}

// Left part size when splitting segment seg at delimiter position p:
// punctuation stays with the left part, a conjunction starts the right part.
int left_size_for_split(const std::vector<int>& seg, int p, const Vocabulary& vocab) {
    return is_punct_delimiter(seg[static_cast<size_t>(p)], vocab) ? p + 1 : p;
}

}  // namespace

NormalizedSegments normalize_segments(const std::vector<std::vector<int>>& sentences, int K,
                                      const Vocabulary& vocab) {
    if (K < 2) throw std::invalid_argument("K must be >= 2");
    NormalizedSegments out;
    for (const auto& s : sentences) {
        if (!s.empty()) out.segments.push_back(s);
    }
    if (out.segments.empty()) throw std::invalid_argument("no non-empty sentences");

    auto& segs = out.segments;

    // (I) split the longest while short of K
    while (static_cast<int>(segs.size()) < K) {
        int longest = 0;
        for (int i = 1; i < static_cast<int>(segs.size()); ++i) {
            if (segs[static_cast<size_t>(i)].size() > segs[static_cast<size_t>(longest)].size()) {
                longest = i;
            }
        }
        auto& seg = segs[static_cast<size_t>(longest)];
        const int len = static_cast<int>(seg.size());
        if (len < 2) throw ContextTooShort();

        // candidate delimiter positions with both sides non-empty, pick the
        // one whose left size is nearest len/2, leftmost on ties
        int best_left = -1;
        double best_dist = 0.0;
        for (int p = 0; p < len; ++p) {
            if (!is_split_delimiter(seg[static_cast<size_t>(p)], vocab)) continue;
            const int left = left_size_for_split(seg, p, vocab);
            if (left <= 0 || left >= len) continue;
            const double dist = std::abs(left - len / 2.0);
            if (best_left < 0 || dist < best_dist) {
                best_left = left;
                best_dist = dist;
            }
        }
        if (best_left < 0) {
            best_left = len / 2;
            ++out.meta.fallback_splits;
        }
        std::vector<int> right(seg.begin() + best_left, seg.end());
        seg.resize(static_cast<size_t>(best_left));
        segs.insert(segs.begin() + longest + 1, std::move(right));
        ++out.meta.splits;
    }

    // (II) merge the smallest adjacent pair while over K
    while (static_cast<int>(segs.size()) > K) {
        int best = 0;
        size_t best_size = segs[0].size() + segs[1].size();
        for (int i = 1; i + 1 < static_cast<int>(segs.size()); ++i) {
            const size_t sz = segs[static_cast<size_t>(i)].size() +
                              segs[static_cast<size_t>(i) + 1].size();
            if (sz < best_size) {
                best = i;
                best_size = sz;
            }
        }
        auto& left = segs[static_cast<size_t>(best)];
        auto& right = segs[static_cast<size_t>(best) + 1];
        left.insert(left.end(), right.begin(), right.end());
        segs.erase(segs.begin() + best + 1);
        ++out.meta.merges;
    }
    return out;
}

std::vector<std::vector<int>> JigsawInstance::candidate(int i) const {
    std::vector<std::vector<int>> out;
    for (int idx : perms[static_cast<size_t>(i)]) out.push_back(segments[static_cast<size_t>(idx)]);
    return out;
}

namespace {

long long factorial_capped(int k, long long cap) {
    long long f = 1;
    for (int i = 2; i <= k; ++i) {
        f *= i;
        if (f >= cap) return cap;
    }
    return f;
}

}  // namespace

JigsawInstance make_jigsaw(const SegmentedContext& context, const Vocabulary& vocab, int K, int P,
                           Rng& rng) {
    if (P < 2) throw std::invalid_argument("P must be >= 2");
    NormalizedSegments norm = normalize_segments(context.sentences, K, vocab);

    const long long n_orderings = factorial_capped(K, 1LL << 40);
    const int p_eff = static_cast<int>(std::min<long long>(P, n_orderings));

    std::vector<int> identity(static_cast<size_t>(K));
    for (int i = 0; i < K; ++i) identity[static_cast<size_t>(i)] = i;

    std::set<std::vector<int>> seen;
    seen.insert(identity);
    std::vector<std::vector<int>> sampled;
    while (static_cast<int>(sampled.size()) < p_eff - 1) {
        std::vector<int> perm = identity;
        rng.shuffle(perm);
        if (seen.insert(perm).second) sampled.push_back(std::move(perm));
    }

    JigsawInstance inst;
    inst.source_id = context.source_id;
    inst.segments = std::move(norm.segments);
    inst.meta = norm.meta;
    inst.label = rng.next_int(p_eff);
    inst.perms = std::move(sampled);
    inst.perms.insert(inst.perms.begin() + inst.label, identity);
    return inst;
}

// ---------------------------------------------------------------- BSOP

std::optional<BsopInstance> make_bsop(const SegmentedContext& context, Rng& rng) {
    const int m = static_cast<int>(context.sentences.size());
    if (m < 2) return std::nullopt;
    const int i = rng.next_int(m - 1);
    const bool reverse = rng.coin();
    BsopInstance inst;
    inst.source_id = context.source_id;
    if (reverse) {
        inst.first = context.sentences[static_cast<size_t>(i) + 1];
        inst.second = context.sentences[static_cast<size_t>(i)];
        inst.label = BsopLabel::reversed;
    } else {
        inst.first = context.sentences[static_cast<size_t>(i)];
        inst.second = context.sentences[static_cast<size_t>(i) + 1];
        inst.label = BsopLabel::original;
    }
    return inst;
}

// ---------------------------------------------------------------- masking

void MaskStats::add(const MaskStats& o) {
    candidates += o.candidates;
    selected += o.selected;
    branch_mask += o.branch_mask;
    branch_random += o.branch_random;
    branch_keep += o.branch_keep;
}

namespace {

// 80/10/10 substitution of one position; records the branch taken.
void apply_mask_policy(std::vector<int>& ids, int pos, int vocab_size, Rng& rng,
                       MaskStats& stats) {
    const double u = rng.next_double();
    if (u < kMaskBranchMask) {
        ids[static_cast<size_t>(pos)] = Vocabulary::mask_id;
        ++stats.branch_mask;
    } else if (u < kMaskBranchMask + kMaskBranchRandom) {
        if (vocab_size > Vocabulary::n_specials) {
            ids[static_cast<size_t>(pos)] =
                Vocabulary::n_specials + rng.next_int(vocab_size - Vocabulary::n_specials);
        }
        ++stats.branch_random;
    } else {
        ++stats.branch_keep;
    }
}

}  // namespace

MaskedResult make_masked(const std::vector<int>& sequence, MaskKind kind,
                         const std::vector<TokenRange>& spans, int vocab_size, Rng& rng) {
    MaskedResult res;
    res.instance.kind = kind;
    res.instance.input_ids = sequence;
    auto& ids = res.instance.input_ids;
    auto& stats = res.stats;

    auto is_special = [&](int pos) {
        return sequence[static_cast<size_t>(pos)] < Vocabulary::n_specials;
    };

    if (kind == MaskKind::mlm) {
        for (int pos = 0; pos < static_cast<int>(sequence.size()); ++pos) {
            if (is_special(pos)) continue;
            ++stats.candidates;
            if (!rng.bernoulli(kMaskSelectRate)) continue;
            ++stats.selected;
            res.instance.targets.emplace_back(pos, sequence[static_cast<size_t>(pos)]);
            apply_mask_policy(ids, pos, vocab_size, rng, stats);
        }
        return res;
    }

    // MEM: per-span selection with a forced minimum of one span
    if (spans.empty()) throw std::invalid_argument("no entities");
    for (const auto& s : spans) {
        if (s.begin < 0 || s.end > static_cast<int>(sequence.size()) || s.begin >= s.end) {
            throw std::invalid_argument("entity span out of sequence bounds");
        }
        for (int pos = s.begin; pos < s.end; ++pos) {
            if (is_special(pos)) throw std::invalid_argument("entity span covers a special token");
        }
    }
    std::vector<size_t> chosen;
    stats.candidates = static_cast<long long>(spans.size());
    for (size_t si = 0; si < spans.size(); ++si) {
        if (rng.bernoulli(kMaskSelectRate)) chosen.push_back(si);
    }
    if (chosen.empty()) {
        chosen.push_back(static_cast<size_t>(rng.next_int(static_cast<int>(spans.size()))));
        stats.forced = true;
    }
    stats.selected = static_cast<long long>(chosen.size());
    for (size_t si : chosen) {
        for (int pos = spans[si].begin; pos < spans[si].end; ++pos) {
            res.instance.targets.emplace_back(pos, sequence[static_cast<size_t>(pos)]);
            apply_mask_policy(ids, pos, vocab_size, rng, stats);
        }
    }
    std::sort(res.instance.targets.begin(), res.instance.targets.end());
    return res;
}

// ---------------------------------------------------------------- streams

GenerationConfig GenerationConfig::from_task_list(const std::string& csv) {
    GenerationConfig cfg;
    cfg.crl = cfg.jp = cfg.bsop = cfg.mem = cfg.mlm = false;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = text::normalize_whitespace(item);
        if (t.empty()) continue;
        if (t == "crl") cfg.crl = true;
        else if (t == "jp") cfg.jp = true;
        else if (t == "bsop") cfg.bsop = true;
        else if (t == "mem") cfg.mem = true;
        else if (t == "mlm") cfg.mlm = true;
        else throw std::invalid_argument("unknown task '" + t + "'");
    }
    return cfg;
}

std::vector<std::string> GenerationConfig::enabled_tasks() const {
    std::vector<std::string> out;
    if (crl) out.push_back("crl");
    if (jp) out.push_back("jp");
    if (bsop) out.push_back("bsop");
    if (mem) out.push_back("mem");
    if (mlm) out.push_back("mlm");
    return out;
}

void TaskCounters::skip(const std::string& reason) {
    for (auto& [r, c] : skipped) {
        if (r == reason) {
            ++c;
            return;
        }
    }
    skipped.emplace_back(reason, 1);
}

long long TaskCounters::skipped_total() const {
    long long t = 0;
    for (const auto& [r, c] : skipped) t += c;
    return t;
}

std::vector<TokenRange> entity_token_ranges(const corpus::QaExample& example, int max_ctx_tokens) {
    const auto char_spans = corpus::tag_entities(example);
    const auto toks = text::tokenize_with_offsets(example.context);
    const int n_tokens = std::min<int>(static_cast<int>(toks.size()), max_ctx_tokens);

    std::vector<TokenRange> ranges;
    for (const auto& span : char_spans) {
        int first = -1;
        int last = -1;
        for (int t = 0; t < n_tokens; ++t) {
            const auto& tk = toks[static_cast<size_t>(t)];
            if (tk.start < span.end && span.start < tk.end) {
                if (first < 0) first = t;
                last = t;
            }
        }
        if (first >= 0) ranges.push_back({first, last + 1});
    }
    std::sort(ranges.begin(), ranges.end(),
              [](const TokenRange& a, const TokenRange& b) { return a.begin < b.begin; });
    // merge overlaps introduced by tokens straddling span boundaries
    std::vector<TokenRange> merged;
    for (const auto& r : ranges) {
        if (!merged.empty() && r.begin < merged.back().end) {
            merged.back().end = std::max(merged.back().end, r.end);
        } else {
            merged.push_back(r);
        }
    }
    return merged;
}

namespace {

// [CLS] ctx [SEP], context truncated to max_len - 2 tokens
std::vector<int> render_context_sequence(const std::vector<int>& ctx_ids, int max_len) {
    const int budget = std::max(1, max_len - 2);
    std::vector<int> out;
    out.reserve(static_cast<size_t>(budget) + 2);
    out.push_back(Vocabulary::cls_id);
    for (int i = 0; i < std::min<int>(budget, static_cast<int>(ctx_ids.size())); ++i) {
        out.push_back(ctx_ids[static_cast<size_t>(i)]);
    }
    out.push_back(Vocabulary::sep_id);
    return out;
}

}  // namespace

TaskStreams build_streams(const std::vector<corpus::QaExample>& examples, const Vocabulary& vocab,
                          const AntonymLexicon& lexicon, const GenerationConfig& config,
                          uint64_t seed, GenStats* stats) {
    GenStats local;
    GenStats& st = stats ? *stats : local;
    st = GenStats{};
    st.jp_labels.assign(static_cast<size_t>(std::max(config.P, 1)), 0);

    // iterate in id order so output is independent of input ordering
    std::vector<const corpus::QaExample*> sorted;
    sorted.reserve(examples.size());
    for (const auto& ex : examples) sorted.push_back(&ex);
    std::sort(sorted.begin(), sorted.end(),
              [](const corpus::QaExample* a, const corpus::QaExample* b) { return a->id < b->id; });

    TaskStreams streams;
    for (const corpus::QaExample* exp : sorted) {
        const corpus::QaExample& ex = *exp;
        ++st.examples;
        const auto seg = corpus::segment_context(ex, vocab);
        const uint64_t id_hash = fnv1a64(ex.id);

        if (config.crl) {
            Rng rng(derive_seed(seed, "crl", id_hash));
            if (auto inst = make_crl(seg, vocab, lexicon, config.n_flips, rng)) {
                ++st.crl.emitted;
                ++st.crl_labels[static_cast<size_t>(inst->label)];
                streams.crl.push_back(std::move(*inst));
            } else {
                st.crl.skip("no_lexicon_match");
            }
        }
        if (config.jp) {
            Rng rng(derive_seed(seed, "jp", id_hash));
            try {
                auto inst = make_jigsaw(seg, vocab, config.K, config.P, rng);
                ++st.jp.emitted;
                ++st.jp_labels[static_cast<size_t>(inst.label)];
                streams.jp.push_back(std::move(inst));
            } catch (const ContextTooShort&) {
                st.jp.skip("context_too_short");
            }
        }
        if (config.bsop) {
            Rng rng(derive_seed(seed, "bsop", id_hash));
            if (auto inst = make_bsop(seg, rng)) {
                ++st.bsop.emitted;
                ++st.bsop_labels[static_cast<size_t>(inst->label)];
                streams.bsop.push_back(std::move(*inst));
            } else {
                st.bsop.skip("single_sentence");
            }
        }

        const std::vector<int> ctx_ids = vocab.encode_text(ex.context);
        const std::vector<int> rendered = render_context_sequence(ctx_ids, config.max_len);

        if (config.mem) {
            Rng rng(derive_seed(seed, "mem", id_hash));
            auto ranges = entity_token_ranges(ex, config.max_len - 2);
            for (auto& r : ranges) {  // shift for [CLS]
                ++r.begin;
                ++r.end;
            }
            // spans whose tokens fell out of vocabulary (UNK) are not maskable
            std::erase_if(ranges, [&](const TokenRange& r) {
                for (int pos = r.begin; pos < r.end; ++pos) {
                    if (rendered[static_cast<size_t>(pos)] < Vocabulary::n_specials) return true;
                }
                return false;
            });
            if (ranges.empty()) {
                st.mem.skip("no_entities");
            } else {
                auto res = make_masked(rendered, MaskKind::mem, ranges, vocab.size(), rng);
                res.instance.source_id = ex.id;
                st.mem_mask.add(res.stats);
                ++st.mem.emitted;
                streams.mem.push_back(std::move(res.instance));
            }
        }
        if (config.mlm) {
            Rng rng(derive_seed(seed, "mlm", id_hash));
            auto res = make_masked(rendered, MaskKind::mlm, {}, vocab.size(), rng);
            if (res.instance.targets.empty()) {
                st.mlm.skip("no_targets");
            } else {
                res.instance.source_id = ex.id;
                st.mlm_mask.add(res.stats);
                ++st.mlm.emitted;
                streams.mlm.push_back(std::move(res.instance));
            }
        }
    }
    return streams;
}

// ---------------------------------------------------------------- serialization

namespace {

json mask_stats_json(const MaskStats& m) {
    json j;
    j["candidates"] = m.candidates;
    j["selected"] = m.selected;
    j["rate"] = m.candidates > 0 ? static_cast<double>(m.selected) / m.candidates : 0.0;
    const long long nb = m.branch_mask + m.branch_random + m.branch_keep;
    j["branches"] = {{"mask", m.branch_mask}, {"random", m.branch_random}, {"keep", m.branch_keep}};
    if (nb > 0) {
        j["branch_fractions"] = {{"mask", static_cast<double>(m.branch_mask) / nb},
                                 {"random", static_cast<double>(m.branch_random) / nb},
                                 {"keep", static_cast<double>(m.branch_keep) / nb}};
    }
    return j;
}

json counters_json(const TaskCounters& c) {
    json j;
    j["emitted"] = c.emitted;
    json sk = json::object();
    for (const auto& [reason, count] : c.skipped) sk[reason] = count;
    j["skipped"] = sk;
    return j;
}

}  // namespace

std::string GenStats::to_json() const {
    json j;
    j["examples"] = examples;
    json tasks;
    {
        json t = counters_json(crl);
        t["label_histogram"] = crl_labels;
        tasks["crl"] = t;
    }
    {
        json t = counters_json(jp);
        t["label_histogram"] = jp_labels;
        tasks["jp"] = t;
    }
    {
        json t = counters_json(bsop);
        t["label_histogram"] = {{"original", bsop_labels[0]}, {"reversed", bsop_labels[1]}};
        tasks["bsop"] = t;
    }
    {
        json t = counters_json(mem);
        t["masking"] = mask_stats_json(mem_mask);
        tasks["mem"] = t;
    }
    {
        json t = counters_json(mlm);
        t["masking"] = mask_stats_json(mlm_mask);
        tasks["mlm"] = t;
    }
    j["tasks"] = tasks;
    return j.dump(2);
}

std::string instance_to_json(const CrlInstance& inst) {
    json j;
    j["kind"] = "crl";
    j["source_id"] = inst.source_id;
    j["candidates"] = inst.candidates;
    j["label"] = inst.label;
    json spans = json::array();
    for (const auto& s : inst.flipped_spans) {
        spans.push_back({{"pos", s.pos}, {"orig", s.original}, {"repl", s.replacement}});
    }
    j["flipped_spans"] = spans;
    return j.dump();
}

std::string instance_to_json(const JigsawInstance& inst) {
    json j;
    j["kind"] = "jp";
    j["source_id"] = inst.source_id;
    j["segments"] = inst.segments;
    j["perms"] = inst.perms;
    j["label"] = inst.label;
    j["meta"] = {{"merges", inst.meta.merges},
                 {"splits", inst.meta.splits},
                 {"fallback_splits", inst.meta.fallback_splits}};
    return j.dump();
}

std::string instance_to_json(const BsopInstance& inst) {
    json j;
    j["kind"] = "bsop";
    j["source_id"] = inst.source_id;
    j["pair"] = {inst.first, inst.second};
    j["label"] = inst.label == BsopLabel::original ? "original" : "reversed";
    return j.dump();
}

std::string instance_to_json(const MaskedInstance& inst) {
    json j;
    j["kind"] = inst.kind == MaskKind::mlm ? "mlm" : "mem";
    j["source_id"] = inst.source_id;
    j["input_ids"] = inst.input_ids;
    json targets = json::array();
    for (const auto& [pos, orig] : inst.targets) targets.push_back({pos, orig});
    j["targets"] = targets;
    return j.dump();
}

GenStats generate_stream(const std::vector<corpus::QaExample>& examples, const Vocabulary& vocab,
                         const AntonymLexicon& lexicon, const GenerationConfig& config,
                         uint64_t seed, const std::string& out_dir) {
    GenStats stats;
    TaskStreams streams = build_streams(examples, vocab, lexicon, config, seed, &stats);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    auto write_lines = [&](const std::string& name, auto const& instances) {
        const fs::path path = fs::path(out_dir) / (name + ".jsonl");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        for (const auto& inst : instances) out << instance_to_json(inst) << "\n";
    };
    if (config.crl) write_lines("crl", streams.crl);
    if (config.jp) write_lines("jp", streams.jp);
    if (config.bsop) write_lines("bsop", streams.bsop);
    if (config.mem) write_lines("mem", streams.mem);
    if (config.mlm) write_lines("mlm", streams.mlm);

    std::ofstream sout(fs::path(out_dir) / "stats.json", std::ios::binary);
    if (!sout) throw std::runtime_error("cannot write stats.json in " + out_dir);
    sout << stats.to_json() << "\n";
    return stats;
}

}  // namespace elberto::taskgen
