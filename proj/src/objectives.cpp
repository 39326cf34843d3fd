#include "elberto/objectives.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "elberto/kernels.hpp"
#include "json.hpp"

namespace elberto::objectives {

namespace k = elberto::kernels;
using model::ForwardCache;
using model::SequenceInput;

template <typename T>
HeadParams<T> HeadParams<T>::shaped(const EncoderConfig& config) {
    const int d = config.d_model;
    HeadParams<T> h;
    h.qa_w = Mat<T>(1, d);
    h.qa_b = Mat<T>(1, 1);
    h.crl_w = Mat<T>(1, d);
    h.crl_b = Mat<T>(1, 1);
    h.jp_w = Mat<T>(1, d);
    h.jp_b = Mat<T>(1, 1);
    h.bsop_w = Mat<T>(2, d);
    h.bsop_b = Mat<T>(1, 2);
    h.lm_w = Mat<T>(d, config.vocab_size);
    h.lm_b = Mat<T>(1, config.vocab_size);
    return h;
}

template <typename T>
HeadParams<T> HeadParams<T>::init(const EncoderConfig& config, Rng& rng) {
    HeadParams<T> h = shaped(config);
    for_each_tensor(h, [&](const std::string& name, Mat<T>& m) {
        const bool bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
        if (bias) {
            m.fill(T(0));
        } else {
            for (auto& x : m.v) x = static_cast<T>(rng.truncated_normal(0.02));
        }
    });
    return h;
}

template <typename T>
FullModel<T> FullModel<T>::shaped(const EncoderConfig& config) {
    FullModel<T> m;
    m.encoder = model::EncoderParams<T>::shaped(config);
    m.heads = HeadParams<T>::shaped(config);
    return m;
}

template <typename T>
FullModel<T> FullModel<T>::init(const EncoderConfig& config, Rng& rng) {
    FullModel<T> m;
    m.encoder = model::EncoderParams<T>::init(config, rng);
    m.heads = HeadParams<T>::init(config, rng);
    return m;
}

void LossWeights::validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0 || lambda_ < 0 || delta < 0) {
        throw std::invalid_argument("loss weights must be non-negative");
    }
}

std::string LossReport::to_json(long long step) const {
    nlohmann::json j;
    j["step"] = step;
    j["total"] = total;
    auto comp = [](const ComponentReport& c) {
        return nlohmann::json{{"raw", c.raw},
                              {"weighted", c.weighted},
                              {"count", c.count},
                              {"accuracy", c.accuracy()}};
    };
    j["components"] = {{"qa", comp(qa)},   {"crl", comp(crl)}, {"jp", comp(jp)},
                       {"bsop", comp(bsop)}, {"mem", comp(mem)}, {"mlm", comp(mlm)}};
    return j.dump();
}

QaItem encode_qa(const corpus::QaExample& example, const corpus::Vocabulary& vocab) {
    QaItem item;
    item.id = example.id;
    item.context = vocab.encode_text(example.context);
    item.question = vocab.encode_text(example.question);
    for (const auto& o : example.options) item.options.push_back(vocab.encode_text(o));
    item.gold = example.gold;
    item.qtype = example.qtype;
    return item;
}

// ------------------------------------------------------------- shared bits

namespace {

// stable -log softmax(label) plus probabilities, in double
struct SoftmaxCe {
    double loss = 0.0;
    int argmax = 0;
    std::vector<double> probs;
};

SoftmaxCe softmax_ce(const std::vector<double>& logits, int label) {
    double mx = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        if (logits[i] > mx) {
            mx = logits[i];
            arg = static_cast<int>(i);
        }
    }
    double z = 0.0;
    std::vector<double> probs(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - mx);
        z += probs[i];
    }
    for (auto& p : probs) p /= z;
    SoftmaxCe out;
    out.loss = std::log(z) + mx - logits[static_cast<size_t>(label)];
    out.argmax = arg;
    out.probs = std::move(probs);
    if (!std::isfinite(out.loss)) throw std::runtime_error("non-finite loss");
    return out;
}

// Candidate-per-logit loss shared by QA, CRL and JP: every candidate sequence
// is encoded, its [CLS] state projected to one logit via (w, b), and the
// softmax cross-entropy at `label` is returned.
template <typename T>
ChoiceResult choice_loss(const FullModel<T>& m, const std::vector<SequenceInput>& candidates,
                         int label, const Mat<T>& w, const Mat<T>& b, Mat<T>* grad_w,
                         Mat<T>* grad_b, Mode mode, Rng* rng, FullModel<T>* grads,
                         double grad_scale) {
    const int n = static_cast<int>(candidates.size());
    if (n < 2) throw std::invalid_argument("choice loss needs at least 2 candidates");
    if (label < 0 || label >= n) throw std::invalid_argument("label out of range");

    const bool want_grads = grads != nullptr;
    std::vector<ForwardCache<T>> caches(want_grads ? static_cast<size_t>(n) : 0);
    std::vector<std::vector<T>> cls(static_cast<size_t>(n));
    std::vector<double> logits(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        ForwardCache<T>* cache = want_grads ? &caches[static_cast<size_t>(i)] : nullptr;
        Mat<T> hidden = model::forward(m.encoder, candidates[static_cast<size_t>(i)], mode, rng,
                                       cache);
        cls[static_cast<size_t>(i)] = model::cls_state(hidden);
        logits[static_cast<size_t>(i)] =
            static_cast<double>(k::dot(cls[static_cast<size_t>(i)].data(), w.data(), w.cols)) +
            static_cast<double>(b.v[0]);
    }

    const SoftmaxCe ce = softmax_ce(logits, label);
    if (want_grads) {
        for (int i = 0; i < n; ++i) {
            const double dlogit = (ce.probs[static_cast<size_t>(i)] - (i == label ? 1.0 : 0.0)) *
                                  grad_scale;
            const T dl = static_cast<T>(dlogit);
            k::axpy(dl, cls[static_cast<size_t>(i)].data(), grad_w->data(), w.cols);
            grad_b->v[0] += dl;
            Mat<T> d_hidden(candidates[static_cast<size_t>(i)].length(), m.config().d_model);
            k::axpy(dl, w.data(), d_hidden.row(0), w.cols);
            model::backward(m.encoder, caches[static_cast<size_t>(i)], d_hidden, grads->encoder);
        }
    }

    ChoiceResult res;
    res.loss = ce.loss;
    res.predicted = ce.argmax;
    res.logits = logits;
    return res;
}

}  // namespace

// ------------------------------------------------------------- task losses

template <typename T>
ChoiceResult qa_loss(const FullModel<T>& m, const QaItem& item, Mode mode, Rng* rng,
                     FullModel<T>* grads, double grad_scale) {
    if (item.options.size() < 2) throw std::invalid_argument("QA item needs >= 2 options");
    std::vector<SequenceInput> candidates;
    candidates.reserve(item.options.size());
    for (const auto& opt : item.options) {
        candidates.push_back(
            model::format_qa_input(item.context, item.question, opt, m.config().max_len));
    }
    return choice_loss(m, candidates, item.gold, m.heads.qa_w, m.heads.qa_b,
                       grads ? &grads->heads.qa_w : nullptr, grads ? &grads->heads.qa_b : nullptr,
                       mode, rng, grads, grad_scale);
}

template <typename T>
ChoiceResult crl_loss(const FullModel<T>& m, const taskgen::CrlInstance& inst, Mode mode, Rng* rng,
                      FullModel<T>* grads, double grad_scale) {
    std::vector<SequenceInput> candidates;
    for (const auto& cand : inst.candidates) {
        candidates.push_back(model::format_single(cand, m.config().max_len));
    }
    return choice_loss(m, candidates, inst.label, m.heads.crl_w, m.heads.crl_b,
                       grads ? &grads->heads.crl_w : nullptr,
                       grads ? &grads->heads.crl_b : nullptr, mode, rng, grads, grad_scale);
}

template <typename T>
ChoiceResult jp_loss(const FullModel<T>& m, const taskgen::JigsawInstance& inst, Mode mode,
                     Rng* rng, FullModel<T>* grads, double grad_scale) {
    std::vector<SequenceInput> candidates;
    for (int i = 0; i < inst.candidate_count(); ++i) {
        candidates.push_back(model::format_segments(inst.candidate(i), m.config().max_len));
    }
    return choice_loss(m, candidates, inst.label, m.heads.jp_w, m.heads.jp_b,
                       grads ? &grads->heads.jp_w : nullptr, grads ? &grads->heads.jp_b : nullptr,
                       mode, rng, grads, grad_scale);
}

template <typename T>
ChoiceResult bsop_loss(const FullModel<T>& m, const taskgen::BsopInstance& inst, Mode mode,
                       Rng* rng, FullModel<T>* grads, double grad_scale) {
    const SequenceInput input = model::format_pair(inst.first, inst.second, m.config().max_len);
    const int label = inst.label == taskgen::BsopLabel::original ? 0 : 1;
    const int d = m.config().d_model;

    const bool want_grads = grads != nullptr;
    ForwardCache<T> cache;
    Mat<T> hidden = model::forward(m.encoder, input, mode, rng, want_grads ? &cache : nullptr);
    const std::vector<T> cls = model::cls_state(hidden);

    std::vector<double> logits(2);
    for (int c = 0; c < 2; ++c) {
        logits[static_cast<size_t>(c)] =
            static_cast<double>(k::dot(cls.data(), m.heads.bsop_w.row(c), d)) +
            static_cast<double>(m.heads.bsop_b.v[static_cast<size_t>(c)]);
    }
    const SoftmaxCe ce = softmax_ce(logits, label);

    if (want_grads) {
        Mat<T> d_hidden(input.length(), d);
        for (int c = 0; c < 2; ++c) {
            const T dl = static_cast<T>(
                (ce.probs[static_cast<size_t>(c)] - (c == label ? 1.0 : 0.0)) * grad_scale);
            k::axpy(dl, cls.data(), grads->heads.bsop_w.row(c), d);
            grads->heads.bsop_b.v[static_cast<size_t>(c)] += dl;
            k::axpy(dl, m.heads.bsop_w.row(c), d_hidden.row(0), d);
        }
        model::backward(m.encoder, cache, d_hidden, grads->encoder);
    }

    ChoiceResult res;
    res.loss = ce.loss;
    res.predicted = ce.argmax;
    res.logits = logits;
    return res;
}

template <typename T>
MaskedLossResult masked_lm_loss(const FullModel<T>& m, const taskgen::MaskedInstance& inst,
                                Mode mode, Rng* rng, FullModel<T>* grads, double grad_scale) {
    if (inst.targets.empty()) throw std::invalid_argument("masked instance has no targets");
    const SequenceInput input = model::wrap_preformatted(inst.input_ids);
    const int d = m.config().d_model;
    const int vocab = m.config().vocab_size;

    const bool want_grads = grads != nullptr;
    ForwardCache<T> cache;
    Mat<T> hidden = model::forward(m.encoder, input, mode, rng, want_grads ? &cache : nullptr);

    MaskedLossResult res;
    res.targets = static_cast<long long>(inst.targets.size());
    Mat<T> d_hidden;
    if (want_grads) d_hidden = Mat<T>(input.length(), d);
    const double per_target = 1.0 / static_cast<double>(inst.targets.size());

    std::vector<T> logits(static_cast<size_t>(vocab));
    for (const auto& [pos, orig] : inst.targets) {
        if (pos < 0 || pos >= input.length()) {
            throw std::invalid_argument("masked target position out of range");
        }
        k::matmul_nn(hidden.row(pos), m.heads.lm_w.data(), logits.data(), 1, d, vocab, false);
        k::axpy(T(1), m.heads.lm_b.data(), logits.data(), vocab);

        std::vector<double> dl(static_cast<size_t>(vocab));
        for (int i = 0; i < vocab; ++i) dl[static_cast<size_t>(i)] = static_cast<double>(
            logits[static_cast<size_t>(i)]);
        const SoftmaxCe ce = softmax_ce(dl, orig);
        res.loss += ce.loss * per_target;
        if (ce.argmax == orig) ++res.correct;

        if (want_grads) {
            std::vector<T> dlogits(static_cast<size_t>(vocab));
            const double s = grad_scale * per_target;
            for (int i = 0; i < vocab; ++i) {
                dlogits[static_cast<size_t>(i)] = static_cast<T>(
                    (ce.probs[static_cast<size_t>(i)] - (i == orig ? 1.0 : 0.0)) * s);
            }
            // d_h = lm_w . dlogits ; dlm_w += h^T dlogits ; dlm_b += dlogits
            k::matmul_nt(dlogits.data(), m.heads.lm_w.data(), d_hidden.row(pos), 1, vocab, d,
                         true);
            k::matmul_tn(hidden.row(pos), dlogits.data(), grads->heads.lm_w.data(), 1, d, vocab,
                         true);
            k::axpy(T(1), dlogits.data(), grads->heads.lm_b.data(), vocab);
        }
    }
    if (want_grads) model::backward(m.encoder, cache, d_hidden, grads->encoder);
    return res;
}

// ------------------------------------------------------------- joint loss

template <typename T>
LossReport joint_loss(const FullModel<T>& m, const Batch& batch, const LossWeights& weights,
                      Mode mode, Rng* rng, FullModel<T>* grads) {
    weights.validate();
    if (batch.qa.empty()) throw std::invalid_argument("batch needs at least one QA instance");

    LossReport report;

    {
        const double scale = 1.0 / static_cast<double>(batch.qa.size());
        for (const QaItem* item : batch.qa) {
            const ChoiceResult r = qa_loss(m, *item, mode, rng, grads, scale);
            report.qa.raw += r.loss * scale;
            report.qa.correct += r.predicted == item->gold ? 1 : 0;
        }
        report.qa.count = static_cast<long long>(batch.qa.size());
        report.qa.total = report.qa.count;
        report.qa.weighted = report.qa.raw;
    }

    auto run_choice = [&](auto const& instances, double weight, ComponentReport& comp,
                          auto&& loss_fn, auto&& label_of) {
        if (instances.empty()) return;
        const double n = static_cast<double>(instances.size());
        FullModel<T>* g = weight > 0.0 ? grads : nullptr;
        const double scale = weight / n;
        for (const auto* inst : instances) {
            const ChoiceResult r = loss_fn(*inst, g, scale);
            comp.raw += r.loss / n;
            comp.correct += r.predicted == label_of(*inst) ? 1 : 0;
        }
        comp.count = static_cast<long long>(instances.size());
        comp.total = comp.count;
        comp.weighted = weight * comp.raw;
    };

    run_choice(batch.crl, weights.alpha, report.crl,
               [&](const taskgen::CrlInstance& i, FullModel<T>* g, double s) {
                   return crl_loss(m, i, mode, rng, g, s);
               },
               [](const taskgen::CrlInstance& i) { return i.label; });
    run_choice(batch.jp, weights.beta, report.jp,
               [&](const taskgen::JigsawInstance& i, FullModel<T>* g, double s) {
                   return jp_loss(m, i, mode, rng, g, s);
               },
               [](const taskgen::JigsawInstance& i) { return i.label; });
    run_choice(batch.bsop, weights.gamma, report.bsop,
               [&](const taskgen::BsopInstance& i, FullModel<T>* g, double s) {
                   return bsop_loss(m, i, mode, rng, g, s);
               },
               [](const taskgen::BsopInstance& i) {
                   return i.label == taskgen::BsopLabel::original ? 0 : 1;
               });

    auto run_masked = [&](auto const& instances, double weight, ComponentReport& comp) {
        if (instances.empty()) return;
        const double n = static_cast<double>(instances.size());
        FullModel<T>* g = weight > 0.0 ? grads : nullptr;
        const double scale = weight / n;
        for (const auto* inst : instances) {
            const MaskedLossResult r = masked_lm_loss(m, *inst, mode, rng, g, scale);
            comp.raw += r.loss / n;
            comp.correct += r.correct;
            comp.total += r.targets;
        }
        comp.count = static_cast<long long>(instances.size());
        comp.weighted = weight * comp.raw;
    };

    run_masked(batch.mem, weights.lambda_, report.mem);
    run_masked(batch.mlm, weights.delta, report.mlm);

    report.total = report.qa.weighted + report.crl.weighted + report.jp.weighted +
                   report.bsop.weighted + report.mem.weighted + report.mlm.weighted;
    if (!std::isfinite(report.total)) throw std::runtime_error("non-finite joint loss");
    return report;
}

// ------------------------------------------------------------- instantiations

#define ELBERTO_INSTANTIATE(T)                                                                  \
    template struct HeadParams<T>;                                                              \
    template struct FullModel<T>;                                                               \
    template ChoiceResult qa_loss<T>(const FullModel<T>&, const QaItem&, Mode, Rng*,            \
                                     FullModel<T>*, double);                                    \
    template ChoiceResult crl_loss<T>(const FullModel<T>&, const taskgen::CrlInstance&, Mode,   \
                                      Rng*, FullModel<T>*, double);                             \
    template ChoiceResult jp_loss<T>(const FullModel<T>&, const taskgen::JigsawInstance&, Mode, \
                                     Rng*, FullModel<T>*, double);                              \
    template ChoiceResult bsop_loss<T>(const FullModel<T>&, const taskgen::BsopInstance&, Mode, \
                                       Rng*, FullModel<T>*, double);                            \
    template MaskedLossResult masked_lm_loss<T>(const FullModel<T>&,                            \
                                                const taskgen::MaskedInstance&, Mode, Rng*,     \
                                                FullModel<T>*, double);                         \
    template LossReport joint_loss<T>(const FullModel<T>&, const Batch&, const LossWeights&,    \
                                      Mode, Rng*, FullModel<T>*);

ELBERTO_INSTANTIATE(float)
ELBERTO_INSTANTIATE(double)

#undef ELBERTO_INSTANTIATE

}  // namespace elberto::objectives
