#pragma once

#include <string>
#include <vector>

#include "elberto/encoder.hpp"
#include "elberto/taskgen.hpp"

namespace elberto::objectives {

using model::EncoderConfig;
using model::Mode;

// One logit per candidate for QA/CRL/JP, two classes for BSOP, and a shared
// vocabulary projection for MEM and MLM.
template <typename T>
struct HeadParams {
    Mat<T> qa_w, qa_b;      // [1 x d], [1 x 1]
    Mat<T> crl_w, crl_b;    // [1 x d], [1 x 1]
    Mat<T> jp_w, jp_b;      // [1 x d], [1 x 1]
    Mat<T> bsop_w, bsop_b;  // [2 x d], [1 x 2]
    Mat<T> lm_w, lm_b;      // [d x V], [1 x V]

    static HeadParams shaped(const EncoderConfig& config);
    static HeadParams init(const EncoderConfig& config, Rng& rng);
};

template <typename T, typename F>
void for_each_tensor(HeadParams<T>& h, F&& f) {
    f("heads.qa.w", h.qa_w);
    f("heads.qa.b", h.qa_b);
    f("heads.crl.w", h.crl_w);
    f("heads.crl.b", h.crl_b);
    f("heads.jp.w", h.jp_w);
    f("heads.jp.b", h.jp_b);
    f("heads.bsop.w", h.bsop_w);
    f("heads.bsop.b", h.bsop_b);
    f("heads.lm.w", h.lm_w);
    f("heads.lm.b", h.lm_b);
}

template <typename T>
struct FullModel {
    model::EncoderParams<T> encoder;
    HeadParams<T> heads;

    static FullModel shaped(const EncoderConfig& config);
    static FullModel init(const EncoderConfig& config, Rng& rng);
    const EncoderConfig& config() const { return encoder.config; }
};

template <typename T, typename F>
void for_each_model_tensor(FullModel<T>& m, F&& f) {
    model::for_each_tensor(m.encoder, f);
    for_each_tensor(m.heads, f);
}

template <typename T, typename F>
void for_each_model_tensor(const FullModel<T>& m, F&& f) {
    for_each_model_tensor(const_cast<FullModel<T>&>(m),
                          [&](const std::string& name, Mat<T>& t) {
                              f(name, static_cast<const Mat<T>&>(t));
                          });
}

// alpha..delta weight CRL, JP, BSOP, MEM, MLM in that order; QA has weight 1.
struct LossWeights {
    double alpha = 0.2;
    double beta = 0.2;
    double gamma = 0.2;
    double lambda_ = 0.2;
    double delta = 0.2;

    void validate() const;  // each >= 0
};

struct ComponentReport {
    double raw = 0.0;       // mean loss over this component's instances
    double weighted = 0.0;  // weight * raw
    long long count = 0;
    long long correct = 0;  // prediction hits (per target position for mem/mlm)
    long long total = 0;    // prediction opportunities

    double accuracy() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
};

struct LossReport {
    double total = 0.0;
    ComponentReport qa, crl, jp, bsop, mem, mlm;

    std::string to_json(long long step) const;
};

// Pre-encoded QA example.
struct QaItem {
    std::string id;
    std::vector<int> context;
    std::vector<int> question;
    std::vector<std::vector<int>> options;
    int gold = 0;
    corpus::QType qtype = corpus::QType::unlabeled;
};

QaItem encode_qa(const corpus::QaExample& example, const corpus::Vocabulary& vocab);

struct Batch {
    std::vector<const QaItem*> qa;
    std::vector<const taskgen::CrlInstance*> crl;
    std::vector<const taskgen::JigsawInstance*> jp;
    std::vector<const taskgen::BsopInstance*> bsop;
    std::vector<const taskgen::MaskedInstance*> mem;
    std::vector<const taskgen::MaskedInstance*> mlm;
};

struct ChoiceResult {
    double loss = 0.0;
    int predicted = 0;
    std::vector<double> logits;
};

// Each loss op backpropagates grad_scale * dloss into grads when grads is
// non-null; pass mode=train with an rng for dropout, eval for deterministic
// scoring.

template <typename T>
ChoiceResult qa_loss(const FullModel<T>& m, const QaItem& item, Mode mode, Rng* rng,
                     FullModel<T>* grads = nullptr, double grad_scale = 1.0);

template <typename T>
ChoiceResult crl_loss(const FullModel<T>& m, const taskgen::CrlInstance& inst, Mode mode,
                      Rng* rng, FullModel<T>* grads = nullptr, double grad_scale = 1.0);

template <typename T>
ChoiceResult jp_loss(const FullModel<T>& m, const taskgen::JigsawInstance& inst, Mode mode,
                     Rng* rng, FullModel<T>* grads = nullptr, double grad_scale = 1.0);

template <typename T>
ChoiceResult bsop_loss(const FullModel<T>& m, const taskgen::BsopInstance& inst, Mode mode,
                       Rng* rng, FullModel<T>* grads = nullptr, double grad_scale = 1.0);

struct MaskedLossResult {
    double loss = 0.0;       // mean over target positions
    long long correct = 0;
    long long targets = 0;
};

template <typename T>
MaskedLossResult masked_lm_loss(const FullModel<T>& m, const taskgen::MaskedInstance& inst,
                                Mode mode, Rng* rng, FullModel<T>* grads = nullptr,
                                double grad_scale = 1.0);

// total = L_QA + alpha L_CRL + beta L_JP + gamma L_BSOP + lambda L_MEM +
// delta L_MLM, each component a per-instance mean. Gradients of all
// components accumulate into one shared structure.
template <typename T>
LossReport joint_loss(const FullModel<T>& m, const Batch& batch, const LossWeights& weights,
                      Mode mode, Rng* rng, FullModel<T>* grads = nullptr);

}  // namespace elberto::objectives
