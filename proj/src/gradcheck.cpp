#include "elberto/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace elberto::gradcheck {

using corpus::Vocabulary;
using objectives::Batch;
using objectives::FullModel;
using objectives::QaItem;

model::EncoderConfig toy_config() {
    model::EncoderConfig cfg;
    cfg.vocab_size = 40;
    cfg.max_len = 64;
    cfg.d_model = 16;
    cfg.n_heads = 4;
    cfg.n_layers = 2;
    cfg.d_ff = 32;
    cfg.dropout_p = 0.0;
    cfg.n_types = 2;
    return cfg;
}

namespace {

std::vector<int> random_tokens(Rng& rng, int len, int vocab_size) {
    std::vector<int> out(static_cast<size_t>(len));
    for (auto& t : out) {
        t = Vocabulary::n_specials + rng.next_int(vocab_size - Vocabulary::n_specials);
    }
    return out;
}

// A fixed synthetic batch exercising every head.
struct GradCheckBatch {
    std::vector<QaItem> qa;
    std::vector<taskgen::CrlInstance> crl;
    std::vector<taskgen::JigsawInstance> jp;
    std::vector<taskgen::BsopInstance> bsop;
    std::vector<taskgen::MaskedInstance> mem;
    std::vector<taskgen::MaskedInstance> mlm;

    Batch view() const {
        Batch b;
        for (const auto& i : qa) b.qa.push_back(&i);
        for (const auto& i : crl) b.crl.push_back(&i);
        for (const auto& i : jp) b.jp.push_back(&i);
        for (const auto& i : bsop) b.bsop.push_back(&i);
        for (const auto& i : mem) b.mem.push_back(&i);
        for (const auto& i : mlm) b.mlm.push_back(&i);
        return b;
    }
};

GradCheckBatch make_batch(const model::EncoderConfig& cfg, Rng& rng) {
    GradCheckBatch gb;

    for (int e = 0; e < 2; ++e) {
        QaItem item;
        item.id = "gradcheck-" + std::to_string(e);
        item.context = random_tokens(rng, 8, cfg.vocab_size);
        item.question = random_tokens(rng, 4, cfg.vocab_size);
        for (int t = 0; t < 3; ++t) item.options.push_back(random_tokens(rng, 2, cfg.vocab_size));
        item.gold = rng.next_int(3);
        gb.qa.push_back(std::move(item));
    }
    {
        taskgen::CrlInstance inst;
        inst.source_id = "gradcheck-crl";
        const auto original = random_tokens(rng, 9, cfg.vocab_size);
        auto flipped = original;
        const int pos = rng.next_int(9);
        taskgen::FlippedSpan span;
        span.pos = pos;
        span.original = original[static_cast<size_t>(pos)];
        span.replacement = random_tokens(rng, 2, cfg.vocab_size);
        flipped.erase(flipped.begin() + pos);
        flipped.insert(flipped.begin() + pos, span.replacement.begin(), span.replacement.end());
        inst.flipped_spans.push_back(span);
        inst.label = rng.coin() ? 0 : 1;
        if (inst.label == 0) {
            inst.candidates = {original, flipped};
        } else {
            inst.candidates = {flipped, original};
        }
        gb.crl.push_back(std::move(inst));
    }
    {
        taskgen::JigsawInstance inst;
        inst.source_id = "gradcheck-jp";
        for (int s = 0; s < 5; ++s) inst.segments.push_back(random_tokens(rng, 3, cfg.vocab_size));
        std::vector<int> identity = {0, 1, 2, 3, 4};
        std::set<std::vector<int>> seen = {identity};
        while (inst.perms.size() < 4) {
            auto p = identity;
            rng.shuffle(p);
            if (seen.insert(p).second) inst.perms.push_back(p);
        }
        inst.label = rng.next_int(5);
        inst.perms.insert(inst.perms.begin() + inst.label, identity);
        gb.jp.push_back(std::move(inst));
    }
    {
        taskgen::BsopInstance inst;
        inst.source_id = "gradcheck-bsop";
        inst.first = random_tokens(rng, 5, cfg.vocab_size);
        inst.second = random_tokens(rng, 6, cfg.vocab_size);
        inst.label = rng.coin() ? taskgen::BsopLabel::original : taskgen::BsopLabel::reversed;
        gb.bsop.push_back(std::move(inst));
    }
    for (taskgen::MaskKind kind : {taskgen::MaskKind::mem, taskgen::MaskKind::mlm}) {
        taskgen::MaskedInstance inst;
        inst.kind = kind;
        inst.source_id = kind == taskgen::MaskKind::mem ? "gradcheck-mem" : "gradcheck-mlm";
        auto body = random_tokens(rng, 10, cfg.vocab_size);
        inst.input_ids.push_back(Vocabulary::cls_id);
        inst.input_ids.insert(inst.input_ids.end(), body.begin(), body.end());
        inst.input_ids.push_back(Vocabulary::sep_id);
        for (int t = 0; t < 3; ++t) {
            const int pos = 1 + rng.next_int(10);
            const int orig = inst.input_ids[static_cast<size_t>(pos)];
            bool dup = false;
            for (const auto& [p, o] : inst.targets) dup = dup || p == pos;
            if (dup) continue;
            inst.targets.emplace_back(pos, orig);
            inst.input_ids[static_cast<size_t>(pos)] = Vocabulary::mask_id;
        }
        std::sort(inst.targets.begin(), inst.targets.end());
        (kind == taskgen::MaskKind::mem ? gb.mem : gb.mlm).push_back(std::move(inst));
    }
    return gb;
}

}  // namespace

GradCheckResult run(const model::EncoderConfig& config, const objectives::LossWeights& weights,
                    uint64_t seed, int n_samples, double h) {
    model::EncoderConfig cfg = config;
    cfg.dropout_p = 0.0;  // finite differences need a deterministic forward
    cfg.validate();

    Rng init_rng(derive_seed(seed, "gradcheck-init"));
    FullModel<double> model = FullModel<double>::init(cfg, init_rng);
    Rng batch_rng(derive_seed(seed, "gradcheck-batch"));
    const GradCheckBatch gb = make_batch(cfg, batch_rng);
    const Batch batch = gb.view();

    auto loss_at = [&]() {
        return objectives::joint_loss<double>(model, batch, weights, model::Mode::train, nullptr,
                                              nullptr)
            .total;
    };

    FullModel<double> grads = FullModel<double>::shaped(cfg);
    GradCheckResult result;
    result.loss =
        objectives::joint_loss(model, batch, weights, model::Mode::train, nullptr, &grads).total;

    // flatten tensor views in manifest order for uniform sampling
    std::vector<std::pair<std::string, Mat<double>*>> tensors;
    for_each_model_tensor(model, [&](const std::string& name, Mat<double>& t) {
        tensors.emplace_back(name, &t);
    });
    std::vector<Mat<double>*> grad_tensors;
    for_each_model_tensor(grads, [&](const std::string&, Mat<double>& t) {
        grad_tensors.push_back(&t);
    });
    size_t total_params = 0;
    for (const auto& [name, t] : tensors) total_params += t->size();

    Rng pick_rng(derive_seed(seed, "gradcheck-pick"));
    for (int s = 0; s < n_samples; ++s) {
        size_t flat = static_cast<size_t>(pick_rng.next_int(static_cast<int>(total_params)));
        size_t ti = 0;
        while (flat >= tensors[ti].second->size()) {
            flat -= tensors[ti].second->size();
            ++ti;
        }
        Mat<double>& tensor = *tensors[ti].second;
        const double saved = tensor.v[flat];
        tensor.v[flat] = saved + h;
        const double loss_plus = loss_at();
        tensor.v[flat] = saved - h;
        const double loss_minus = loss_at();
        tensor.v[flat] = saved;

        const double numeric = (loss_plus - loss_minus) / (2.0 * h);
        const double analytic = grad_tensors[ti]->v[flat];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
        const double rel = std::abs(analytic - numeric) / denom;
        ++result.n_checked;
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_tensor = tensors[ti].first;
            result.worst_index = static_cast<int>(flat);
            result.worst_analytic = analytic;
            result.worst_numeric = numeric;
        }
    }
    return result;
}

}  // namespace elberto::gradcheck
