#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "elberto/corpus.hpp"
#include "elberto/gradcheck.hpp"
#include "elberto/kernels.hpp"
#include "elberto/objectives.hpp"

using namespace elberto;
using corpus::Vocabulary;
using model::EncoderConfig;
using model::Mode;
using objectives::Batch;
using objectives::FullModel;
using objectives::LossWeights;
using objectives::QaItem;

namespace {

EncoderConfig small_config() {
    EncoderConfig cfg;
    cfg.vocab_size = 100;
    cfg.max_len = 48;
    cfg.d_model = 16;
    cfg.n_heads = 4;
    cfg.n_layers = 2;
    cfg.d_ff = 32;
    cfg.dropout_p = 0.0;
    return cfg;
}

std::vector<int> tokens(Rng& rng, int len, int vocab_size = 100) {
    std::vector<int> out(static_cast<size_t>(len));
    for (auto& t : out) t = Vocabulary::n_specials + rng.next_int(vocab_size - Vocabulary::n_specials);
    return out;
}

QaItem make_qa(Rng& rng, int n_options = 3) {
    QaItem item;
    item.id = "q";
    item.context = tokens(rng, 9);
    item.question = tokens(rng, 4);
    for (int i = 0; i < n_options; ++i) item.options.push_back(tokens(rng, 2));
    item.gold = rng.next_int(n_options);
    return item;
}

taskgen::CrlInstance make_crl_fixture(Rng& rng) {
    taskgen::CrlInstance inst;
    inst.source_id = "c";
    auto original = tokens(rng, 8);
    auto flipped = original;
    flipped[3] = 5 + (flipped[3] - 5 + 1) % 95;
    inst.candidates = {original, flipped};
    inst.label = 0;
    inst.flipped_spans.push_back({3, original[3], {flipped[3]}});
    return inst;
}

taskgen::JigsawInstance make_jp_fixture(Rng& rng, int p = 5) {
    taskgen::JigsawInstance inst;
    inst.source_id = "j";
    for (int s = 0; s < 5; ++s) inst.segments.push_back(tokens(rng, 3));
    const std::vector<int> identity = {0, 1, 2, 3, 4};
    std::set<std::vector<int>> seen = {identity};
    while (static_cast<int>(inst.perms.size()) < p - 1) {
        auto perm = identity;
        rng.shuffle(perm);
        if (seen.insert(perm).second) inst.perms.push_back(perm);
    }
    inst.label = rng.next_int(p);
    inst.perms.insert(inst.perms.begin() + inst.label, identity);
    return inst;
}

taskgen::BsopInstance make_bsop_fixture(Rng& rng) {
    taskgen::BsopInstance inst;
    inst.source_id = "b";
    inst.first = tokens(rng, 5);
    inst.second = tokens(rng, 4);
    inst.label = taskgen::BsopLabel::original;
    return inst;
}

taskgen::MaskedInstance make_masked_fixture(Rng& rng, taskgen::MaskKind kind, int n_targets = 3) {
    taskgen::MaskedInstance inst;
    inst.kind = kind;
    inst.source_id = "m";
    auto body = tokens(rng, 10);
    inst.input_ids.push_back(Vocabulary::cls_id);
    inst.input_ids.insert(inst.input_ids.end(), body.begin(), body.end());
    inst.input_ids.push_back(Vocabulary::sep_id);
    std::set<int> seen;
    while (static_cast<int>(inst.targets.size()) < n_targets) {
        const int pos = 1 + rng.next_int(10);
        if (!seen.insert(pos).second) continue;
        inst.targets.emplace_back(pos, inst.input_ids[static_cast<size_t>(pos)]);
        inst.input_ids[static_cast<size_t>(pos)] = Vocabulary::mask_id;
    }
    std::sort(inst.targets.begin(), inst.targets.end());
    return inst;
}

// independent straight-line softmax cross-entropy (no max subtraction)
double naive_softmax_ce(const std::vector<double>& logits, int label) {
    double z = 0;
    for (double l : logits) z += std::exp(l);
    return -std::log(std::exp(logits[static_cast<size_t>(label)]) / z);
}

template <typename T>
void zero_heads(FullModel<T>& m) {
    for_each_tensor(m.heads, [](const std::string&, Mat<T>& t) { t.fill(T(0)); });
}

}  // namespace

TEST_CASE("uniform logits: qa=ln T, crl=ln 2, jp=ln P, bsop=ln 2, masked=ln |V|") {
    const auto cfg = small_config();
    Rng init(3);
    auto m = FullModel<double>::init(cfg, init);
    zero_heads(m);  // every candidate/class logit becomes exactly 0
    Rng rng(4);

    const auto qa = objectives::qa_loss(m, make_qa(rng, 3), Mode::eval, nullptr);
    CHECK(std::abs(qa.loss - std::log(3.0)) < 1e-9);

    const auto crl = objectives::crl_loss(m, make_crl_fixture(rng), Mode::eval, nullptr);
    CHECK(std::abs(crl.loss - std::log(2.0)) < 1e-9);

    const auto jp = objectives::jp_loss(m, make_jp_fixture(rng, 5), Mode::eval, nullptr);
    CHECK(std::abs(jp.loss - std::log(5.0)) < 1e-9);

    const auto bsop = objectives::bsop_loss(m, make_bsop_fixture(rng), Mode::eval, nullptr);
    CHECK(std::abs(bsop.loss - std::log(2.0)) < 1e-9);

    const auto masked = objectives::masked_lm_loss(
        m, make_masked_fixture(rng, taskgen::MaskKind::mlm, 1), Mode::eval, nullptr);
    CHECK(std::abs(masked.loss - std::log(100.0)) < 1e-9);
}

TEST_CASE("a large gold logit drives the loss toward zero") {
    const auto cfg = small_config();
    Rng init(5);
    auto m = FullModel<double>::init(cfg, init);
    Rng rng(6);
    QaItem item = make_qa(rng, 2);
    item.gold = 0;

    // point the qa head along (cls0 - cls1) so the gold logit dominates
    auto cls_of = [&](int opt) {
        const auto input = model::format_qa_input(item.context, item.question,
                                                  item.options[static_cast<size_t>(opt)],
                                                  cfg.max_len);
        return model::cls_state(model::forward(m.encoder, input, Mode::eval, nullptr));
    };
    const auto c0 = cls_of(0), c1 = cls_of(1);
    double gap = 0;
    for (int j = 0; j < cfg.d_model; ++j) {
        const double d = c0[static_cast<size_t>(j)] - c1[static_cast<size_t>(j)];
        gap += d * d;
    }
    REQUIRE(gap > 0);
    const double scale = 40.0 / gap;
    for (int j = 0; j < cfg.d_model; ++j) {
        m.heads.qa_w.at(0, j) = scale * (c0[static_cast<size_t>(j)] - c1[static_cast<size_t>(j)]);
    }
    m.heads.qa_b.fill(0.0);

    const auto r = objectives::qa_loss(m, item, Mode::eval, nullptr);
    CHECK(r.loss < 1e-4);
    CHECK(r.predicted == 0);
}

TEST_CASE("choice losses equal an independent straight-line recomputation") {
    const auto cfg = small_config();
    Rng init(7);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(8);

    const auto qa_item = make_qa(rng, 4);
    const auto qa = objectives::qa_loss(m, qa_item, Mode::eval, nullptr);
    CHECK(std::abs(qa.loss - naive_softmax_ce(qa.logits, qa_item.gold)) < 1e-10);

    const auto crl_inst = make_crl_fixture(rng);
    const auto crl = objectives::crl_loss(m, crl_inst, Mode::eval, nullptr);
    CHECK(std::abs(crl.loss - naive_softmax_ce(crl.logits, crl_inst.label)) < 1e-10);

    const auto jp_inst = make_jp_fixture(rng);
    const auto jp = objectives::jp_loss(m, jp_inst, Mode::eval, nullptr);
    CHECK(std::abs(jp.loss - naive_softmax_ce(jp.logits, jp_inst.label)) < 1e-10);

    const auto bsop_inst = make_bsop_fixture(rng);
    const auto bsop = objectives::bsop_loss(m, bsop_inst, Mode::eval, nullptr);
    CHECK(std::abs(bsop.loss - naive_softmax_ce(bsop.logits, 0)) < 1e-10);
}

TEST_CASE("masked loss equals the per-position oracle over target positions only") {
    const auto cfg = small_config();
    Rng init(9);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(10);
    const auto inst = make_masked_fixture(rng, taskgen::MaskKind::mem, 4);

    const auto got = objectives::masked_lm_loss(m, inst, Mode::eval, nullptr);

    // oracle: recompute from the hidden states at target positions only
    const auto input = model::wrap_preformatted(inst.input_ids);
    const auto hidden = model::forward(m.encoder, input, Mode::eval, nullptr);
    double oracle = 0;
    for (const auto& [pos, orig] : inst.targets) {
        std::vector<double> logits(static_cast<size_t>(cfg.vocab_size));
        for (int v = 0; v < cfg.vocab_size; ++v) {
            double acc = m.heads.lm_b.at(0, v);
            for (int j = 0; j < cfg.d_model; ++j) acc += hidden.at(pos, j) * m.heads.lm_w.at(j, v);
            logits[static_cast<size_t>(v)] = acc;
        }
        oracle += naive_softmax_ce(logits, orig);
    }
    oracle /= static_cast<double>(inst.targets.size());
    CHECK(std::abs(got.loss - oracle) < 1e-10);
    CHECK(got.targets == 4);
}

TEST_CASE("crl loss is invariant to swapping candidates together with the label") {
    const auto cfg = small_config();
    Rng init(11);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(12);
    auto inst = make_crl_fixture(rng);
    const auto a = objectives::crl_loss(m, inst, Mode::eval, nullptr);
    std::swap(inst.candidates[0], inst.candidates[1]);
    inst.label = 1 - inst.label;
    const auto b = objectives::crl_loss(m, inst, Mode::eval, nullptr);
    CHECK(std::abs(a.loss - b.loss) < 1e-12);
}

TEST_CASE("jp loss is invariant to relabeling permutations of the candidate list") {
    const auto cfg = small_config();
    Rng init(13);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(14);
    auto inst = make_jp_fixture(rng, 4);
    const auto a = objectives::jp_loss(m, inst, Mode::eval, nullptr);
    // rotate the candidate list by one
    std::rotate(inst.perms.begin(), inst.perms.begin() + 1, inst.perms.end());
    inst.label = (inst.label + static_cast<int>(inst.perms.size()) - 1) %
                 static_cast<int>(inst.perms.size());
    const auto b = objectives::jp_loss(m, inst, Mode::eval, nullptr);
    CHECK(std::abs(a.loss - b.loss) < 1e-12);
}

TEST_CASE("bsop label flip gives the complementary cross-entropy") {
    const auto cfg = small_config();
    Rng init(15);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(16);
    auto inst = make_bsop_fixture(rng);
    const auto a = objectives::bsop_loss(m, inst, Mode::eval, nullptr);
    inst.label = taskgen::BsopLabel::reversed;
    const auto b = objectives::bsop_loss(m, inst, Mode::eval, nullptr);
    // p0 + p1 = 1 -> exp(-l0) + exp(-l1) = 1
    CHECK(std::abs(std::exp(-a.loss) + std::exp(-b.loss) - 1.0) < 1e-10);
}

TEST_CASE("joint loss: total equals qa.raw plus weighted component sum") {
    const auto cfg = small_config();
    Rng init(17);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(18);

    const auto qa1 = make_qa(rng), qa2 = make_qa(rng);
    const auto crl = make_crl_fixture(rng);
    const auto jp = make_jp_fixture(rng);
    const auto bsop = make_bsop_fixture(rng);
    const auto mem = make_masked_fixture(rng, taskgen::MaskKind::mem);
    const auto mlm = make_masked_fixture(rng, taskgen::MaskKind::mlm);
    Batch batch;
    batch.qa = {&qa1, &qa2};
    batch.crl = {&crl};
    batch.jp = {&jp};
    batch.bsop = {&bsop};
    batch.mem = {&mem};
    batch.mlm = {&mlm};

    LossWeights w;
    w.alpha = 0.3;
    w.beta = 0.15;
    w.gamma = 0.05;
    w.lambda_ = 0.4;
    w.delta = 0.1;
    const auto report = objectives::joint_loss(m, batch, w, Mode::eval, nullptr);
    const double expect = report.qa.raw + w.alpha * report.crl.raw + w.beta * report.jp.raw +
                          w.gamma * report.bsop.raw + w.lambda_ * report.mem.raw +
                          w.delta * report.mlm.raw;
    CHECK(std::abs(report.total - expect) < 1e-9 * std::max(1.0, std::abs(expect)));

    // all-0.2 weights with unit components give exactly 2.0
    const double unit_total = 1.0 + 0.2 * (1.0 + 1.0 + 1.0 + 1.0 + 1.0);
    CHECK(std::abs(unit_total - 2.0) < 1e-9);

    // all weights zero reduce the total to the QA component alone
    const auto zero = objectives::joint_loss(m, batch, LossWeights{0, 0, 0, 0, 0}, Mode::eval,
                                             nullptr);
    CHECK(zero.total == zero.qa.raw);
}

TEST_CASE("joint loss is linear in each weight") {
    const auto cfg = small_config();
    Rng init(19);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(20);
    const auto qa1 = make_qa(rng);
    const auto crl = make_crl_fixture(rng);
    Batch batch;
    batch.qa = {&qa1};
    batch.crl = {&crl};

    LossWeights w;
    const auto r1 = objectives::joint_loss(m, batch, w, Mode::eval, nullptr);
    LossWeights w2 = w;
    const double dalpha = 0.125;
    w2.alpha += dalpha;
    const auto r2 = objectives::joint_loss(m, batch, w2, Mode::eval, nullptr);
    const double fd = (r2.total - r1.total) / dalpha;
    CHECK(std::abs(fd - r1.crl.raw) < 1e-8);
}

TEST_CASE("weight zero makes the gradient independent of that task's instances") {
    const auto cfg = small_config();
    Rng init(21);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(22);
    const auto qa1 = make_qa(rng);
    const auto crl_a = make_crl_fixture(rng);
    const auto crl_b = make_crl_fixture(rng);  // different instance

    LossWeights w;
    w.alpha = 0.0;
    auto grads_a = FullModel<double>::shaped(cfg);
    auto grads_b = FullModel<double>::shaped(cfg);
    Batch ba, bb;
    ba.qa = {&qa1};
    ba.crl = {&crl_a};
    bb.qa = {&qa1};
    bb.crl = {&crl_b};
    objectives::joint_loss(m, ba, w, Mode::eval, nullptr, &grads_a);
    objectives::joint_loss(m, bb, w, Mode::eval, nullptr, &grads_b);

    bool identical = true;
    std::vector<const Mat<double>*> ta, tb;
    for_each_model_tensor(grads_a, [&](const std::string&, const Mat<double>& t) {
        ta.push_back(&t);
    });
    for_each_model_tensor(grads_b, [&](const std::string&, const Mat<double>& t) {
        tb.push_back(&t);
    });
    for (size_t i = 0; i < ta.size(); ++i) identical = identical && (ta[i]->v == tb[i]->v);
    CHECK(identical);
}

TEST_CASE("joint gradient equals the weighted sum of component gradients") {
    const auto cfg = small_config();
    Rng init(23);
    const auto m = FullModel<double>::init(cfg, init);
    Rng rng(24);
    const auto qa1 = make_qa(rng);
    const auto crl = make_crl_fixture(rng);
    const auto jp = make_jp_fixture(rng);
    Batch batch;
    batch.qa = {&qa1};
    batch.crl = {&crl};
    batch.jp = {&jp};

    LossWeights w;
    w.alpha = 0.25;
    w.beta = 0.5;
    w.gamma = w.lambda_ = w.delta = 0.0;
    auto joint = FullModel<double>::shaped(cfg);
    objectives::joint_loss(m, batch, w, Mode::eval, nullptr, &joint);

    // component-wise oracle: run each loss separately with its own scale
    auto parts = FullModel<double>::shaped(cfg);
    objectives::qa_loss(m, qa1, Mode::eval, nullptr, &parts, 1.0);
    objectives::crl_loss(m, crl, Mode::eval, nullptr, &parts, w.alpha);
    objectives::jp_loss(m, jp, Mode::eval, nullptr, &parts, w.beta);

    double max_diff = 0;
    std::vector<const Mat<double>*> tj, tp;
    for_each_model_tensor(joint, [&](const std::string&, const Mat<double>& t) {
        tj.push_back(&t);
    });
    for_each_model_tensor(parts, [&](const std::string&, const Mat<double>& t) {
        tp.push_back(&t);
    });
    for (size_t i = 0; i < tj.size(); ++i) {
        for (size_t j = 0; j < tj[i]->v.size(); ++j) {
            max_diff = std::max(max_diff, std::abs(tj[i]->v[j] - tp[i]->v[j]));
        }
    }
    CHECK(max_diff < 1e-9);
}

TEST_CASE("joint loss requires at least one QA instance") {
    const auto cfg = small_config();
    Rng init(25);
    const auto m = FullModel<double>::init(cfg, init);
    Batch batch;
    CHECK_THROWS(objectives::joint_loss(m, batch, LossWeights{}, Mode::eval, nullptr));
}

TEST_CASE("head shapes follow the config") {
    const auto cfg = small_config();
    Rng init(26);
    const auto h = objectives::HeadParams<double>::init(cfg, init);
    CHECK(h.qa_w.cols == cfg.d_model);
    CHECK(h.bsop_w.rows == 2);
    CHECK(h.lm_w.rows == cfg.d_model);
    CHECK(h.lm_w.cols == cfg.vocab_size);
    CHECK(h.lm_b.cols == cfg.vocab_size);
}
