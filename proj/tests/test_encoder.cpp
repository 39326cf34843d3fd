#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "elberto/corpus.hpp"
#include "elberto/encoder.hpp"
#include "elberto/gradcheck.hpp"
#include "elberto/kernels.hpp"

using namespace elberto;
using corpus::Vocabulary;
using model::EncoderConfig;
using model::EncoderParams;
using model::ForwardCache;
using model::Mode;
using model::SequenceInput;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.vocab_size = 50;
    cfg.max_len = 32;
    cfg.d_model = 32;
    cfg.n_heads = 4;
    cfg.n_layers = 2;
    cfg.d_ff = 64;
    cfg.dropout_p = 0.0;
    return cfg;
}

SequenceInput seq_of(std::initializer_list<int> body) {
    SequenceInput s;
    s.ids.push_back(Vocabulary::cls_id);
    for (int id : body) s.ids.push_back(id);
    s.ids.push_back(Vocabulary::sep_id);
    s.type_ids.assign(s.ids.size(), 0);
    s.attention_mask.assign(s.ids.size(), 1);
    return s;
}

}  // namespace

// ------------------------------------------------------------- formatting

TEST_CASE("format_qa_input: separator positions and type ids") {
    const std::vector<int> c = {10, 11, 12}, q = {13, 14}, a = {15};
    const auto s = model::format_qa_input(c, q, a, 64);
    REQUIRE(s.ids.size() == 10);
    CHECK(s.ids[0] == Vocabulary::cls_id);
    CHECK(s.ids[4] == Vocabulary::sep_id);
    CHECK(s.ids[7] == Vocabulary::sep_id);
    CHECK(s.ids[9] == Vocabulary::sep_id);
    for (int i = 0; i <= 4; ++i) CHECK(s.type_ids[static_cast<size_t>(i)] == 0);
    for (int i = 5; i <= 9; ++i) CHECK(s.type_ids[static_cast<size_t>(i)] == 1);
}

TEST_CASE("format_qa_input: truncation order keeps the answer intact") {
    std::vector<int> c(200, 10), q(80, 11), a(20, 12);
    const auto s = model::format_qa_input(c, q, a, 180);
    CHECK(s.ids.size() == 180);
    // answer survives: the 20 answer tokens precede the final [SEP]
    for (size_t i = s.ids.size() - 21; i + 1 < s.ids.size(); ++i) CHECK(s.ids[i] == 12);
    CHECK(s.ids.back() == Vocabulary::sep_id);
    // context absorbed the whole cut: 180 - 4 = 176 = |c'| + 80 + 20 -> |c'| = 76
    CHECK(std::count(s.ids.begin(), s.ids.end(), 10) == 76);
}

TEST_CASE("format_qa_input: question tail cut after context exhausted; answer floor 1") {
    std::vector<int> c(3, 10), q(300, 11), a(2, 12);
    const auto s = model::format_qa_input(c, q, a, 32);
    CHECK(static_cast<int>(s.ids.size()) <= 32);
    CHECK(std::count(s.ids.begin(), s.ids.end(), 10) == 0);  // context gone
    CHECK(std::count(s.ids.begin(), s.ids.end(), 12) == 2);  // answer intact

    std::vector<int> huge_a(100, 12);
    const auto s2 = model::format_qa_input(c, q, huge_a, 8);
    CHECK(std::count(s2.ids.begin(), s2.ids.end(), 12) >= 1);
    CHECK(static_cast<int>(s2.ids.size()) <= 8);

    CHECK_THROWS(model::format_qa_input(c, q, a, 4));  // specials + 1 answer token won't fit
}

TEST_CASE("sequence validation catches shape violations") {
    const auto cfg = tiny_config();
    SequenceInput s = seq_of({10, 11});
    s.validate(cfg);

    SequenceInput bad = s;
    bad.ids[0] = 10;  // no CLS
    CHECK_THROWS(bad.validate(cfg));

    bad = s;
    bad.type_ids.pop_back();
    CHECK_THROWS(bad.validate(cfg));

    bad = s;
    bad.ids.back() = 10;  // final attended not SEP
    CHECK_THROWS(bad.validate(cfg));
}

// ------------------------------------------------------------- forward

TEST_CASE("eval forward is deterministic and shaped (seq_len x d_model)") {
    const auto cfg = tiny_config();
    Rng rng(1);
    const auto params = EncoderParams<double>::init(cfg, rng);
    const auto input = seq_of({7, 8, 9, 10});
    const auto h1 = model::forward(params, input, Mode::eval, nullptr);
    const auto h2 = model::forward(params, input, Mode::eval, nullptr);
    CHECK(h1.rows == input.length());
    CHECK(h1.cols == cfg.d_model);
    CHECK(h1.v == h2.v);
}

TEST_CASE("extending an all-pad tail leaves attended positions unchanged") {
    const auto cfg = tiny_config();
    Rng rng(2);
    const auto params = EncoderParams<double>::init(cfg, rng);
    SequenceInput base = seq_of({7, 8, 9});
    SequenceInput padded = base;
    for (int i = 0; i < 4; ++i) {
        padded.ids.push_back(Vocabulary::pad_id);
        padded.type_ids.push_back(0);
        padded.attention_mask.push_back(0);
    }
    const auto h1 = model::forward(params, base, Mode::eval, nullptr);
    const auto h2 = model::forward(params, padded, Mode::eval, nullptr);
    for (int i = 0; i < base.length(); ++i) {
        for (int j = 0; j < cfg.d_model; ++j) {
            CHECK(std::abs(h1.at(i, j) - h2.at(i, j)) < 1e-12);
        }
    }
}

TEST_CASE("attention rows over unmasked positions sum to 1") {
    const auto cfg = tiny_config();
    Rng rng(3);
    const auto params = EncoderParams<double>::init(cfg, rng);
    SequenceInput input = seq_of({7, 8, 9, 10, 11});
    input.attention_mask[4] = 0;  // mask one key
    ForwardCache<double> cache;
    model::forward(params, input, Mode::eval, nullptr, &cache);
    for (const auto& layer : cache.layers) {
        for (const auto& head : layer.attn) {
            for (int i = 0; i < head.rows; ++i) {
                const double row_sum = kernels::sum(head.row(i), head.cols);
                CHECK(std::abs(row_sum - 1.0) < 1e-6);
                CHECK(head.at(i, 4) == 0.0);  // masked key receives no weight
            }
        }
    }
}

TEST_CASE("permutation equivariance with zeroed positional embeddings") {
    auto cfg = tiny_config();
    Rng rng(4);
    auto params = EncoderParams<double>::init(cfg, rng);
    params.pos_emb.fill(0.0);

    SequenceInput a = seq_of({7, 8, 9, 10});
    SequenceInput b = seq_of({9, 7, 10, 8});  // permutation of the same tokens
    const auto ha = model::forward(params, a, Mode::eval, nullptr);
    const auto hb = model::forward(params, b, Mode::eval, nullptr);
    // token at a-position -> equal token at b-position
    const std::pair<int, int> mapping[] = {{1, 2}, {2, 4}, {3, 1}, {4, 3}, {0, 0}, {5, 5}};
    for (const auto& [ia, ib] : mapping) {
        for (int j = 0; j < cfg.d_model; ++j) {
            CHECK(std::abs(ha.at(ia, j) - hb.at(ib, j)) < 1e-9);
        }
    }
}

TEST_CASE("cls_state returns row 0 and differing tails change it") {
    const auto cfg = tiny_config();
    Rng rng(5);
    const auto params = EncoderParams<double>::init(cfg, rng);
    const auto input = seq_of({7, 8, 9});
    const auto h = model::forward(params, input, Mode::eval, nullptr);
    const auto cls = model::cls_state(h);
    REQUIRE(static_cast<int>(cls.size()) == cfg.d_model);
    for (int j = 0; j < cfg.d_model; ++j) CHECK(cls[static_cast<size_t>(j)] == h.at(0, j));

    // attention mixes positions: a different tail shifts the CLS state
    const auto h2 = model::forward(params, seq_of({7, 8, 10}), Mode::eval, nullptr);
    const auto cls2 = model::cls_state(h2);
    double diff = 0;
    for (int j = 0; j < cfg.d_model; ++j) {
        diff += std::abs(cls[static_cast<size_t>(j)] - cls2[static_cast<size_t>(j)]);
    }
    CHECK(diff > 1e-8);
}

TEST_CASE("train mode with dropout needs an rng and is reproducible per seed") {
    auto cfg = tiny_config();
    cfg.dropout_p = 0.1;
    Rng rng(6);
    const auto params = EncoderParams<double>::init(cfg, rng);
    const auto input = seq_of({7, 8, 9});
    CHECK_THROWS(model::forward(params, input, Mode::train, nullptr));

    Rng d1(99), d2(99), d3(100);
    const auto h1 = model::forward(params, input, Mode::train, &d1);
    const auto h2 = model::forward(params, input, Mode::train, &d2);
    const auto h3 = model::forward(params, input, Mode::train, &d3);
    CHECK(h1.v == h2.v);
    CHECK(h1.v != h3.v);
}

// ------------------------------------------------------------- backward

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
    const auto cfg = tiny_config();
    Rng rng(7);
    const auto params = EncoderParams<double>::init(cfg, rng);
    const auto input = seq_of({7, 8, 9});
    ForwardCache<double> cache;
    const auto h = model::forward(params, input, Mode::train, nullptr, &cache);
    auto grads = EncoderParams<double>::shaped(cfg);
    model::backward(params, cache, Mat<double>(h.rows, h.cols), grads);
    for_each_tensor(grads, [&](const std::string&, const Mat<double>& g) {
        for (double x : g.v) CHECK(x == 0.0);
    });
}

TEST_CASE("cache reuse after consumption throws") {
    const auto cfg = tiny_config();
    Rng rng(8);
    const auto params = EncoderParams<double>::init(cfg, rng);
    const auto input = seq_of({7, 8});
    ForwardCache<double> cache;
    const auto h = model::forward(params, input, Mode::train, nullptr, &cache);
    auto grads = EncoderParams<double>::shaped(cfg);
    Mat<double> dh(h.rows, h.cols);
    dh.fill(0.1);
    model::backward(params, cache, dh, grads);
    CHECK_THROWS_AS(model::backward(params, cache, dh, grads), std::logic_error);
}

TEST_CASE("encoder finite-difference check on a scalar probe loss") {
    // loss = sum of hidden states; checks d(loss)/d(param) for sampled params
    const auto cfg = tiny_config();
    Rng rng(9);
    auto params = EncoderParams<double>::init(cfg, rng);
    const auto input = seq_of({7, 8, 9, 10, 11, 12});

    auto loss_of = [&]() {
        const auto h = model::forward(params, input, Mode::train, nullptr);
        return kernels::sum(h.data(), static_cast<int>(h.size()));
    };

    ForwardCache<double> cache;
    const auto h = model::forward(params, input, Mode::train, nullptr, &cache);
    auto grads = EncoderParams<double>::shaped(cfg);
    Mat<double> dh(h.rows, h.cols);
    dh.fill(1.0);
    model::backward(params, cache, dh, grads);

    std::vector<std::pair<Mat<double>*, Mat<double>*>> tensors;
    for_each_tensor(params, [&](const std::string&, Mat<double>& t) {
        tensors.emplace_back(&t, nullptr);
    });
    size_t ti = 0;
    for_each_tensor(grads, [&](const std::string&, Mat<double>& t) {
        tensors[ti++].second = &t;
    });

    Rng pick(10);
    const double hstep = 1e-5;
    double max_rel = 0.0;
    for (int s = 0; s < 120; ++s) {
        auto& [param, grad] = tensors[static_cast<size_t>(pick.next_int(
            static_cast<int>(tensors.size())))];
        const size_t idx = static_cast<size_t>(pick.next_int(static_cast<int>(param->size())));
        const double saved = param->v[idx];
        param->v[idx] = saved + hstep;
        const double lp = loss_of();
        param->v[idx] = saved - hstep;
        const double lm = loss_of();
        param->v[idx] = saved;
        const double numeric = (lp - lm) / (2 * hstep);
        const double analytic = grad->v[idx];
        // the probe loss is large, so the FD noise floor is ~1e-9; params with
        // a true zero gradient compare via the 1e-4 floor
        const double rel = std::abs(numeric - analytic) /
                           std::max({std::abs(numeric), std::abs(analytic), 1e-4});
        max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("layer-norm scale gradient matches the closed form dg_j = dy_j * xhat_j") {
    EncoderConfig cfg;
    cfg.vocab_size = 10;
    cfg.max_len = 8;
    cfg.d_model = 2;
    cfg.n_heads = 1;
    cfg.n_layers = 1;
    cfg.d_ff = 4;
    cfg.dropout_p = 0.0;
    Rng rng(11);
    auto params = EncoderParams<double>::init(cfg, rng);
    const auto input = seq_of({6});
    ForwardCache<double> cache;
    model::forward(params, input, Mode::train, nullptr, &cache);

    auto grads = EncoderParams<double>::shaped(cfg);
    Mat<double> dh(input.length(), 2);
    dh.at(0, 0) = 0.37;
    dh.at(0, 1) = -1.21;
    // hand derivation for a 2-element row: xhat = +-(x0-x1)/sqrt((x0-x1)^2 + 4 eps) ... here we
    // use the cached xhat directly and check dg = sum_rows dy .* xhat restricted to row 0's part
    const double xhat0 = cache.lnf_xhat.at(0, 0);
    const double xhat1 = cache.lnf_xhat.at(0, 1);
    CHECK(std::abs(xhat0 + xhat1) < 1e-12);  // 2-element rows normalize to +-z
    model::backward(params, cache, dh, grads);
    // remaining rows of dh are zero, so only row 0 contributes
    CHECK(std::abs(grads.lnf_g.at(0, 0) - 0.37 * xhat0) < 1e-12);
    CHECK(std::abs(grads.lnf_g.at(0, 1) - (-1.21) * xhat1) < 1e-12);
    CHECK(std::abs(grads.lnf_b.at(0, 0) - 0.37) < 1e-12);
    CHECK(std::abs(grads.lnf_b.at(0, 1) - (-1.21)) < 1e-12);
}

TEST_CASE("gradcheck module: full joint loss passes at the toy config") {
    objectives::LossWeights weights;
    const auto res = gradcheck::run(gradcheck::toy_config(), weights, 21, 64, 1e-5);
    CHECK(res.n_checked == 64);
    CHECK(res.max_rel_error < 1e-4);
}
