#include "elberto/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "elberto/corpus.hpp"
#include "elberto/kernels.hpp"

namespace elberto::model {

namespace k = elberto::kernels;
using corpus::Vocabulary;

void EncoderConfig::validate() const {
    if (vocab_size < Vocabulary::n_specials) throw std::invalid_argument("vocab_size too small");
    if (max_len < 3) throw std::invalid_argument("max_len must be >= 3");
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
        throw std::invalid_argument("d_model must be a positive multiple of n_heads");
    }
    if (n_layers <= 0 || d_ff <= 0 || n_types <= 0) {
        throw std::invalid_argument("n_layers, d_ff, n_types must be positive");
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw std::invalid_argument("dropout_p must be in [0, 1)");
    }
}

void SequenceInput::validate(const EncoderConfig& config) const {
    const size_t n = ids.size();
    if (n == 0) throw std::invalid_argument("empty sequence");
    if (type_ids.size() != n || attention_mask.size() != n) {
        throw std::invalid_argument("ids/type_ids/attention_mask lengths differ");
    }
    if (static_cast<int>(n) > config.max_len) throw std::invalid_argument("sequence over max_len");
    if (ids[0] != Vocabulary::cls_id) throw std::invalid_argument("position 0 must be [CLS]");
    int last_attended = -1;
    for (size_t i = 0; i < n; ++i) {
        if (ids[i] < 0 || ids[i] >= config.vocab_size) {
            throw std::invalid_argument("token id out of vocabulary range");
        }
        if (type_ids[i] < 0 || type_ids[i] >= config.n_types) {
            throw std::invalid_argument("type id out of range");
        }
        if (attention_mask[i]) last_attended = static_cast<int>(i);
    }
    if (last_attended < 0 || ids[static_cast<size_t>(last_attended)] != Vocabulary::sep_id) {
        throw std::invalid_argument("final attended position must be [SEP]");
    }
}

// ------------------------------------------------------------- formatting

namespace {

SequenceInput assemble(const std::vector<std::pair<const std::vector<int>*, int>>& segments) {
    // segments: (token span, type id); [SEP] after each, [CLS] in front
    SequenceInput s;
    s.ids.push_back(Vocabulary::cls_id);
    s.type_ids.push_back(segments.empty() ? 0 : segments.front().second);
    for (const auto& [tokens, type] : segments) {
        for (int id : *tokens) {
            s.ids.push_back(id);
            s.type_ids.push_back(type);
        }
        s.ids.push_back(Vocabulary::sep_id);
        s.type_ids.push_back(type);
    }
    s.attention_mask.assign(s.ids.size(), 1);
    return s;
}

}  // namespace

SequenceInput format_qa_input(const std::vector<int>& context, const std::vector<int>& question,
                              const std::vector<int>& answer, int max_len) {
    if (context.empty() || question.empty() || answer.empty()) {
        throw std::invalid_argument("format_qa_input: empty segment");
    }
    constexpr int n_specials = 4;  // [CLS] + 3 [SEP]
    if (n_specials + 1 > max_len) {
        throw std::invalid_argument("max_len cannot fit specials plus one answer token");
    }
    const int budget = max_len - n_specials;
    int nc = static_cast<int>(context.size());
    int nq = static_cast<int>(question.size());
    int na = static_cast<int>(answer.size());
    int over = nc + nq + na - budget;
    if (over > 0) {
        const int cut_c = std::min(over, nc);
        nc -= cut_c;
        over -= cut_c;
    }
    if (over > 0) {
        const int cut_q = std::min(over, nq);
        nq -= cut_q;
        over -= cut_q;
    }
    if (over > 0) {
        na = std::max(1, na - over);
    }
    const std::vector<int> c(context.begin(), context.begin() + nc);
    const std::vector<int> q(question.begin(), question.begin() + nq);
    const std::vector<int> a(answer.begin(), answer.begin() + na);
    SequenceInput s = assemble({{&c, 0}, {&q, 1}, {&a, 1}});
    return s;
}

SequenceInput format_single(const std::vector<int>& tokens, int max_len) {
    const int budget = std::max(0, max_len - 2);
    const std::vector<int> t(tokens.begin(),
                             tokens.begin() + std::min<size_t>(tokens.size(),
                                                               static_cast<size_t>(budget)));
    return assemble({{&t, 0}});
}

SequenceInput format_pair(const std::vector<int>& a, const std::vector<int>& b, int max_len) {
    SequenceInput s = assemble({{&a, 0}, {&b, 1}});
    if (s.length() > max_len) {
        s.ids.resize(static_cast<size_t>(max_len));
        s.type_ids.resize(static_cast<size_t>(max_len));
        s.attention_mask.resize(static_cast<size_t>(max_len));
        s.ids.back() = Vocabulary::sep_id;
    }
    return s;
}

SequenceInput format_segments(const std::vector<std::vector<int>>& segments, int max_len) {
    std::vector<std::pair<const std::vector<int>*, int>> parts;
    parts.reserve(segments.size());
    for (const auto& seg : segments) parts.emplace_back(&seg, 0);
    SequenceInput s = assemble(parts);
    if (s.length() > max_len) {
        s.ids.resize(static_cast<size_t>(max_len));
        s.type_ids.resize(static_cast<size_t>(max_len));
        s.attention_mask.resize(static_cast<size_t>(max_len));
        s.ids.back() = Vocabulary::sep_id;
    }
    return s;
}

SequenceInput wrap_preformatted(const std::vector<int>& ids) {
    SequenceInput s;
    s.ids = ids;
    s.type_ids.assign(ids.size(), 0);
    s.attention_mask.assign(ids.size(), 1);
    return s;
}

// ------------------------------------------------------------- parameters

template <typename T>
EncoderParams<T> EncoderParams<T>::shaped(const EncoderConfig& config) {
    config.validate();
    EncoderParams<T> p;
    p.config = config;
    const int d = config.d_model;
    p.word_emb = Mat<T>(config.vocab_size, d);
    p.pos_emb = Mat<T>(config.max_len, d);
    p.type_emb = Mat<T>(config.n_types, d);
    p.layers.resize(static_cast<size_t>(config.n_layers));
    for (auto& l : p.layers) {
        l.ln1_g = Mat<T>(1, d);
        l.ln1_b = Mat<T>(1, d);
        l.wq = Mat<T>(d, d);
        l.bq = Mat<T>(1, d);
        l.wk = Mat<T>(d, d);
        l.bk = Mat<T>(1, d);
        l.wv = Mat<T>(d, d);
        l.bv = Mat<T>(1, d);
        l.wo = Mat<T>(d, d);
        l.bo = Mat<T>(1, d);
        l.ln2_g = Mat<T>(1, d);
        l.ln2_b = Mat<T>(1, d);
        l.w1 = Mat<T>(d, config.d_ff);
        l.b1 = Mat<T>(1, config.d_ff);
        l.w2 = Mat<T>(config.d_ff, d);
        l.b2 = Mat<T>(1, d);
    }
    p.lnf_g = Mat<T>(1, d);
    p.lnf_b = Mat<T>(1, d);
    return p;
}

namespace {

bool is_ln_scale(const std::string& name) {
    return name.size() >= 2 && name.compare(name.size() - 2, 2, ".g") == 0;
}

bool is_bias(const std::string& name) {
    const auto pos = name.rfind('.');
    const std::string last = pos == std::string::npos ? name : name.substr(pos + 1);
    return !last.empty() && last[0] == 'b';
}

}  // namespace

template <typename T>
EncoderParams<T> EncoderParams<T>::init(const EncoderConfig& config, Rng& rng) {
    EncoderParams<T> p = shaped(config);
    for_each_tensor(p, [&](const std::string& name, Mat<T>& m) {
        if (is_ln_scale(name)) {
            m.fill(T(1));
        } else if (is_bias(name)) {
            m.fill(T(0));
        } else {
            for (auto& x : m.v) x = static_cast<T>(rng.truncated_normal(0.02));
        }
    });
    return p;
}

// ------------------------------------------------------------- helpers

namespace {

template <typename T>
void add_bias_rows(Mat<T>& x, const Mat<T>& bias) {
    for (int i = 0; i < x.rows; ++i) k::axpy(T(1), bias.data(), x.row(i), x.cols);
}

// y = LN(x), caching xhat and rstd per row
template <typename T>
void layer_norm_forward(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& y, Mat<T>& xhat,
                        std::vector<T>& rstd) {
    const int n = x.cols;
    const T eps = T(1e-5);
    y = Mat<T>(x.rows, n);
    xhat = Mat<T>(x.rows, n);
    rstd.assign(static_cast<size_t>(x.rows), T(0));
    for (int i = 0; i < x.rows; ++i) {
        const T* xr = x.row(i);
        const T mean = k::sum(xr, n) / T(n);
        T var = T(0);
        for (int j = 0; j < n; ++j) {
            const T d = xr[j] - mean;
            var += d * d;
        }
        var /= T(n);
        const T r = T(1) / std::sqrt(var + eps);
        rstd[static_cast<size_t>(i)] = r;
        T* xh = xhat.row(i);
        T* yr = y.row(i);
        for (int j = 0; j < n; ++j) {
            xh[j] = (xr[j] - mean) * r;
            yr[j] = g.data()[j] * xh[j] + b.data()[j];
        }
    }
}

// dx_accum += dLN/dx; dg, db accumulated
template <typename T>
void layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const std::vector<T>& rstd,
                         const Mat<T>& g, Mat<T>& dg, Mat<T>& db, Mat<T>& dx_accum) {
    const int n = dy.cols;
    std::vector<T> dxhat(static_cast<size_t>(n));
    for (int i = 0; i < dy.rows; ++i) {
        const T* dyr = dy.row(i);
        const T* xh = xhat.row(i);
        T sum_dxhat = T(0);
        T sum_dxhat_xhat = T(0);
        for (int j = 0; j < n; ++j) {
            const T v = dyr[j] * g.data()[j];
            dxhat[static_cast<size_t>(j)] = v;
            sum_dxhat += v;
            sum_dxhat_xhat += v * xh[j];
            dg.data()[j] += dyr[j] * xh[j];
            db.data()[j] += dyr[j];
        }
        const T r = rstd[static_cast<size_t>(i)];
        const T m1 = sum_dxhat / T(n);
        const T m2 = sum_dxhat_xhat / T(n);
        T* dxr = dx_accum.row(i);
        for (int j = 0; j < n; ++j) {
            dxr[j] += r * (dxhat[static_cast<size_t>(j)] - m1 - xh[j] * m2);
        }
    }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(kInvSqrt2)));
}

template <typename T>
T gelu_grad(T x) {
    return T(0.5) * (T(1) + std::erf(x * T(kInvSqrt2))) +
           x * std::exp(-x * x / T(2)) * T(kInvSqrt2Pi);
}

// inverted dropout; mask holds 0 or 1/(1-p), drawn row-major
template <typename T>
void apply_dropout(Mat<T>& x, double p, Rng& rng, Mat<T>& mask) {
    const T scale = T(1.0 / (1.0 - p));
    mask = Mat<T>(x.rows, x.cols);
    for (size_t i = 0; i < x.v.size(); ++i) {
        const T m = rng.next_double() >= p ? scale : T(0);
        mask.v[i] = m;
        x.v[i] *= m;
    }
}

template <typename T>
void mul_elementwise(Mat<T>& x, const Mat<T>& mask) {
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] *= mask.v[i];
}

template <typename T>
void copy_head_slice(const Mat<T>& src, int head, int dh, Mat<T>& dst) {
    dst = Mat<T>(src.rows, dh);
    for (int i = 0; i < src.rows; ++i) {
        const T* s = src.row(i) + head * dh;
        std::copy(s, s + dh, dst.row(i));
    }
}

template <typename T>
void add_head_slice(const Mat<T>& part, int head, int dh, Mat<T>& dst) {
    for (int i = 0; i < part.rows; ++i) {
        T* d = dst.row(i) + head * dh;
        const T* s = part.row(i);
        for (int j = 0; j < dh; ++j) d[j] += s[j];
    }
}

template <typename T>
void colsum_accum(const Mat<T>& x, Mat<T>& out) {
    for (int i = 0; i < x.rows; ++i) k::axpy(T(1), x.row(i), out.data(), x.cols);
}

}  // namespace

// ------------------------------------------------------------- forward

template <typename T>
Mat<T> forward(const EncoderParams<T>& params, const SequenceInput& input, Mode mode, Rng* rng,
               ForwardCache<T>* cache) {
    const EncoderConfig& cfg = params.config;
    input.validate(cfg);
    const int S = input.length();
    const int d = cfg.d_model;
    const int dh = cfg.head_dim();
    const bool drop = mode == Mode::train && cfg.dropout_p > 0.0;
    if (drop && rng == nullptr) throw std::invalid_argument("train-mode dropout requires an rng");

    if (cache) {
        *cache = ForwardCache<T>{};
        cache->input = input;
        cache->mode = mode;
        cache->layers.resize(static_cast<size_t>(cfg.n_layers));
    }

    // summed word + position + type embeddings
    Mat<T> x(S, d);
    for (int i = 0; i < S; ++i) {
        const T* we = params.word_emb.row(input.ids[static_cast<size_t>(i)]);
        const T* pe = params.pos_emb.row(i);
        const T* te = params.type_emb.row(input.type_ids[static_cast<size_t>(i)]);
        T* xr = x.row(i);
        for (int j = 0; j < d; ++j) xr[j] = we[j] + pe[j] + te[j];
    }
    if (drop) {
        Mat<T> mask;
        apply_dropout(x, cfg.dropout_p, *rng, mask);
        if (cache) cache->emb_mask = std::move(mask);
    }

    const T neg_inf = -std::numeric_limits<T>::infinity();
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));

    for (int li = 0; li < cfg.n_layers; ++li) {
        const auto& l = params.layers[static_cast<size_t>(li)];
        LayerCache<T>* lc = cache ? &cache->layers[static_cast<size_t>(li)] : nullptr;

        // self-attention sublayer (pre-norm)
        Mat<T> a, xhat1;
        std::vector<T> rstd1;
        layer_norm_forward(x, l.ln1_g, l.ln1_b, a, xhat1, rstd1);

        Mat<T> q(S, d), kk(S, d), v(S, d);
        k::matmul_nn(a.data(), l.wq.data(), q.data(), S, d, d, false);
        add_bias_rows(q, l.bq);
        k::matmul_nn(a.data(), l.wk.data(), kk.data(), S, d, d, false);
        add_bias_rows(kk, l.bk);
        k::matmul_nn(a.data(), l.wv.data(), v.data(), S, d, d, false);
        add_bias_rows(v, l.bv);

        Mat<T> ctx(S, d);
        std::vector<Mat<T>> head_attn;
        std::vector<Mat<T>> head_attn_mask;
        for (int h = 0; h < cfg.n_heads; ++h) {
            Mat<T> qh, kh, vh;
            copy_head_slice(q, h, dh, qh);
            copy_head_slice(kk, h, dh, kh);
            copy_head_slice(v, h, dh, vh);

            Mat<T> scores(S, S);
            k::matmul_nt(qh.data(), kh.data(), scores.data(), S, dh, S, false);
            for (int i = 0; i < S; ++i) {
                T* row = scores.row(i);
                for (int j = 0; j < S; ++j) {
                    row[j] = input.attention_mask[static_cast<size_t>(j)]
                                 ? row[j] * inv_sqrt_dh
                                 : neg_inf;
                }
                k::softmax_row(row, S);
            }
            Mat<T> probs = scores;  // post-softmax, pre-dropout
            if (drop) {
                Mat<T> mask;
                apply_dropout(scores, cfg.dropout_p, *rng, mask);
                head_attn_mask.push_back(std::move(mask));
            }
            Mat<T> ctx_h(S, dh);
            k::matmul_nn(scores.data(), vh.data(), ctx_h.data(), S, S, dh, false);
            for (int i = 0; i < S; ++i) {
                std::copy(ctx_h.row(i), ctx_h.row(i) + dh, ctx.row(i) + h * dh);
            }
            head_attn.push_back(std::move(probs));
        }

        Mat<T> attn_out(S, d);
        k::matmul_nn(ctx.data(), l.wo.data(), attn_out.data(), S, d, d, false);
        add_bias_rows(attn_out, l.bo);
        if (drop) {
            Mat<T> mask;
            apply_dropout(attn_out, cfg.dropout_p, *rng, mask);
            if (lc) lc->attn_out_mask = std::move(mask);
        }
        for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += attn_out.v[i];

        if (lc) {
            lc->ln1_xhat = std::move(xhat1);
            lc->ln1_out = std::move(a);
            lc->ln1_rstd = std::move(rstd1);
            lc->q = std::move(q);
            lc->k = std::move(kk);
            lc->v = std::move(v);
            lc->attn = std::move(head_attn);
            lc->attn_drop_mask = std::move(head_attn_mask);
            lc->ctx = std::move(ctx);
        }

        // feed-forward sublayer (pre-norm)
        Mat<T> b, xhat2;
        std::vector<T> rstd2;
        layer_norm_forward(x, l.ln2_g, l.ln2_b, b, xhat2, rstd2);

        Mat<T> pre(S, cfg.d_ff);
        k::matmul_nn(b.data(), l.w1.data(), pre.data(), S, d, cfg.d_ff, false);
        add_bias_rows(pre, l.b1);
        Mat<T> act(S, cfg.d_ff);
        for (size_t i = 0; i < pre.v.size(); ++i) act.v[i] = gelu(pre.v[i]);

        Mat<T> ffn_out(S, d);
        k::matmul_nn(act.data(), l.w2.data(), ffn_out.data(), S, cfg.d_ff, d, false);
        add_bias_rows(ffn_out, l.b2);
        if (drop) {
            Mat<T> mask;
            apply_dropout(ffn_out, cfg.dropout_p, *rng, mask);
            if (lc) lc->ffn_out_mask = std::move(mask);
        }
        for (size_t i = 0; i < x.v.size(); ++i) x.v[i] += ffn_out.v[i];

        if (lc) {
            lc->ln2_xhat = std::move(xhat2);
            lc->ln2_out = std::move(b);
            lc->ln2_rstd = std::move(rstd2);
            lc->ffn_pre = std::move(pre);
            lc->ffn_act = std::move(act);
        }

        if (!x.all_finite()) {
            throw std::runtime_error("non-finite activation in layer " + std::to_string(li));
        }
    }

    Mat<T> y, xhatf;
    std::vector<T> rstdf;
    layer_norm_forward(x, params.lnf_g, params.lnf_b, y, xhatf, rstdf);
    if (!y.all_finite()) throw std::runtime_error("non-finite activation in final layer norm");
    if (cache) {
        cache->xf = std::move(x);
        cache->lnf_xhat = std::move(xhatf);
        cache->lnf_rstd = std::move(rstdf);
    }
    return y;
}

// ------------------------------------------------------------- backward

template <typename T>
Mat<T> backward(const EncoderParams<T>& params, ForwardCache<T>& cache, const Mat<T>& d_hidden,
                EncoderParams<T>& grads) {
    if (cache.consumed) throw std::logic_error("forward cache already consumed");
    cache.consumed = true;

    const EncoderConfig& cfg = params.config;
    const int S = cache.input.length();
    const int d = cfg.d_model;
    const int dh = cfg.head_dim();
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));
    if (d_hidden.rows != S || d_hidden.cols != d) {
        throw std::invalid_argument("upstream gradient shape mismatch");
    }

    Mat<T> dx(S, d);
    layer_norm_backward(d_hidden, cache.lnf_xhat, cache.lnf_rstd, params.lnf_g, grads.lnf_g,
                        grads.lnf_b, dx);

    for (int li = cfg.n_layers - 1; li >= 0; --li) {
        const auto& l = params.layers[static_cast<size_t>(li)];
        auto& lc = cache.layers[static_cast<size_t>(li)];
        auto& gl = grads.layers[static_cast<size_t>(li)];

        // ---- feed-forward sublayer
        Mat<T> dffn = dx;  // gradient on the ffn output (pre-residual)
        if (lc.ffn_out_mask.rows > 0) mul_elementwise(dffn, lc.ffn_out_mask);

        Mat<T> dact(S, cfg.d_ff);
        k::matmul_nt(dffn.data(), l.w2.data(), dact.data(), S, d, cfg.d_ff, false);
        k::matmul_tn(lc.ffn_act.data(), dffn.data(), gl.w2.data(), S, cfg.d_ff, d, true);
        colsum_accum(dffn, gl.b2);

        Mat<T>& dpre = dact;  // reuse in place
        for (size_t i = 0; i < dpre.v.size(); ++i) dpre.v[i] *= gelu_grad(lc.ffn_pre.v[i]);

        Mat<T> db_ln2(S, d);
        k::matmul_nt(dpre.data(), l.w1.data(), db_ln2.data(), S, cfg.d_ff, d, false);
        k::matmul_tn(lc.ln2_out.data(), dpre.data(), gl.w1.data(), S, d, cfg.d_ff, true);
        colsum_accum(dpre, gl.b1);

        // dx now holds the gradient on x_mid: residual passthrough + LN2 path
        layer_norm_backward(db_ln2, lc.ln2_xhat, lc.ln2_rstd, l.ln2_g, gl.ln2_g, gl.ln2_b, dx);

        // ---- attention sublayer
        Mat<T> dattn = dx;  // gradient on the attention output (pre-residual)
        if (lc.attn_out_mask.rows > 0) mul_elementwise(dattn, lc.attn_out_mask);

        Mat<T> dctx(S, d);
        k::matmul_nt(dattn.data(), l.wo.data(), dctx.data(), S, d, d, false);
        k::matmul_tn(lc.ctx.data(), dattn.data(), gl.wo.data(), S, d, d, true);
        colsum_accum(dattn, gl.bo);

        Mat<T> dq(S, d), dk(S, d), dv(S, d);
        for (int h = 0; h < cfg.n_heads; ++h) {
            Mat<T> dctx_h, qh, kh, vh;
            copy_head_slice(dctx, h, dh, dctx_h);
            copy_head_slice(lc.q, h, dh, qh);
            copy_head_slice(lc.k, h, dh, kh);
            copy_head_slice(lc.v, h, dh, vh);
            const Mat<T>& probs = lc.attn[static_cast<size_t>(h)];
            const Mat<T>* dmask = lc.attn_drop_mask.empty()
                                      ? nullptr
                                      : &lc.attn_drop_mask[static_cast<size_t>(h)];

            // probs after dropout, as used in the forward ctx matmul
            Mat<T> probs_used = probs;
            if (dmask) mul_elementwise(probs_used, *dmask);

            Mat<T> dprobs(S, S);
            k::matmul_nt(dctx_h.data(), vh.data(), dprobs.data(), S, dh, S, false);
            Mat<T> dvh(S, dh);
            k::matmul_tn(probs_used.data(), dctx_h.data(), dvh.data(), S, S, dh, false);
            if (dmask) mul_elementwise(dprobs, *dmask);

            // softmax backward row-wise: ds = (dp - <dp,p>) * p
            Mat<T> dscores(S, S);
            for (int i = 0; i < S; ++i) {
                const T* dp = dprobs.row(i);
                const T* p = probs.row(i);
                const T inner = k::dot(dp, p, S);
                T* ds = dscores.row(i);
                for (int j = 0; j < S; ++j) ds[j] = (dp[j] - inner) * p[j];
            }
            k::scale(dscores.data(), inv_sqrt_dh, S * S);

            Mat<T> dqh(S, dh), dkh(S, dh);
            k::matmul_nn(dscores.data(), kh.data(), dqh.data(), S, S, dh, false);
            k::matmul_tn(dscores.data(), qh.data(), dkh.data(), S, S, dh, false);
            add_head_slice(dqh, h, dh, dq);
            add_head_slice(dkh, h, dh, dk);
            add_head_slice(dvh, h, dh, dv);
        }

        Mat<T> da(S, d);
        k::matmul_nt(dq.data(), l.wq.data(), da.data(), S, d, d, false);
        k::matmul_nt(dk.data(), l.wk.data(), da.data(), S, d, d, true);
        k::matmul_nt(dv.data(), l.wv.data(), da.data(), S, d, d, true);
        k::matmul_tn(lc.ln1_out.data(), dq.data(), gl.wq.data(), S, d, d, true);
        k::matmul_tn(lc.ln1_out.data(), dk.data(), gl.wk.data(), S, d, d, true);
        k::matmul_tn(lc.ln1_out.data(), dv.data(), gl.wv.data(), S, d, d, true);
        colsum_accum(dq, gl.bq);
        colsum_accum(dk, gl.bk);
        colsum_accum(dv, gl.bv);

        layer_norm_backward(da, lc.ln1_xhat, lc.ln1_rstd, l.ln1_g, gl.ln1_g, gl.ln1_b, dx);
    }

    if (cache.emb_mask.rows > 0) mul_elementwise(dx, cache.emb_mask);

    for (int i = 0; i < S; ++i) {
        const T* g = dx.row(i);
        k::axpy(T(1), g, grads.word_emb.row(cache.input.ids[static_cast<size_t>(i)]), d);
        k::axpy(T(1), g, grads.pos_emb.row(i), d);
        k::axpy(T(1), g, grads.type_emb.row(cache.input.type_ids[static_cast<size_t>(i)]), d);
    }
    return dx;
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;

template Mat<float> forward<float>(const EncoderParams<float>&, const SequenceInput&, Mode, Rng*,
                                   ForwardCache<float>*);
template Mat<double> forward<double>(const EncoderParams<double>&, const SequenceInput&, Mode,
                                     Rng*, ForwardCache<double>*);
template Mat<float> backward<float>(const EncoderParams<float>&, ForwardCache<float>&,
                                    const Mat<float>&, EncoderParams<float>&);
template Mat<double> backward<double>(const EncoderParams<double>&, ForwardCache<double>&,
                                      const Mat<double>&, EncoderParams<double>&);

}  // namespace elberto::model
