#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "elberto/mat.hpp"
#include "elberto/rng.hpp"

namespace elberto::model {

struct EncoderConfig {
    int vocab_size = 0;
    int max_len = 180;
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 256;
    double dropout_p = 0.1;
    int n_types = 2;

    int head_dim() const { return d_model / n_heads; }
    void validate() const;  // throws std::invalid_argument
};

enum class Mode { train, eval };

// ids/type_ids/attention_mask are parallel; position 0 is [CLS], the final
// attended position is [SEP].
struct SequenceInput {
    std::vector<int> ids;
    std::vector<int> type_ids;
    std::vector<uint8_t> attention_mask;  // 1 = attend

    int length() const { return static_cast<int>(ids.size()); }
    void validate(const EncoderConfig& config) const;
};

// [CLS] c [SEP] q [SEP] a [SEP]; type 1 after the first [SEP]. Over-long
// inputs lose context tail first, then question tail; the answer keeps at
// least one token. Throws when even specials + one answer token do not fit.
SequenceInput format_qa_input(const std::vector<int>& context, const std::vector<int>& question,
                              const std::vector<int>& answer, int max_len);

// [CLS] tokens [SEP], all type 0.
SequenceInput format_single(const std::vector<int>& tokens, int max_len);

// [CLS] a [SEP] b [SEP]; type 0 through the first [SEP], 1 after.
SequenceInput format_pair(const std::vector<int>& a, const std::vector<int>& b, int max_len);

// [CLS] s1 [SEP] s2 [SEP] ... sK [SEP], all type 0. If over max_len the token
// tail is cut and the last kept position is forced to [SEP].
SequenceInput format_segments(const std::vector<std::vector<int>>& segments, int max_len);

// Wraps an already-formatted id sequence (masked instances).
SequenceInput wrap_preformatted(const std::vector<int>& ids);

template <typename T>
struct EncoderLayerParams {
    Mat<T> ln1_g, ln1_b;
    Mat<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Mat<T> ln2_g, ln2_b;
    Mat<T> w1, b1, w2, b2;
};

template <typename T>
struct EncoderParams {
    EncoderConfig config;
    Mat<T> word_emb, pos_emb, type_emb;
    std::vector<EncoderLayerParams<T>> layers;
    Mat<T> lnf_g, lnf_b;

    static EncoderParams shaped(const EncoderConfig& config);          // zero tensors
    static EncoderParams init(const EncoderConfig& config, Rng& rng);  // trunc-normal 0.02
};

// Manifest-order tensor walk; f(name, Mat<T>&). The order defines the
// checkpoint layout and every deterministic iteration over parameters.
template <typename T, typename F>
void for_each_tensor(EncoderParams<T>& p, F&& f) {
    f("emb.word", p.word_emb);
    f("emb.pos", p.pos_emb);
    f("emb.type", p.type_emb);
    for (size_t i = 0; i < p.layers.size(); ++i) {
        auto& l = p.layers[i];
        const std::string pre = "layer" + std::to_string(i) + ".";
        f(pre + "ln1.g", l.ln1_g);
        f(pre + "ln1.b", l.ln1_b);
        f(pre + "attn.wq", l.wq);
        f(pre + "attn.bq", l.bq);
        f(pre + "attn.wk", l.wk);
        f(pre + "attn.bk", l.bk);
        f(pre + "attn.wv", l.wv);
        f(pre + "attn.bv", l.bv);
        f(pre + "attn.wo", l.wo);
        f(pre + "attn.bo", l.bo);
        f(pre + "ln2.g", l.ln2_g);
        f(pre + "ln2.b", l.ln2_b);
        f(pre + "ffn.w1", l.w1);
        f(pre + "ffn.b1", l.b1);
        f(pre + "ffn.w2", l.w2);
        f(pre + "ffn.b2", l.b2);
    }
    f("final_ln.g", p.lnf_g);
    f("final_ln.b", p.lnf_b);
}

template <typename T, typename F>
void for_each_tensor(const EncoderParams<T>& p, F&& f) {
    for_each_tensor(const_cast<EncoderParams<T>&>(p),
                    [&](const std::string& name, Mat<T>& m) { f(name, static_cast<const Mat<T>&>(m)); });
}

template <typename T>
struct LayerCache {
    Mat<T> ln1_xhat, ln1_out;
    std::vector<T> ln1_rstd;
    Mat<T> q, k, v;
    std::vector<Mat<T>> attn;            // per head, post-softmax pre-dropout
    std::vector<Mat<T>> attn_drop_mask;  // empty when dropout off
    Mat<T> ctx;
    Mat<T> attn_out_mask;
    Mat<T> ln2_xhat, ln2_out;
    std::vector<T> ln2_rstd;
    Mat<T> ffn_pre, ffn_act;
    Mat<T> ffn_out_mask;
};

template <typename T>
struct ForwardCache {
    SequenceInput input;
    Mode mode = Mode::eval;
    Mat<T> emb_mask;
    std::vector<LayerCache<T>> layers;
    Mat<T> xf;  // input to the final layer norm
    Mat<T> lnf_xhat;
    std::vector<T> lnf_rstd;
    bool consumed = false;
};

// Returns per-position hidden states [seq_len x d_model]. In train mode with
// dropout_p > 0 an rng is required; eval mode is deterministic. cache may be
// null for inference-only calls.
template <typename T>
Mat<T> forward(const EncoderParams<T>& params, const SequenceInput& input, Mode mode, Rng* rng,
               ForwardCache<T>* cache = nullptr);

// Exact analytic gradients, accumulated (+=) into grads. Returns the gradient
// on the summed embeddings. The cache is consumed; reuse throws.
template <typename T>
Mat<T> backward(const EncoderParams<T>& params, ForwardCache<T>& cache, const Mat<T>& d_hidden,
                EncoderParams<T>& grads);

template <typename T>
std::vector<T> cls_state(const Mat<T>& hidden) {
    if (hidden.rows < 1) throw std::invalid_argument("empty hidden states");
    return std::vector<T>(hidden.row(0), hidden.row(0) + hidden.cols);
}

}  // namespace elberto::model
