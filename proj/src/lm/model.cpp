#include "ulwb/lm/model.hpp"

#include "ulwb/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ulwb::lm {

namespace {

template <class T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <class T>
T silu(T x) {
    return x * sigmoid(x);
}

template <class T>
T silu_grad(T x) {
    T s = sigmoid(x);
    return s * (T(1) + x * (T(1) - s));
}

/// y[t,:] = x[t,:] * rinv[t] * gain; rinv[t] = 1/sqrt(mean(x[t,:]^2) + eps)
template <class T>
void rmsnorm_forward(const Tensor<T>& x, const Tensor<T>& gain, Tensor<T>& y,
                     std::vector<T>& rinv) {
    const int64_t n = x.rows(), d = x.cols();
    rinv.resize(static_cast<size_t>(n));
    const T* g = gain.ptr();
    for (int64_t t = 0; t < n; ++t) {
        const T* xt = x.row(t);
        double ms = kernels::sumsq(xt, static_cast<int>(d)) / static_cast<double>(d);
        T r = static_cast<T>(1.0 / std::sqrt(ms + kRmsNormEps));
        rinv[static_cast<size_t>(t)] = r;
        T* yt = y.row(t);
        for (int64_t i = 0; i < d; ++i) yt[i] = xt[i] * r * g[i];
    }
}

template <class T>
void rmsnorm_backward(const Tensor<T>& x, const std::vector<T>& rinv, const Tensor<T>& gain,
                      const Tensor<T>& dy, Tensor<T>& dx, Tensor<T>& dgain) {
    const int64_t n = x.rows(), d = x.cols();
    const T* g = gain.ptr();
    T* dg = dgain.ptr();
    for (int64_t t = 0; t < n; ++t) {
        const T* xt = x.row(t);
        const T* dyt = dy.row(t);
        T* dxt = dx.row(t);
        T r = rinv[static_cast<size_t>(t)];
        T proj = T(0);
        for (int64_t i = 0; i < d; ++i) proj += dyt[i] * g[i] * xt[i];
        T coeff = r * r * r * proj / static_cast<T>(d);
        for (int64_t i = 0; i < d; ++i) {
            dg[i] += dyt[i] * xt[i] * r;
            dxt[i] = r * dyt[i] * g[i] - xt[i] * coeff;
        }
    }
}

/// Stable in-place row softmax with causal mask: entries u > t are excluded.
template <class T>
void causal_softmax_rows(Tensor<T>& s) {
    const int64_t n = s.rows();
    for (int64_t t = 0; t < n; ++t) {
        T* row = s.row(t);
        T mx = row[0];
        for (int64_t u = 1; u <= t; ++u) mx = std::max(mx, row[u]);
        T sum = T(0);
        for (int64_t u = 0; u <= t; ++u) {
            row[u] = std::exp(row[u] - mx);
            sum += row[u];
        }
        T inv = T(1) / sum;
        for (int64_t u = 0; u <= t; ++u) row[u] *= inv;
        for (int64_t u = t + 1; u < n; ++u) row[u] = T(0);
    }
}

template <class T>
void validate_tokens(const Parameters<T>& params, std::span<const TokenId> tokens) {
    if (tokens.empty()) throw std::invalid_argument("token sequence is empty");
    if (static_cast<int>(tokens.size()) > params.config.max_seq_len)
        throw SequenceTooLongError("sequence length " + std::to_string(tokens.size()) +
                                   " exceeds max_seq_len " +
                                   std::to_string(params.config.max_seq_len));
    for (TokenId t : tokens)
        if (t < 0 || t >= params.config.vocab_size)
            throw std::invalid_argument("token id out of range: " + std::to_string(t));
}

template <class T>
void resize2(Tensor<T>& t, int64_t r, int64_t c) {
    if (t.rows() != r || t.cols() != c) t = Tensor<T>({r, c});
}

} // namespace

template <class T>
void ForwardCache<T>::ensure(const ModelConfig& cfg, int seq_len) {
    n = seq_len;
    const int64_t nn = seq_len, d = cfg.d_model, ff = cfg.d_ff;
    layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& lc : layers) {
        resize2(lc.x_in, nn, d);
        resize2(lc.attn_h, nn, d);
        resize2(lc.q, nn, d);
        resize2(lc.k, nn, d);
        resize2(lc.v, nn, d);
        lc.probs.resize(static_cast<size_t>(cfg.n_heads));
        for (auto& p : lc.probs) resize2(p, nn, nn);
        resize2(lc.attn_concat, nn, d);
        resize2(lc.mlp_in, nn, d);
        resize2(lc.mlp_h, nn, d);
        resize2(lc.gate, nn, ff);
        resize2(lc.up, nn, ff);
        resize2(lc.act, nn, ff);
    }
    resize2(final_in, nn, d);
    resize2(final_h, nn, d);
}

template <class T>
void forward(const Parameters<T>& params, std::span<const TokenId> tokens,
             Tensor<T>& logits, ForwardCache<T>* cache) {
    validate_tokens(params, tokens);
    const ModelConfig& cfg = params.config;
    const int n = static_cast<int>(tokens.size());
    const int d = cfg.d_model, ff = cfg.d_ff, hd = cfg.head_dim(), nh = cfg.n_heads;
    const T attn_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

    ForwardCache<T> local;
    ForwardCache<T>& fc = cache ? *cache : local;
    fc.ensure(cfg, n);

    const Tensor<T>& wte = params.at("embed.tokens");
    const Tensor<T>& wpe = params.at("embed.positions");

    Tensor<T> x({n, d});
    for (int t = 0; t < n; ++t) {
        const T* te = wte.row(tokens[static_cast<size_t>(t)]);
        const T* pe = wpe.row(t);
        T* xt = x.row(t);
        for (int i = 0; i < d; ++i) xt[i] = te[i] + pe[i];
    }

    Tensor<T> proj({n, d});
    Tensor<T> scores({n, n});
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerCache<T>& lc = fc.layers[static_cast<size_t>(l)];
        lc.x_in.data = x.data;
        rmsnorm_forward(x, params.layer(l, "attn_norm.gain"), lc.attn_h, lc.attn_rinv);

        const Tensor<T>& wq = params.layer(l, "self_attn.q_proj");
        const Tensor<T>& wk = params.layer(l, "self_attn.k_proj");
        const Tensor<T>& wv = params.layer(l, "self_attn.v_proj");
        kernels::gemm_nt(n, d, d, lc.attn_h.ptr(), d, wq.ptr(), d, lc.q.ptr(), d, false);
        kernels::gemm_nt(n, d, d, lc.attn_h.ptr(), d, wk.ptr(), d, lc.k.ptr(), d, false);
        kernels::gemm_nt(n, d, d, lc.attn_h.ptr(), d, wv.ptr(), d, lc.v.ptr(), d, false);

        for (int h = 0; h < nh; ++h) {
            const int off = h * hd;
            kernels::gemm_nt(n, n, hd, lc.q.ptr() + off, d, lc.k.ptr() + off, d,
                             scores.ptr(), n, false);
            kernels::scale(n * n, attn_scale, scores.ptr());
            causal_softmax_rows(scores);
            lc.probs[static_cast<size_t>(h)].data = scores.data;
            kernels::gemm_nn(n, hd, n, scores.ptr(), n, lc.v.ptr() + off, d,
                             lc.attn_concat.ptr() + off, d, false);
        }

        kernels::gemm_nt(n, d, d, lc.attn_concat.ptr(), d,
                         params.layer(l, "self_attn.o_proj").ptr(), d, proj.ptr(), d, false);
        for (int64_t i = 0; i < x.numel(); ++i) x.data[static_cast<size_t>(i)] =
            lc.x_in.data[static_cast<size_t>(i)] + proj.data[static_cast<size_t>(i)];

        lc.mlp_in.data = x.data;
        rmsnorm_forward(x, params.layer(l, "mlp_norm.gain"), lc.mlp_h, lc.mlp_rinv);
        kernels::gemm_nt(n, ff, d, lc.mlp_h.ptr(), d, params.layer(l, "mlp.gate_proj").ptr(), d,
                         lc.gate.ptr(), ff, false);
        kernels::gemm_nt(n, ff, d, lc.mlp_h.ptr(), d, params.layer(l, "mlp.up_proj").ptr(), d,
                         lc.up.ptr(), ff, false);
        for (int64_t i = 0; i < lc.gate.numel(); ++i) {
            size_t ii = static_cast<size_t>(i);
            lc.act.data[ii] = silu(lc.gate.data[ii]) * lc.up.data[ii];
        }
        kernels::gemm_nt(n, d, ff, lc.act.ptr(), ff, params.layer(l, "mlp.down_proj").ptr(), ff,
                         proj.ptr(), d, false);
        for (int64_t i = 0; i < x.numel(); ++i) x.data[static_cast<size_t>(i)] =
            lc.mlp_in.data[static_cast<size_t>(i)] + proj.data[static_cast<size_t>(i)];
    }

    fc.final_in.data = x.data;
    rmsnorm_forward(x, params.at("final_norm.gain"), fc.final_h, fc.final_rinv);
    resize2(logits, n, cfg.vocab_size);
    kernels::gemm_nt(n, cfg.vocab_size, d, fc.final_h.ptr(), d, params.at("lm_head").ptr(), d,
                     logits.ptr(), cfg.vocab_size, false);
}

namespace {

/// log-sum-exp of a logits row plus the softmax needed by the loss heads.
template <class T>
double row_lse(const T* row, int n, T mx) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += std::exp(static_cast<double>(row[i] - mx));
    return static_cast<double>(mx) + std::log(sum);
}

template <class T>
T row_max(const T* row, int n) {
    T mx = row[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    return mx;
}

void check_mask(const Sample& sample) {
    if (sample.target_mask.size() != sample.tokens.size())
        throw std::invalid_argument("target_mask length must equal token length");
    bool any = false;
    for (size_t j = 1; j < sample.target_mask.size(); ++j) any = any || sample.target_mask[j];
    if (!any) throw std::invalid_argument("sample has no masked-in target positions");
}

} // namespace

template <class T>
NllResult nll(const Parameters<T>& params, const Sample& sample) {
    check_mask(sample);
    Tensor<T> logits;
    forward<T>(params, sample.tokens, logits, nullptr);
    NllResult out;
    const int v = params.config.vocab_size;
    double total = 0.0;
    for (size_t j = 1; j < sample.tokens.size(); ++j) {
        if (!sample.target_mask[j]) continue;
        const T* row = logits.row(static_cast<int64_t>(j - 1));
        double lse = row_lse(row, v, row_max(row, v));
        double loss = lse - static_cast<double>(row[sample.tokens[j]]);
        out.per_token.push_back(loss);
        total += loss;
    }
    out.count = static_cast<int>(out.per_token.size());
    out.mean = total / out.count;
    return out;
}

template <class T>
double ce_head(const Tensor<T>& logits, const Sample& sample, LossKind kind,
               T grad_scale, Tensor<T>& dlogits) {
    const int v = static_cast<int>(logits.cols());
    const T sign = (kind == LossKind::ascent) ? -grad_scale : grad_scale;
    double loss_sum = 0.0;
    for (size_t j = 1; j < sample.tokens.size(); ++j) {
        if (!sample.target_mask[j]) continue;
        const int64_t pos = static_cast<int64_t>(j - 1);
        const T* row = logits.row(pos);
        T* drow = dlogits.row(pos);
        T mx = row_max(row, v);
        double lse = row_lse(row, v, mx);
        loss_sum += lse - static_cast<double>(row[sample.tokens[j]]);
        for (int i = 0; i < v; ++i) {
            T p = static_cast<T>(std::exp(static_cast<double>(row[i]) - lse));
            drow[i] += sign * p;
        }
        drow[sample.tokens[j]] -= sign;
    }
    if (!std::isfinite(loss_sum))
        throw NonFiniteLossError("cross-entropy loss is not finite");
    return loss_sum;
}

template <class T>
double kl_head(const Tensor<T>& logits, const Tensor<T>& ref_logits, const Sample& sample,
               T kl_scale, Tensor<T>& dlogits) {
    const int v = static_cast<int>(logits.cols());
    double kl_sum = 0.0;
    std::vector<double> lp(static_cast<size_t>(v)), lq(static_cast<size_t>(v));
    for (size_t j = 1; j < sample.tokens.size(); ++j) {
        if (!sample.target_mask[j]) continue;
        const int64_t pos = static_cast<int64_t>(j - 1);
        const T* row = logits.row(pos);
        const T* ref = ref_logits.row(pos);
        double lse_p = row_lse(row, v, row_max(row, v));
        double lse_q = row_lse(ref, v, row_max(ref, v));
        double kl = 0.0;
        for (int i = 0; i < v; ++i) {
            lp[static_cast<size_t>(i)] = static_cast<double>(row[i]) - lse_p;
            lq[static_cast<size_t>(i)] = static_cast<double>(ref[i]) - lse_q;
            kl += std::exp(lp[static_cast<size_t>(i)]) *
                  (lp[static_cast<size_t>(i)] - lq[static_cast<size_t>(i)]);
        }
        kl_sum += kl;
        T* drow = dlogits.row(pos);
        for (int i = 0; i < v; ++i) {
            double p = std::exp(lp[static_cast<size_t>(i)]);
            double diff = lp[static_cast<size_t>(i)] - lq[static_cast<size_t>(i)];
            drow[i] += kl_scale * static_cast<T>(p * (diff - kl));
        }
    }
    if (!std::isfinite(kl_sum)) throw NonFiniteLossError("KL term is not finite");
    return kl_sum;
}

template <class T>
void backward(const Parameters<T>& params, std::span<const TokenId> tokens,
              const ForwardCache<T>& cache, const Tensor<T>& dlogits,
              Parameters<T>& grads) {
    const ModelConfig& cfg = params.config;
    const int n = static_cast<int>(tokens.size());
    const int d = cfg.d_model, ff = cfg.d_ff, hd = cfg.head_dim(), nh = cfg.n_heads;
    const int v = cfg.vocab_size;
    const T attn_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

    // output head
    Tensor<T> dx({n, d});
    kernels::gemm_nn(n, d, v, dlogits.ptr(), v, params.at("lm_head").ptr(), d, dx.ptr(), d,
                     false);
    kernels::gemm_tn(v, d, n, dlogits.ptr(), v, cache.final_h.ptr(), d,
                     grads.at("lm_head").ptr(), d, true);

    Tensor<T> dtmp({n, d});
    rmsnorm_backward(cache.final_in, cache.final_rinv, params.at("final_norm.gain"), dx, dtmp,
                     grads.at("final_norm.gain"));
    dx.data = dtmp.data;

    Tensor<T> dff({n, ff}), dgate({n, ff}), dup({n, ff});
    Tensor<T> dh({n, d});
    Tensor<T> dconcat({n, d});
    Tensor<T> dq({n, d}), dk({n, d}), dv({n, d});
    Tensor<T> dp({n, n}), ds({n, n});

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerCache<T>& lc = cache.layers[static_cast<size_t>(l)];

        // feed-forward: x_out = mlp_in + down(silu(gate) * up)
        kernels::gemm_nn(n, ff, d, dx.ptr(), d, params.layer(l, "mlp.down_proj").ptr(), ff,
                         dff.ptr(), ff, false);
        kernels::gemm_tn(d, ff, n, dx.ptr(), d, lc.act.ptr(), ff,
                         grads.layer(l, "mlp.down_proj").ptr(), ff, true);
        for (int64_t i = 0; i < dff.numel(); ++i) {
            size_t ii = static_cast<size_t>(i);
            T g = lc.gate.data[ii];
            dgate.data[ii] = dff.data[ii] * lc.up.data[ii] * silu_grad(g);
            dup.data[ii] = dff.data[ii] * silu(g);
        }
        kernels::gemm_nn(n, d, ff, dgate.ptr(), ff, params.layer(l, "mlp.gate_proj").ptr(), d,
                         dh.ptr(), d, false);
        kernels::gemm_nn(n, d, ff, dup.ptr(), ff, params.layer(l, "mlp.up_proj").ptr(), d,
                         dh.ptr(), d, true);
        kernels::gemm_tn(ff, d, n, dgate.ptr(), ff, lc.mlp_h.ptr(), d,
                         grads.layer(l, "mlp.gate_proj").ptr(), d, true);
        kernels::gemm_tn(ff, d, n, dup.ptr(), ff, lc.mlp_h.ptr(), d,
                         grads.layer(l, "mlp.up_proj").ptr(), d, true);
        rmsnorm_backward(lc.mlp_in, lc.mlp_rinv, params.layer(l, "mlp_norm.gain"), dh, dtmp,
                         grads.layer(l, "mlp_norm.gain"));
        kernels::axpy(n * d, T(1), dtmp.ptr(), dx.ptr());

        // attention: mlp_in = x_in + o_proj(concat heads)
        kernels::gemm_nn(n, d, d, dx.ptr(), d, params.layer(l, "self_attn.o_proj").ptr(), d,
                         dconcat.ptr(), d, false);
        kernels::gemm_tn(d, d, n, dx.ptr(), d, lc.attn_concat.ptr(), d,
                         grads.layer(l, "self_attn.o_proj").ptr(), d, true);

        dq.zero();
        dk.zero();
        dv.zero();
        for (int h = 0; h < nh; ++h) {
            const int off = h * hd;
            const Tensor<T>& probs = lc.probs[static_cast<size_t>(h)];
            kernels::gemm_nt(n, n, hd, dconcat.ptr() + off, d, lc.v.ptr() + off, d, dp.ptr(), n,
                             false);
            kernels::gemm_tn(n, hd, n, probs.ptr(), n, dconcat.ptr() + off, d, dv.ptr() + off, d,
                             true);
            // softmax backward, folding in the 1/sqrt(hd) score scale
            for (int t = 0; t < n; ++t) {
                const T* prow = probs.row(t);
                const T* dprow = dp.row(t);
                T* dsrow = ds.row(t);
                T acc = T(0);
                for (int u = 0; u <= t; ++u) acc += prow[u] * dprow[u];
                for (int u = 0; u <= t; ++u)
                    dsrow[u] = attn_scale * prow[u] * (dprow[u] - acc);
                for (int u = t + 1; u < n; ++u) dsrow[u] = T(0);
            }
            kernels::gemm_nn(n, hd, n, ds.ptr(), n, lc.k.ptr() + off, d, dq.ptr() + off, d, true);
            kernels::gemm_tn(n, hd, n, ds.ptr(), n, lc.q.ptr() + off, d, dk.ptr() + off, d, true);
        }

        kernels::gemm_tn(d, d, n, dq.ptr(), d, lc.attn_h.ptr(), d,
                         grads.layer(l, "self_attn.q_proj").ptr(), d, true);
        kernels::gemm_tn(d, d, n, dk.ptr(), d, lc.attn_h.ptr(), d,
                         grads.layer(l, "self_attn.k_proj").ptr(), d, true);
        kernels::gemm_tn(d, d, n, dv.ptr(), d, lc.attn_h.ptr(), d,
                         grads.layer(l, "self_attn.v_proj").ptr(), d, true);
        kernels::gemm_nn(n, d, d, dq.ptr(), d, params.layer(l, "self_attn.q_proj").ptr(), d,
                         dh.ptr(), d, false);
        kernels::gemm_nn(n, d, d, dk.ptr(), d, params.layer(l, "self_attn.k_proj").ptr(), d,
                         dh.ptr(), d, true);
        kernels::gemm_nn(n, d, d, dv.ptr(), d, params.layer(l, "self_attn.v_proj").ptr(), d,
                         dh.ptr(), d, true);
        rmsnorm_backward(lc.x_in, lc.attn_rinv, params.layer(l, "attn_norm.gain"), dh, dtmp,
                         grads.layer(l, "attn_norm.gain"));
        kernels::axpy(n * d, T(1), dtmp.ptr(), dx.ptr());
    }

    Tensor<T>& gwte = grads.at("embed.tokens");
    Tensor<T>& gwpe = grads.at("embed.positions");
    for (int t = 0; t < n; ++t) {
        kernels::axpy(d, T(1), dx.row(t), gwte.row(tokens[static_cast<size_t>(t)]));
        kernels::axpy(d, T(1), dx.row(t), gwpe.row(t));
    }
}

template <class T>
double ce_backward(const Parameters<T>& params, const Sample& sample, LossKind kind,
                   Parameters<T>& grads, int& token_count) {
    check_mask(sample);
    ForwardCache<T> cache;
    Tensor<T> logits;
    forward<T>(params, sample.tokens, logits, &cache);
    Tensor<T> dlogits({logits.rows(), logits.cols()});
    double loss = ce_head(logits, sample, kind, T(1), dlogits);
    backward<T>(params, sample.tokens, cache, dlogits, grads);
    token_count = 0;
    for (size_t j = 1; j < sample.target_mask.size(); ++j)
        if (sample.target_mask[j]) ++token_count;
    return loss;
}

// ---- incremental decoding ----

template <class T>
DecodeState<T>::DecodeState(const Parameters<T>& params) : params_(&params) {
    const ModelConfig& cfg = params.config;
    k_cache_.resize(static_cast<size_t>(cfg.n_layers));
    v_cache_.resize(static_cast<size_t>(cfg.n_layers));
    for (int l = 0; l < cfg.n_layers; ++l) {
        k_cache_[static_cast<size_t>(l)] = Tensor<T>({cfg.max_seq_len, cfg.d_model});
        v_cache_[static_cast<size_t>(l)] = Tensor<T>({cfg.max_seq_len, cfg.d_model});
    }
    x_.resize(static_cast<size_t>(cfg.d_model));
    h_.resize(static_cast<size_t>(cfg.d_model));
    q_.resize(static_cast<size_t>(cfg.d_model));
    scratch_.resize(static_cast<size_t>(std::max(cfg.d_model, cfg.max_seq_len)));
    attn_.resize(static_cast<size_t>(cfg.d_model));
    ff_gate_.resize(static_cast<size_t>(cfg.d_ff));
    ff_up_.resize(static_cast<size_t>(cfg.d_ff));
    logits_.resize(static_cast<size_t>(cfg.vocab_size));
}

template <class T>
void DecodeState<T>::reset() {
    cur_len_ = 0;
}

namespace {

template <class T>
void rmsnorm_row(const T* x, const T* gain, int d, T* out) {
    double ms = kernels::sumsq(x, d) / static_cast<double>(d);
    T r = static_cast<T>(1.0 / std::sqrt(ms + kRmsNormEps));
    for (int i = 0; i < d; ++i) out[i] = x[i] * r * gain[i];
}

} // namespace

template <class T>
const T* DecodeState<T>::step(TokenId tok) {
    const Parameters<T>& params = *params_;
    const ModelConfig& cfg = params.config;
    const int d = cfg.d_model, ff = cfg.d_ff, hd = cfg.head_dim(), nh = cfg.n_heads;
    const int pos = cur_len_;
    if (pos >= cfg.max_seq_len)
        throw SequenceTooLongError("decode position exceeds max_seq_len");
    if (tok < 0 || tok >= cfg.vocab_size)
        throw std::invalid_argument("token id out of range: " + std::to_string(tok));
    const T attn_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

    const T* te = params.at("embed.tokens").row(tok);
    const T* pe = params.at("embed.positions").row(pos);
    for (int i = 0; i < d; ++i) x_[static_cast<size_t>(i)] = te[i] + pe[i];

    for (int l = 0; l < cfg.n_layers; ++l) {
        rmsnorm_row(x_.data(), params.layer(l, "attn_norm.gain").ptr(), d, h_.data());
        T* krow = k_cache_[static_cast<size_t>(l)].row(pos);
        T* vrow = v_cache_[static_cast<size_t>(l)].row(pos);
        kernels::gemm_nt(1, d, d, h_.data(), d, params.layer(l, "self_attn.q_proj").ptr(), d,
                         q_.data(), d, false);
        kernels::gemm_nt(1, d, d, h_.data(), d, params.layer(l, "self_attn.k_proj").ptr(), d,
                         krow, d, false);
        kernels::gemm_nt(1, d, d, h_.data(), d, params.layer(l, "self_attn.v_proj").ptr(), d,
                         vrow, d, false);

        for (int h = 0; h < nh; ++h) {
            const int off = h * hd;
            T* s = scratch_.data();
            T mx = -std::numeric_limits<T>::infinity();
            for (int u = 0; u <= pos; ++u) {
                T sc = kernels::dot(q_.data() + off,
                                    k_cache_[static_cast<size_t>(l)].row(u) + off, hd) *
                       attn_scale;
                s[u] = sc;
                mx = std::max(mx, sc);
            }
            T sum = T(0);
            for (int u = 0; u <= pos; ++u) {
                s[u] = std::exp(s[u] - mx);
                sum += s[u];
            }
            T inv = T(1) / sum;
            for (int i = 0; i < hd; ++i) attn_[static_cast<size_t>(off + i)] = T(0);
            for (int u = 0; u <= pos; ++u) {
                kernels::axpy(hd, s[u] * inv, v_cache_[static_cast<size_t>(l)].row(u) + off,
                              attn_.data() + off);
            }
        }
        kernels::gemm_nt(1, d, d, attn_.data(), d, params.layer(l, "self_attn.o_proj").ptr(), d,
                         h_.data(), d, false);
        for (int i = 0; i < d; ++i) x_[static_cast<size_t>(i)] += h_[static_cast<size_t>(i)];

        rmsnorm_row(x_.data(), params.layer(l, "mlp_norm.gain").ptr(), d, h_.data());
        kernels::gemm_nt(1, ff, d, h_.data(), d, params.layer(l, "mlp.gate_proj").ptr(), d,
                         ff_gate_.data(), ff, false);
        kernels::gemm_nt(1, ff, d, h_.data(), d, params.layer(l, "mlp.up_proj").ptr(), d,
                         ff_up_.data(), ff, false);
        for (int i = 0; i < ff; ++i)
            ff_gate_[static_cast<size_t>(i)] =
                silu(ff_gate_[static_cast<size_t>(i)]) * ff_up_[static_cast<size_t>(i)];
        kernels::gemm_nt(1, d, ff, ff_gate_.data(), ff, params.layer(l, "mlp.down_proj").ptr(),
                         ff, h_.data(), d, false);
        for (int i = 0; i < d; ++i) x_[static_cast<size_t>(i)] += h_[static_cast<size_t>(i)];
    }

    rmsnorm_row(x_.data(), params.at("final_norm.gain").ptr(), d, h_.data());
    kernels::gemm_nt(1, cfg.vocab_size, d, h_.data(), d, params.at("lm_head").ptr(), d,
                     logits_.data(), cfg.vocab_size, false);
    cur_len_ = pos + 1;
    return logits_.data();
}

template <class T>
const T* DecodeState<T>::prefill(std::span<const TokenId> prompt) {
    const ModelConfig& cfg = params_->config;
    ForwardCache<T> cache;
    Tensor<T> logits;
    forward<T>(*params_, prompt, logits, &cache);
    const int n = static_cast<int>(prompt.size());
    const int d = cfg.d_model;
    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerCache<T>& lc = cache.layers[static_cast<size_t>(l)];
        std::copy(lc.k.data.begin(), lc.k.data.end(),
                  k_cache_[static_cast<size_t>(l)].data.begin());
        std::copy(lc.v.data.begin(), lc.v.data.end(),
                  v_cache_[static_cast<size_t>(l)].data.begin());
    }
    const T* last = logits.row(n - 1);
    std::copy(last, last + cfg.vocab_size, logits_.begin());
    cur_len_ = n;
    return logits_.data();
}

int argmax_row(const float* row, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

std::vector<TokenId> greedy_generate(const Parameters<float>& params,
                                     std::span<const TokenId> prompt, int max_new_tokens) {
    if (prompt.empty()) throw std::invalid_argument("prompt is empty");
    std::vector<TokenId> out(prompt.begin(), prompt.end());
    if (max_new_tokens <= 0) return out;

    DecodeState<float> st(params);
    const float* row = st.prefill(prompt);
    const int v = params.config.vocab_size;
    for (int i = 0; i < max_new_tokens; ++i) {
        TokenId tok = argmax_row(row, v);
        out.push_back(tok);
        if (tok == Vocabulary::kEos) break;
        if (st.length() >= params.config.max_seq_len) break;
        if (i + 1 < max_new_tokens) row = st.step(tok);
    }
    return out;
}

std::vector<TokenId> logits_diff_decode(const Parameters<float>& target,
                                        const Parameters<float>& assistant,
                                        std::span<const TokenId> prompt, float scale,
                                        int max_new_tokens) {
    if (target.config.vocab_size != assistant.config.vocab_size)
        throw TokenizerMismatchError(
            "incompatible tokenizer: target vocab " +
            std::to_string(target.config.vocab_size) + " vs assistant vocab " +
            std::to_string(assistant.config.vocab_size) +
            "; logits rows are not aligned for subtraction");
    if (prompt.empty()) throw std::invalid_argument("prompt is empty");
    std::vector<TokenId> out(prompt.begin(), prompt.end());
    if (max_new_tokens <= 0) return out;

    DecodeState<float> ts(target), as(assistant);
    const float* trow = ts.prefill(prompt);
    const float* arow = as.prefill(prompt);
    const int v = target.config.vocab_size;
    const int max_len = std::min(target.config.max_seq_len, assistant.config.max_seq_len);
    std::vector<float> combined(static_cast<size_t>(v));
    for (int i = 0; i < max_new_tokens; ++i) {
        for (int j = 0; j < v; ++j)
            combined[static_cast<size_t>(j)] = trow[j] - scale * arow[j];
        TokenId tok = argmax_row(combined.data(), v);
        out.push_back(tok);
        if (tok == Vocabulary::kEos) break;
        if (ts.length() >= max_len) break;
        if (i + 1 < max_new_tokens) {
            trow = ts.step(tok);
            arow = as.step(tok);
        }
    }
    return out;
}

// explicit instantiations: float is the production path, double the oracle
template struct ForwardCache<float>;
template struct ForwardCache<double>;
template void forward<float>(const Parameters<float>&, std::span<const TokenId>, Tensor<float>&,
                             ForwardCache<float>*);
template void forward<double>(const Parameters<double>&, std::span<const TokenId>,
                              Tensor<double>&, ForwardCache<double>*);
template NllResult nll<float>(const Parameters<float>&, const Sample&);
template NllResult nll<double>(const Parameters<double>&, const Sample&);
template double ce_head<float>(const Tensor<float>&, const Sample&, LossKind, float,
                               Tensor<float>&);
template double ce_head<double>(const Tensor<double>&, const Sample&, LossKind, double,
                                Tensor<double>&);
template double kl_head<float>(const Tensor<float>&, const Tensor<float>&, const Sample&, float,
                               Tensor<float>&);
template double kl_head<double>(const Tensor<double>&, const Tensor<double>&, const Sample&,
                                double, Tensor<double>&);
template void backward<float>(const Parameters<float>&, std::span<const TokenId>,
                              const ForwardCache<float>&, const Tensor<float>&,
                              Parameters<float>&);
template void backward<double>(const Parameters<double>&, std::span<const TokenId>,
                               const ForwardCache<double>&, const Tensor<double>&,
                               Parameters<double>&);
template double ce_backward<float>(const Parameters<float>&, const Sample&, LossKind,
                                   Parameters<float>&, int&);
template double ce_backward<double>(const Parameters<double>&, const Sample&, LossKind,
                                    Parameters<double>&, int&);
template class DecodeState<float>;
template class DecodeState<double>;

} // namespace ulwb::lm
