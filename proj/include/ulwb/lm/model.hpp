#pragma once
// Decoder-only causal LM: pre-norm blocks, multi-head attention, SwiGLU
// feed-forward, learned absolute positions, untied output head. Forward,
// reverse-mode backward, and incremental decoding are all explicit; the
// float instantiation runs on the dispatched kernels, the double one exists
// for the finite-difference oracle.

#include "ulwb/lm/params.hpp"
#include "ulwb/lm/vocab.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ulwb::lm {

constexpr double kRmsNormEps = 1e-6;

/// Raised when two models cannot be composed because their token spaces
/// differ (the logits rows would not be aligned).
struct TokenizerMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a training loss stops being finite.
struct NonFiniteLossError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SequenceTooLongError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// One training example: token sequence plus a target mask. target_mask[j]
/// selects position j as a prediction target (loss on p(tokens[j] | prefix));
/// index 0 can never be a target.
struct Sample {
    std::vector<TokenId> tokens;
    std::vector<uint8_t> target_mask;
};

template <class T>
struct LayerCache {
    Tensor<T> x_in;        // residual stream entering the block (n x d)
    Tensor<T> attn_h;      // attn rmsnorm output (n x d)
    std::vector<T> attn_rinv;
    Tensor<T> q, k, v;     // (n x d)
    std::vector<Tensor<T>> probs; // per head (n x n)
    Tensor<T> attn_concat; // pre-o_proj head concat (n x d)
    Tensor<T> mlp_in;      // residual stream entering mlp (n x d)
    Tensor<T> mlp_h;       // mlp rmsnorm output (n x d)
    std::vector<T> mlp_rinv;
    Tensor<T> gate;        // pre-activation (n x ff)
    Tensor<T> up;          // (n x ff)
    Tensor<T> act;         // silu(gate) * up (n x ff)
};

template <class T>
struct ForwardCache {
    int n = 0;
    std::vector<LayerCache<T>> layers;
    Tensor<T> final_in;  // (n x d)
    Tensor<T> final_h;   // (n x d)
    std::vector<T> final_rinv;

    void ensure(const ModelConfig& cfg, int seq_len);
};

/// Logits for every position; cache is optional (needed for backward).
template <class T>
void forward(const Parameters<T>& params, std::span<const TokenId> tokens,
             Tensor<T>& logits, ForwardCache<T>* cache = nullptr);

struct NllResult {
    std::vector<double> per_token; // one entry per masked-in target, in order
    double mean = 0.0;
    int count = 0;
};

/// Mean and per-token negative log-likelihood over masked-in targets.
template <class T>
NllResult nll(const Parameters<T>& params, const Sample& sample);

enum class LossKind { descent, ascent };

/// Cross-entropy loss head: fills dlogits with grad_scale * dCE/dlogits
/// (negated for ascent) and returns the CE sum over masked targets.
template <class T>
double ce_head(const Tensor<T>& logits, const Sample& sample, LossKind kind,
               T grad_scale, Tensor<T>& dlogits);

/// KL(current || reference) head, averaged over masked targets; adds
/// kl_scale * dKL/dlogits into dlogits and returns the mean KL.
template <class T>
double kl_head(const Tensor<T>& logits, const Tensor<T>& ref_logits, const Sample& sample,
               T kl_scale, Tensor<T>& dlogits);

/// Reverse pass from dlogits; accumulates parameter gradients into `grads`.
template <class T>
void backward(const Parameters<T>& params, std::span<const TokenId> tokens,
              const ForwardCache<T>& cache, const Tensor<T>& dlogits,
              Parameters<T>& grads);

/// Convenience wrapper used by training and by the gradient-check oracle:
/// forward + CE head (token-sum, unscaled) + backward. Returns the CE sum
/// and masked-target count.
template <class T>
double ce_backward(const Parameters<T>& params, const Sample& sample, LossKind kind,
                   Parameters<T>& grads, int& token_count);

// ---- incremental decoding ----

template <class T>
class DecodeState {
public:
    explicit DecodeState(const Parameters<T>& params);

    void reset();
    int length() const { return cur_len_; }

    /// Feed one token, returns the next-token logits row (vocab_size).
    const T* step(TokenId tok);

    /// Feed a whole prompt via the batched forward pass (cheaper than
    /// token-by-token); returns the logits row of the last prompt position.
    const T* prefill(std::span<const TokenId> prompt);

private:
    const Parameters<T>* params_;
    int cur_len_ = 0;
    // per layer: cached keys/values (max_seq x d), plus scratch rows
    std::vector<Tensor<T>> k_cache_, v_cache_;
    std::vector<T> x_, h_, q_, scratch_, attn_, ff_gate_, ff_up_;
    std::vector<T> logits_;
};

/// Greedy (temperature-zero) continuation. Returns prompt + generated
/// tokens; stops on EOS or max_new_tokens. Ties break to the lowest id.
std::vector<TokenId> greedy_generate(const Parameters<float>& params,
                                     std::span<const TokenId> prompt, int max_new_tokens);

/// Greedy decode over (target_logits - scale * assistant_logits). Both
/// models must share the token space; otherwise TokenizerMismatchError.
std::vector<TokenId> logits_diff_decode(const Parameters<float>& target,
                                        const Parameters<float>& assistant,
                                        std::span<const TokenId> prompt, float scale,
                                        int max_new_tokens);

int argmax_row(const float* row, int n);

} // namespace ulwb::lm
