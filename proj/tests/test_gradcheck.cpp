// Finite-difference oracle for the reverse pass, run in double precision:
// analytic gradients must match central differences (h = 1e-4) within
// relative error 1e-3 on randomly sampled coordinates of every tensor.

#include <doctest.h>

#include "ulwb/lm/model.hpp"
#include "ulwb/util/rng.hpp"

#include <cmath>

using namespace ulwb;
using namespace ulwb::lm;

namespace {

ModelConfig check_cfg() {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 32;
    c.n_heads = 2;
    c.d_ff = 64;
    c.max_seq_len = 24;
    return c;
}

Sample random_sample(Rng& rng, int n) {
    Sample s;
    s.tokens.push_back(Vocabulary::kBos);
    for (int i = 1; i < n; ++i) s.tokens.push_back(static_cast<TokenId>(rng.below(256)));
    s.target_mask.assign(s.tokens.size(), 1);
    s.target_mask[0] = 0;
    // mask a position out so partial masks are exercised too
    if (n > 4) s.target_mask[2] = 0;
    return s;
}

double ce_loss(const Parameters<double>& p, const Sample& s) {
    NllResult r = nll<double>(p, s);
    double sum = 0.0;
    for (double v : r.per_token) sum += v;
    return sum;
}

double composite_loss(const Parameters<double>& p, const Parameters<double>& ref,
                      const Sample& s, double kl_weight) {
    Tensor<double> logits, ref_logits, scratch;
    forward<double>(p, s.tokens, logits);
    forward<double>(ref, s.tokens, ref_logits);
    scratch = Tensor<double>({logits.rows(), logits.cols()});
    double ce = ce_head<double>(logits, s, LossKind::ascent, 1.0, scratch);
    scratch.zero();
    double kl = kl_head<double>(logits, ref_logits, s, 1.0, scratch);
    return -ce + kl_weight * kl;
}

} // namespace

TEST_CASE("analytic gradients match central finite differences") {
    ModelConfig cfg = check_cfg();
    Parameters<double> p = xavier_init(cfg, 404).cast<double>();
    Rng rng(808);
    Sample s = random_sample(rng, 10);

    Parameters<double> grads = make_parameters<double>(cfg);
    int count = 0;
    ce_backward<double>(p, s, LossKind::descent, grads, count);
    CHECK(count == 8);

    const double h = 1e-4;
    Rng coord_rng(909);
    for (size_t t = 0; t < p.tensors.size(); ++t) {
        auto& tensor = p.tensors[t];
        const int samples = static_cast<int>(std::min<int64_t>(10, tensor.numel()));
        for (int k = 0; k < samples; ++k) {
            size_t idx = static_cast<size_t>(coord_rng.below(
                static_cast<uint64_t>(tensor.numel())));
            double saved = tensor.data[idx];
            tensor.data[idx] = saved + h;
            double up = ce_loss(p, s);
            tensor.data[idx] = saved - h;
            double down = ce_loss(p, s);
            tensor.data[idx] = saved;

            double fd = (up - down) / (2.0 * h);
            double an = grads.tensors[t].data[idx];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            INFO("tensor ", p.names[t], " idx ", idx, " fd ", fd, " analytic ", an);
            CHECK(std::abs(fd - an) / denom < 1e-3);
        }
    }
}

TEST_CASE("ascent head flips the finite-difference sign") {
    ModelConfig cfg = check_cfg();
    Parameters<double> p = xavier_init(cfg, 11).cast<double>();
    Rng rng(12);
    Sample s = random_sample(rng, 8);

    Parameters<double> grads = make_parameters<double>(cfg);
    int count = 0;
    ce_backward<double>(p, s, LossKind::ascent, grads, count);

    const double h = 1e-4;
    auto& tensor = p.at("lm_head");
    Rng coord_rng(13);
    for (int k = 0; k < 5; ++k) {
        size_t idx = static_cast<size_t>(coord_rng.below(static_cast<uint64_t>(tensor.numel())));
        double saved = tensor.data[idx];
        tensor.data[idx] = saved + h;
        double up = ce_loss(p, s);
        tensor.data[idx] = saved - h;
        double down = ce_loss(p, s);
        tensor.data[idx] = saved;
        double fd = -(up - down) / (2.0 * h); // ascent loss = -CE
        double an = grads.at("lm_head").data[idx];
        double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        CHECK(std::abs(fd - an) / denom < 1e-3);
    }
}

TEST_CASE("KL-regularized loss head matches finite differences") {
    ModelConfig cfg = check_cfg();
    Parameters<double> p = xavier_init(cfg, 21).cast<double>();
    Parameters<double> ref = xavier_init(cfg, 22).cast<double>();
    Rng rng(23);
    Sample s = random_sample(rng, 7);
    const double kl_weight = 0.7;

    // analytic: combined heads through one backward pass
    ForwardCache<double> cache;
    Tensor<double> logits, ref_logits;
    forward<double>(p, s.tokens, logits, &cache);
    forward<double>(ref, s.tokens, ref_logits);
    Tensor<double> dlogits({logits.rows(), logits.cols()});
    ce_head<double>(logits, s, LossKind::ascent, 1.0, dlogits);
    kl_head<double>(logits, ref_logits, s, kl_weight, dlogits);
    Parameters<double> grads = make_parameters<double>(cfg);
    backward<double>(p, s.tokens, cache, dlogits, grads);

    const double h = 1e-4;
    Rng coord_rng(24);
    for (const char* name : {"lm_head", "layers.0.mlp.gate_proj", "layers.1.self_attn.v_proj",
                             "embed.tokens", "final_norm.gain"}) {
        auto& tensor = p.at(name);
        for (int k = 0; k < 4; ++k) {
            size_t idx =
                static_cast<size_t>(coord_rng.below(static_cast<uint64_t>(tensor.numel())));
            double saved = tensor.data[idx];
            tensor.data[idx] = saved + h;
            double up = composite_loss(p, ref, s, kl_weight);
            tensor.data[idx] = saved - h;
            double down = composite_loss(p, ref, s, kl_weight);
            tensor.data[idx] = saved;
            double fd = (up - down) / (2.0 * h);
            double an = grads.at(name).data[idx];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            INFO("tensor ", name, " idx ", idx);
            CHECK(std::abs(fd - an) / denom < 2e-3);
        }
    }
}

TEST_CASE("KL of a distribution with itself is zero") {
    ModelConfig cfg = check_cfg();
    Parameters<double> p = xavier_init(cfg, 31).cast<double>();
    Rng rng(32);
    Sample s = random_sample(rng, 6);
    Tensor<double> logits;
    forward<double>(p, s.tokens, logits);
    Tensor<double> scratch({logits.rows(), logits.cols()});
    double kl = kl_head<double>(logits, logits, s, 1.0, scratch);
    CHECK(kl == doctest::Approx(0.0).epsilon(1e-12));
}
