#include <doctest.h>

#include "ulwb/lm/optimizer.hpp"
#include "ulwb/util/rng.hpp"

#include <cmath>

using namespace ulwb;
using namespace ulwb::lm;

namespace {

ModelConfig small_cfg() {
    ModelConfig c;
    c.n_layers = 1;
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ff = 32;
    c.max_seq_len = 8;
    return c;
}

Parameters<float> random_params(const ModelConfig& cfg, uint64_t seed) {
    return xavier_init(cfg, seed);
}

Parameters<float> random_grads(const ModelConfig& cfg, uint64_t seed, float scale) {
    Parameters<float> g = make_parameters<float>(cfg);
    Rng rng(seed);
    for (auto& t : g.tensors)
        for (auto& v : t.data) v = static_cast<float>(rng.uniform(-scale, scale));
    return g;
}

bool bit_identical(const Parameters<float>& a, const Parameters<float>& b) {
    for (size_t i = 0; i < a.tensors.size(); ++i)
        if (a.tensors[i].data != b.tensors[i].data) return false;
    return true;
}

} // namespace

TEST_CASE("linear schedule: warmup 3 then decay to zero at the final step") {
    const int total = 10, warmup = 3;
    CHECK(schedule_factor(LrSchedule::linear, 0, total, warmup) == doctest::Approx(0.0));
    CHECK(schedule_factor(LrSchedule::linear, 1, total, warmup) == doctest::Approx(1.0 / 3));
    CHECK(schedule_factor(LrSchedule::linear, 2, total, warmup) == doctest::Approx(2.0 / 3));
    CHECK(schedule_factor(LrSchedule::linear, 3, total, warmup) == doctest::Approx(1.0));
    CHECK(schedule_factor(LrSchedule::linear, total - 1, total, warmup) == doctest::Approx(0.0));
    // strictly decreasing over the decay span
    for (int s = warmup; s + 1 < total; ++s)
        CHECK(schedule_factor(LrSchedule::linear, s, total, warmup) >
              schedule_factor(LrSchedule::linear, s + 1, total, warmup));
}

TEST_CASE("cosine schedule endpoints") {
    const int total = 12, warmup = 3;
    CHECK(schedule_factor(LrSchedule::cosine, 3, total, warmup) == doctest::Approx(1.0));
    CHECK(schedule_factor(LrSchedule::cosine, total - 1, total, warmup) ==
          doctest::Approx(0.0).epsilon(1e-12));
    double mid = schedule_factor(LrSchedule::cosine, (3 + total - 1) / 2, total, warmup);
    CHECK(mid == doctest::Approx(0.5).epsilon(0.01));
    // no warmup: starts at full factor
    CHECK(schedule_factor(LrSchedule::cosine, 0, total, 0) == doctest::Approx(1.0));
}

TEST_CASE("global norm clipping") {
    ModelConfig cfg = small_cfg();
    Parameters<float> g = random_grads(cfg, 9, 0.1f);
    // rescale to global norm 10 exactly, then clip to 1
    double ss = 0.0;
    for (auto& t : g.tensors)
        for (float v : t.data) ss += static_cast<double>(v) * v;
    float to10 = static_cast<float>(10.0 / std::sqrt(ss));
    for (auto& t : g.tensors)
        for (auto& v : t.data) v *= to10;

    double pre = clip_global_norm(g, 1.0);
    CHECK(pre == doctest::Approx(10.0).epsilon(1e-5));
    double post = 0.0;
    for (auto& t : g.tensors)
        for (float v : t.data) post += static_cast<double>(v) * v;
    CHECK(std::sqrt(post) == doctest::Approx(1.0).epsilon(1e-6));

    // below the threshold: untouched
    Parameters<float> small = random_grads(cfg, 10, 1e-4f);
    Parameters<float> copy = small;
    clip_global_norm(small, 1.0);
    CHECK(bit_identical(small, copy));
}

TEST_CASE("lr 0 leaves parameters unchanged except the decay term") {
    ModelConfig cfg = small_cfg();
    TrainConfig tc;
    tc.lr = 0.0; // exercised mechanically; run-level validation rejects this
    tc.weight_decay = 0.0;
    tc.warmup_steps = 0;
    Parameters<float> p = random_params(cfg, 3);
    Parameters<float> orig = p;
    Parameters<float> g = random_grads(cfg, 4, 0.5f);

    AdamW opt(cfg);
    opt.step(p, g, tc, 0, 10);
    CHECK(bit_identical(p, orig));

    // with weight decay the decay term still applies at lr 0
    tc.weight_decay = 0.125; // exactly representable: p *= (1 - wd) is predictable
    Parameters<float> p2 = orig;
    Parameters<float> g2 = random_grads(cfg, 4, 0.5f);
    AdamW opt2(cfg);
    opt2.step(p2, g2, tc, 0, 10);
    CHECK_FALSE(bit_identical(p2, orig));
    for (size_t t = 0; t < p2.tensors.size(); ++t)
        for (size_t i = 0; i < p2.tensors[t].data.size(); ++i)
            CHECK(p2.tensors[t].data[i] ==
                  doctest::Approx(orig.tensors[t].data[i] * 0.875f).epsilon(1e-6));
}

TEST_CASE("shape mismatch is rejected") {
    ModelConfig cfg = small_cfg();
    Parameters<float> p = random_params(cfg, 1);
    ModelConfig other = cfg;
    other.d_ff = 64;
    Parameters<float> g = make_parameters<float>(other);
    AdamW opt(cfg);
    TrainConfig tc;
    CHECK_THROWS_AS(opt.step(p, g, tc, 0, 10), std::invalid_argument);
}

TEST_CASE("deterministic: same inputs give bit-identical steps") {
    ModelConfig cfg = small_cfg();
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.weight_decay = 0.01;
    auto run = [&] {
        Parameters<float> p = random_params(cfg, 5);
        Parameters<float> g = random_grads(cfg, 6, 0.3f);
        AdamW opt(cfg);
        opt.step(p, g, tc, 1, 10);
        return p;
    };
    CHECK(bit_identical(run(), run()));
}
