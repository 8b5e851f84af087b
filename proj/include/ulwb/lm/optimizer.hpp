#pragma once
// AdamW with global-norm clipping and warmup schedules. Clipping happens
// before the moment update; decoupled decay scales with the schedule factor
// but not with the base learning rate, so a zero learning rate still decays.

#include "ulwb/lm/config.hpp"
#include "ulwb/lm/params.hpp"

namespace ulwb::lm {

/// Schedule multiplier for step s of a run with `total_steps` optimizer
/// steps: ramps 0 -> 1 over `warmup` steps, then decays to 0 at the last
/// step (linearly or by half-cosine).
double schedule_factor(LrSchedule kind, int step_index, int total_steps, int warmup);

/// Scales gradients in place so the global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
double clip_global_norm(Parameters<float>& grads, double max_norm);

class AdamW {
public:
    static constexpr float kBeta1 = 0.9f;
    static constexpr float kBeta2 = 0.999f;
    static constexpr float kEps = 1e-8f;

    explicit AdamW(const ModelConfig& cfg)
        : m_(make_parameters<float>(cfg)), v_(make_parameters<float>(cfg)) {}

    /// Clip + schedule + update. `step_index` counts optimizer steps from 0
    /// across the whole run of `total_steps`.
    void step(Parameters<float>& params, Parameters<float>& grads, const TrainConfig& cfg,
              int step_index, int total_steps);

    void reset();

    double last_grad_norm() const { return last_grad_norm_; }
    double last_lr_factor() const { return last_factor_; }

private:
    Parameters<float> m_, v_;
    int64_t step_count_ = 0;
    double last_grad_norm_ = 0.0;
    double last_factor_ = 0.0;
};

} // namespace ulwb::lm
