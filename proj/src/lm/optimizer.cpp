#include "ulwb/lm/optimizer.hpp"

#include "ulwb/kernels/kernels.hpp"

#include <cmath>

namespace ulwb::lm {

double schedule_factor(LrSchedule kind, int step_index, int total_steps, int warmup) {
    if (warmup > 0 && step_index < warmup)
        return static_cast<double>(step_index) / static_cast<double>(warmup);
    const int decay_span = total_steps - 1 - warmup;
    if (decay_span <= 0) return 1.0; // no room to decay (tiny runs)
    double progress = static_cast<double>(step_index - warmup) / static_cast<double>(decay_span);
    if (progress > 1.0) progress = 1.0;
    if (kind == LrSchedule::linear) return 1.0 - progress;
    return 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

double clip_global_norm(Parameters<float>& grads, double max_norm) {
    double ss = 0.0;
    for (const auto& t : grads.tensors)
        ss += kernels::sumsq(t.ptr(), static_cast<int>(t.numel()));
    double norm = std::sqrt(ss);
    if (norm > max_norm && norm > 0.0) {
        float s = static_cast<float>(max_norm / norm);
        for (auto& t : grads.tensors) kernels::scale(static_cast<int>(t.numel()), s, t.ptr());
    }
    return norm;
}

void AdamW::step(Parameters<float>& params, Parameters<float>& grads, const TrainConfig& cfg,
                 int step_index, int total_steps) {
    last_grad_norm_ = clip_global_norm(grads, cfg.grad_clip_max_norm);

    const double factor =
        schedule_factor(cfg.scheduler, step_index, total_steps, cfg.warmup_steps);
    last_factor_ = factor;
    const float lr_t = static_cast<float>(cfg.lr * factor);
    const float wd_t = static_cast<float>(cfg.weight_decay * factor);

    step_count_ += 1;
    const float inv_bc1 =
        static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(kBeta1), step_count_)));
    const float inv_bc2 =
        static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(kBeta2), step_count_)));

    for (size_t i = 0; i < params.tensors.size(); ++i) {
        auto& p = params.tensors[i];
        auto& g = grads.tensors[i];
        if (p.dims != g.dims) throw std::invalid_argument("gradient shape mismatch: " +
                                                          params.names[i]);
        kernels::adamw_update(static_cast<int>(p.numel()), p.ptr(), g.ptr(),
                              m_.tensors[i].ptr(), v_.tensors[i].ptr(), lr_t, kBeta1, kBeta2,
                              kEps, inv_bc1, inv_bc2, wd_t);
    }
}

void AdamW::reset() {
    m_.zero_all();
    v_.zero_all();
    step_count_ = 0;
}

} // namespace ulwb::lm
