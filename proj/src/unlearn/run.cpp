#include "ulwb/unlearn/run.hpp"

#include "ulwb/util/rng.hpp"

#include <chrono>
#include <cmath>

namespace ulwb::unlearn {

using lm::LossKind;
using lm::Parameters;
using lm::Sample;
using lm::TrainConfig;
using lm::TrainTrace;

double divergence_threshold(const lm::ModelConfig& cfg) {
    return 2.0 * std::log(static_cast<double>(cfg.vocab_size)) + 5.0;
}

namespace {

lm::TrainerOptions base_options(const Parameters<float>& params, const RunOptions& opts) {
    lm::TrainerOptions t;
    t.threads = opts.threads;
    t.divergence_nll_threshold = divergence_threshold(params.config);
    return t;
}

} // namespace

TrainTrace run_gradient_ascent(Parameters<float>& params, const std::vector<Sample>& forget_data,
                               const TrainConfig& train, const RunOptions& opts) {
    if (forget_data.empty()) throw std::invalid_argument("gradient ascent: forget set is empty");
    train.validate();
    lm::TrainerOptions t = base_options(params, opts);
    // ascent destroys likelihood by design; guard on the way up
    return lm::train(params, forget_data, train, LossKind::ascent, t);
}

TrainTrace run_gradient_descent(Parameters<float>& params, const std::vector<Sample>& retain_data,
                                const TrainConfig& train, const RunOptions& opts) {
    if (retain_data.empty()) throw std::invalid_argument("gradient descent: retain set is empty");
    train.validate();
    lm::TrainerOptions t = base_options(params, opts);
    return lm::train(params, retain_data, train, LossKind::descent, t);
}

std::pair<TrainTrace, TrainTrace> run_gradient_difference(
    Parameters<float>& params, const std::vector<Sample>& forget_data,
    const std::vector<Sample>& retain_data, const TrainConfig& ga_cfg,
    const TrainConfig& gd_cfg, const RunOptions& opts) {
    TrainTrace a = run_gradient_ascent(params, forget_data, ga_cfg, opts);
    TrainTrace b = run_gradient_descent(params, retain_data, gd_cfg, opts);
    return {std::move(a), std::move(b)};
}

TrainTrace run_kl_minimization(Parameters<float>& params, const Parameters<float>& reference,
                               const std::vector<Sample>& forget_data, const TrainConfig& train,
                               double kl_weight, const RunOptions& opts) {
    if (forget_data.empty())
        throw std::invalid_argument("KL minimization: forget set is empty");
    if (kl_weight < 0.0) throw std::invalid_argument("KL minimization: kl_weight must be >= 0");
    train.validate();
    lm::TrainerOptions t = base_options(params, opts);
    t.kl_reference = &reference;
    t.kl_weight = kl_weight;
    return lm::train(params, forget_data, train, LossKind::ascent, t);
}

TrainTrace run_controlled_ga(Parameters<float>& params, const std::vector<Sample>& forget_data,
                             const TrainConfig& train, double alpha, const RunOptions& opts) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("controlled GA: alpha must be in (0, 1]");
    if (forget_data.empty()) throw std::invalid_argument("controlled GA: forget set is empty");
    train.validate();
    lm::TrainerOptions t = base_options(params, opts);
    t.post_clip_scale = alpha;
    return lm::train(params, forget_data, train, LossKind::ascent, t);
}

Parameters<float> apply_xavier_reinit(const Parameters<float>& params, uint64_t seed) {
    return lm::xavier_init(params.config, seed);
}

void apply_layer_perturbation(Parameters<float>& params, const PerturbSpec& spec) {
    spec.validate();
    const int n_layers = params.config.n_layers;
    const int freeze_below =
        static_cast<int>(std::floor(spec.freeze_fraction * static_cast<double>(n_layers)));
    for (int l = freeze_below; l < n_layers; ++l) {
        for (const auto& [component, ratio] : spec.modify_ratio) {
            if (ratio == 0.0) continue;
            auto& w = params.layer(l, component);
            Rng rng(derive_seed(spec.seed,
                                "perturb." + std::to_string(l) + "." + component));
            for (float& v : w.data)
                v += static_cast<float>(rng.normal() * ratio);
        }
    }
}

std::vector<StageReport> run_pipeline(Parameters<float>& params, const PipelineSpec& pipeline,
                                      const PipelineData& data, const RunOptions& opts,
                                      const StageHook& hook) {
    pipeline.validate();
    std::vector<StageReport> reports;
    const Parameters<float> reference = params; // frozen pre-unlearning copy for KLMin

    for (size_t i = 0; i < pipeline.stages.size(); ++i) {
        const MethodSpec& stage = pipeline.stages[i];
        StageReport rep;
        rep.kind = kind_name(stage.kind);
        auto t0 = std::chrono::steady_clock::now();

        switch (stage.kind) {
        case MethodKind::GA:
            if (!data.forget) throw std::invalid_argument("pipeline: GA needs forget data");
            rep.trace = run_gradient_ascent(params, *data.forget, stage.train, opts);
            break;
        case MethodKind::GD:
            if (!data.retain) throw std::invalid_argument("pipeline: GD needs retain data");
            rep.trace = run_gradient_descent(params, *data.retain, stage.train, opts);
            break;
        case MethodKind::GDiff: {
            if (!data.forget || !data.retain)
                throw std::invalid_argument("pipeline: GDiff needs forget and retain data");
            auto [a, b] = run_gradient_difference(params, *data.forget, *data.retain,
                                                  stage.train, stage.train2, opts);
            rep.trace = a;
            for (auto& e : b.epochs) rep.trace.epochs.push_back(e);
            rep.trace.total_steps += b.total_steps;
            break;
        }
        case MethodKind::KLMin:
            if (!data.forget) throw std::invalid_argument("pipeline: KLMin needs forget data");
            rep.trace = run_kl_minimization(params, reference, *data.forget, stage.train,
                                            stage.kl_weight, opts);
            break;
        case MethodKind::ControlledGA:
            if (!data.forget)
                throw std::invalid_argument("pipeline: controlled GA needs forget data");
            rep.trace = run_controlled_ga(params, *data.forget, stage.train, stage.alpha, opts);
            break;
        case MethodKind::XavierReinit:
            params = apply_xavier_reinit(params, stage.reinit_seed);
            break;
        case MethodKind::LayerPerturb:
            apply_layer_perturbation(params, stage.perturb);
            break;
        case MethodKind::LogitsDiff:
            // inference-time composition; parameters unchanged. The caller
            // composes decoders with lm::logits_diff_decode and this stage's
            // scale.
            break;
        }

        rep.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (hook) hook(static_cast<int>(i), stage, rep, params);
        reports.push_back(std::move(rep));
    }
    return reports;
}

} // namespace ulwb::unlearn
