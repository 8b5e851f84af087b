#pragma once
// Execution of unlearning methods on a model checkpoint. All gradient
// methods share the lm trainer; the divergence guard aborts a run once the
// training-set NLL passes 2*ln(vocab) + 5 (the model is destroyed and
// checkpoints would be garbage from there on).

#include "ulwb/lm/trainer.hpp"
#include "ulwb/unlearn/method.hpp"

#include <functional>
#include <optional>

namespace ulwb::unlearn {

double divergence_threshold(const lm::ModelConfig& cfg);

struct RunOptions {
    int threads = 0;
    bool record_trace = true;
};

lm::TrainTrace run_gradient_ascent(lm::Parameters<float>& params,
                                   const std::vector<lm::Sample>& forget_data,
                                   const lm::TrainConfig& train, const RunOptions& opts = {});

lm::TrainTrace run_gradient_descent(lm::Parameters<float>& params,
                                    const std::vector<lm::Sample>& retain_data,
                                    const lm::TrainConfig& train, const RunOptions& opts = {});

/// GA on forget then GD on retain; exactly the two-call composition.
std::pair<lm::TrainTrace, lm::TrainTrace> run_gradient_difference(
    lm::Parameters<float>& params, const std::vector<lm::Sample>& forget_data,
    const std::vector<lm::Sample>& retain_data, const lm::TrainConfig& ga_cfg,
    const lm::TrainConfig& gd_cfg, const RunOptions& opts = {});

/// Ascent CE plus kl_weight * KL(current || reference) on forget batches.
/// `reference` must be a frozen copy of the pre-unlearning parameters.
lm::TrainTrace run_kl_minimization(lm::Parameters<float>& params,
                                   const lm::Parameters<float>& reference,
                                   const std::vector<lm::Sample>& forget_data,
                                   const lm::TrainConfig& train, double kl_weight,
                                   const RunOptions& opts = {});

/// GA whose clipped gradient is scaled by alpha before the optimizer step.
lm::TrainTrace run_controlled_ga(lm::Parameters<float>& params,
                                 const std::vector<lm::Sample>& forget_data,
                                 const lm::TrainConfig& train, double alpha,
                                 const RunOptions& opts = {});

/// Erase everything: fresh Xavier draw with the same architecture.
lm::Parameters<float> apply_xavier_reinit(const lm::Parameters<float>& params, uint64_t seed);

/// weight += N(0,1) * modify_ratio elementwise on non-frozen layers.
void apply_layer_perturbation(lm::Parameters<float>& params, const PerturbSpec& spec);

struct StageReport {
    std::string kind;
    lm::TrainTrace trace;
    std::string checkpoint_path; // filled by the pipeline callback, if any
    double wall_clock_sec = 0.0;
};

/// Data the pipeline stages draw on.
struct PipelineData {
    const std::vector<lm::Sample>* forget = nullptr;
    const std::vector<lm::Sample>* retain = nullptr;
};

/// Callback after each stage: persist checkpoints, run eval snapshots.
using StageHook = std::function<void(int stage_index, const MethodSpec&, StageReport&,
                                      const lm::Parameters<float>&)>;

/// Runs stages in order; optimizer state is fresh at every stage. A
/// LogitsDiff stage is inference-time and must be final; it leaves the
/// parameters untouched (consumers compose decoders via lm::logits_diff_decode).
std::vector<StageReport> run_pipeline(lm::Parameters<float>& params,
                                      const PipelineSpec& pipeline, const PipelineData& data,
                                      const RunOptions& opts = {},
                                      const StageHook& hook = nullptr);

} // namespace ulwb::unlearn
