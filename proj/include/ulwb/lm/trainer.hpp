#pragma once
// Epoch/batch training loop. Gradients are accumulated per sample into
// private buffers and combined in sample order, so results are bit-identical
// for any worker-thread count. Batch order is a pure function of the config
// seed.

#include "ulwb/lm/model.hpp"
#include "ulwb/lm/optimizer.hpp"

#include <functional>
#include <vector>

namespace ulwb::lm {

/// Raised when the divergence guard trips (the model is effectively
/// destroyed and further training would only produce NaN checkpoints).
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpochRecord {
    int epoch = 0;
    double train_ce = 0.0;  // token-mean CE over the epoch's batches
    double train_kl = 0.0;  // token-mean KL (KL-regularized runs only)
    double eval_nll = 0.0;  // dataset mean NLL evaluated after the epoch
};

struct TrainTrace {
    double initial_nll = 0.0;
    std::vector<EpochRecord> epochs;
    int total_steps = 0;
};

struct TrainerOptions {
    int threads = 0;                        // <= 0: auto (env ULWB_THREADS, then hw)
    double post_clip_scale = 1.0;           // gradient scale applied after clipping
    const Parameters<float>* kl_reference = nullptr;
    double kl_weight = 0.0;
    double divergence_nll_threshold = 0.0;  // <= 0: guard disabled
    bool eval_each_epoch = true;
    std::function<void(const EpochRecord&)> on_epoch;
};

int default_threads();

/// Token-mean NLL over a dataset (read-only, parallel over samples).
double dataset_mean_nll(const Parameters<float>& params, const std::vector<Sample>& data,
                        int threads = 0);

/// Trains in place. `kind` selects descent or ascent on the cross-entropy;
/// a KL reference adds kl_weight * KL(current || reference) to the loss.
TrainTrace train(Parameters<float>& params, const std::vector<Sample>& data,
                 const TrainConfig& cfg, LossKind kind, const TrainerOptions& opts = {});

} // namespace ulwb::lm
