#pragma once
// Unlearning method specifications and their pipeline composition.

#include "ulwb/lm/config.hpp"

#include <map>
#include <string>
#include <vector>

namespace ulwb::unlearn {

enum class MethodKind {
    GA,            // gradient ascent on the forget set
    GD,            // gradient descent on the retain set
    GDiff,         // GA then GD
    KLMin,         // GA with a KL anchor to the pre-unlearning model
    ControlledGA,  // GA with post-clip gradient scaling
    XavierReinit,  // erase weights, re-init
    LayerPerturb,  // per-component noise injection above a freeze boundary
    LogitsDiff,    // inference-time assistant subtraction
};

std::string kind_name(MethodKind k);
MethodKind kind_from_name(const std::string& s);

struct PerturbSpec {
    // per-component noise scale; keys are the seven layer component names
    std::map<std::string, double> modify_ratio;
    double freeze_fraction = 0.75;
    uint64_t seed = 0;

    static PerturbSpec defaults();
    void validate() const;
};

struct MethodSpec {
    MethodKind kind = MethodKind::GA;
    lm::TrainConfig train;   // gradient kinds (GA/GD/KLMin/ControlledGA; GDiff GA stage)
    lm::TrainConfig train2;  // GDiff GD stage
    double alpha = 0.1;      // ControlledGA
    double kl_weight = 1.0;  // KLMin
    PerturbSpec perturb;     // LayerPerturb
    double scale = 0.2;      // LogitsDiff
    uint64_t reinit_seed = 1; // XavierReinit

    void validate() const;
};

struct PipelineSpec {
    std::vector<MethodSpec> stages;

    void validate() const;
};

/// Parse a method/pipeline section of the experiment config document.
MethodSpec method_from_json(const std::string& json_text);
PipelineSpec pipeline_from_json(const std::string& json_text);

} // namespace ulwb::unlearn
