#pragma once
// Experiment configuration, run manifests, and the subcommand entry points
// that bind data generation, training, unlearning, and evaluation together.

#include "ulwb/data/generate.hpp"
#include "ulwb/eval/evaluate.hpp"
#include "ulwb/unlearn/method.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace ulwb::cli {

/// Command-line/config validation problems -> exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    uint64_t seed = 42;
    std::string output_dir = "runs/default";
    int threads = 0;
    double corpus_scale = 1.0;
    data::CorpusSpec corpus;     // post-scale counts, seed filled from `seed`
    lm::ModelConfig model;
    lm::TrainConfig pretrain;
    lm::TrainConfig memorize;
    eval::EvalOptions eval;
    bool eval_after_stages = false; // full ScoreReport after every pipeline stage
    std::string eval_split = "train";
    nlohmann::json method_overrides; // object: preset name -> override document
    std::optional<nlohmann::json> custom_pipeline;
    nlohmann::json sweep; // {"method": ..., "grid": {...}}
    nlohmann::json raw;   // resolved document (what the manifest snapshots)

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
};

/// Built-in presets mirroring the method families: ga, gd, gdiff, klmin,
/// cga, xavier, perturb, logitdiff, gdf_ga, gdf_gdf, gd_ga.
std::vector<std::string> preset_names();
unlearn::PipelineSpec preset_pipeline(const std::string& name, const ExperimentConfig& cfg);

/// Deterministic manifest fingerprint: wall-clock fields are stripped before
/// hashing so identical runs hash identically.
std::string manifest_hash(const nlohmann::json& manifest);

struct LoadedData {
    std::vector<std::string> pretrain_docs;
    std::vector<data::Record> forget_train, forget_val, retain_train, retain_val;
    std::vector<data::MiaMember> members;
    std::vector<data::MiaNonMember> nonmembers;
    std::vector<data::ProbeQuestion> probe;
};

std::string data_dir(const ExperimentConfig& cfg);
std::string checkpoint_dir(const ExperimentConfig& cfg);
LoadedData load_data(const ExperimentConfig& cfg);

int cmd_datagen(const ExperimentConfig& cfg);
int cmd_pretrain(const ExperimentConfig& cfg);
int cmd_memorize(const ExperimentConfig& cfg);
int cmd_unlearn(const ExperimentConfig& cfg, const std::string& method);
int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint,
             const std::string& label, const std::string& dump_generations);
int cmd_report(const std::vector<std::string>& manifest_paths, const std::string& out_dir);
int cmd_sweep(const ExperimentConfig& cfg);

/// Re-run an unlearning manifest from its embedded config snapshot.
int cmd_replay(const std::string& manifest_path, const std::string& out_dir);

} // namespace ulwb::cli
