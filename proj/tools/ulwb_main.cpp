// ulwb: the unlearning workbench driver.
//   ulwb <datagen|pretrain|memorize|unlearn|eval|report|sweep>
//        --config PATH [--method ID] [--out DIR] [--seed N]
// Exit codes: 0 success, 2 validation error, 3 divergence guard.

#include "ulwb/cli/experiment.hpp"
#include "ulwb/kernels/kernels.hpp"
#include "ulwb/lm/trainer.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

ulwb::cli::ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                                        int64_t seed_override, int threads_override) {
    ulwb::cli::ExperimentConfig cfg =
        path.empty() ? ulwb::cli::ExperimentConfig::from_json(nlohmann::json::object())
                     : ulwb::cli::ExperimentConfig::load(path);
    nlohmann::json j = cfg.raw;
    if (!out_override.empty()) j["output_dir"] = out_override;
    if (seed_override >= 0) j["seed"] = static_cast<uint64_t>(seed_override);
    if (threads_override > 0) j["threads"] = threads_override;
    return ulwb::cli::ExperimentConfig::from_json(j);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ulwb - desk-scale language-model unlearning workbench"};
    app.require_subcommand(1);

    std::string config_path, out_dir, method = "ga", checkpoint, label = "model";
    std::string dump_generations, replay_manifest;
    std::vector<std::string> manifests;
    int64_t seed = -1;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)");
        sub->add_option("--out", out_dir, "override output directory");
        sub->add_option("--seed", seed, "override global seed");
        sub->add_option("--threads", threads, "worker threads (0 = auto)");
    };

    CLI::App* datagen = app.add_subcommand("datagen", "generate the synthetic corpora");
    add_common(datagen);

    CLI::App* pretrain = app.add_subcommand("pretrain", "train the base model");
    add_common(pretrain);

    CLI::App* memorize =
        app.add_subcommand("memorize", "fine-tune the base model to memorize forget+retain");
    add_common(memorize);

    CLI::App* unlearn = app.add_subcommand("unlearn", "run an unlearning method or pipeline");
    add_common(unlearn);
    unlearn->add_option("--method", method, "preset or 'custom' (see --list-methods)");
    unlearn->add_option("--replay", replay_manifest, "re-run from a manifest snapshot");

    CLI::App* evalc = app.add_subcommand("eval", "score a checkpoint");
    add_common(evalc);
    evalc->add_option("--checkpoint", checkpoint, "checkpoint to score")->required();
    evalc->add_option("--label", label, "row label for the report");
    evalc->add_option("--dump-generations", dump_generations,
                      "write generation records (JSONL) for audit");

    CLI::App* report = app.add_subcommand("report", "comparison table from run manifests");
    report->add_option("--out", out_dir, "directory for report.txt/report.csv");
    report->add_option("manifests", manifests, "unlearn manifest.json paths")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "grid sweep over method hyperparameters");
    add_common(sweep);

    bool list_methods = false;
    app.add_flag("--list-methods", list_methods, "print method presets and exit");

    CLI11_PARSE(app, argc, argv);

    if (list_methods) {
        for (const auto& name : ulwb::cli::preset_names()) std::cout << name << "\n";
        return 0;
    }

    try {
        if (report->parsed()) return ulwb::cli::cmd_report(manifests, out_dir);

        ulwb::cli::ExperimentConfig cfg = load_config(config_path, out_dir, seed, threads);
        if (datagen->parsed()) return ulwb::cli::cmd_datagen(cfg);
        if (pretrain->parsed()) return ulwb::cli::cmd_pretrain(cfg);
        if (memorize->parsed()) return ulwb::cli::cmd_memorize(cfg);
        if (unlearn->parsed()) {
            if (!replay_manifest.empty())
                return ulwb::cli::cmd_replay(replay_manifest, out_dir);
            return ulwb::cli::cmd_unlearn(cfg, method);
        }
        if (evalc->parsed())
            return ulwb::cli::cmd_eval(cfg, checkpoint, label, dump_generations);
        if (sweep->parsed()) return ulwb::cli::cmd_sweep(cfg);
    } catch (const ulwb::cli::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ulwb::lm::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
