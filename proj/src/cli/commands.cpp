#include "ulwb/cli/experiment.hpp"

#include "ulwb/data/encode.hpp"
#include "ulwb/kernels/kernels.hpp"
#include "ulwb/lm/checkpoint.hpp"
#include "ulwb/lm/trainer.hpp"
#include "ulwb/unlearn/run.hpp"
#include "ulwb/util/hash.hpp"
#include "ulwb/util/io.hpp"
#include "ulwb/util/rng.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace ulwb::cli {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

json trace_to_json(const lm::TrainTrace& t) {
    json epochs = json::array();
    for (const auto& e : t.epochs)
        epochs.push_back(json{{"epoch", e.epoch},
                              {"train_ce", e.train_ce},
                              {"train_kl", e.train_kl},
                              {"eval_nll", e.eval_nll}});
    return json{{"initial_nll", t.initial_nll}, {"total_steps", t.total_steps},
                {"epochs", epochs}};
}

json stage_config_json(const unlearn::MethodSpec& m) {
    json j{{"kind", unlearn::kind_name(m.kind)}};
    auto tr = [](const lm::TrainConfig& c) {
        return json{{"lr", c.lr},
                    {"weight_decay", c.weight_decay},
                    {"epochs", c.epochs},
                    {"batch_size", c.batch_size},
                    {"scheduler", lm::schedule_name(c.scheduler)},
                    {"warmup_steps", c.warmup_steps},
                    {"grad_clip_max_norm", c.grad_clip_max_norm},
                    {"seed", c.seed}};
    };
    switch (m.kind) {
    case unlearn::MethodKind::GA:
    case unlearn::MethodKind::GD:
        j["train"] = tr(m.train);
        break;
    case unlearn::MethodKind::GDiff:
        j["train"] = tr(m.train);
        j["train2"] = tr(m.train2);
        break;
    case unlearn::MethodKind::KLMin:
        j["train"] = tr(m.train);
        j["kl_weight"] = m.kl_weight;
        break;
    case unlearn::MethodKind::ControlledGA:
        j["train"] = tr(m.train);
        j["alpha"] = m.alpha;
        break;
    case unlearn::MethodKind::XavierReinit:
        j["reinit_seed"] = m.reinit_seed;
        break;
    case unlearn::MethodKind::LayerPerturb: {
        json ratios = json::object();
        for (const auto& [k, v] : m.perturb.modify_ratio) ratios[k] = v;
        j["perturb"] = json{{"modify_ratio", ratios},
                            {"freeze_fraction", m.perturb.freeze_fraction},
                            {"seed", m.perturb.seed}};
        break;
    }
    case unlearn::MethodKind::LogitsDiff:
        j["scale"] = m.scale;
        j["train"] = tr(m.train); // assistant fine-tune config
        break;
    }
    return j;
}

void write_manifest(const std::string& path, json manifest) {
    manifest["manifest_hash"] = manifest_hash(manifest);
    atomic_write_file(path, manifest.dump(2) + "\n");
}

json base_manifest(const ExperimentConfig& cfg, const std::string& command) {
    return json{{"artifact_version", 1},
                {"command", command},
                {"kernel_backend", kernels::backend_name()},
                {"seed", cfg.seed},
                {"config", cfg.raw},
                {"status", "ok"}};
}

const std::vector<data::Record>& eval_forget(const ExperimentConfig& cfg, const LoadedData& d) {
    return cfg.eval_split == "val" ? d.forget_val : d.forget_train;
}
const std::vector<data::Record>& eval_retain(const ExperimentConfig& cfg, const LoadedData& d) {
    return cfg.eval_split == "val" ? d.retain_val : d.retain_train;
}

eval::ScoreReport run_full_report(const ExperimentConfig& cfg, const LoadedData& d,
                                  const lm::Parameters<float>& model) {
    return eval::full_report(model, eval_forget(cfg, d), eval_retain(cfg, d), d.members,
                             d.nonmembers, d.probe, cfg.eval);
}

std::vector<lm::Sample> forget_samples(const ExperimentConfig& cfg, const LoadedData& d) {
    return data::encode_records(d.forget_train, cfg.model.max_seq_len);
}
std::vector<lm::Sample> retain_samples(const ExperimentConfig& cfg, const LoadedData& d) {
    return data::encode_records(d.retain_train, cfg.model.max_seq_len);
}

lm::Parameters<float> load_checkpoint_or_fail(const std::string& path) {
    if (!fs::exists(path))
        throw ValidationError("missing upstream artifact: " + path);
    return lm::checkpoint_load(path);
}

} // namespace

int cmd_datagen(const ExperimentConfig& cfg) {
    const std::string dir = data_dir(cfg);
    ensure_dir(dir);
    auto t0 = Clock::now();

    data::Corpus corpus = data::generate_corpus(cfg.corpus);
    data::MiaSets mia = data::build_mia_sets(corpus, cfg.corpus);

    std::string pre;
    for (const auto& doc : corpus.pretrain_docs) {
        pre += doc;
        pre += '\n';
    }
    atomic_write_file(dir + "/pretrain.txt", pre);
    data::write_jsonl(corpus.forget_train, dir + "/forget_train.jsonl");
    data::write_jsonl(corpus.forget_val, dir + "/forget_val.jsonl");
    data::write_jsonl(corpus.retain_train, dir + "/retain_train.jsonl");
    data::write_jsonl(corpus.retain_val, dir + "/retain_val.jsonl");
    data::write_mia_members(mia.members, dir + "/mia_members.jsonl");
    data::write_mia_nonmembers(mia.non_members, dir + "/mia_nonmembers.jsonl");
    data::write_probe(corpus.probe, dir + "/probe.jsonl");

    json files = json::object();
    for (const char* f :
         {"pretrain.txt", "forget_train.jsonl", "forget_val.jsonl", "retain_train.jsonl",
          "retain_val.jsonl", "mia_members.jsonl", "mia_nonmembers.jsonl", "probe.jsonl"})
        files[f] = hash_hex(hash_file(dir + "/" + f));

    json manifest = base_manifest(cfg, "datagen");
    manifest["files"] = files;
    manifest["wall_clock_sec"] = seconds_since(t0);
    write_manifest(dir + "/datagen_manifest.json", manifest);
    std::cout << "datagen: wrote " << dir << " (" << corpus.forget_train.size() << " forget / "
              << corpus.retain_train.size() << " retain train records)\n";
    return 0;
}

int cmd_pretrain(const ExperimentConfig& cfg) {
    LoadedData d = load_data(cfg);
    ensure_dir(checkpoint_dir(cfg));
    auto t0 = Clock::now();

    lm::Parameters<float> params = lm::xavier_init(cfg.model, derive_seed(cfg.seed, "init"));
    auto samples = data::encode_documents(d.pretrain_docs, cfg.model.max_seq_len);

    lm::TrainerOptions topts;
    topts.threads = cfg.threads;
    topts.divergence_nll_threshold = unlearn::divergence_threshold(cfg.model);
    topts.on_epoch = [](const lm::EpochRecord& e) {
        std::cout << "pretrain epoch " << e.epoch << ": train_ce " << e.train_ce << ", nll "
                  << e.eval_nll << "\n";
    };
    lm::TrainTrace trace = lm::train(params, samples, cfg.pretrain, lm::LossKind::descent, topts);

    const std::string path = checkpoint_dir(cfg) + "/base.ulwb";
    lm::checkpoint_save(params, path);

    json manifest = base_manifest(cfg, "pretrain");
    manifest["stages"] = json::array({json{{"kind", "Pretrain"},
                                           {"train", cfg.raw.at("pretrain")},
                                           {"checkpoint", path},
                                           {"checkpoint_hash", hash_hex(hash_file(path))},
                                           {"trace", trace_to_json(trace)},
                                           {"wall_clock_sec", seconds_since(t0)}}});
    manifest["wall_clock_sec"] = seconds_since(t0);
    write_manifest(checkpoint_dir(cfg) + "/pretrain_manifest.json", manifest);
    std::cout << "pretrain: saved " << path << "\n";
    return 0;
}

int cmd_memorize(const ExperimentConfig& cfg) {
    LoadedData d = load_data(cfg);
    auto t0 = Clock::now();
    lm::Parameters<float> params =
        load_checkpoint_or_fail(checkpoint_dir(cfg) + "/base.ulwb");

    // memorization trains on forget + retain train splits
    auto samples = forget_samples(cfg, d);
    auto retain = retain_samples(cfg, d);
    samples.insert(samples.end(), retain.begin(), retain.end());

    lm::TrainerOptions topts;
    topts.threads = cfg.threads;
    topts.divergence_nll_threshold = unlearn::divergence_threshold(cfg.model);
    topts.on_epoch = [](const lm::EpochRecord& e) {
        std::cout << "memorize epoch " << e.epoch << ": train_ce " << e.train_ce << ", nll "
                  << e.eval_nll << "\n";
    };
    lm::TrainTrace trace = lm::train(params, samples, cfg.memorize, lm::LossKind::descent, topts);

    const std::string path = checkpoint_dir(cfg) + "/target.ulwb";
    lm::checkpoint_save(params, path);

    json manifest = base_manifest(cfg, "memorize");
    manifest["stages"] = json::array({json{{"kind", "Memorize"},
                                           {"train", cfg.raw.at("memorize")},
                                           {"checkpoint", path},
                                           {"checkpoint_hash", hash_hex(hash_file(path))},
                                           {"trace", trace_to_json(trace)},
                                           {"wall_clock_sec", seconds_since(t0)}}});
    manifest["wall_clock_sec"] = seconds_since(t0);
    write_manifest(checkpoint_dir(cfg) + "/memorize_manifest.json", manifest);
    std::cout << "memorize: saved " << path << "\n";
    return 0;
}

namespace {

/// The unlearning driver shared by cmd_unlearn and cmd_sweep.
int run_unlearn(const ExperimentConfig& cfg, const std::string& method,
                const std::string& run_dir, json* manifest_out) {
    LoadedData d = load_data(cfg);
    unlearn::PipelineSpec pipeline = preset_pipeline(method, cfg);
    ensure_dir(run_dir);

    const std::string target_path = checkpoint_dir(cfg) + "/target.ulwb";
    lm::Parameters<float> params = load_checkpoint_or_fail(target_path);

    auto forget = forget_samples(cfg, d);
    auto retain = retain_samples(cfg, d);

    unlearn::RunOptions ropts;
    ropts.threads = cfg.threads;
    unlearn::PipelineData pdata{&forget, &retain};

    auto t0 = Clock::now();
    json manifest = base_manifest(cfg, "unlearn");
    manifest["method"] = method;
    manifest["inputs"] =
        json{{"target_checkpoint", target_path},
             {"target_hash", hash_hex(hash_file(target_path))}};
    json stages = json::array();

    // LogitsDiff needs an assistant fine-tuned on the forget set; prepare it
    // before the stage hook runs so the final eval can compose decoders.
    std::optional<lm::Parameters<float>> assistant;
    double logits_scale = 0.0;

    try {
        auto hook = [&](int idx, const unlearn::MethodSpec& spec, unlearn::StageReport& rep,
                        const lm::Parameters<float>& cur) {
            char name[64];
            std::snprintf(name, sizeof(name), "stage_%02d_%s.ulwb", idx, rep.kind.c_str());
            const std::string path = run_dir + "/" + name;

            if (spec.kind == unlearn::MethodKind::LogitsDiff) {
                // assistant: fresh init fine-tuned to remember the forget set
                assistant = lm::xavier_init(cfg.model, derive_seed(spec.train.seed, "assistant"));
                lm::TrainerOptions topts;
                topts.threads = cfg.threads;
                topts.divergence_nll_threshold = unlearn::divergence_threshold(cfg.model);
                rep.trace = lm::train(*assistant, forget, spec.train, lm::LossKind::descent,
                                      topts);
                logits_scale = spec.scale;
                lm::checkpoint_save(*assistant, run_dir + "/assistant.ulwb");
            }

            lm::checkpoint_save(cur, path);
            rep.checkpoint_path = path;

            json sj = stage_config_json(spec);
            sj["checkpoint"] = path;
            sj["checkpoint_hash"] = hash_hex(hash_file(path));
            sj["trace"] = trace_to_json(rep.trace);
            // cheap per-stage snapshot: dataset NLLs
            sj["snapshot"] =
                json{{"forget_nll", lm::dataset_mean_nll(cur, forget, cfg.threads)},
                     {"retain_nll", lm::dataset_mean_nll(cur, retain, cfg.threads)}};
            if (cfg.eval_after_stages && spec.kind != unlearn::MethodKind::LogitsDiff) {
                eval::ScoreReport rep_eval = run_full_report(cfg, d, cur);
                sj["eval"] = json::parse(rep_eval.to_json());
            }
            sj["wall_clock_sec"] = rep.wall_clock_sec;
            stages.push_back(sj);
        };
        unlearn::run_pipeline(params, pipeline, pdata, ropts, hook);
    } catch (const lm::DivergenceError& e) {
        manifest["status"] = "failed";
        manifest["error"] = e.what();
        manifest["stages"] = stages;
        manifest["wall_clock_sec"] = seconds_since(t0);
        write_manifest(run_dir + "/manifest.json", manifest);
        if (manifest_out) *manifest_out = manifest;
        std::cerr << "unlearn " << method << ": " << e.what() << "\n";
        return 3;
    }

    // final evaluation
    eval::ScoreReport report;
    if (assistant) {
        // composed decoder for generation metrics; NLL-based metrics use the
        // target model unchanged (the composition is inference-time only)
        auto gen = [&](std::span<const lm::TokenId> prompt, int max_new) {
            return lm::logits_diff_decode(params, *assistant, prompt,
                                          static_cast<float>(logits_scale), max_new);
        };
        const auto& fr = eval_forget(cfg, d);
        const auto& rr = eval_retain(cfg, d);
        std::vector<data::Record> groups[2][3][2];
        for (const auto& r : fr) groups[0][r.task - 1][r.is_sc() ? 0 : 1].push_back(r);
        for (const auto& r : rr) groups[1][r.task - 1][r.is_sc() ? 0 : 1].push_back(r);
        report = run_full_report(cfg, d, params);
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 3; ++t) {
                if (groups[s][t][0].empty()) continue;
                double rg = eval::regurgitation_score_with(gen, cfg.model.max_seq_len,
                                                           groups[s][t][0], cfg.eval);
                report.scores[s][t][0] = (s == 0) ? 1.0 - rg : rg;
            }
        std::vector<double> twelve;
        for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 3; ++t)
                for (int y = 0; y < 2; ++y) twelve.push_back(report.scores[s][t][y]);
        report.task_aggregate = eval::harmonic_mean(twelve);
        report.final_aggregate =
            (report.task_aggregate + report.mia.mia_score + report.utility_accuracy) / 3.0;
    } else {
        report = run_full_report(cfg, d, params);
    }

    atomic_write_file(run_dir + "/report.json", report.to_json() + "\n");
    manifest["stages"] = stages;
    manifest["report"] = json::parse(report.to_json());
    manifest["wall_clock_sec"] = seconds_since(t0);
    write_manifest(run_dir + "/manifest.json", manifest);
    if (manifest_out) *manifest_out = manifest;
    std::cout << report.to_table(method);
    std::cout << "unlearn " << method << ": manifest " << run_dir << "/manifest.json\n";
    return 0;
}

} // namespace

int cmd_unlearn(const ExperimentConfig& cfg, const std::string& method) {
    return run_unlearn(cfg, method, cfg.output_dir + "/unlearn_" + method, nullptr);
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& label,
             const std::string& dump_generations) {
    LoadedData d = load_data(cfg);
    lm::Parameters<float> params = load_checkpoint_or_fail(checkpoint);
    eval::ScoreReport report = run_full_report(cfg, d, params);
    std::cout << report.to_table(label);

    ensure_dir(cfg.output_dir);
    const std::string path = cfg.output_dir + "/report_" + label + ".json";
    atomic_write_file(path, report.to_json() + "\n");
    std::cout << "eval: wrote " << path << "\n";

    if (!dump_generations.empty()) {
        std::vector<eval::GenerationRecord> gens;
        std::vector<data::Record> sc;
        for (const auto& r : eval_forget(cfg, d))
            if (r.is_sc()) sc.push_back(r);
        for (const auto& r : eval_retain(cfg, d))
            if (r.is_sc()) sc.push_back(r);
        eval::regurgitation_score(params, sc, cfg.eval, &gens);
        std::string out;
        for (const auto& g : gens) {
            ojson j;
            j["record_id"] = g.record_id;
            j["prompt"] = g.prompt;
            j["reference"] = g.reference;
            j["hypothesis"] = g.hypothesis;
            out += j.dump();
            out += '\n';
        }
        atomic_write_file(dump_generations, out);
        std::cout << "eval: dumped " << gens.size() << " generations to " << dump_generations
                  << "\n";
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& manifest_paths, const std::string& out_dir) {
    std::vector<std::pair<std::string, eval::ScoreReport>> rows;
    for (const auto& path : manifest_paths) {
        json m;
        try {
            m = json::parse(read_file(path));
        } catch (const std::exception& e) {
            throw ValidationError("manifest " + path + ": " + e.what());
        }
        if (!m.contains("report"))
            throw ValidationError("manifest " + path + " carries no report section");
        std::string label = m.contains("method") ? m.at("method").get<std::string>()
                                                 : m.at("command").get<std::string>();
        rows.emplace_back(label, eval::ScoreReport::from_json(m.at("report").dump()));
    }
    std::string table = eval::comparison_table(rows);
    std::string csv = eval::comparison_csv(rows);
    std::cout << table;
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        atomic_write_file(out_dir + "/report.txt", table);
        atomic_write_file(out_dir + "/report.csv", csv);
        std::cout << "report: wrote " << out_dir << "/report.{txt,csv}\n";
    }
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    if (!cfg.sweep.is_object() || !cfg.sweep.contains("method"))
        throw ValidationError("sweep needs a [sweep] config section with a 'method'");
    const std::string method = cfg.sweep.at("method").get<std::string>();
    json grid = cfg.sweep.value("grid", json::object());

    // cartesian product in fixed key order
    const std::vector<std::string> keys = {"lr", "weight_decay", "epochs", "alpha", "kl_weight"};
    std::vector<std::vector<json>> axes;
    std::vector<std::string> used;
    for (const auto& k : keys) {
        if (!grid.contains(k)) continue;
        std::vector<json> vals;
        for (const auto& v : grid.at(k)) vals.push_back(v);
        if (vals.empty()) throw ValidationError("sweep grid axis '" + k + "' is empty");
        axes.push_back(vals);
        used.push_back(k);
    }
    size_t total = 1;
    for (const auto& a : axes) total *= a.size();

    const std::string sweep_dir = cfg.output_dir + "/sweep";
    ensure_dir(sweep_dir);

    struct Row {
        std::string run_id;
        json point;
        json manifest;
        int rc;
    };
    std::vector<Row> rows;

    for (size_t idx = 0; idx < total; ++idx) {
        json point = json::object();
        size_t rem = idx;
        for (size_t a = 0; a < axes.size(); ++a) {
            point[used[a]] = axes[a][rem % axes[a].size()];
            rem /= axes[a].size();
        }
        char run_id[32];
        std::snprintf(run_id, sizeof(run_id), "run_%03zu", idx);

        // apply the grid point as a method override on a copy of the config
        ExperimentConfig run_cfg = cfg;
        json ov = run_cfg.method_overrides.is_object() ? run_cfg.method_overrides
                                                       : json::object();
        json mov = ov.value(method, json::object());
        json train_ov = mov.value("train", json::object());
        for (const auto& k : used) {
            if (k == "alpha" || k == "kl_weight") mov[k] = point[k];
            else train_ov[k] = point[k];
        }
        mov["train"] = train_ov;
        ov[method] = mov;
        run_cfg.method_overrides = ov;
        run_cfg.raw["methods"] = ov;
        run_cfg.raw["sweep_point"] = point;

        Row row;
        row.run_id = run_id;
        row.point = point;
        try {
            row.rc = run_unlearn(run_cfg, method, sweep_dir + "/" + run_id, &row.manifest);
        } catch (const std::exception& e) {
            // partial failures are recorded; the sweep continues
            row.rc = 2;
            row.manifest = json{{"status", "failed"}, {"error", e.what()}};
            std::cerr << run_id << " failed: " << e.what() << "\n";
        }
        rows.push_back(std::move(row));
    }

    // leaderboard sorted by final aggregate, failures last
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        auto score = [](const Row& r) {
            if (r.rc != 0 || !r.manifest.contains("report")) return -1.0;
            return r.manifest.at("report").at("final_aggregate").get<double>();
        };
        return score(a) > score(b);
    });

    std::string csv = "run,method,point,final_aggregate,task_aggregate,mia_score,utility,"
                      "manifest_hash,status\n";
    std::ostringstream txt;
    txt << "sweep leaderboard (" << method << ")\n";
    for (const auto& row : rows) {
        std::string status = row.manifest.value("status", "failed");
        double agg = -1, ta = -1, mia = -1, ut = -1;
        if (row.manifest.contains("report")) {
            const json& rep = row.manifest.at("report");
            agg = rep.at("final_aggregate").get<double>();
            ta = rep.at("task_aggregate").get<double>();
            mia = rep.at("mia").at("mia_score").get<double>();
            ut = rep.at("utility_accuracy").get<double>();
        }
        csv += row.run_id + "," + method + "," + row.point.dump() + "," + std::to_string(agg) +
               "," + std::to_string(ta) + "," + std::to_string(mia) + "," + std::to_string(ut) +
               "," + row.manifest.value("manifest_hash", "-") + "," + status + "\n";
        txt << "  " << row.run_id << "  " << row.point.dump() << "  aggregate "
            << (agg < 0 ? std::string("-") : std::to_string(agg)) << "  " << status << "\n";
    }
    atomic_write_file(sweep_dir + "/leaderboard.csv", csv);
    atomic_write_file(sweep_dir + "/leaderboard.txt", txt.str());
    std::cout << txt.str();
    std::cout << "sweep: " << rows.size() << " runs, leaderboard at " << sweep_dir
              << "/leaderboard.csv\n";

    for (const auto& row : rows)
        if (row.rc == 3) return 3;
    return 0;
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir) {
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    } catch (const std::exception& e) {
        throw ValidationError("manifest " + manifest_path + ": " + e.what());
    }
    if (m.value("command", "") != "unlearn")
        throw ValidationError("replay supports unlearn manifests only");
    ExperimentConfig cfg = ExperimentConfig::from_json(m.at("config"));
    const std::string method = m.at("method").get<std::string>();
    const std::string dir =
        out_dir.empty() ? cfg.output_dir + "/replay_" + method : out_dir;
    return run_unlearn(cfg, method, dir, nullptr);
}

} // namespace ulwb::cli
