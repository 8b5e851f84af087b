#pragma once
// Model-coupled evaluation: regurgitation (greedy continuation + ROUGE-L),
// knowledge (greedy answer + exact match), membership inference over
// document NLLs, the multiple-choice utility probe, and the combined report.

#include "ulwb/data/record.hpp"
#include "ulwb/eval/metrics.hpp"
#include "ulwb/lm/model.hpp"

#include <functional>
#include <optional>

namespace ulwb::eval {

struct EvalOptions {
    int threads = 0;
    int gen_slack_tokens = 16;       // generation budget = reference length + slack
    double utility_threshold = 0.45; // probe-accuracy gate
};

struct GenerationRecord {
    std::string record_id, prompt, reference, hypothesis;
    std::vector<double> reference_nll; // per-token NLL of the reference continuation
};

/// Custom decoder hook (prompt, max_new) -> full token sequence. The default
/// is greedy decoding on a single model; the logits-difference composition
/// passes its own.
using GenerateFn =
    std::function<std::vector<lm::TokenId>(std::span<const lm::TokenId>, int)>;

double regurgitation_score(const lm::Parameters<float>& model,
                           const std::vector<data::Record>& sc_records,
                           const EvalOptions& opts = {},
                           std::vector<GenerationRecord>* audit = nullptr);

/// Same metric, arbitrary decoder.
double regurgitation_score_with(const GenerateFn& generate, int max_seq_len,
                                const std::vector<data::Record>& sc_records,
                                const EvalOptions& opts = {},
                                std::vector<GenerationRecord>* audit = nullptr);

double knowledge_score(const lm::Parameters<float>& model,
                       const std::vector<data::Record>& qa_records,
                       const EvalOptions& opts = {},
                       std::vector<GenerationRecord>* audit = nullptr);

MiaResult mia_evaluate(const lm::Parameters<float>& model,
                       const std::vector<data::MiaMember>& members,
                       const std::vector<data::MiaNonMember>& nonmembers,
                       const EvalOptions& opts = {});

double utility_accuracy(const lm::Parameters<float>& model,
                        const std::vector<data::ProbeQuestion>& probe,
                        const EvalOptions& opts = {});

struct ScoreReport {
    // [split 0=forget,1=retain][task-1][style 0=sc regurgitation,1=qa knowledge];
    // forget-side values are stored already inverted (1 - raw)
    double scores[2][3][2] = {};
    double task_aggregate = 0.0;
    MiaResult mia;
    double utility_accuracy = 0.0;
    double utility_threshold = 0.0;
    bool utility_pass = false;
    double final_aggregate = 0.0;

    std::string to_json() const;
    static ScoreReport from_json(const std::string& text);
    std::string to_table(const std::string& label) const;
};

ScoreReport full_report(const lm::Parameters<float>& model,
                        const std::vector<data::Record>& forget_records,
                        const std::vector<data::Record>& retain_records,
                        const std::vector<data::MiaMember>& members,
                        const std::vector<data::MiaNonMember>& nonmembers,
                        const std::vector<data::ProbeQuestion>& probe,
                        const EvalOptions& opts = {});

/// Comparison table with one row per labelled report:
/// Method / Aggregate / Task Agg. / MIA score / Utility.
std::string comparison_table(const std::vector<std::pair<std::string, ScoreReport>>& rows);
std::string comparison_csv(const std::vector<std::pair<std::string, ScoreReport>>& rows);

} // namespace ulwb::eval
