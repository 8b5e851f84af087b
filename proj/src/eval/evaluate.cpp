#include "ulwb/eval/evaluate.hpp"

#include "ulwb/data/encode.hpp"
#include "ulwb/util/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ulwb::eval {

using data::Record;
using lm::TokenId;
using lm::Vocabulary;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string first_line(const std::string& s) {
    size_t nl = s.find('\n');
    return nl == std::string::npos ? s : s.substr(0, nl);
}

/// Tokens the decoder produced after the prompt, as text.
std::string continuation_text(const std::vector<TokenId>& full, size_t prompt_len) {
    std::vector<TokenId> cont(full.begin() + static_cast<long>(prompt_len), full.end());
    return Vocabulary::detokenize(cont);
}

GenerateFn greedy_of(const lm::Parameters<float>& model) {
    return [&model](std::span<const TokenId> prompt, int max_new) {
        return lm::greedy_generate(model, prompt, max_new);
    };
}

} // namespace

double regurgitation_score_with(const GenerateFn& generate, int max_seq_len,
                                const std::vector<Record>& sc_records, const EvalOptions& opts,
                                std::vector<GenerationRecord>* audit) {
    if (sc_records.empty()) throw std::invalid_argument("regurgitation: empty record list");
    for (const auto& r : sc_records)
        if (!r.is_sc()) throw std::invalid_argument("regurgitation: record " + r.id +
                                                    " is not sentence-completion styled");
    std::vector<double> scores(sc_records.size(), 0.0);
    std::vector<GenerationRecord> gens(sc_records.size());
    parallel_for(static_cast<int>(sc_records.size()), opts.threads, [&](int i) {
        const Record& r = sc_records[static_cast<size_t>(i)];
        auto prompt = data::sc_prompt(r.input, max_seq_len);
        int ref_len = static_cast<int>(Vocabulary::tokenize(r.output).ids.size());
        int budget = max_seq_len - static_cast<int>(prompt.size());
        int max_new = std::min(ref_len + opts.gen_slack_tokens, std::max(budget, 0));
        auto out = generate(prompt, max_new);
        std::string hyp = continuation_text(out, prompt.size());
        scores[static_cast<size_t>(i)] = rouge_l_text(hyp, r.output);
        GenerationRecord g;
        g.record_id = r.id;
        g.prompt = r.input;
        g.reference = r.output;
        g.hypothesis = hyp;
        gens[static_cast<size_t>(i)] = std::move(g);
    });
    if (audit) *audit = std::move(gens);
    double total = 0.0;
    for (double s : scores) total += s;
    return total / static_cast<double>(scores.size());
}

double regurgitation_score(const lm::Parameters<float>& model,
                           const std::vector<Record>& sc_records, const EvalOptions& opts,
                           std::vector<GenerationRecord>* audit) {
    return regurgitation_score_with(greedy_of(model), model.config.max_seq_len, sc_records,
                                    opts, audit);
}

double knowledge_score(const lm::Parameters<float>& model, const std::vector<Record>& qa_records,
                       const EvalOptions& opts, std::vector<GenerationRecord>* audit) {
    if (qa_records.empty()) throw std::invalid_argument("knowledge: empty record list");
    for (const auto& r : qa_records)
        if (!r.is_qa())
            throw std::invalid_argument("knowledge: record " + r.id + " is not qa styled");
    std::vector<int> hits(qa_records.size(), 0);
    std::vector<GenerationRecord> gens(qa_records.size());
    const int max_seq = model.config.max_seq_len;
    parallel_for(static_cast<int>(qa_records.size()), opts.threads, [&](int i) {
        const Record& r = qa_records[static_cast<size_t>(i)];
        auto prompt = data::qa_prompt(r.input, max_seq);
        int ref_len = static_cast<int>(Vocabulary::tokenize(r.output).ids.size());
        int budget = max_seq - static_cast<int>(prompt.size());
        int max_new = std::min(ref_len + opts.gen_slack_tokens, std::max(budget, 0));
        auto out = lm::greedy_generate(model, prompt, max_new);
        std::string pred = first_line(continuation_text(out, prompt.size()));
        hits[static_cast<size_t>(i)] = exact_match(pred, r.output);
        GenerationRecord g;
        g.record_id = r.id;
        g.prompt = r.input;
        g.reference = r.output;
        g.hypothesis = pred;
        gens[static_cast<size_t>(i)] = std::move(g);
    });
    if (audit) *audit = std::move(gens);
    double total = 0.0;
    for (int h : hits) total += h;
    return total / static_cast<double>(hits.size());
}

namespace {

double document_mean_nll(const lm::Parameters<float>& model, const std::string& doc) {
    lm::Sample s = data::encode_document(doc, model.config.max_seq_len);
    return lm::nll<float>(model, s).mean;
}

} // namespace

MiaResult mia_evaluate(const lm::Parameters<float>& model,
                       const std::vector<data::MiaMember>& members,
                       const std::vector<data::MiaNonMember>& nonmembers,
                       const EvalOptions& opts) {
    if (members.empty() || nonmembers.empty())
        throw std::invalid_argument("MIA needs non-empty member and non-member sets");
    MiaResult res;
    res.member_nlls.resize(members.size());
    res.nonmember_nlls.resize(nonmembers.size());
    parallel_for(static_cast<int>(members.size()), opts.threads, [&](int i) {
        res.member_nlls[static_cast<size_t>(i)] =
            document_mean_nll(model, members[static_cast<size_t>(i)].document);
    });
    parallel_for(static_cast<int>(nonmembers.size()), opts.threads, [&](int i) {
        res.nonmember_nlls[static_cast<size_t>(i)] =
            document_mean_nll(model, nonmembers[static_cast<size_t>(i)].document);
    });
    // membership score: -NLL (members are expected to be more likely)
    std::vector<double> ms(res.member_nlls.size()), ns(res.nonmember_nlls.size());
    for (size_t i = 0; i < ms.size(); ++i) ms[i] = -res.member_nlls[i];
    for (size_t i = 0; i < ns.size(); ++i) ns[i] = -res.nonmember_nlls[i];
    res.mia_auc = auc_from_scores(ms, ns);
    res.mia_score = mia_score_from_auc(res.mia_auc);
    return res;
}

double utility_accuracy(const lm::Parameters<float>& model,
                        const std::vector<data::ProbeQuestion>& probe,
                        const EvalOptions& opts) {
    if (probe.empty()) throw std::invalid_argument("utility probe is empty");
    std::vector<int> hits(probe.size(), 0);
    const int max_seq = model.config.max_seq_len;
    parallel_for(static_cast<int>(probe.size()), opts.threads, [&](int qi) {
        const auto& q = probe[static_cast<size_t>(qi)];
        double best = 0.0;
        int best_idx = -1;
        for (int oi = 0; oi < static_cast<int>(q.options.size()); ++oi) {
            // score " option" as the continuation of the question text
            auto qtok = Vocabulary::tokenize(q.question, static_cast<size_t>(max_seq - 2));
            auto otok = Vocabulary::tokenize(" " + q.options[static_cast<size_t>(oi)]);
            lm::Sample s;
            s.tokens.push_back(Vocabulary::kBos);
            s.tokens.insert(s.tokens.end(), qtok.ids.begin(), qtok.ids.end());
            size_t opt_begin = s.tokens.size();
            s.tokens.insert(s.tokens.end(), otok.ids.begin(), otok.ids.end());
            if (static_cast<int>(s.tokens.size()) > max_seq)
                s.tokens.resize(static_cast<size_t>(max_seq));
            s.target_mask.assign(s.tokens.size(), 0);
            for (size_t j = opt_begin; j < s.tokens.size(); ++j) s.target_mask[j] = 1;
            double mean = lm::nll<float>(model, s).mean;
            if (best_idx < 0 || mean < best) {
                best = mean;
                best_idx = oi;
            }
        }
        hits[static_cast<size_t>(qi)] = (best_idx == q.answer_index) ? 1 : 0;
    });
    double total = 0.0;
    for (int h : hits) total += h;
    return total / static_cast<double>(hits.size());
}

namespace {

constexpr const char* kTaskKeys[3] = {"task1", "task2", "task3"};

} // namespace

ScoreReport full_report(const lm::Parameters<float>& model,
                        const std::vector<Record>& forget_records,
                        const std::vector<Record>& retain_records,
                        const std::vector<data::MiaMember>& members,
                        const std::vector<data::MiaNonMember>& nonmembers,
                        const std::vector<data::ProbeQuestion>& probe,
                        const EvalOptions& opts) {
    // group split x task x style
    std::vector<Record> groups[2][3][2];
    auto add = [&](const std::vector<Record>& recs, int split) {
        for (const auto& r : recs)
            groups[split][r.task - 1][r.is_sc() ? 0 : 1].push_back(r);
    };
    add(forget_records, 0);
    add(retain_records, 1);
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 3; ++t)
            for (int y = 0; y < 2; ++y)
                if (groups[s][t][y].empty())
                    throw std::invalid_argument(
                        std::string("full_report: missing group ") +
                        (s == 0 ? "forget" : "retain") + "/" + kTaskKeys[t] + "/" +
                        (y == 0 ? "sc" : "qa"));

    ScoreReport rep;
    for (int s = 0; s < 2; ++s) {
        for (int t = 0; t < 3; ++t) {
            double regurg = regurgitation_score(model, groups[s][t][0], opts);
            double knowl = knowledge_score(model, groups[s][t][1], opts);
            // forget-side scores are reported inverted (higher = better forgot)
            rep.scores[s][t][0] = (s == 0) ? 1.0 - regurg : regurg;
            rep.scores[s][t][1] = (s == 0) ? 1.0 - knowl : knowl;
        }
    }
    std::vector<double> twelve;
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 3; ++t)
            for (int y = 0; y < 2; ++y) twelve.push_back(rep.scores[s][t][y]);
    rep.task_aggregate = harmonic_mean(twelve);
    rep.mia = mia_evaluate(model, members, nonmembers, opts);
    rep.utility_accuracy = utility_accuracy(model, probe, opts);
    rep.utility_threshold = opts.utility_threshold;
    rep.utility_pass = rep.utility_accuracy >= rep.utility_threshold;
    rep.final_aggregate =
        (rep.task_aggregate + rep.mia.mia_score + rep.utility_accuracy) / 3.0;
    return rep;
}

std::string ScoreReport::to_json() const {
    ojson j;
    ojson sc = ojson::object();
    for (int s = 0; s < 2; ++s) {
        ojson split = ojson::object();
        for (int t = 0; t < 3; ++t)
            split[kTaskKeys[t]] = ojson{{"regurgitation", scores[s][t][0]},
                                        {"knowledge", scores[s][t][1]}};
        sc[s == 0 ? "forget" : "retain"] = split;
    }
    j["scores"] = sc;
    j["task_aggregate"] = task_aggregate;
    j["mia"] = ojson{{"member_nlls", mia.member_nlls},
                     {"nonmember_nlls", mia.nonmember_nlls},
                     {"mia_auc", mia.mia_auc},
                     {"mia_score", mia.mia_score}};
    j["utility_accuracy"] = utility_accuracy;
    j["utility_threshold"] = utility_threshold;
    j["utility_pass"] = utility_pass;
    j["final_aggregate"] = final_aggregate;
    return j.dump(2);
}

ScoreReport ScoreReport::from_json(const std::string& text) {
    json j = json::parse(text);
    ScoreReport rep;
    for (int s = 0; s < 2; ++s) {
        const json& split = j.at("scores").at(s == 0 ? "forget" : "retain");
        for (int t = 0; t < 3; ++t) {
            rep.scores[s][t][0] = split.at(kTaskKeys[t]).at("regurgitation").get<double>();
            rep.scores[s][t][1] = split.at(kTaskKeys[t]).at("knowledge").get<double>();
        }
    }
    rep.task_aggregate = j.at("task_aggregate").get<double>();
    rep.mia.member_nlls = j.at("mia").at("member_nlls").get<std::vector<double>>();
    rep.mia.nonmember_nlls = j.at("mia").at("nonmember_nlls").get<std::vector<double>>();
    rep.mia.mia_auc = j.at("mia").at("mia_auc").get<double>();
    rep.mia.mia_score = j.at("mia").at("mia_score").get<double>();
    rep.utility_accuracy = j.at("utility_accuracy").get<double>();
    rep.utility_threshold = j.at("utility_threshold").get<double>();
    rep.utility_pass = j.at("utility_pass").get<bool>();
    rep.final_aggregate = j.at("final_aggregate").get<double>();
    return rep;
}

std::string ScoreReport::to_table(const std::string& label) const {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %-10s %-10s %-10s %-10s\n", "Method", "Aggregate",
                  "Task Agg.", "MIA score", "Utility");
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-18s %-10.4f %-10.4f %-10.4f %-10.4f\n", label.c_str(),
                  final_aggregate, task_aggregate, mia.mia_score, utility_accuracy);
    os << buf;
    os << "\nper-group scores (forget side inverted):\n";
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 3; ++t) {
            std::snprintf(buf, sizeof(buf), "  %-6s %-5s regurgitation %.4f  knowledge %.4f\n",
                          s == 0 ? "forget" : "retain", kTaskKeys[t], scores[s][t][0],
                          scores[s][t][1]);
            os << buf;
        }
    std::snprintf(buf, sizeof(buf), "mia_auc %.4f  utility gate %.2f -> %s\n", mia.mia_auc,
                  utility_threshold, utility_pass ? "pass" : "fail");
    os << buf;
    return os.str();
}

std::string comparison_table(const std::vector<std::pair<std::string, ScoreReport>>& rows) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %-10s %-10s %-10s %-10s\n", "Method", "Aggregate",
                  "Task Agg.", "MIA score", "Utility");
    os << buf;
    for (const auto& [label, rep] : rows) {
        std::snprintf(buf, sizeof(buf), "%-18s %-10.4f %-10.4f %-10.4f %-10.4f\n",
                      label.c_str(), rep.final_aggregate, rep.task_aggregate,
                      rep.mia.mia_score, rep.utility_accuracy);
        os << buf;
    }
    return os.str();
}

std::string comparison_csv(const std::vector<std::pair<std::string, ScoreReport>>& rows) {
    std::ostringstream os;
    os << "method,aggregate,task_aggregate,mia_score,utility\n";
    os.precision(17);
    for (const auto& [label, rep] : rows)
        os << label << ',' << rep.final_aggregate << ',' << rep.task_aggregate << ','
           << rep.mia.mia_score << ',' << rep.utility_accuracy << '\n';
    return os.str();
}

} // namespace ulwb::eval
