#include "ulwb/unlearn/method.hpp"

#include "ulwb/lm/params.hpp"

#include <nlohmann/json.hpp>

namespace ulwb::unlearn {

using nlohmann::json;

std::string kind_name(MethodKind k) {
    switch (k) {
    case MethodKind::GA: return "GA";
    case MethodKind::GD: return "GD";
    case MethodKind::GDiff: return "GDiff";
    case MethodKind::KLMin: return "KLMin";
    case MethodKind::ControlledGA: return "ControlledGA";
    case MethodKind::XavierReinit: return "XavierReinit";
    case MethodKind::LayerPerturb: return "LayerPerturb";
    case MethodKind::LogitsDiff: return "LogitsDiff";
    }
    return "?";
}

MethodKind kind_from_name(const std::string& s) {
    if (s == "GA") return MethodKind::GA;
    if (s == "GD") return MethodKind::GD;
    if (s == "GDiff") return MethodKind::GDiff;
    if (s == "KLMin") return MethodKind::KLMin;
    if (s == "ControlledGA") return MethodKind::ControlledGA;
    if (s == "XavierReinit") return MethodKind::XavierReinit;
    if (s == "LayerPerturb") return MethodKind::LayerPerturb;
    if (s == "LogitsDiff") return MethodKind::LogitsDiff;
    throw std::invalid_argument("unknown method kind: " + s);
}

PerturbSpec PerturbSpec::defaults() {
    PerturbSpec s;
    s.modify_ratio = {
        {"self_attn.q_proj", 0.0},   {"self_attn.k_proj", 1e-5}, {"self_attn.v_proj", 1e-4},
        {"self_attn.o_proj", 0.01},  {"mlp.gate_proj", 0.03},    {"mlp.up_proj", 0.0},
        {"mlp.down_proj", 0.07},
    };
    s.freeze_fraction = 0.75;
    return s;
}

void PerturbSpec::validate() const {
    for (const auto& [name, ratio] : modify_ratio) {
        bool known = false;
        for (const char* c : lm::kLayerComponents)
            if (name == c) known = true;
        if (!known) throw std::invalid_argument("unknown component name: " + name);
        if (ratio < 0) throw std::invalid_argument("modify_ratio must be >= 0: " + name);
    }
    if (freeze_fraction < 0.0 || freeze_fraction > 1.0)
        throw std::invalid_argument("freeze_fraction must be in [0, 1]");
}

void MethodSpec::validate() const {
    switch (kind) {
    case MethodKind::GA:
    case MethodKind::GD:
    case MethodKind::KLMin:
        train.validate();
        break;
    case MethodKind::GDiff:
        train.validate();
        train2.validate();
        break;
    case MethodKind::ControlledGA:
        train.validate();
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw std::invalid_argument("controlled GA: alpha must be in (0, 1]");
        break;
    case MethodKind::LayerPerturb:
        perturb.validate();
        break;
    case MethodKind::XavierReinit:
    case MethodKind::LogitsDiff:
        break;
    }
    if (kind == MethodKind::KLMin && kl_weight < 0.0)
        throw std::invalid_argument("KL minimization: kl_weight must be >= 0");
}

void PipelineSpec::validate() const {
    if (stages.empty()) throw std::invalid_argument("pipeline has no stages");
    for (size_t i = 0; i < stages.size(); ++i) {
        stages[i].validate();
        if (stages[i].kind == MethodKind::LogitsDiff && i + 1 != stages.size())
            throw std::invalid_argument(
                "LogitsDiff is inference-time and may only be the final stage");
    }
}

namespace {

lm::TrainConfig train_from_json(const json& j) {
    lm::TrainConfig c;
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("scheduler"))
        c.scheduler = lm::schedule_from_name(j.at("scheduler").get<std::string>());
    if (j.contains("warmup_steps")) c.warmup_steps = j.at("warmup_steps").get<int>();
    if (j.contains("grad_clip_max_norm"))
        c.grad_clip_max_norm = j.at("grad_clip_max_norm").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    return c;
}

MethodSpec method_from(const json& j) {
    MethodSpec m;
    m.kind = kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("train")) m.train = train_from_json(j.at("train"));
    if (j.contains("train2")) m.train2 = train_from_json(j.at("train2"));
    if (j.contains("alpha")) m.alpha = j.at("alpha").get<double>();
    if (j.contains("kl_weight")) m.kl_weight = j.at("kl_weight").get<double>();
    if (j.contains("scale")) m.scale = j.at("scale").get<double>();
    if (j.contains("reinit_seed")) m.reinit_seed = j.at("reinit_seed").get<uint64_t>();
    if (j.contains("perturb")) {
        const json& p = j.at("perturb");
        m.perturb = PerturbSpec::defaults();
        if (p.contains("modify_ratio")) {
            m.perturb.modify_ratio.clear();
            for (auto it = p.at("modify_ratio").begin(); it != p.at("modify_ratio").end(); ++it)
                m.perturb.modify_ratio[it.key()] = it.value().get<double>();
        }
        if (p.contains("freeze_fraction"))
            m.perturb.freeze_fraction = p.at("freeze_fraction").get<double>();
        if (p.contains("seed")) m.perturb.seed = p.at("seed").get<uint64_t>();
    } else if (m.kind == MethodKind::LayerPerturb) {
        m.perturb = PerturbSpec::defaults();
    }
    m.validate();
    return m;
}

} // namespace

MethodSpec method_from_json(const std::string& json_text) {
    return method_from(json::parse(json_text));
}

PipelineSpec pipeline_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    PipelineSpec p;
    for (const auto& stage : j) p.stages.push_back(method_from(stage));
    p.validate();
    return p;
}

} // namespace ulwb::unlearn
