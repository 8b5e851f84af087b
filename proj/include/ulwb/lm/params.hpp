#pragma once
// Named weight tensors of the decoder-only model. Layer components follow
// the {q,k,v,o}_proj / {gate,up,down}_proj taxonomy so per-component
// perturbation configs map onto them directly.

#include "ulwb/lm/config.hpp"
#include "ulwb/lm/tensor.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace ulwb::lm {

inline constexpr std::array<const char*, 7> kLayerComponents = {
    "self_attn.q_proj", "self_attn.k_proj", "self_attn.v_proj", "self_attn.o_proj",
    "mlp.gate_proj",    "mlp.up_proj",      "mlp.down_proj",
};

template <class T>
struct Parameters {
    ModelConfig config;
    std::vector<std::string> names; // storage order == checkpoint order
    std::vector<Tensor<T>> tensors;
    std::unordered_map<std::string, size_t> index;

    Tensor<T>& at(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("no such parameter: " + name);
        return tensors[it->second];
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("no such parameter: " + name);
        return tensors[it->second];
    }
    bool has(const std::string& name) const { return index.count(name) != 0; }

    static std::string layer_name(int layer, const std::string& component) {
        return "layers." + std::to_string(layer) + "." + component;
    }

    Tensor<T>& layer(int l, const std::string& component) { return at(layer_name(l, component)); }
    const Tensor<T>& layer(int l, const std::string& component) const {
        return at(layer_name(l, component));
    }

    int64_t total_numel() const {
        int64_t n = 0;
        for (const auto& t : tensors) n += t.numel();
        return n;
    }

    void zero_all() {
        for (auto& t : tensors) t.zero();
    }

    template <class U>
    Parameters<U> cast() const {
        Parameters<U> out;
        out.config = config;
        out.names = names;
        out.index = index;
        out.tensors.reserve(tensors.size());
        for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
        return out;
    }

private:
    void add(const std::string& name, std::vector<int64_t> dims) {
        index.emplace(name, tensors.size());
        names.push_back(name);
        tensors.emplace_back(std::move(dims));
    }

    template <class U>
    friend Parameters<U> make_parameters(const ModelConfig& cfg);
};

/// Zero-valued parameter set with the canonical tensor layout. Also serves
/// as the gradient container (gradients share the named shape).
template <class T>
Parameters<T> make_parameters(const ModelConfig& cfg) {
    cfg.validate();
    Parameters<T> p;
    p.config = cfg;
    const int64_t d = cfg.d_model;
    const int64_t ff = cfg.d_ff;
    p.add("embed.tokens", {cfg.vocab_size, d});
    p.add("embed.positions", {cfg.max_seq_len, d});
    for (int l = 0; l < cfg.n_layers; ++l) {
        p.add(Parameters<T>::layer_name(l, "attn_norm.gain"), {d});
        p.add(Parameters<T>::layer_name(l, "self_attn.q_proj"), {d, d});
        p.add(Parameters<T>::layer_name(l, "self_attn.k_proj"), {d, d});
        p.add(Parameters<T>::layer_name(l, "self_attn.v_proj"), {d, d});
        p.add(Parameters<T>::layer_name(l, "self_attn.o_proj"), {d, d});
        p.add(Parameters<T>::layer_name(l, "mlp_norm.gain"), {d});
        p.add(Parameters<T>::layer_name(l, "mlp.gate_proj"), {ff, d});
        p.add(Parameters<T>::layer_name(l, "mlp.up_proj"), {ff, d});
        p.add(Parameters<T>::layer_name(l, "mlp.down_proj"), {d, ff});
    }
    p.add("final_norm.gain", {d});
    p.add("lm_head", {cfg.vocab_size, d});
    return p;
}

/// Xavier-uniform init: every rank-2 weight W (out x in) drawn uniform in
/// [-a, a] with a = sqrt(6 / (fan_in + fan_out)); norm gains set to one.
Parameters<float> xavier_init(const ModelConfig& cfg, uint64_t seed);

template <class T>
bool all_finite(const Parameters<T>& p) {
    for (const auto& t : p.tensors)
        for (T v : t.data)
            if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

} // namespace ulwb::lm
