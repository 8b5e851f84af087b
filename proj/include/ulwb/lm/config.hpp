#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ulwb::lm {

struct ModelConfig {
    int n_layers = 8;
    int d_model = 128;
    int n_heads = 4;
    int d_ff = 256;
    int vocab_size = 260;
    int max_seq_len = 512;
    uint64_t seed = 0;

    int head_dim() const { return d_model / n_heads; }

    void validate() const {
        if (n_layers <= 0 || d_model <= 0 || n_heads <= 0 || d_ff <= 0 || vocab_size <= 0)
            throw std::invalid_argument("model config: all dims must be > 0");
        if (d_model % n_heads != 0)
            throw std::invalid_argument("model config: d_model must be divisible by n_heads");
        if (max_seq_len < 2)
            throw std::invalid_argument("model config: max_seq_len must be >= 2");
    }
};

enum class LrSchedule { linear, cosine };

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 0.0;
    int epochs = 1;
    int batch_size = 8;
    LrSchedule scheduler = LrSchedule::linear;
    int warmup_steps = 3;
    double grad_clip_max_norm = 1.0;
    uint64_t seed = 0;

    void validate() const {
        if (!(lr > 0)) throw std::invalid_argument("train config: lr must be > 0");
        if (weight_decay < 0) throw std::invalid_argument("train config: weight_decay must be >= 0");
        // epochs == 0 is the explicit identity run
        if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
        if (warmup_steps < 0) throw std::invalid_argument("train config: warmup_steps must be >= 0");
        if (!(grad_clip_max_norm > 0))
            throw std::invalid_argument("train config: grad_clip_max_norm must be > 0");
    }
};

inline std::string schedule_name(LrSchedule s) {
    return s == LrSchedule::linear ? "linear" : "cosine";
}

inline LrSchedule schedule_from_name(const std::string& s) {
    if (s == "linear") return LrSchedule::linear;
    if (s == "cosine") return LrSchedule::cosine;
    throw std::invalid_argument("unknown scheduler: " + s);
}

} // namespace ulwb::lm
