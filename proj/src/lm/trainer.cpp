#include "ulwb/lm/trainer.hpp"

#include "ulwb/kernels/kernels.hpp"
#include "ulwb/util/parallel.hpp"
#include "ulwb/util/rng.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

namespace ulwb::lm {

using ulwb::parallel_for;

namespace {

struct SampleResult {
    double ce = 0.0;
    double kl = 0.0;
    int tokens = 0;
};

/// Token-sum gradient of one sample into `grads` (which must be zeroed).
SampleResult sample_grad(const Parameters<float>& params, const Sample& sample, LossKind kind,
                         const Parameters<float>* kl_ref, double kl_weight,
                         Parameters<float>& grads) {
    ForwardCache<float> cache;
    Tensor<float> logits;
    forward<float>(params, sample.tokens, logits, &cache);
    Tensor<float> dlogits({logits.rows(), logits.cols()});

    SampleResult r;
    r.ce = ce_head(logits, sample, kind, 1.0f, dlogits);
    if (kl_ref != nullptr && kl_weight != 0.0) {
        Tensor<float> ref_logits;
        forward<float>(*kl_ref, sample.tokens, ref_logits, nullptr);
        r.kl = kl_head(logits, ref_logits, sample, static_cast<float>(kl_weight), dlogits);
    }
    backward<float>(params, sample.tokens, cache, dlogits, grads);
    for (size_t j = 1; j < sample.target_mask.size(); ++j)
        if (sample.target_mask[j]) ++r.tokens;
    return r;
}

} // namespace

int default_threads() { return ulwb::default_threads(); }

double dataset_mean_nll(const Parameters<float>& params, const std::vector<Sample>& data,
                        int threads) {
    if (data.empty()) throw std::invalid_argument("dataset is empty");
    if (threads <= 0) threads = default_threads();
    std::vector<double> sums(data.size(), 0.0);
    std::vector<int> counts(data.size(), 0);
    parallel_for(static_cast<int>(data.size()), threads, [&](int i) {
        NllResult r = nll<float>(params, data[static_cast<size_t>(i)]);
        double s = 0.0;
        for (double v : r.per_token) s += v;
        sums[static_cast<size_t>(i)] = s;
        counts[static_cast<size_t>(i)] = r.count;
    });
    // deterministic fold in sample order
    double total = 0.0;
    long tokens = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        total += sums[i];
        tokens += counts[i];
    }
    return total / static_cast<double>(tokens);
}

TrainTrace train(Parameters<float>& params, const std::vector<Sample>& data,
                 const TrainConfig& cfg, LossKind kind, const TrainerOptions& opts) {
    if (data.empty()) throw std::invalid_argument("training dataset is empty");
    const int threads = opts.threads > 0 ? opts.threads : default_threads();
    const int n = static_cast<int>(data.size());
    const int bs = std::min(cfg.batch_size, n);
    const int steps_per_epoch = (n + bs - 1) / bs;

    TrainTrace trace;
    trace.total_steps = cfg.epochs * steps_per_epoch;
    trace.initial_nll = dataset_mean_nll(params, data, threads);

    if (cfg.epochs == 0) return trace;

    AdamW opt(params.config);
    std::vector<Parameters<float>> sample_grads;
    sample_grads.reserve(static_cast<size_t>(bs));
    for (int i = 0; i < bs; ++i) sample_grads.push_back(make_parameters<float>(params.config));
    Parameters<float> grads = make_parameters<float>(params.config);

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    int step_index = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "epoch." + std::to_string(epoch)));
        rng.shuffle(order);

        double epoch_ce = 0.0, epoch_kl = 0.0;
        long epoch_tokens = 0;

        for (int b = 0; b < steps_per_epoch; ++b) {
            const int begin = b * bs;
            const int count = std::min(bs, n - begin);

            std::vector<SampleResult> results(static_cast<size_t>(count));
            parallel_for(count, threads, [&](int i) {
                auto& g = sample_grads[static_cast<size_t>(i)];
                g.zero_all();
                results[static_cast<size_t>(i)] =
                    sample_grad(params, data[static_cast<size_t>(order[static_cast<size_t>(begin + i)])],
                                kind, opts.kl_reference, opts.kl_weight, g);
            });

            long batch_tokens = 0;
            for (const auto& r : results) batch_tokens += r.tokens;

            grads.zero_all();
            for (int i = 0; i < count; ++i)
                for (size_t t = 0; t < grads.tensors.size(); ++t)
                    kernels::axpy(static_cast<int>(grads.tensors[t].numel()), 1.0f,
                                  sample_grads[static_cast<size_t>(i)].tensors[t].ptr(),
                                  grads.tensors[t].ptr());
            const float inv_tokens = 1.0f / static_cast<float>(batch_tokens);
            for (auto& t : grads.tensors)
                kernels::scale(static_cast<int>(t.numel()), inv_tokens, t.ptr());

            if (opts.post_clip_scale != 1.0) {
                clip_global_norm(grads, cfg.grad_clip_max_norm);
                for (auto& t : grads.tensors)
                    kernels::scale(static_cast<int>(t.numel()),
                                   static_cast<float>(opts.post_clip_scale), t.ptr());
            }
            opt.step(params, grads, cfg, step_index, trace.total_steps);
            ++step_index;

            for (const auto& r : results) {
                epoch_ce += r.ce;
                epoch_kl += r.kl;
            }
            epoch_tokens += batch_tokens;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_ce = epoch_ce / static_cast<double>(epoch_tokens);
        rec.train_kl = epoch_kl / static_cast<double>(epoch_tokens);
        if (opts.eval_each_epoch) rec.eval_nll = dataset_mean_nll(params, data, threads);
        trace.epochs.push_back(rec);
        if (opts.on_epoch) opts.on_epoch(rec);

        if (opts.divergence_nll_threshold > 0.0) {
            double probe = opts.eval_each_epoch ? rec.eval_nll : rec.train_ce;
            if (!(probe <= opts.divergence_nll_threshold))
                throw DivergenceError("divergence guard: mean NLL " + std::to_string(probe) +
                                      " exceeded threshold " +
                                      std::to_string(opts.divergence_nll_threshold) +
                                      " after epoch " + std::to_string(epoch));
        }
    }
    return trace;
}

} // namespace ulwb::lm
