#include "ulwb/lm/params.hpp"

#include "ulwb/util/rng.hpp"

#include <cmath>

namespace ulwb::lm {

Parameters<float> xavier_init(const ModelConfig& cfg, uint64_t seed) {
    Parameters<float> p = make_parameters<float>(cfg);
    for (size_t i = 0; i < p.tensors.size(); ++i) {
        Tensor<float>& t = p.tensors[i];
        if (t.rank() == 2) {
            // W is (out x in): fan_out = rows, fan_in = cols
            double a = std::sqrt(6.0 / static_cast<double>(t.dims[0] + t.dims[1]));
            // per-tensor stream so draws are independent of layout changes
            Rng rng(derive_seed(seed, p.names[i]));
            for (float& v : t.data) v = static_cast<float>(rng.uniform(-a, a));
        } else {
            // norm gains
            for (float& v : t.data) v = 1.0f;
        }
    }
    return p;
}

} // namespace ulwb::lm
