#pragma once
#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

namespace ulwb::lm {

/// Dense row-major tensor. Rank 1 or 2 in practice.
template <class T>
struct Tensor {
    std::vector<int64_t> dims;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> d) : dims(std::move(d)) {
        data.assign(static_cast<size_t>(numel_of(dims)), T(0));
    }

    static int64_t numel_of(const std::vector<int64_t>& d) {
        return std::accumulate(d.begin(), d.end(), int64_t{1}, std::multiplies<int64_t>());
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(dims.size()); }
    int64_t rows() const { return dims.empty() ? 0 : dims[0]; }
    int64_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
    T* row(int64_t r) {
        assert(rank() == 2);
        return data.data() + r * cols();
    }
    const T* row(int64_t r) const {
        assert(rank() == 2);
        return data.data() + r * cols();
    }
    T& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    T at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.dims = dims;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

} // namespace ulwb::lm
