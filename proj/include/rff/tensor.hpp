// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "rff/common.hpp"

namespace rff {

// Minimal dense tensor: shape + flat row-major data, with an optional
// same-shape gradient buffer. float for training, double for gradient
// checks.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        data.assign(std::size_t(numel()), T(0));
    }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    int dim(int i) const { return shape[std::size_t(i)]; }
    int ndim() const { return int(shape.size()); }

    void set_requires_grad() {
        requires_grad = true;
        grad.assign(data.size(), T(0));
    }

    void zero_grad() {
        if (requires_grad) std::fill(grad.begin(), grad.end(), T(0));
    }

    static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }
};

using Tensor = TensorT<float>;

template <typename T>
void check_shape(const TensorT<T>& t, const std::vector<int>& expected, const char* what) {
    if (t.shape != expected) throw ShapeError(std::string(what) + ": unexpected tensor shape");
}

}  // namespace rff
