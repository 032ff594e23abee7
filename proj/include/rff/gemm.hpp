// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <vector>

#include "rff/common.hpp"

// Dense products behind the conv/linear layers. Work is split over fixed
// 2048-column chunks: each chunk is computed by a single-threaded Eigen
// kernel and reductions are accumulated in chunk order, so results are
// bit-identical for any thread count.

namespace rff::detail {

inline constexpr int kGemmChunk = 2048;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// y[m x n] = w[m x k] * x[k x n]; w row-major, x/y column-major.
template <typename T>
void matmul_wx(const T* w, int m, int k, const T* x, int n, T* y) {
    Eigen::Map<const RowMat<T>> wm(w, m, k);
    const int chunks = (n + kGemmChunk - 1) / kGemmChunk;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < chunks; ++ci) {
        const int c0 = ci * kGemmChunk;
        const int cn = std::min(kGemmChunk, n - c0);
        Eigen::Map<const ColMat<T>> xm(x + std::size_t(c0) * k, k, cn);
        Eigen::Map<ColMat<T>> ym(y + std::size_t(c0) * m, m, cn);
        ym.noalias() = wm * xm;
    }
}

// dx[k x n] = w^T * dy; same layouts as above.
template <typename T>
void matmul_wtx(const T* w, int m, int k, const T* dy, int n, T* dx) {
    Eigen::Map<const RowMat<T>> wm(w, m, k);
    const int chunks = (n + kGemmChunk - 1) / kGemmChunk;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < chunks; ++ci) {
        const int c0 = ci * kGemmChunk;
        const int cn = std::min(kGemmChunk, n - c0);
        Eigen::Map<const ColMat<T>> dym(dy + std::size_t(c0) * m, m, cn);
        Eigen::Map<ColMat<T>> dxm(dx + std::size_t(c0) * k, k, cn);
        dxm.noalias() = wm.transpose() * dym;
    }
}

// dw[m x k] += dy[m x n] * x[k x n]^T; dw row-major. Per-chunk partials are
// summed in chunk order.
template <typename T>
void matmul_dyxt_acc(const T* dy, int m, const T* x, int k, int n, T* dw) {
    const int chunks = (n + kGemmChunk - 1) / kGemmChunk;
    std::vector<RowMat<T>> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < chunks; ++ci) {
        const int c0 = ci * kGemmChunk;
        const int cn = std::min(kGemmChunk, n - c0);
        Eigen::Map<const ColMat<T>> dym(dy + std::size_t(c0) * m, m, cn);
        Eigen::Map<const ColMat<T>> xm(x + std::size_t(c0) * k, k, cn);
        partial[std::size_t(ci)].noalias() = dym * xm.transpose();
    }
    Eigen::Map<RowMat<T>> dwm(dw, m, k);
    for (int ci = 0; ci < chunks; ++ci) dwm += partial[std::size_t(ci)];
}

}  // namespace rff::detail
