// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rff/common.hpp"

namespace rff {

struct FeatureMatrix {
    std::int64_t rows = 0;
    int dims = 0;
    std::vector<float> values;  // row-major rows x dims
    std::vector<int> labels;    // ground truth, evaluation-only

    const float* row(std::int64_t r) const { return values.data() + r * dims; }
};

struct Partition {
    std::vector<int> assignments;
    int k = 0;
};

struct KmeansResult {
    Partition partition;
    double inertia = 0.0;
    // inertia after each Lloyd iteration of the winning restart
    std::vector<double> inertia_trace;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` by inertia.
Partition kmeans(const FeatureMatrix& features, int k, int restarts, std::uint64_t seed);
KmeansResult kmeans_detailed(const FeatureMatrix& features, int k, int restarts,
                             std::uint64_t seed);

double kmeans_inertia(const FeatureMatrix& features, const Partition& p);

// I(a;b) / sqrt(H(a) H(b)), natural logs. 1 when both partitions are
// single-cluster, 0 when exactly one is.
double nmi(const Partition& a, const Partition& b);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// rows = truth, cols = prediction
std::vector<std::vector<std::int64_t>> confusion(const std::vector<int>& predictions,
                                                 const std::vector<int>& labels, int num_classes);

// CSV: dims feature columns + final label column, one row per packet. A
// non-empty comment is written first as a '#' line (config hash etc.).
void export_features(const std::string& path, const FeatureMatrix& features,
                     const std::string& comment = "");

}  // namespace rff
