// SPDX-License-Identifier: Apache-2.0
#include "rff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace rff {

namespace {

double sq_dist(const float* a, const double* b, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = double(a[i]) - b[i];
        acc += diff * diff;
    }
    return acc;
}

struct KmeansRun {
    std::vector<int> assign;
    double inertia = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
};

KmeansRun lloyd_once(const FeatureMatrix& f, int k, Rng& rng) {
    const std::int64_t n = f.rows;
    const int d = f.dims;
    std::vector<double> centers(std::size_t(k) * d);

    // k-means++ seeding
    std::vector<double> min_d2(std::size_t(n), std::numeric_limits<double>::infinity());
    {
        const std::int64_t first = rng.uniform_int(0, n - 1);
        for (int i = 0; i < d; ++i) centers[std::size_t(i)] = double(f.row(first)[i]);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::int64_t r = 0; r < n; ++r) {
                const double d2 = sq_dist(f.row(r), centers.data() + std::size_t(c - 1) * d, d);
                min_d2[std::size_t(r)] = std::min(min_d2[std::size_t(r)], d2);
                total += min_d2[std::size_t(r)];
            }
            std::int64_t pick = 0;
            if (total > 0.0) {
                double target = rng.uniform() * total;
                for (std::int64_t r = 0; r < n; ++r) {
                    target -= min_d2[std::size_t(r)];
                    if (target <= 0.0) {
                        pick = r;
                        break;
                    }
                }
            } else {
                pick = rng.uniform_int(0, n - 1);
            }
            for (int i = 0; i < d; ++i)
                centers[std::size_t(c) * d + std::size_t(i)] = double(f.row(pick)[i]);
        }
    }

    KmeansRun run;
    run.assign.assign(std::size_t(n), 0);
    std::vector<double> sums(std::size_t(k) * d);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);

    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (std::int64_t r = 0; r < n; ++r) {
            int best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d2 = sq_dist(f.row(r), centers.data() + std::size_t(c) * d, d);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            inertia += best_d2;
            if (run.assign[std::size_t(r)] != best) {
                run.assign[std::size_t(r)] = best;
                changed = true;
            }
        }
        run.inertia = inertia;
        run.trace.push_back(inertia);
        if (!changed && iter > 0) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::int64_t r = 0; r < n; ++r) {
            const int c = run.assign[std::size_t(r)];
            ++counts[std::size_t(c)];
            const float* row = f.row(r);
            double* s = sums.data() + std::size_t(c) * d;
            for (int i = 0; i < d; ++i) s[i] += double(row[i]);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[std::size_t(c)] == 0) {
                // re-seed an empty cluster at the point farthest from its center
                std::int64_t far = 0;
                double far_d2 = -1.0;
                for (std::int64_t r = 0; r < n; ++r) {
                    const int rc = run.assign[std::size_t(r)];
                    const double d2 = sq_dist(f.row(r), centers.data() + std::size_t(rc) * d, d);
                    if (d2 > far_d2) {
                        far_d2 = d2;
                        far = r;
                    }
                }
                for (int i = 0; i < d; ++i)
                    centers[std::size_t(c) * d + std::size_t(i)] = double(f.row(far)[i]);
                continue;
            }
            for (int i = 0; i < d; ++i)
                centers[std::size_t(c) * d + std::size_t(i)] =
                    sums[std::size_t(c) * d + std::size_t(i)] / double(counts[std::size_t(c)]);
        }
    }
    return run;
}

}  // namespace

KmeansResult kmeans_detailed(const FeatureMatrix& features, int k, int restarts,
                             std::uint64_t seed) {
    if (k < 1 || features.rows < k) throw ConfigError("kmeans: need at least k points");
    if (restarts < 1) throw ConfigError("kmeans: restarts must be >= 1");
    KmeansRun best;
    for (int r = 0; r < restarts; ++r) {
        Rng rng(derive_seed(seed, std::uint64_t(r)));
        KmeansRun run = lloyd_once(features, k, rng);
        if (run.inertia < best.inertia) best = std::move(run);
    }
    KmeansResult result;
    result.partition.k = k;
    result.partition.assignments = std::move(best.assign);
    result.inertia = best.inertia;
    result.inertia_trace = std::move(best.trace);
    return result;
}

Partition kmeans(const FeatureMatrix& features, int k, int restarts, std::uint64_t seed) {
    return kmeans_detailed(features, k, restarts, seed).partition;
}

double kmeans_inertia(const FeatureMatrix& features, const Partition& p) {
    if (std::int64_t(p.assignments.size()) != features.rows)
        throw ShapeError("kmeans_inertia: partition length mismatch");
    const int k = p.k, d = features.dims;
    std::vector<double> sums(std::size_t(k) * d);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (std::int64_t r = 0; r < features.rows; ++r) {
        const int c = p.assignments[std::size_t(r)];
        ++counts[std::size_t(c)];
        for (int i = 0; i < d; ++i)
            sums[std::size_t(c) * d + std::size_t(i)] += double(features.row(r)[i]);
    }
    for (int c = 0; c < k; ++c)
        if (counts[std::size_t(c)] > 0)
            for (int i = 0; i < d; ++i)
                sums[std::size_t(c) * d + std::size_t(i)] /= double(counts[std::size_t(c)]);
    double inertia = 0.0;
    for (std::int64_t r = 0; r < features.rows; ++r)
        inertia += sq_dist(features.row(r),
                           sums.data() + std::size_t(p.assignments[std::size_t(r)]) * d, d);
    return inertia;
}

double nmi(const Partition& a, const Partition& b) {
    if (a.assignments.size() != b.assignments.size())
        throw ShapeError("nmi: partitions must have equal length");
    const std::int64_t n = std::int64_t(a.assignments.size());
    if (n == 0) throw ConfigError("nmi: empty partitions");

    int ka = 0, kb = 0;
    for (int v : a.assignments) ka = std::max(ka, v + 1);
    for (int v : b.assignments) kb = std::max(kb, v + 1);

    std::vector<std::int64_t> joint(std::size_t(ka) * std::size_t(kb));
    std::vector<std::int64_t> ca(static_cast<std::size_t>(ka), 0);
    std::vector<std::int64_t> cb(static_cast<std::size_t>(kb), 0);
    for (std::int64_t i = 0; i < n; ++i) {
        const int x = a.assignments[std::size_t(i)];
        const int y = b.assignments[std::size_t(i)];
        ++joint[std::size_t(x) * std::size_t(kb) + std::size_t(y)];
        ++ca[std::size_t(x)];
        ++cb[std::size_t(y)];
    }

    double ha = 0.0, hb = 0.0, mi = 0.0;
    for (int x = 0; x < ka; ++x)
        if (ca[std::size_t(x)] > 0) {
            const double px = double(ca[std::size_t(x)]) / double(n);
            ha -= px * std::log(px);
        }
    for (int y = 0; y < kb; ++y)
        if (cb[std::size_t(y)] > 0) {
            const double py = double(cb[std::size_t(y)]) / double(n);
            hb -= py * std::log(py);
        }
    for (int x = 0; x < ka; ++x)
        for (int y = 0; y < kb; ++y) {
            const std::int64_t c = joint[std::size_t(x) * std::size_t(kb) + std::size_t(y)];
            if (c == 0) continue;
            const double pxy = double(c) / double(n);
            mi += pxy * std::log(double(c) * double(n) /
                                 (double(ca[std::size_t(x)]) * double(cb[std::size_t(y)])));
        }

    if (ha <= 0.0 && hb <= 0.0) return 1.0;  // both single-cluster
    if (ha <= 0.0 || hb <= 0.0) return 0.0;
    const double v = mi / std::sqrt(ha * hb);
    return std::clamp(v, 0.0, 1.0);
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) throw ShapeError("accuracy: length mismatch");
    if (predictions.empty()) throw ConfigError("accuracy: empty inputs");
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return double(correct) / double(predictions.size());
}

std::vector<std::vector<std::int64_t>> confusion(const std::vector<int>& predictions,
                                                 const std::vector<int>& labels, int num_classes) {
    if (predictions.size() != labels.size()) throw ShapeError("confusion: length mismatch");
    std::vector<std::vector<std::int64_t>> m(static_cast<std::size_t>(num_classes),
                                             std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 ||
            predictions[i] >= num_classes)
            throw ConfigError("confusion: label out of range");
        ++m[std::size_t(labels[i])][std::size_t(predictions[i])];
    }
    return m;
}

void export_features(const std::string& path, const FeatureMatrix& features,
                     const std::string& comment) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    if (!comment.empty()) os << "# " << comment << '\n';
    char buf[48];
    for (std::int64_t r = 0; r < features.rows; ++r) {
        const float* row = features.row(r);
        for (int i = 0; i < features.dims; ++i) {
            std::snprintf(buf, sizeof buf, "%.8g", double(row[i]));
            os << buf << ',';
        }
        os << features.labels[std::size_t(r)] << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace rff
