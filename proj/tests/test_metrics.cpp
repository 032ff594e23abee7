// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rff/metrics.hpp"

using namespace rff;

namespace {

FeatureMatrix two_clouds(int per_cloud, std::uint64_t seed) {
    FeatureMatrix f;
    f.rows = 2 * per_cloud;
    f.dims = 3;
    f.values.resize(std::size_t(f.rows) * 3);
    f.labels.resize(std::size_t(f.rows));
    Rng rng(seed);
    for (int i = 0; i < 2 * per_cloud; ++i) {
        const int cloud = i < per_cloud ? 0 : 1;
        const double center = cloud == 0 ? -5.0 : 5.0;
        for (int d = 0; d < 3; ++d)
            f.values[std::size_t(i) * 3 + std::size_t(d)] =
                float(center + rng.uniform(-0.5, 0.5));
        f.labels[std::size_t(i)] = cloud;
    }
    return f;
}

}  // namespace

TEST_CASE("kmeans recovers separable clouds exactly") {
    const FeatureMatrix f = two_clouds(40, 1);
    const Partition p = kmeans(f, 2, 4, 7);
    Partition truth;
    truth.k = 2;
    truth.assignments = f.labels;
    CHECK(nmi(p, truth) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kmeans inertia is zero for identical points") {
    FeatureMatrix f;
    f.rows = 10;
    f.dims = 2;
    f.values.assign(20, 3.5f);
    f.labels.assign(10, 0);
    const KmeansResult r = kmeans_detailed(f, 1, 1, 3);
    CHECK(r.inertia == doctest::Approx(0.0));
}

TEST_CASE("kmeans beats random assignments") {
    FeatureMatrix f;
    f.rows = 100;
    f.dims = 4;
    f.values.resize(400);
    f.labels.assign(100, 0);
    Rng rng(5);
    for (auto& v : f.values) v = float(rng.uniform(-1.0, 1.0));

    const KmeansResult best = kmeans_detailed(f, 3, 5, 11);
    for (int trial = 0; trial < 50; ++trial) {
        Partition random;
        random.k = 3;
        random.assignments.resize(100);
        for (auto& a : random.assignments) a = int(rng.uniform_int(0, 2));
        CHECK(best.inertia <= kmeans_inertia(f, random) + 1e-9);
    }
}

TEST_CASE("kmeans inertia trace is non-increasing") {
    const FeatureMatrix f = two_clouds(50, 9);
    const KmeansResult r = kmeans_detailed(f, 2, 1, 13);
    REQUIRE(!r.inertia_trace.empty());
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
        CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
}

TEST_CASE("kmeans is deterministic given the seed and validates inputs") {
    const FeatureMatrix f = two_clouds(20, 21);
    const Partition a = kmeans(f, 2, 3, 31);
    const Partition b = kmeans(f, 2, 3, 31);
    CHECK(a.assignments == b.assignments);
    CHECK_THROWS_AS(kmeans(f, 41, 1, 1), ConfigError);  // N < k
}

TEST_CASE("nmi oracle cases") {
    Partition a, b;
    a.k = b.k = 2;
    a.assignments = {0, 0, 1, 1};
    b.assignments = {0, 0, 1, 1};
    CHECK(nmi(a, b) == doctest::Approx(1.0).epsilon(1e-12));

    // independent 2x2 table: I = 0 by hand
    b.assignments = {0, 1, 0, 1};
    CHECK(nmi(a, b) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("nmi of independent partitions vanishes at large N") {
    const int n = 10000;
    Partition a, b;
    a.k = b.k = 5;
    a.assignments.resize(n);
    b.assignments.resize(n);
    Rng rng(17);
    for (int i = 0; i < n; ++i) {
        a.assignments[std::size_t(i)] = int(rng.uniform_int(0, 4));
        b.assignments[std::size_t(i)] = int(rng.uniform_int(0, 4));
    }
    CHECK(nmi(a, b) < 0.05);
}

TEST_CASE("nmi symmetry, range, permutation invariance") {
    Rng rng(19);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = int(rng.uniform_int(4, 40));
        Partition a, b;
        a.k = int(rng.uniform_int(1, 4));
        b.k = int(rng.uniform_int(1, 4));
        a.assignments.resize(std::size_t(n));
        b.assignments.resize(std::size_t(n));
        for (auto& v : a.assignments) v = int(rng.uniform_int(0, a.k - 1));
        for (auto& v : b.assignments) v = int(rng.uniform_int(0, b.k - 1));
        const double ab = nmi(a, b);
        const double ba = nmi(b, a);
        CHECK(std::abs(ab - ba) < 1e-12);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);

        // relabel clusters of a with a fixed permutation
        Partition ap = a;
        for (auto& v : ap.assignments) v = (v + 1) % std::max(1, a.k);
        CHECK(nmi(ap, b) == doctest::Approx(ab).epsilon(1e-12));
    }
}

TEST_CASE("nmi single-cluster conventions") {
    Partition ones, varied;
    ones.k = 1;
    ones.assignments = {0, 0, 0, 0};
    varied.k = 2;
    varied.assignments = {0, 1, 0, 1};
    CHECK(nmi(ones, ones) == 1.0);
    CHECK(nmi(ones, varied) == 0.0);
    CHECK_THROWS_AS(nmi(ones, Partition{{0, 0}, 1}), ShapeError);
}

TEST_CASE("accuracy and confusion") {
    CHECK(accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(accuracy({0, 0}, {1, 2}) == 0.0);
    CHECK(accuracy({1, 2, 3, 4}, {1, 2, 3, 0}) == 0.75);

    const auto m = confusion({0, 1, 1, 2}, {0, 1, 2, 2}, 3);
    CHECK(m[0][0] == 1);
    CHECK(m[1][1] == 1);
    CHECK(m[2][1] == 1);
    CHECK(m[2][2] == 1);
    std::int64_t row2 = m[2][0] + m[2][1] + m[2][2];
    CHECK(row2 == 2);  // rows sum to per-class sample counts
    CHECK_THROWS_AS(confusion({0}, {5}, 3), ConfigError);
}

TEST_CASE("feature export shape and determinism") {
    const FeatureMatrix f = two_clouds(10, 23);
    const auto path = std::filesystem::temp_directory_path() / "rff_features_test.csv";
    export_features(path, f, "config_hash=0123456789abcdef");
    export_features(path.string() + ".again", f, "config_hash=0123456789abcdef");

    std::ifstream is(path);
    std::string line;
    int rows = 0, comment = 0;
    int columns = 0;
    while (std::getline(is, line)) {
        if (line.rfind("#", 0) == 0) {
            ++comment;
            continue;
        }
        ++rows;
        columns = int(std::count(line.begin(), line.end(), ',')) + 1;
    }
    CHECK(rows == 20);
    CHECK(comment == 1);
    CHECK(columns == 4);  // 3 feature columns + label

    std::ifstream a(path, std::ios::binary), b(path.string() + ".again", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".again");
}
