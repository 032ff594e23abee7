// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "rff/chanest.hpp"
#include "rff/dataset.hpp"

using namespace rff;

namespace {

MmseStatistics identity_stats() {
    MmseStatistics s;
    s.r_hh = Eigen::MatrixXcd::Identity(kSubcarriers, kSubcarriers);
    s.r_h_hls = s.r_hh;
    s.sample_count = 10000;
    return s;
}

MmseStatistics tdl_stats(const ChannelConfig& cfg) {
    static MmseStatistics cached = estimate_mmse_statistics(cfg, 10000, 909);
    return cached;
}

ReceivedFrame make_received(const ChannelConfig& cfg, std::uint64_t seed, int device = 0) {
    const FrequencyFrame frame = build_frame(derive_seed(seed, 1));
    const ImpairedFrame imp = apply_iq_imbalance(frame, {device, 0.3, 1.0});
    const auto ch = sample_channel(cfg, derive_seed(seed, 2));
    ReceivedFrame rx;
    rx.signal = add_awgn(apply_channel(imp, ch), cfg.base_snr_db, derive_seed(seed, 3));
    rx.device_id = device;
    rx.snr_db = cfg.base_snr_db;
    rx.truth = std::make_shared<ChannelRealization>(ch);
    return rx;
}

}  // namespace

TEST_CASE("ls estimate inverts exactly without noise") {
    const auto& lts = lts_sequence();
    auto est = ls_estimate(lts, lts);
    CHECK(est.method == EstimatorKind::ls);
    for (const auto& h : est.h_hat) CHECK(std::abs(h - cplx{1.0, 0.0}) < 1e-15);

    const auto ch = sample_channel(ChannelConfig{}, 55);
    SubcarrierVec rx;
    for (int k = 0; k < kSubcarriers; ++k)
        rx[std::size_t(k)] = ch.h_freq[0][std::size_t(k)] * lts[std::size_t(k)];
    est = ls_estimate(rx, lts);
    for (int k = 0; k < kSubcarriers; ++k)
        CHECK(std::abs(est.h_hat[std::size_t(k)] - ch.h_freq[0][std::size_t(k)]) < 1e-12);
}

TEST_CASE("ls estimate rejects degenerate pilot") {
    SubcarrierVec pilot = lts_sequence();
    pilot[13] = {0.0, 0.0};
    CHECK_THROWS_AS(ls_estimate(lts_sequence(), pilot), NumericError);
}

TEST_CASE("ls mse equals 1/snr on the unit channel") {
    // MSE(h_ls) = 1/SNR; 2e4 packets x 52 subcarriers at 20 dB
    const int trials = 20000;
    double mse = 0.0;
    for (int i = 0; i < trials; ++i) {
        const FrequencyFrame frame = build_frame(derive_seed(31, std::uint64_t(i)));
        const PacketSignal clean{frame.pilot, frame.data};
        const PacketSignal noisy = add_awgn(clean, 20.0, derive_seed(32, std::uint64_t(i)));
        const auto est = ls_estimate(noisy.pilot, frame.pilot);
        for (const auto& h : est.h_hat) mse += std::norm(h - cplx{1.0, 0.0});
    }
    mse /= double(trials) * kSubcarriers;
    CHECK(std::abs(mse - 0.01) / 0.01 < 0.05);
}

TEST_CASE("synthetic iid channel gives identity covariance") {
    Rng rng(1290);
    std::vector<SubcarrierVec> rows(10000);
    for (auto& row : rows)
        for (auto& v : row) v = rng.cnormal();
    const MmseStatistics stats = accumulate_mmse_statistics(rows);
    CHECK(stats.sample_count == 10000);
    for (int r = 0; r < kSubcarriers; ++r)
        for (int c = 0; c < kSubcarriers; ++c) {
            const cplx expected = r == c ? cplx{1.0, 0.0} : cplx{0.0, 0.0};
            CHECK(std::abs(stats.r_hh(r, c) - expected) < 0.05);
        }
}

TEST_CASE("single-tap channel gives rank-one all-ones covariance") {
    ChannelConfig cfg;
    cfg.num_taps = 1;
    const MmseStatistics stats = estimate_mmse_statistics(cfg, 10000, 77);
    for (int r = 0; r < kSubcarriers; ++r)
        for (int c = 0; c < kSubcarriers; ++c)
            CHECK(std::abs(stats.r_hh(r, c) - cplx{1.0, 0.0}) < 0.05);
}

TEST_CASE("covariance is exactly hermitian") {
    const MmseStatistics stats = tdl_stats(ChannelConfig{});
    CHECK((stats.r_hh - stats.r_hh.adjoint()).norm() == 0.0);
}

TEST_CASE("mmse converges to ls in the noise-free limit") {
    const auto ch = sample_channel(ChannelConfig{}, 404);
    SubcarrierVec rx;
    for (int k = 0; k < kSubcarriers; ++k)
        rx[std::size_t(k)] = ch.h_freq[0][std::size_t(k)] * lts_sequence()[std::size_t(k)];
    const auto ls = ls_estimate(rx, lts_sequence());
    const auto mmse = mmse_estimate(ls, identity_stats(), 300.0);
    CHECK(mmse.method == EstimatorKind::mmse);
    for (int k = 0; k < kSubcarriers; ++k)
        CHECK(std::abs(mmse.h_hat[std::size_t(k)] - ls.h_hat[std::size_t(k)]) < 1e-6);
}

TEST_CASE("mmse shrinks to zero at very low snr") {
    const auto ls = ls_estimate(lts_sequence(), lts_sequence());
    const auto mmse = mmse_estimate(ls, identity_stats(), -100.0);
    double norm = 0.0;
    for (const auto& h : mmse.h_hat) norm += std::norm(h);
    CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("mmse beats ls on the tdl channel") {
    ChannelConfig cfg;
    const MmseStatistics stats = tdl_stats(cfg);
    for (const double snr : {10.0, 15.0, 20.0}) {
        double mse_ls = 0.0, mse_mmse = 0.0;
        const int trials = 1000;
        for (int i = 0; i < trials; ++i) {
            const auto ch = sample_channel(cfg, derive_seed(7100 + std::uint64_t(snr), std::uint64_t(i)));
            PacketSignal sig;
            const FrequencyFrame frame = build_frame(derive_seed(7200, std::uint64_t(i)));
            sig.pilot = frame.pilot;
            sig.data = frame.data;
            for (int k = 0; k < kSubcarriers; ++k)
                sig.pilot[std::size_t(k)] *= ch.h_freq[0][std::size_t(k)];
            for (int f = 0; f < kDataFrames; ++f)
                for (int k = 0; k < kSubcarriers; ++k)
                    sig.data[std::size_t(f)][std::size_t(k)] *=
                        ch.h_freq[std::size_t(f + 1)][std::size_t(k)];
            const PacketSignal noisy =
                add_awgn(sig, snr, derive_seed(7300 + std::uint64_t(snr), std::uint64_t(i)));
            const auto ls = ls_estimate(noisy.pilot, frame.pilot);
            const auto mm = mmse_estimate(ls, stats, snr);
            for (int k = 0; k < kSubcarriers; ++k) {
                mse_ls += std::norm(ls.h_hat[std::size_t(k)] - ch.h_freq[0][std::size_t(k)]);
                mse_mmse += std::norm(mm.h_hat[std::size_t(k)] - ch.h_freq[0][std::size_t(k)]);
            }
        }
        CHECK(mse_mmse < mse_ls);
    }
}

TEST_CASE("equalization recovers the sent frame with the exact estimate") {
    ChannelConfig cfg;
    cfg.doppler_hz_min = cfg.doppler_hz_max = 0.0;  // block-constant channel
    const FrequencyFrame frame = build_frame(17);
    const ImpairedFrame imp = apply_iq_imbalance(frame, {1, 0.6, 2.0});
    const auto ch = sample_channel(cfg, 18);
    const PacketSignal rx = apply_channel(imp, ch);

    ChannelEstimate exact;
    exact.method = EstimatorKind::ls;
    exact.h_hat = ch.h_freq[0];
    const EqualizedSample eq = equalize(rx.data, exact);
    for (int f = 0; f < kDataFrames; ++f)
        for (int k = 0; k < kSubcarriers; ++k) {
            const int col = f * kSubcarriers + k;
            CHECK(std::abs(double(eq.at(0, col)) -
                           imp.data[std::size_t(f)][std::size_t(k)].real()) < 1e-6);
            CHECK(std::abs(double(eq.at(1, col)) -
                           imp.data[std::size_t(f)][std::size_t(k)].imag()) < 1e-6);
        }

    // doubled estimate halves the output
    ChannelEstimate twice = exact;
    for (auto& h : twice.h_hat) h *= 2.0;
    const EqualizedSample half = equalize(rx.data, twice);
    for (int col = 0; col < kSymbolsPerPacket; ++col) {
        CHECK(double(half.at(0, col)) == doctest::Approx(double(eq.at(0, col)) / 2.0).epsilon(1e-5));
        CHECK(double(half.at(1, col)) == doctest::Approx(double(eq.at(1, col)) / 2.0).epsilon(1e-5));
    }
}

TEST_CASE("deep fade raises") {
    ChannelEstimate est;
    est.h_hat.fill({1.0, 0.0});
    est.h_hat[7] = {1e-10, 0.0};
    DataGrid data{};
    CHECK_THROWS_AS(equalize(data, est), DeepFadeError);
}

TEST_CASE("noisy ls and mmse give distinct nonzero residuals") {
    ChannelConfig cfg;
    cfg.doppler_hz_min = cfg.doppler_hz_max = 0.0;
    const MmseStatistics stats = tdl_stats(ChannelConfig{});
    const FrequencyFrame frame = build_frame(23);
    const ImpairedFrame imp = apply_iq_imbalance(frame, {0, 0.3, 1.0});
    const auto ch = sample_channel(cfg, 24);
    const PacketSignal noisy = add_awgn(apply_channel(imp, ch), 15.0, 25);

    const auto ls = ls_estimate(noisy.pilot, lts_sequence());
    const auto mm = mmse_estimate(ls, stats, 15.0);
    const EqualizedSample x_ls = equalize(noisy.data, ls);
    const EqualizedSample x_mm = equalize(noisy.data, mm);

    double r_ls = 0.0, r_mm = 0.0, diff = 0.0;
    for (int f = 0; f < kDataFrames; ++f)
        for (int k = 0; k < kSubcarriers; ++k) {
            const int col = f * kSubcarriers + k;
            const cplx truth = imp.data[std::size_t(f)][std::size_t(k)];
            r_ls += std::norm(cplx{double(x_ls.at(0, col)), double(x_ls.at(1, col))} - truth);
            r_mm += std::norm(cplx{double(x_mm.at(0, col)), double(x_mm.at(1, col))} - truth);
            diff += std::norm(cplx{double(x_ls.at(0, col)) - double(x_mm.at(0, col)),
                                   double(x_ls.at(1, col)) - double(x_mm.at(1, col))});
        }
    CHECK(r_ls > 0.0);
    CHECK(r_mm > 0.0);
    CHECK(diff > 0.0);
}

TEST_CASE("block mask zeroes one contiguous run") {
    ChannelConfig cfg;
    const auto packet = make_received(cfg, 61);
    const auto est = ls_estimate(packet.signal.pilot, lts_sequence());
    const EqualizedSample sample = equalize(packet.signal.data, est);

    const EqualizedSample untouched = block_mask(sample, 0.0, 9);
    CHECK(untouched.values == sample.values);
    CHECK(untouched.mask_spec.empty());

    const EqualizedSample masked = block_mask(sample, 0.1, 9);
    REQUIRE(masked.mask_spec.size() == 1);
    const auto range = masked.mask_spec[0];
    CHECK(range.end - range.begin == 26);  // round(0.1 * 260)
    int zero_cols = 0;
    for (int col = 0; col < kSymbolsPerPacket; ++col) {
        const bool zero = masked.at(0, col) == 0.0f && masked.at(1, col) == 0.0f;
        const bool in_range = col >= range.begin && col < range.end;
        if (zero && in_range) ++zero_cols;
        if (!in_range) {
            CHECK(masked.at(0, col) == sample.at(0, col));  // untouched columns bit-identical
            CHECK(masked.at(1, col) == sample.at(1, col));
        }
    }
    CHECK(zero_cols == 26);

    const EqualizedSample again = block_mask(sample, 0.1, 9);
    CHECK(again.values == masked.values);
    const EqualizedSample other = block_mask(sample, 0.1, 10);
    CHECK(other.mask_spec[0].begin != range.begin);
}

TEST_CASE("make_pair is deterministic and labeled") {
    ChannelConfig cfg;
    const auto packet = make_received(cfg, 62, 3);
    const MmseStatistics stats = tdl_stats(ChannelConfig{});
    const auto [a1, a2] = make_pair(packet, stats, 10, 20, 1001);
    const auto [b1, b2] = make_pair(packet, stats, 10, 20, 1001);
    CHECK(a1.values == b1.values);
    CHECK(a2.values == b2.values);
    CHECK(a1.method == EstimatorKind::ls);
    CHECK(a2.method == EstimatorKind::mmse);
    CHECK(a1.label == 3);
    CHECK(a2.label == 3);
    const auto [c1, c2] = make_pair(packet, stats, 10, 20, 1002);
    CHECK(a1.values != c1.values);
}

TEST_CASE("benign channel keeps the two views aligned") {
    ChannelConfig cfg;
    cfg.num_taps = 1;
    cfg.doppler_hz_min = cfg.doppler_hz_max = 0.0;
    const MmseStatistics stats = estimate_mmse_statistics(cfg, 10000, 3131);
    const auto packet = make_received(cfg, 63);
    // raw (unmasked) views at a fixed 20 dB augmentation SNR
    const auto [v1, v2] = make_pair_with_kinds(packet, stats, EstimatorKind::ls,
                                               EstimatorKind::mmse, 20, 20, 0.0, 77);
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < v1.values.size(); ++i) {
        dot += double(v1.values[i]) * double(v2.values[i]);
        n1 += double(v1.values[i]) * double(v1.values[i]);
        n2 += double(v2.values[i]) * double(v2.values[i]);
    }
    CHECK(dot / std::sqrt(n1 * n2) > 0.9);
}

TEST_CASE("all randomness removed gives identical views") {
    ChannelConfig cfg;
    cfg.num_taps = 1;
    cfg.doppler_hz_min = cfg.doppler_hz_max = 0.0;
    cfg.base_snr_db = 300.0;
    const auto packet = make_received(cfg, 64);
    const MmseStatistics stats = identity_stats();
    const auto [v1, v2] = make_pair_with_kinds(packet, stats, EstimatorKind::ls,
                                               EstimatorKind::ls, 300, 300, 0.0, 7);
    for (std::size_t i = 0; i < v1.values.size(); ++i)
        CHECK(std::abs(double(v1.values[i]) - double(v2.values[i])) < 1e-6);
}

TEST_CASE("ls residual dominates mmse residual on average") {
    ChannelConfig cfg;
    const MmseStatistics stats = tdl_stats(cfg);
    double r_ls = 0.0, r_mm = 0.0;
    const int pairs = 1000;
    for (int i = 0; i < pairs; ++i) {
        const std::uint64_t seed = derive_seed(8800, std::uint64_t(i));
        const FrequencyFrame frame = build_frame(derive_seed(seed, 1));
        const ImpairedFrame imp = apply_iq_imbalance(frame, {0, 0.0, 0.0});
        const auto ch = sample_channel(cfg, derive_seed(seed, 2));
        ReceivedFrame rx;
        rx.signal = add_awgn(apply_channel(imp, ch), cfg.base_snr_db, derive_seed(seed, 3));
        rx.device_id = 0;
        rx.snr_db = cfg.base_snr_db;
        const auto [v1, v2] = make_pair_with_kinds(rx, stats, EstimatorKind::ls,
                                                   EstimatorKind::mmse, 10, 20, 0.0,
                                                   derive_seed(seed, 4));
        for (int f = 0; f < kDataFrames; ++f)
            for (int k = 0; k < kSubcarriers; ++k) {
                const int col = f * kSubcarriers + k;
                const cplx truth = imp.data[std::size_t(f)][std::size_t(k)];
                r_ls += std::norm(cplx{double(v1.at(0, col)), double(v1.at(1, col))} - truth);
                r_mm += std::norm(cplx{double(v2.at(0, col)), double(v2.at(1, col))} - truth);
            }
    }
    CHECK(r_ls >= r_mm);
}

TEST_CASE("statistics cache roundtrip") {
    ChannelConfig cfg;
    const MmseStatistics stats = tdl_stats(cfg);
    const std::string path = std::filesystem::temp_directory_path() / "rff_stats_test.rffs";
    save_mmse_statistics(path, stats, cfg, 909);
    ChannelConfig loaded_cfg;
    const MmseStatistics loaded = load_mmse_statistics(path, &loaded_cfg);
    CHECK(loaded.sample_count == stats.sample_count);
    CHECK((loaded.r_hh - stats.r_hh).norm() == 0.0);
    CHECK((loaded.r_h_hls - stats.r_h_hls).norm() == 0.0);
    CHECK(loaded_cfg == cfg);
    std::filesystem::remove(path);
}
