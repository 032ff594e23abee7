// SPDX-License-Identifier: Apache-2.0
#include "rff/chanest.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "rff/container.hpp"

namespace rff {

using json = nlohmann::json;

const char* estimator_name(EstimatorKind kind) {
    return kind == EstimatorKind::ls ? "LS" : "MMSE";
}

void MmseStatistics::validate() const {
    if (r_hh.rows() != kSubcarriers || r_hh.cols() != kSubcarriers ||
        r_h_hls.rows() != kSubcarriers || r_h_hls.cols() != kSubcarriers)
        throw ShapeError("MmseStatistics: matrices must be 52 x 52");
    if (sample_count < 1) throw ConfigError("MmseStatistics: empty sample set");
}

ChannelEstimate ls_estimate(const SubcarrierVec& pilot_rx, const SubcarrierVec& pilot_tx) {
    ChannelEstimate est;
    est.method = EstimatorKind::ls;
    for (int k = 0; k < kSubcarriers; ++k) {
        if (std::norm(pilot_tx[std::size_t(k)]) == 0.0)
            throw NumericError("ls_estimate: zero pilot entry");
        est.h_hat[std::size_t(k)] = pilot_rx[std::size_t(k)] / pilot_tx[std::size_t(k)];
    }
    return est;
}

MmseStatistics accumulate_mmse_statistics(const std::vector<SubcarrierVec>& h_rows) {
    if (h_rows.empty()) throw ConfigError("accumulate_mmse_statistics: no samples");
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(kSubcarriers, kSubcarriers);
    Eigen::VectorXcd h(kSubcarriers);
    for (const auto& row : h_rows) {
        for (int k = 0; k < kSubcarriers; ++k) h(k) = row[std::size_t(k)];
        acc.noalias() += h * h.adjoint();
    }
    acc /= double(h_rows.size());
    MmseStatistics stats;
    stats.r_hh = 0.5 * (acc + acc.adjoint());  // symmetrized, exactly Hermitian
    stats.r_h_hls = stats.r_hh;
    stats.sample_count = std::int64_t(h_rows.size());
    return stats;
}

MmseStatistics estimate_mmse_statistics(const ChannelConfig& cfg, std::int64_t n,
                                        std::uint64_t rng_seed) {
    if (n < 10000) throw ConfigError("estimate_mmse_statistics: needs at least 1e4 realizations");
    cfg.validate();
    std::vector<SubcarrierVec> rows(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        rows[std::size_t(i)] =
            sample_channel(cfg, derive_seed(rng_seed, std::uint64_t(i))).h_freq[0];
    return accumulate_mmse_statistics(rows);
}

ChannelEstimate mmse_estimate(const ChannelEstimate& ls, const MmseStatistics& stats,
                              double snr_db) {
    if (ls.method != EstimatorKind::ls)
        throw ConfigError("mmse_estimate: input must be an LS estimate");
    stats.validate();
    const double snr_linear = std::pow(10.0, snr_db / 10.0);

    Eigen::MatrixXcd reg = stats.r_hh;
    reg.diagonal().array() += cplx{1.0 / snr_linear, 0.0};
    const Eigen::MatrixXcd weight = stats.r_h_hls * reg.inverse();
    if (!weight.allFinite())
        throw NumericError("mmse_estimate: singular regularized covariance");

    Eigen::VectorXcd h_ls(kSubcarriers);
    for (int k = 0; k < kSubcarriers; ++k) h_ls(k) = ls.h_hat[std::size_t(k)];
    const Eigen::VectorXcd h = weight * h_ls;

    ChannelEstimate est;
    est.method = EstimatorKind::mmse;
    est.snr_db_used = snr_db;
    for (int k = 0; k < kSubcarriers; ++k) est.h_hat[std::size_t(k)] = h(k);
    return est;
}

EqualizedSample equalize(const DataGrid& frames_rx, const ChannelEstimate& estimate) {
    for (int k = 0; k < kSubcarriers; ++k)
        if (std::abs(estimate.h_hat[std::size_t(k)]) <= kDeepFadeEps)
            throw DeepFadeError("equalize: estimate in deep fade at subcarrier " +
                                std::to_string(k));
    EqualizedSample out;
    out.method = estimate.method;
    for (int f = 0; f < kDataFrames; ++f)
        for (int k = 0; k < kSubcarriers; ++k) {
            const cplx x = frames_rx[std::size_t(f)][std::size_t(k)] / estimate.h_hat[std::size_t(k)];
            const int col = f * kSubcarriers + k;
            out.at(0, col) = float(x.real());
            out.at(1, col) = float(x.imag());
        }
    return out;
}

EqualizedSample block_mask(const EqualizedSample& sample, double ratio, std::uint64_t rng_seed) {
    if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("block_mask: ratio must be in [0, 1)");
    const int len = int(std::lround(ratio * kSymbolsPerPacket));
    if (len == 0) return sample;
    EqualizedSample out = sample;
    Rng rng(rng_seed);
    const int begin = int(rng.uniform_int(0, kSymbolsPerPacket - len));
    for (int c = begin; c < begin + len; ++c) {
        out.at(0, c) = 0.0f;
        out.at(1, c) = 0.0f;
    }
    out.mask_spec.push_back({begin, begin + len});
    return out;
}

EqualizedSample augment_view(const ReceivedFrame& packet, const MmseStatistics& stats,
                             EstimatorKind kind, int snr_db, double mask_ratio, Rng& rng) {
    const PacketSignal noisy = add_awgn(packet.signal, double(snr_db), rng.next_u64());
    ChannelEstimate est = ls_estimate(noisy.pilot, lts_sequence());
    if (kind == EstimatorKind::mmse) est = mmse_estimate(est, stats, double(snr_db));
    EqualizedSample view = equalize(noisy.data, est);
    view.label = packet.device_id;
    return block_mask(view, mask_ratio, rng.next_u64());
}

std::pair<EqualizedSample, EqualizedSample> make_pair_with_kinds(
    const ReceivedFrame& packet, const MmseStatistics& stats, EstimatorKind first,
    EstimatorKind second, int snr_lo, int snr_hi, double mask_ratio, std::uint64_t rng_seed) {
    if (snr_hi < snr_lo) throw ConfigError("make_pair: SNR range is reversed");
    Rng rng(rng_seed);
    const int snr1 = int(rng.uniform_int(snr_lo, snr_hi));
    const int snr2 = int(rng.uniform_int(snr_lo, snr_hi));
    EqualizedSample v1 = augment_view(packet, stats, first, snr1, mask_ratio, rng);
    EqualizedSample v2 = augment_view(packet, stats, second, snr2, mask_ratio, rng);
    return {std::move(v1), std::move(v2)};
}

std::pair<EqualizedSample, EqualizedSample> make_pair(const ReceivedFrame& packet,
                                                      const MmseStatistics& stats,
                                                      int snr_lo, int snr_hi,
                                                      std::uint64_t rng_seed) {
    return make_pair_with_kinds(packet, stats, EstimatorKind::ls, EstimatorKind::mmse,
                                snr_lo, snr_hi, 0.1, rng_seed);
}

EqualizedSample clean_view(const ReceivedFrame& packet, const MmseStatistics& stats,
                           EstimatorKind kind, double snr_db) {
    ChannelEstimate est = ls_estimate(packet.signal.pilot, lts_sequence());
    if (kind == EstimatorKind::mmse) est = mmse_estimate(est, stats, snr_db);
    EqualizedSample view = equalize(packet.signal.data, est);
    view.label = packet.device_id;
    return view;
}

// --- cache file -------------------------------------------------------------

namespace {

json channel_config_json(const ChannelConfig& cfg) {
    return json{{"rms_delay_ns", cfg.rms_delay_ns},
                {"sample_period_ns", cfg.sample_period_ns},
                {"num_taps", cfg.num_taps},
                {"doppler_hz_min", cfg.doppler_hz_min},
                {"doppler_hz_max", cfg.doppler_hz_max},
                {"frame_interval_s", cfg.frame_interval_s},
                {"base_snr_db", cfg.base_snr_db}};
}

ChannelConfig channel_config_from_json(const json& j) {
    ChannelConfig cfg;
    cfg.rms_delay_ns = j.at("rms_delay_ns").get<double>();
    cfg.sample_period_ns = j.at("sample_period_ns").get<double>();
    cfg.num_taps = j.at("num_taps").get<int>();
    cfg.doppler_hz_min = j.at("doppler_hz_min").get<double>();
    cfg.doppler_hz_max = j.at("doppler_hz_max").get<double>();
    cfg.frame_interval_s = j.at("frame_interval_s").get<double>();
    cfg.base_snr_db = j.at("base_snr_db").get<double>();
    return cfg;
}

void append_matrix_f64(std::vector<char>& payload, const Eigen::MatrixXcd& m) {
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) {
            const double re = m(r, c).real();
            const double im = m(r, c).imag();
            const char* p = reinterpret_cast<const char*>(&re);
            payload.insert(payload.end(), p, p + 8);
            p = reinterpret_cast<const char*>(&im);
            payload.insert(payload.end(), p, p + 8);
        }
}

Eigen::MatrixXcd read_matrix_f64(const std::vector<char>& payload, std::size_t& offset,
                                 int rows, int cols) {
    Eigen::MatrixXcd m(rows, cols);
    const std::size_t need = std::size_t(rows) * std::size_t(cols) * 16;
    if (offset + need > payload.size()) throw IoError("statistics payload truncated");
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) {
            double re, im;
            std::memcpy(&re, payload.data() + offset, 8);
            std::memcpy(&im, payload.data() + offset + 8, 8);
            offset += 16;
            m(r, c) = {re, im};
        }
    return m;
}

}  // namespace

void save_mmse_statistics(const std::string& path, const MmseStatistics& stats,
                          const ChannelConfig& cfg, std::uint64_t seed) {
    stats.validate();
    json header{{"dims", {kSubcarriers, kSubcarriers}},
                {"sample_count", stats.sample_count},
                {"channel_config", channel_config_json(cfg)},
                {"seed", seed}};
    std::vector<char> payload;
    payload.reserve(std::size_t(kSubcarriers) * kSubcarriers * 32);
    append_matrix_f64(payload, stats.r_hh);
    append_matrix_f64(payload, stats.r_h_hls);
    write_container(path, "RFFSTAT1", header.dump(), payload);
}

MmseStatistics load_mmse_statistics(const std::string& path, ChannelConfig* cfg_out) {
    const Container c = read_container(path, "RFFSTAT1");
    json header = json::parse(c.header_json);
    MmseStatistics stats;
    std::size_t offset = 0;
    stats.r_hh = read_matrix_f64(c.payload, offset, kSubcarriers, kSubcarriers);
    stats.r_h_hls = read_matrix_f64(c.payload, offset, kSubcarriers, kSubcarriers);
    stats.sample_count = header.at("sample_count").get<std::int64_t>();
    if (cfg_out) *cfg_out = channel_config_from_json(header.at("channel_config"));
    stats.validate();
    return stats;
}

}  // namespace rff
