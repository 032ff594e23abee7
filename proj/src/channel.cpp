// SPDX-License-Identifier: Apache-2.0
#include "rff/channel.hpp"

#include <cmath>

namespace rff {

void ChannelConfig::validate() const {
    if (rms_delay_ns <= 0) throw ConfigError("rms_delay_ns must be > 0");
    if (sample_period_ns <= 0) throw ConfigError("sample_period_ns must be > 0");
    if (num_taps < 1) throw ConfigError("num_taps must be >= 1");
    if (doppler_hz_min < 0 || doppler_hz_max < doppler_hz_min)
        throw ConfigError("doppler range must be non-negative and ordered");
    if (frame_interval_s <= 0) throw ConfigError("frame_interval_s must be > 0");
    if (!std::isfinite(base_snr_db)) throw ConfigError("base_snr_db must be finite");
}

std::vector<double> pdp_powers(const ChannelConfig& cfg) {
    std::vector<double> p(static_cast<std::size_t>(cfg.num_taps), 0.0);
    double sum = 0.0;
    for (int l = 0; l < cfg.num_taps; ++l) {
        p[std::size_t(l)] = std::exp(-double(l) * cfg.sample_period_ns / cfg.rms_delay_ns);
        sum += p[std::size_t(l)];
    }
    for (auto& v : p) v /= sum;
    return p;
}

int subcarrier_index(int column) {
    return column < kSubcarriers / 2 ? column - kSubcarriers / 2
                                     : column - kSubcarriers / 2 + 1;
}

namespace {

void taps_to_freq(const std::vector<cplx>& taps, SubcarrierVec& h) {
    for (int c = 0; c < kSubcarriers; ++c) {
        const double base = -2.0 * M_PI * double(subcarrier_index(c)) / double(kFftLen);
        cplx acc{0.0, 0.0};
        for (std::size_t l = 0; l < taps.size(); ++l)
            acc += taps[l] * cplx{std::cos(base * double(l)), std::sin(base * double(l))};
        h[std::size_t(c)] = acc;
    }
}

}  // namespace

ChannelRealization sample_channel(const ChannelConfig& cfg, std::uint64_t rng_seed) {
    cfg.validate();
    Rng rng(rng_seed);
    const auto powers = pdp_powers(cfg);

    ChannelRealization ch;
    ch.doppler_hz = rng.uniform(cfg.doppler_hz_min, cfg.doppler_hz_max);

    // One-lag Gauss-Markov coefficient matching the Jakes autocorrelation
    // at the frame spacing; rho = 1 exactly when f_d = 0.
    const double rho = std::cyl_bessel_j(0.0, 2.0 * M_PI * ch.doppler_hz * cfg.frame_interval_s);
    const double innov = std::sqrt(std::max(0.0, 1.0 - rho * rho));

    ch.taps.assign(kFrameRows, std::vector<cplx>(std::size_t(cfg.num_taps)));
    for (int l = 0; l < cfg.num_taps; ++l)
        ch.taps[0][std::size_t(l)] = std::sqrt(powers[std::size_t(l)]) * rng.cnormal();
    for (int r = 1; r < kFrameRows; ++r)
        for (int l = 0; l < cfg.num_taps; ++l) {
            const cplx w = std::sqrt(powers[std::size_t(l)]) * rng.cnormal();
            ch.taps[std::size_t(r)][std::size_t(l)] =
                rho * ch.taps[std::size_t(r - 1)][std::size_t(l)] + innov * w;
        }

    for (int r = 0; r < kFrameRows; ++r)
        taps_to_freq(ch.taps[std::size_t(r)], ch.h_freq[std::size_t(r)]);
    return ch;
}

PacketSignal apply_channel(const ImpairedFrame& frame, const ChannelRealization& ch) {
    if (ch.taps.size() != kFrameRows)
        throw ShapeError("apply_channel: realization has wrong row count");
    PacketSignal out;
    for (int k = 0; k < kSubcarriers; ++k)
        out.pilot[std::size_t(k)] = ch.h_freq[0][std::size_t(k)] * frame.pilot[std::size_t(k)];
    for (int f = 0; f < kDataFrames; ++f)
        for (int k = 0; k < kSubcarriers; ++k)
            out.data[std::size_t(f)][std::size_t(k)] =
                ch.h_freq[std::size_t(f + 1)][std::size_t(k)] * frame.data[std::size_t(f)][std::size_t(k)];
    return out;
}

double mean_power(const PacketSignal& signal) {
    double acc = 0.0;
    for (const auto& v : signal.pilot) acc += std::norm(v);
    for (const auto& row : signal.data)
        for (const auto& v : row) acc += std::norm(v);
    return acc / double(kSubcarriers + kSymbolsPerPacket);
}

PacketSignal add_awgn(const PacketSignal& signal, double snr_db, std::uint64_t rng_seed) {
    if (!std::isfinite(snr_db)) throw ConfigError("add_awgn: snr_db must be finite");
    Rng rng(rng_seed);
    const double sigma = std::sqrt(mean_power(signal) / std::pow(10.0, snr_db / 10.0));
    PacketSignal out = signal;
    for (auto& v : out.pilot) v += sigma * rng.cnormal();
    for (auto& row : out.data)
        for (auto& v : row) v += sigma * rng.cnormal();
    return out;
}

}  // namespace rff
