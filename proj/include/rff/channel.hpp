// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "rff/waveform.hpp"

namespace rff {

// TDL channel with exponential PDP and Jakes Doppler. 20 MHz-style
// numerology: 50 ns tap spacing, 8 taps. The channel is redrawn per packet
// and evolves across the pilot + 5 data frames via a Gauss-Markov step
// whose one-lag correlation matches the Jakes autocorrelation
// J0(2 pi f_d tau) at the frame spacing.
struct ChannelConfig {
    double rms_delay_ns = 30.0;
    double sample_period_ns = 50.0;
    int num_taps = 8;
    double doppler_hz_min = 0.0;
    double doppler_hz_max = 5.0;
    double frame_interval_s = 1e-3;
    double base_snr_db = 20.0;

    void validate() const;
    bool operator==(const ChannelConfig&) const = default;
};

inline constexpr int kFrameRows = kDataFrames + 1;  // pilot row + data rows

struct ChannelRealization {
    // taps[r][l]: tap l at frame-time r (row 0 = pilot, rows 1..5 = data)
    std::vector<std::vector<cplx>> taps;
    // h_freq[r][k]: active-subcarrier DFT of taps[r]
    std::array<SubcarrierVec, kFrameRows> h_freq;
    double doppler_hz = 0.0;
};

// One packet's worth of frequency-domain samples, before or after noise.
struct PacketSignal {
    SubcarrierVec pilot;
    DataGrid data;
};

struct ReceivedFrame {
    PacketSignal signal;
    int device_id = -1;
    double snr_db = 0.0;
    // Simulation-only ground truth; null when loaded from a dataset file.
    std::shared_ptr<const ChannelRealization> truth;
};

// Normalized tap powers p_l proportional to exp(-l Ts / sigma_tau).
std::vector<double> pdp_powers(const ChannelConfig& cfg);

// Physical subcarrier index for column c: {-26..-1, 1..26} (DC unused).
int subcarrier_index(int column);

ChannelRealization sample_channel(const ChannelConfig& cfg, std::uint64_t rng_seed);

// y = h * x_bb per subcarrier; pilot uses row 0, data frame f uses row f+1.
PacketSignal apply_channel(const ImpairedFrame& frame, const ChannelRealization& ch);

// Adds circular complex Gaussian noise with variance P_sig / 10^(snr/10),
// P_sig measured from the packet itself.
PacketSignal add_awgn(const PacketSignal& signal, double snr_db, std::uint64_t rng_seed);

double mean_power(const PacketSignal& signal);

}  // namespace rff
