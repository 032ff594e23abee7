// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rff/common.hpp"

namespace rff {

// Packet geometry: 64-point grid with 52 active subcarriers, one LTS pilot
// frame plus five QPSK data frames. Everything downstream works on the
// active subcarriers only; the full FFT grid is never materialized.
inline constexpr int kSubcarriers = 52;
inline constexpr int kDataFrames = 5;
inline constexpr int kFftLen = 64;
inline constexpr int kSymbolsPerPacket = kDataFrames * kSubcarriers;  // 260

using SubcarrierVec = std::array<cplx, kSubcarriers>;
using DataGrid = std::array<SubcarrierVec, kDataFrames>;

// Per-device IQ imbalance pair; the fingerprint ground truth.
struct DeviceProfile {
    int device_id = 0;
    double amp_imbalance_db = 0.0;    // A
    double phase_imbalance_deg = 0.0; // P

    void validate() const;
};

struct DeviceSet {
    std::vector<DeviceProfile> devices;

    // A_k and P_k evenly spaced across [-0.9, 0.9] dB and [-3, 3] degrees,
    // paired diagonally so the (g_i, g_q, theta) triples stay distinct.
    static DeviceSet evenly_spaced(int count = 7);

    int size() const { return int(devices.size()); }
    void validate() const;
};

struct FrequencyFrame {
    SubcarrierVec pilot;  // LTS, known to the receiver
    DataGrid data;        // 5 x 52 QPSK symbols
};

struct ImpairedFrame {
    SubcarrierVec pilot;
    DataGrid data;
    int source_device = -1;
};

// Gray map: 00 -> (1+j)/sqrt2, 01 -> (1-j)/sqrt2, 11 -> (-1-j)/sqrt2,
// 10 -> (-1+j)/sqrt2. First bit selects I sign, second bit Q sign.
std::vector<cplx> qpsk_modulate(const std::vector<std::uint8_t>& bits, int count);

// The fixed LTS: one unit-modulus QPSK vector generated once from a
// reserved seed and frozen for the lifetime of the project.
const SubcarrierVec& lts_sequence();

FrequencyFrame build_frame(std::uint64_t rng_seed);

// g_i = 10^(0.5 A / 20), g_q = 10^(-0.5 A / 20), theta = 0.5 P pi / 180
struct IqGains {
    double g_i;
    double g_q;
    double theta;
};

IqGains iq_gains(const DeviceProfile& profile);

// x_bb = (g_i cos(t) x_i - g_q sin(t) x_q) + j (g_i sin(t) x_i + g_q cos(t) x_q),
// applied to pilot and data alike: the transmitter impairs everything it sends.
ImpairedFrame apply_iq_imbalance(const FrequencyFrame& frame, const DeviceProfile& profile);

}  // namespace rff
