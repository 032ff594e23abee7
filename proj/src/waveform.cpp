// SPDX-License-Identifier: Apache-2.0
#include "rff/waveform.hpp"

#include <cmath>

namespace rff {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
// Reserved seed for the frozen LTS constant.
constexpr std::uint64_t kLtsSeed = 0x4C54535F52464631ULL;  // "LTS_RFF1"
}  // namespace

void DeviceProfile::validate() const {
    if (amp_imbalance_db < -0.9 || amp_imbalance_db > 0.9)
        throw ConfigError("amp imbalance out of [-0.9, 0.9] dB");
    if (phase_imbalance_deg < -3.0 || phase_imbalance_deg > 3.0)
        throw ConfigError("phase imbalance out of [-3, 3] deg");
}

DeviceSet DeviceSet::evenly_spaced(int count) {
    if (count < 1) throw ConfigError("device count must be >= 1");
    DeviceSet set;
    set.devices.reserve(std::size_t(count));
    for (int k = 0; k < count; ++k) {
        const double t = count == 1 ? 0.5 : double(k) / double(count - 1);
        set.devices.push_back({k, -0.9 + 1.8 * t, -3.0 + 6.0 * t});
    }
    set.validate();
    return set;
}

void DeviceSet::validate() const {
    for (std::size_t i = 0; i < devices.size(); ++i) {
        devices[i].validate();
        for (std::size_t j = i + 1; j < devices.size(); ++j)
            if (devices[i].device_id == devices[j].device_id)
                throw ConfigError("duplicate device_id in DeviceSet");
    }
}

std::vector<cplx> qpsk_modulate(const std::vector<std::uint8_t>& bits, int count) {
    if (int(bits.size()) != 2 * count)
        throw ShapeError("qpsk_modulate: bits length must be 2 x symbol count");
    std::vector<cplx> symbols(static_cast<std::size_t>(count), cplx{});
    for (int s = 0; s < count; ++s) {
        const double i = bits[std::size_t(2 * s)] ? -kInvSqrt2 : kInvSqrt2;
        const double q = bits[std::size_t(2 * s + 1)] ? -kInvSqrt2 : kInvSqrt2;
        symbols[std::size_t(s)] = {i, q};
    }
    return symbols;
}

const SubcarrierVec& lts_sequence() {
    static const SubcarrierVec lts = [] {
        Rng rng(kLtsSeed);
        std::vector<std::uint8_t> bits(2 * kSubcarriers);
        for (auto& b : bits) b = std::uint8_t(rng.uniform_int(0, 1));
        const auto symbols = qpsk_modulate(bits, kSubcarriers);
        SubcarrierVec v;
        for (int k = 0; k < kSubcarriers; ++k) v[std::size_t(k)] = symbols[std::size_t(k)];
        return v;
    }();
    return lts;
}

FrequencyFrame build_frame(std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    FrequencyFrame frame;
    frame.pilot = lts_sequence();
    std::vector<std::uint8_t> bits(2 * kSymbolsPerPacket);
    for (auto& b : bits) b = std::uint8_t(rng.uniform_int(0, 1));
    const auto symbols = qpsk_modulate(bits, kSymbolsPerPacket);
    for (int f = 0; f < kDataFrames; ++f)
        for (int k = 0; k < kSubcarriers; ++k)
            frame.data[std::size_t(f)][std::size_t(k)] =
                symbols[std::size_t(f * kSubcarriers + k)];
    return frame;
}

IqGains iq_gains(const DeviceProfile& profile) {
    return {std::pow(10.0, 0.5 * profile.amp_imbalance_db / 20.0),
            std::pow(10.0, -0.5 * profile.amp_imbalance_db / 20.0),
            0.5 * profile.phase_imbalance_deg * M_PI / 180.0};
}

namespace {
inline cplx impair(const cplx& x, const IqGains& g, double ct, double st) {
    const double xi = x.real();
    const double xq = x.imag();
    return {g.g_i * ct * xi - g.g_q * st * xq, g.g_i * st * xi + g.g_q * ct * xq};
}
}  // namespace

ImpairedFrame apply_iq_imbalance(const FrequencyFrame& frame, const DeviceProfile& profile) {
    const IqGains g = iq_gains(profile);
    const double ct = std::cos(g.theta);
    const double st = std::sin(g.theta);
    ImpairedFrame out;
    out.source_device = profile.device_id;
    for (int k = 0; k < kSubcarriers; ++k)
        out.pilot[std::size_t(k)] = impair(frame.pilot[std::size_t(k)], g, ct, st);
    for (int f = 0; f < kDataFrames; ++f)
        for (int k = 0; k < kSubcarriers; ++k)
            out.data[std::size_t(f)][std::size_t(k)] =
                impair(frame.data[std::size_t(f)][std::size_t(k)], g, ct, st);
    return out;
}

}  // namespace rff
