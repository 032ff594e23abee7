// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "rff/channel.hpp"

namespace rff {

struct DatasetMeta {
    int version = 1;
    DeviceSet devices;
    ChannelConfig channel;
    int packets_per_device = 0;
    std::uint64_t seed = 0;
    std::string created;      // ISO timestamp; excluded from determinism checks
    std::string config_hash;  // hash of the producing run config
};

// Simulates packets_per_device packets for every device: seeded QPSK frame,
// IQ imbalance, fresh channel realization, AWGN at the channel's base SNR.
// Packets whose noisy pilot LS estimate hits a deep fade are dropped and
// regenerated with a bumped attempt counter.
std::vector<ReceivedFrame> generate_dataset(const DeviceSet& devices, const ChannelConfig& channel,
                                            int packets_per_device, std::uint64_t seed);

// Container: JSON header + f32 LE payload (per packet pilot then data,
// interleaved re/im) + one i32 LE label per packet.
void save_dataset(const std::string& path, const std::vector<ReceivedFrame>& packets,
                  const DatasetMeta& meta);

std::pair<std::vector<ReceivedFrame>, DatasetMeta> load_dataset(const std::string& path);

std::string dataset_manifest(const std::string& path);

}  // namespace rff
