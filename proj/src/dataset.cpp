// SPDX-License-Identifier: Apache-2.0
#include "rff/dataset.hpp"

#include <cmath>
#include <cstring>
#include <ctime>
#include <nlohmann/json.hpp>

#include "rff/chanest.hpp"
#include "rff/container.hpp"

namespace rff {

using json = nlohmann::json;

namespace {

constexpr std::size_t kFloatsPerPacket = 2 * std::size_t(kSubcarriers + kSymbolsPerPacket);

ReceivedFrame simulate_packet(const DeviceProfile& device, const ChannelConfig& channel,
                              std::uint64_t packet_seed) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t base = derive_seed(packet_seed, attempt);
        const FrequencyFrame frame = build_frame(derive_seed(base, 1));
        const ImpairedFrame impaired = apply_iq_imbalance(frame, device);
        const auto realization =
            std::make_shared<ChannelRealization>(sample_channel(channel, derive_seed(base, 2)));
        const PacketSignal propagated = apply_channel(impaired, *realization);
        PacketSignal received = add_awgn(propagated, channel.base_snr_db, derive_seed(base, 3));

        // deep-fade guard on the pilot-derived LS estimate
        bool faded = false;
        for (int k = 0; k < kSubcarriers && !faded; ++k)
            if (std::abs(received.pilot[std::size_t(k)] / lts_sequence()[std::size_t(k)]) <=
                kDeepFadeEps)
                faded = true;
        if (faded) continue;

        ReceivedFrame out;
        out.signal = std::move(received);
        out.device_id = device.device_id;
        out.snr_db = channel.base_snr_db;
        out.truth = realization;
        return out;
    }
}

std::string iso_now() {
    char buf[32];
    const std::time_t t = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

}  // namespace

std::vector<ReceivedFrame> generate_dataset(const DeviceSet& devices, const ChannelConfig& channel,
                                            int packets_per_device, std::uint64_t seed) {
    devices.validate();
    channel.validate();
    if (packets_per_device < 1) throw ConfigError("generate_dataset: packets_per_device >= 1");

    const int n_dev = devices.size();
    std::vector<ReceivedFrame> packets(std::size_t(n_dev) * std::size_t(packets_per_device));
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(packets.size()); ++i) {
        const int d = int(i) / packets_per_device;
        const int p = int(i) % packets_per_device;
        const std::uint64_t packet_seed =
            derive_seed(seed, (std::uint64_t(d) << 32) | std::uint64_t(p));
        packets[std::size_t(i)] =
            simulate_packet(devices.devices[std::size_t(d)], channel, packet_seed);
    }
    return packets;
}

void save_dataset(const std::string& path, const std::vector<ReceivedFrame>& packets,
                  const DatasetMeta& meta) {
    json dev = json::array();
    for (const auto& d : meta.devices.devices)
        dev.push_back({{"device_id", d.device_id},
                       {"amp_imbalance_db", d.amp_imbalance_db},
                       {"phase_imbalance_deg", d.phase_imbalance_deg}});
    json header{{"version", meta.version},
                {"devices", dev},
                {"channel_config",
                 {{"rms_delay_ns", meta.channel.rms_delay_ns},
                  {"sample_period_ns", meta.channel.sample_period_ns},
                  {"num_taps", meta.channel.num_taps},
                  {"doppler_hz_min", meta.channel.doppler_hz_min},
                  {"doppler_hz_max", meta.channel.doppler_hz_max},
                  {"frame_interval_s", meta.channel.frame_interval_s},
                  {"base_snr_db", meta.channel.base_snr_db}}},
                {"packets_per_device", meta.packets_per_device},
                {"packet_count", packets.size()},
                {"seed", meta.seed},
                {"created", meta.created.empty() ? iso_now() : meta.created},
                {"config_hash", meta.config_hash}};

    std::vector<char> payload;
    payload.reserve(packets.size() * (kFloatsPerPacket * 4 + 4));
    auto put_f32 = [&payload](float v) {
        const char* p = reinterpret_cast<const char*>(&v);
        payload.insert(payload.end(), p, p + 4);
    };
    for (const auto& pkt : packets) {
        for (const auto& v : pkt.signal.pilot) {
            put_f32(float(v.real()));
            put_f32(float(v.imag()));
        }
        for (const auto& row : pkt.signal.data)
            for (const auto& v : row) {
                put_f32(float(v.real()));
                put_f32(float(v.imag()));
            }
    }
    for (const auto& pkt : packets) {
        const std::int32_t label = pkt.device_id;
        const char* p = reinterpret_cast<const char*>(&label);
        payload.insert(payload.end(), p, p + 4);
    }
    write_container(path, "RFFDSET1", header.dump(), payload);
}

std::pair<std::vector<ReceivedFrame>, DatasetMeta> load_dataset(const std::string& path) {
    const Container c = read_container(path, "RFFDSET1");
    json header = json::parse(c.header_json);
    if (header.at("version").get<int>() != 1) throw IoError("unsupported dataset version");

    DatasetMeta meta;
    meta.version = 1;
    for (const auto& d : header.at("devices"))
        meta.devices.devices.push_back({d.at("device_id").get<int>(),
                                        d.at("amp_imbalance_db").get<double>(),
                                        d.at("phase_imbalance_deg").get<double>()});
    const auto& ch = header.at("channel_config");
    meta.channel.rms_delay_ns = ch.at("rms_delay_ns").get<double>();
    meta.channel.sample_period_ns = ch.at("sample_period_ns").get<double>();
    meta.channel.num_taps = ch.at("num_taps").get<int>();
    meta.channel.doppler_hz_min = ch.at("doppler_hz_min").get<double>();
    meta.channel.doppler_hz_max = ch.at("doppler_hz_max").get<double>();
    meta.channel.frame_interval_s = ch.at("frame_interval_s").get<double>();
    meta.channel.base_snr_db = ch.at("base_snr_db").get<double>();
    meta.packets_per_device = header.at("packets_per_device").get<int>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.created = header.value("created", "");
    meta.config_hash = header.value("config_hash", "");

    const std::size_t count = header.at("packet_count").get<std::size_t>();
    const std::size_t need = count * (kFloatsPerPacket * 4 + 4);
    if (c.payload.size() != need) throw IoError("dataset payload size mismatch");

    std::vector<ReceivedFrame> packets(count);
    std::size_t off = 0;
    auto get_f32 = [&](std::size_t at) {
        float v;
        std::memcpy(&v, c.payload.data() + at, 4);
        return double(v);
    };
    for (auto& pkt : packets) {
        for (auto& v : pkt.signal.pilot) {
            v = {get_f32(off), get_f32(off + 4)};
            off += 8;
        }
        for (auto& row : pkt.signal.data)
            for (auto& v : row) {
                v = {get_f32(off), get_f32(off + 4)};
                off += 8;
            }
        pkt.snr_db = meta.channel.base_snr_db;
    }
    for (auto& pkt : packets) {
        std::int32_t label;
        std::memcpy(&label, c.payload.data() + off, 4);
        off += 4;
        pkt.device_id = label;
    }
    return {std::move(packets), std::move(meta)};
}

std::string dataset_manifest(const std::string& path) {
    return read_container(path, "RFFDSET1").header_json;
}

}  // namespace rff
