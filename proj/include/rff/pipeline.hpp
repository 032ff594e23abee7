// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "rff/dataset.hpp"
#include "rff/finetune.hpp"
#include "rff/simsiam.hpp"

namespace rff {

// Resolved experiment configuration. A single master seed derives every
// sub-seed (datasets, statistics, training, evaluation), so one value pins
// the whole pipeline.
struct RunConfig {
    int device_count = 7;
    int packets_per_device = 1000;
    ChannelConfig source_channel;
    ChannelConfig target_channel;
    std::int64_t stats_samples = 10000;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    TrainMode mode = TrainMode::mixed;
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    bool deterministic = false;
    std::vector<double> eval_snrs_db{0.0, 5.0, 10.0, 15.0, 20.0};

    static RunConfig from_json_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text() const;

    // Hash of the resolved config (out_dir excluded); embedded in outputs.
    std::string config_hash() const;

    std::uint64_t source_seed() const { return derive_seed(seed, 0x50); }
    std::uint64_t target_seed() const { return derive_seed(seed, 0x51); }
    std::uint64_t stats_seed() const { return derive_seed(seed, 0x52); }
    std::uint64_t pretrain_seed() const { return derive_seed(seed, 0x53); }
    std::uint64_t finetune_seed() const { return derive_seed(seed, 0x54); }
    std::uint64_t eval_seed() const { return derive_seed(seed, 0x55); }

    std::string source_path() const;
    std::string target_path() const;
    std::string pretrain_dir() const;
    std::string finetune_dir() const;
    std::string eval_dir() const;
    std::string model_path() const;  // fine-tuned (or supervised) model

    void validate() const;
};

// Applies the thread cap (RFF_THREADS, deterministic mode forces 1).
void apply_threading(const RunConfig& cfg);

// MMSE statistics for a channel configuration, cached under the out dir.
MmseStatistics ensure_statistics(const RunConfig& cfg, const ChannelConfig& channel);

void cmd_gen(const RunConfig& cfg);
void cmd_pretrain(const RunConfig& cfg);
void cmd_finetune(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_inspect(const std::string& path, std::ostream& os);

}  // namespace rff
