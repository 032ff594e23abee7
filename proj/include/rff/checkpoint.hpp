// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "rff/nn.hpp"

namespace rff {

// Checkpoint container: JSON manifest (architecture, tensor names, shapes,
// byte offsets, epoch, rng state, config hash) + raw little-endian f32 blob.
struct CheckpointMeta {
    int epoch = 0;
    std::string rng_state;
    std::string config_hash;
};

void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta,
                     Adam<float>* optimizer = nullptr);

Model load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr,
                      Adam<float>* optimizer = nullptr);

// Manifest JSON text without loading tensor data (for inspect).
std::string checkpoint_manifest(const std::string& path);

}  // namespace rff
