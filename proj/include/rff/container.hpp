// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "rff/common.hpp"

// Shared on-disk container: 8-byte magic, u64le JSON length, JSON header,
// raw payload. Datasets (RFFDSET1), checkpoints (RFFCKPT1) and MMSE
// statistics caches (RFFSTAT1) all use it.

namespace rff {

struct Container {
    std::string magic;
    std::string header_json;
    std::vector<char> payload;
};

void write_container(const std::string& path, const std::string& magic,
                     const std::string& header_json, const std::vector<char>& payload);

Container read_container(const std::string& path, const std::string& expected_magic);

// Magic of an existing file, for format dispatch; throws IoError if the
// file is missing or shorter than 8 bytes.
std::string peek_magic(const std::string& path);

}  // namespace rff
