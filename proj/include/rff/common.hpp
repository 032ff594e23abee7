// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace rff {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto distinct exit codes (config=2, io=3,
// numeric=4); library code throws and never exits.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

// Input tensors/frames with the wrong dimensions.
struct ShapeError : Error {
    using Error::Error;
};

// Any |h_hat| below the equalizer floor; callers drop the packet.
struct DeepFadeError : NumericError {
    using NumericError::NumericError;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 has a portable state sequence but the
// standard distributions do not, so uniform/normal are spelled out here.
// Identical seeds give identical streams on every platform.
// ---------------------------------------------------------------------------

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derives an independent substream seed from a base seed and a stream tag.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return splitmix64(base ^ splitmix64(tag));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive on both ends; rejection sampling keeps it unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t range = std::uint64_t(hi - lo) + 1;
        if (range == 0) return std::int64_t(gen_());  // full 64-bit range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + std::int64_t(x % range);
    }

    // Box-Muller; one value per call, the sine branch is not cached so the
    // stream position depends only on the call count.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Circularly-symmetric complex normal with E|z|^2 = 1.
    cplx cnormal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-std::log(u1));
        return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
    }

    std::string serialize() const;
    static Rng deserialize(const std::string& text);

  private:
    std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// FNV-1a, used for config hashes embedded in every output file.
// ---------------------------------------------------------------------------

constexpr std::uint64_t fnv1a64(const char* data, std::size_t len) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= std::uint64_t(static_cast<unsigned char>(data[i]));
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

inline std::string fnv1a_hex(const std::string& s) {
    return hex64(fnv1a64(s.data(), s.size()));
}

// ---------------------------------------------------------------------------
// Thread cap. Parallel regions write disjoint outputs and reductions are
// accumulated in a fixed chunk order, so results do not depend on the
// setting; RFF_THREADS and --deterministic only bound the worker count.
// ---------------------------------------------------------------------------

int max_threads();
void set_max_threads(int n);
int threads_from_env();  // RFF_THREADS, clamped to hardware

}  // namespace rff
