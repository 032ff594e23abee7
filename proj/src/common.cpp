// SPDX-License-Identifier: Apache-2.0
#include "rff/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace rff {

std::string Rng::serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
}

Rng Rng::deserialize(const std::string& text) {
    Rng r(0);
    std::istringstream is(text);
    is >> r.gen_;
    if (!is) throw IoError("corrupt rng state");
    return r;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[std::size_t(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

namespace {
std::atomic<int> g_max_threads{0};  // 0 = uninitialized
}

int threads_from_env() {
    int hw = int(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("RFF_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return std::min(n, hw);
    }
    return hw;
}

int max_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    if (n <= 0) {
        n = threads_from_env();
        g_max_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_max_threads(int n) {
    g_max_threads.store(std::max(1, n), std::memory_order_relaxed);
}

}  // namespace rff
