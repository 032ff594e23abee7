// SPDX-License-Identifier: Apache-2.0
#include "rff/container.hpp"

#include <cstring>
#include <fstream>

namespace rff {

namespace {

void put_u64le(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = char((v >> (8 * i)) & 0xFF);
    os.write(buf, 8);
}

std::uint64_t get_u64le(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

}  // namespace

void write_container(const std::string& path, const std::string& magic,
                     const std::string& header_json, const std::vector<char>& payload) {
    if (magic.size() != 8) throw IoError("container magic must be 8 bytes");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(magic.data(), 8);
    put_u64le(os, header_json.size());
    os.write(header_json.data(), std::streamsize(header_json.size()));
    os.write(payload.data(), std::streamsize(payload.size()));
    if (!os) throw IoError("write failed: " + path);
}

Container read_container(const std::string& path, const std::string& expected_magic) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    Container c;
    c.magic.resize(8);
    is.read(c.magic.data(), 8);
    if (!is || c.magic != expected_magic)
        throw IoError("bad magic in " + path + " (expected " + expected_magic + ")");
    const std::uint64_t hlen = get_u64le(is);
    if (!is || hlen > (1ULL << 30)) throw IoError("corrupt header length in " + path);
    c.header_json.resize(hlen);
    is.read(c.header_json.data(), std::streamsize(hlen));
    if (!is) throw IoError("truncated header in " + path);
    c.payload.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    return c;
}

std::string peek_magic(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::string magic(8, '\0');
    is.read(magic.data(), 8);
    if (!is) throw IoError("file too short: " + path);
    return magic;
}

}  // namespace rff
