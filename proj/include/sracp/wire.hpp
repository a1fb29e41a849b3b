#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "sracp/errors.hpp"

namespace sracp::wire {

// Little-endian primitive packing shared by the message codecs.

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
}

inline void check_remaining(std::span<const std::uint8_t> in, std::size_t pos, std::size_t need) {
    if (pos + need > in.size()) throw ProtocolError("wire: truncated message");
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t& pos) {
    check_remaining(in, pos, 2);
    const std::uint16_t v = static_cast<std::uint16_t>(in[pos] | (in[pos + 1] << 8));
    pos += 2;
    return v;
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
    check_remaining(in, pos, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

inline std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t& pos) {
    check_remaining(in, pos, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
    pos += 8;
    return v;
}

inline float get_f32(std::span<const std::uint8_t> in, std::size_t& pos) {
    const std::uint32_t bits = get_u32(in, pos);
    float v = 0.0f;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

/// Unsigned LEB128.
inline void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(v) | 0x80);
        v >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint64_t get_varint(std::span<const std::uint8_t> in, std::size_t& pos) {
    std::uint64_t v = 0;
    int shift = 0;
    while (true) {
        check_remaining(in, pos, 1);
        const std::uint8_t byte = in[pos++];
        v |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
        if ((byte & 0x80) == 0) break;
        shift += 7;
        if (shift > 63) throw ProtocolError("wire: varint overflow");
    }
    return v;
}

}  // namespace sracp::wire
