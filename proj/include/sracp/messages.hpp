#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sracp/grid.hpp"

namespace sracp {

/// Run-length encoding of a binary mask: one byte holding the first run's
/// value, then LEB128 run lengths alternating values until the mask is
/// covered. An all-equal mask encodes as one run.
std::vector<std::uint8_t> rle_encode(std::span<const std::uint8_t> bits);

/// Inverse of rle_encode; validates that runs cover exactly expected_count
/// bits. Throws ProtocolError on malformed input.
std::vector<std::uint8_t> rle_decode(std::span<const std::uint8_t> bytes,
                                     std::size_t expected_count);

/// Routine-mode broadcast: position, velocity, and the compact coverage
/// summary (the stabilized blind mask; its complement is the coverage).
///
/// Wire format (little-endian), 20-byte header + RLE payload:
///   sender u32 | frame u32 | px f32 | py f32 | vx u16 | vy u16 | rle bytes
/// Velocity components are quantized to u16 over [-50, 50] m/s.
struct CoverageBeacon {
    std::uint32_t sender = 0;
    std::uint32_t frame = 0;
    Vec2 position{};
    Vec2 velocity{};
    std::vector<std::uint8_t> blind_mask;  // H*W cells, 1 = occluded
};

std::vector<std::uint8_t> encode_beacon(const CoverageBeacon& beacon);
CoverageBeacon decode_beacon(std::span<const std::uint8_t> bytes, const GridSpec& grid);

/// Exact encoded size of a beacon.
std::uint64_t beacon_bytes(const CoverageBeacon& beacon);

/// Handshake request: the requester's position, stabilized blind mask, and
/// 8-bit quantized risk prior and occlusion probability over the blind cells
/// (row-major order of set cells).
///
/// Wire format: requester u32 | target u32 | frame u32 | px f32 | py f32 |
/// grid_hash u64 | rle_len u32 | rle bytes | per blind cell: risk u8, occ u8
struct CPRequest {
    std::uint32_t requester = 0;
    std::uint32_t target = 0;
    std::uint32_t frame = 0;
    Vec2 position{};
    std::uint64_t grid_hash = 0;
    std::vector<std::uint8_t> blind_mask;  // H*W cells
    std::vector<std::uint8_t> risk_q8;     // H*W cells, nonzero only on blind cells
    std::vector<std::uint8_t> occ_q8;      // H*W cells, nonzero only on blind cells

    void validate() const;
};

std::vector<std::uint8_t> encode_request(const CPRequest& request);
CPRequest decode_request(std::span<const std::uint8_t> bytes, const GridSpec& grid);

/// Budgeted reply carrying an encoded feature payload.
///
/// Wire format: responder u32 | requester u32 | payload bytes
struct CPResponse {
    std::uint32_t responder = 0;
    std::uint32_t requester = 0;
    std::vector<std::uint8_t> payload_bytes;
};

std::vector<std::uint8_t> encode_response(const CPResponse& response);
CPResponse decode_response(std::span<const std::uint8_t> bytes);

}  // namespace sracp
