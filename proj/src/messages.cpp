#include "sracp/messages.hpp"

#include <algorithm>
#include <cmath>

#include "sracp/errors.hpp"
#include "sracp/wire.hpp"

namespace sracp {

std::vector<std::uint8_t> rle_encode(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> out;
    if (bits.empty()) {
        out.push_back(0);
        return out;
    }
    out.push_back(bits[0] ? 1 : 0);
    std::uint64_t run = 1;
    for (std::size_t i = 1; i < bits.size(); ++i) {
        const bool cur = bits[i] != 0;
        const bool prev = bits[i - 1] != 0;
        if (cur == prev) {
            ++run;
        } else {
            wire::put_varint(out, run);
            run = 1;
        }
    }
    wire::put_varint(out, run);
    return out;
}

std::vector<std::uint8_t> rle_decode(std::span<const std::uint8_t> bytes,
                                     std::size_t expected_count) {
    std::size_t pos = 0;
    wire::check_remaining(bytes, pos, 1);
    std::uint8_t value = bytes[pos++];
    if (value > 1) throw ProtocolError("rle: first value must be 0 or 1");

    std::vector<std::uint8_t> bits;
    bits.reserve(expected_count);
    while (bits.size() < expected_count) {
        const std::uint64_t run = wire::get_varint(bytes, pos);
        if (run == 0 || bits.size() + run > expected_count) {
            throw ProtocolError("rle: runs do not cover the mask");
        }
        bits.insert(bits.end(), run, value);
        value = value ? 0 : 1;
    }
    if (pos != bytes.size()) throw ProtocolError("rle: trailing bytes");
    return bits;
}

namespace {

std::uint16_t quantize_velocity(double v) {
    const double clamped = std::min(50.0, std::max(-50.0, v));
    return static_cast<std::uint16_t>(std::lround((clamped + 50.0) / 100.0 * 65535.0));
}

double dequantize_velocity(std::uint16_t q) { return q / 65535.0 * 100.0 - 50.0; }

}  // namespace

std::vector<std::uint8_t> encode_beacon(const CoverageBeacon& beacon) {
    std::vector<std::uint8_t> out;
    wire::put_u32(out, beacon.sender);
    wire::put_u32(out, beacon.frame);
    wire::put_f32(out, static_cast<float>(beacon.position.x));
    wire::put_f32(out, static_cast<float>(beacon.position.y));
    wire::put_u16(out, quantize_velocity(beacon.velocity.x));
    wire::put_u16(out, quantize_velocity(beacon.velocity.y));
    const auto rle = rle_encode(beacon.blind_mask);
    out.insert(out.end(), rle.begin(), rle.end());
    return out;
}

CoverageBeacon decode_beacon(std::span<const std::uint8_t> bytes, const GridSpec& grid) {
    std::size_t pos = 0;
    CoverageBeacon beacon;
    beacon.sender = wire::get_u32(bytes, pos);
    beacon.frame = wire::get_u32(bytes, pos);
    beacon.position.x = wire::get_f32(bytes, pos);
    beacon.position.y = wire::get_f32(bytes, pos);
    beacon.velocity.x = dequantize_velocity(wire::get_u16(bytes, pos));
    beacon.velocity.y = dequantize_velocity(wire::get_u16(bytes, pos));
    beacon.blind_mask = rle_decode(bytes.subspan(pos), grid.cell_count());
    return beacon;
}

std::uint64_t beacon_bytes(const CoverageBeacon& beacon) {
    return 20 + rle_encode(beacon.blind_mask).size();
}

void CPRequest::validate() const {
    if (target == requester) throw std::invalid_argument("cp request: target equals requester");
    if (std::find(blind_mask.begin(), blind_mask.end(), std::uint8_t{1}) == blind_mask.end()) {
        throw std::invalid_argument("cp request: blind zone is empty");
    }
}

std::vector<std::uint8_t> encode_request(const CPRequest& request) {
    request.validate();
    std::vector<std::uint8_t> out;
    wire::put_u32(out, request.requester);
    wire::put_u32(out, request.target);
    wire::put_u32(out, request.frame);
    wire::put_f32(out, static_cast<float>(request.position.x));
    wire::put_f32(out, static_cast<float>(request.position.y));
    wire::put_u64(out, request.grid_hash);
    const auto rle = rle_encode(request.blind_mask);
    wire::put_u32(out, static_cast<std::uint32_t>(rle.size()));
    out.insert(out.end(), rle.begin(), rle.end());
    for (std::size_t i = 0; i < request.blind_mask.size(); ++i) {
        if (!request.blind_mask[i]) continue;
        out.push_back(request.risk_q8[i]);
        out.push_back(request.occ_q8[i]);
    }
    return out;
}

CPRequest decode_request(std::span<const std::uint8_t> bytes, const GridSpec& grid) {
    std::size_t pos = 0;
    CPRequest request;
    request.requester = wire::get_u32(bytes, pos);
    request.target = wire::get_u32(bytes, pos);
    request.frame = wire::get_u32(bytes, pos);
    request.position.x = wire::get_f32(bytes, pos);
    request.position.y = wire::get_f32(bytes, pos);
    request.grid_hash = wire::get_u64(bytes, pos);
    const std::uint32_t rle_len = wire::get_u32(bytes, pos);
    wire::check_remaining(bytes, pos, rle_len);
    request.blind_mask = rle_decode(bytes.subspan(pos, rle_len), grid.cell_count());
    pos += rle_len;

    request.risk_q8.assign(grid.cell_count(), 0);
    request.occ_q8.assign(grid.cell_count(), 0);
    for (std::size_t i = 0; i < request.blind_mask.size(); ++i) {
        if (!request.blind_mask[i]) continue;
        wire::check_remaining(bytes, pos, 2);
        request.risk_q8[i] = bytes[pos++];
        request.occ_q8[i] = bytes[pos++];
    }
    if (pos != bytes.size()) throw ProtocolError("cp request: trailing bytes");
    request.validate();
    return request;
}

std::vector<std::uint8_t> encode_response(const CPResponse& response) {
    std::vector<std::uint8_t> out;
    wire::put_u32(out, response.responder);
    wire::put_u32(out, response.requester);
    out.insert(out.end(), response.payload_bytes.begin(), response.payload_bytes.end());
    return out;
}

CPResponse decode_response(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    CPResponse response;
    response.responder = wire::get_u32(bytes, pos);
    response.requester = wire::get_u32(bytes, pos);
    response.payload_bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return response;
}

}  // namespace sracp
