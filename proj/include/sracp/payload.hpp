#pragma once

#include <cstdint>
#include <vector>

#include "sracp/feature_field.hpp"
#include "sracp/selection.hpp"

namespace sracp {

/// Feature-payload wire format (little-endian):
///
///   header, h_hdr bytes total:
///     sender id   u32
///     frame id    u32
///     grid hash   u64
///     cell count  u32
///     reserved    zero padding up to h_hdr
///   per cell, in strictly increasing index order:
///     cell index  u32  (b_idx = 4)
///     features    C x u8 fixed point, q = round(255 * clamp(f, 0, 1))
///
/// Encoded length is exactly h_hdr + count * b_cell.
struct PayloadHeader {
    std::uint32_t sender = 0;
    std::uint32_t frame = 0;
    std::uint64_t grid_hash = 0;
};

struct PayloadCell {
    std::uint32_t index = 0;
    std::vector<std::uint8_t> features;  // C quantized values
};

struct FeaturePayload {
    PayloadHeader header{};
    std::vector<PayloadCell> cells;
};

inline std::uint8_t quantize_feature(double f) {
    const double clamped = std::min(1.0, std::max(0.0, f));
    return static_cast<std::uint8_t>(std::lround(255.0 * clamped));
}

inline double dequantize_feature(std::uint8_t q) { return q / 255.0; }

/// Encodes a payload. Throws BudgetError when the cell count exceeds
/// capacity_cells(budget) and std::invalid_argument on unsupported byte
/// layouts (the wire format requires b_idx = 4, b_feat = 1, h_hdr >= 20) or
/// unsorted cells.
std::vector<std::uint8_t> encode_payload(const FeaturePayload& payload,
                                         const BudgetSpec& budget);

/// Decodes and validates a payload. Throws ProtocolError on truncation or on
/// grid-hash mismatch against `expected_grid_hash`.
FeaturePayload decode_payload(std::span<const std::uint8_t> bytes, const BudgetSpec& budget,
                              std::uint64_t expected_grid_hash);

/// Quantizes the masked cells of a feature field and encodes them.
std::vector<std::uint8_t> serialize_payload(const FeatureField& features,
                                            const SelectionMask& mask,
                                            const BudgetSpec& budget,
                                            const PayloadHeader& meta);

}  // namespace sracp
