#include "sracp/payload.hpp"

#include <cstring>

#include "sracp/errors.hpp"
#include "sracp/wire.hpp"

namespace sracp {

namespace {

void check_layout(const BudgetSpec& budget) {
    budget.validate();
    if (budget.index_bytes != 4) {
        throw std::invalid_argument("payload: wire format requires index_bytes = 4");
    }
    if (budget.feature_bytes != 1) {
        throw std::invalid_argument("payload: wire format requires feature_bytes = 1");
    }
    if (budget.header_bytes < 20) {
        throw std::invalid_argument("payload: header_bytes must be >= 20");
    }
}

}  // namespace

std::vector<std::uint8_t> encode_payload(const FeaturePayload& payload,
                                         const BudgetSpec& budget) {
    check_layout(budget);
    if (payload.cells.size() > capacity_cells(budget)) {
        throw BudgetError("payload: cell count exceeds budget capacity");
    }

    std::vector<std::uint8_t> out;
    out.reserve(budget.header_bytes + payload.cells.size() * budget.cell_bytes());
    wire::put_u32(out, payload.header.sender);
    wire::put_u32(out, payload.header.frame);
    wire::put_u64(out, payload.header.grid_hash);
    wire::put_u32(out, static_cast<std::uint32_t>(payload.cells.size()));
    out.resize(budget.header_bytes, 0);

    std::uint32_t prev = 0;
    bool first = true;
    for (const PayloadCell& cell : payload.cells) {
        if (!first && cell.index <= prev) {
            throw std::invalid_argument("payload: cell indices must be strictly increasing");
        }
        if (cell.features.size() != budget.channels) {
            throw std::invalid_argument("payload: feature count must equal channels");
        }
        wire::put_u32(out, cell.index);
        out.insert(out.end(), cell.features.begin(), cell.features.end());
        prev = cell.index;
        first = false;
    }
    return out;
}

FeaturePayload decode_payload(std::span<const std::uint8_t> bytes, const BudgetSpec& budget,
                              std::uint64_t expected_grid_hash) {
    check_layout(budget);
    if (bytes.size() < budget.header_bytes) {
        throw ProtocolError("payload: truncated header");
    }
    std::size_t pos = 0;
    FeaturePayload payload;
    payload.header.sender = wire::get_u32(bytes, pos);
    payload.header.frame = wire::get_u32(bytes, pos);
    payload.header.grid_hash = wire::get_u64(bytes, pos);
    const std::uint32_t count = wire::get_u32(bytes, pos);
    pos = budget.header_bytes;

    if (payload.header.grid_hash != expected_grid_hash) {
        throw ProtocolError("payload: grid hash mismatch");
    }
    const std::size_t expected = budget.header_bytes +
                                 static_cast<std::size_t>(count) * budget.cell_bytes();
    if (bytes.size() != expected) {
        throw ProtocolError("payload: length does not match cell count");
    }

    payload.cells.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        PayloadCell& cell = payload.cells[i];
        cell.index = wire::get_u32(bytes, pos);
        cell.features.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                             bytes.begin() + static_cast<std::ptrdiff_t>(pos + budget.channels));
        pos += budget.channels;
        if (i > 0 && cell.index <= payload.cells[i - 1].index) {
            throw ProtocolError("payload: cell indices not strictly increasing");
        }
    }
    return payload;
}

std::vector<std::uint8_t> serialize_payload(const FeatureField& features,
                                            const SelectionMask& mask,
                                            const BudgetSpec& budget,
                                            const PayloadHeader& meta) {
    if (!(features.grid == mask.grid)) {
        throw std::invalid_argument("serialize_payload: field and mask grids differ");
    }
    if (features.channels != budget.channels) {
        throw std::invalid_argument("serialize_payload: channel count mismatch");
    }
    FeaturePayload payload;
    payload.header = meta;
    payload.cells.reserve(mask.selected.size());
    for (CellIndex idx : mask.selected) {
        PayloadCell cell;
        cell.index = static_cast<std::uint32_t>(idx);
        cell.features.resize(budget.channels);
        for (std::uint32_t c = 0; c < budget.channels; ++c) {
            cell.features[c] = quantize_feature(features.at(c, idx));
        }
        payload.cells.push_back(std::move(cell));
    }
    return encode_payload(payload, budget);
}

}  // namespace sracp
