#pragma once

#include <cstdint>
#include <vector>

#include "sracp/grid.hpp"

namespace sracp {

/// Channel-major C x H x W feature tensor with values in [0, 1].
///
/// Channels carry deterministic per-cell statistics: channel 0 is occupancy,
/// channel 1 the local risk estimate, channel 2 the occlusion probability,
/// and channels 3..C-1 a fixed sinusoidal expansion of those three. Cells
/// inside the carrying agent's own blind zone hold the zero vector (the agent
/// has no sensed statistics there).
struct FeatureField {
    GridSpec grid{};
    std::uint32_t channels = 64;
    std::vector<float> values;  // layout: c * H * W + cell

    FeatureField() = default;
    FeatureField(const GridSpec& g, std::uint32_t c)
        : grid(g), channels(c), values(g.cell_count() * c, 0.0f) {}

    float at(std::uint32_t channel, CellIndex cell) const {
        return values[static_cast<std::size_t>(channel) * grid.cell_count() +
                      static_cast<std::size_t>(cell)];
    }
    float& at(std::uint32_t channel, CellIndex cell) {
        return values[static_cast<std::size_t>(channel) * grid.cell_count() +
                      static_cast<std::size_t>(cell)];
    }

    std::vector<float> cell_vector(CellIndex cell) const {
        std::vector<float> v(channels);
        for (std::uint32_t c = 0; c < channels; ++c) v[c] = at(c, cell);
        return v;
    }
};

/// Expands the (occupancy, risk, occ_prob) statistics of one cell into a
/// C-channel vector. Channel 3 + m maps base statistic m % 3 through the
/// harmonic 1 + m / 3 of 0.5 * (1 - cos(h * pi * x)), so a zero base triple
/// expands to the zero vector.
std::vector<float> expand_cell_features(double occupancy, double risk, double occ_prob,
                                        std::uint32_t channels);

/// Builds an agent's full feature field from its occupancy, risk, and blind
/// planes. Blind cells are zeroed.
FeatureField build_feature_field(const ScalarField& occupancy, const ScalarField& risk,
                                 const BlindZoneMask& blind, std::uint32_t channels);

}  // namespace sracp
