#include "sracp/feature_field.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sracp {

std::vector<float> expand_cell_features(double occupancy, double risk, double occ_prob,
                                        std::uint32_t channels) {
    if (channels < 1) throw std::invalid_argument("expand_cell_features: channels must be >= 1");
    std::vector<float> v(channels, 0.0f);
    const double base[3] = {occupancy, risk, occ_prob};
    for (std::uint32_t c = 0; c < channels; ++c) {
        if (c < 3) {
            v[c] = static_cast<float>(base[c]);
            continue;
        }
        const std::uint32_t m = c - 3;
        const double x = base[m % 3];
        const double harmonic = 1.0 + static_cast<double>(m / 3);
        v[c] = static_cast<float>(0.5 * (1.0 - std::cos(harmonic * std::numbers::pi * x)));
    }
    return v;
}

FeatureField build_feature_field(const ScalarField& occupancy, const ScalarField& risk,
                                 const BlindZoneMask& blind, std::uint32_t channels) {
    if (!(occupancy.grid == risk.grid) || !(occupancy.grid == blind.grid)) {
        throw std::invalid_argument("build_feature_field: mismatched grids");
    }
    FeatureField field(occupancy.grid, channels);
    const std::size_t n = occupancy.grid.cell_count();
    for (std::size_t i = 0; i < n; ++i) {
        if (blind.occluded[i]) continue;
        const auto v = expand_cell_features(occupancy.values[i], risk.values[i],
                                            blind.occ_prob[i], channels);
        for (std::uint32_t c = 0; c < channels; ++c) {
            field.at(c, static_cast<CellIndex>(i)) = v[c];
        }
    }
    return field;
}

}  // namespace sracp
