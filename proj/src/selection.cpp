#include "sracp/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sracp {

std::string to_string(GateMode mode) {
    switch (mode) {
        case GateMode::SpatialOnly: return "s";
        case GateMode::RiskOnly: return "r";
        case GateMode::Union: return "union";
    }
    return "?";
}

GainMap compute_gain(const ScalarField& g_sp, const ScalarField& g_risk,
                     const BlindZoneMask& blind, double alpha) {
    if (!(g_sp.grid == g_risk.grid) || !(g_sp.grid == blind.grid)) {
        throw std::invalid_argument("compute_gain: mismatched grids");
    }
    const std::size_t n = g_sp.grid.cell_count();
    if (g_sp.values.size() != n || g_risk.values.size() != n || blind.occluded.size() != n) {
        throw std::invalid_argument("compute_gain: field shape mismatch");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("compute_gain: alpha must lie in [0, 1]");
    }

    GainMap gain;
    gain.grid = g_sp.grid;
    gain.spatial = g_sp.values;
    gain.risk = g_risk.values;
    gain.blind = blind.occluded;
    gain.alpha = alpha;
    gain.combined.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double o_bar = gain.blind[i] ? 1.0 : 0.0;
        gain.combined[i] = alpha * gain.spatial[i] * gain.risk[i] +
                           (1.0 - alpha) * o_bar * gain.risk[i];
    }
    return gain;
}

std::uint64_t capacity_cells(const BudgetSpec& budget) {
    budget.validate();
    if (budget.budget_bytes < budget.header_bytes) return 0;
    return (budget.budget_bytes - budget.header_bytes) / budget.cell_bytes();
}

SelectionMask select_cells(const GainMap& gain, std::uint64_t k, GateMode gate) {
    const std::vector<double>* score = nullptr;
    switch (gate) {
        case GateMode::SpatialOnly: score = &gain.spatial; break;
        case GateMode::RiskOnly: score = &gain.risk; break;
        case GateMode::Union: score = &gain.combined; break;
    }

    std::vector<CellIndex> candidates;
    for (std::size_t i = 0; i < score->size(); ++i) {
        if ((*score)[i] > 0.0) candidates.push_back(static_cast<CellIndex>(i));
    }
    const std::size_t take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(k));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), [&](CellIndex a, CellIndex b) {
                          const double sa = (*score)[static_cast<std::size_t>(a)];
                          const double sb = (*score)[static_cast<std::size_t>(b)];
                          if (sa != sb) return sa > sb;
                          return a < b;
                      });
    candidates.resize(take);
    std::sort(candidates.begin(), candidates.end());

    SelectionMask mask;
    mask.grid = gain.grid;
    mask.S.assign(gain.grid.cell_count(), 0);
    mask.R.assign(gain.grid.cell_count(), 0);
    mask.selected = std::move(candidates);
    for (CellIndex idx : mask.selected) {
        const std::size_t i = static_cast<std::size_t>(idx);
        switch (gate) {
            case GateMode::SpatialOnly: mask.S[i] = 1; break;
            case GateMode::RiskOnly: mask.R[i] = 1; break;
            case GateMode::Union:
                mask.S[i] = 1;
                mask.R[i] = 1;
                break;
        }
    }
    return mask;
}

std::uint64_t usage_bytes(std::span<const std::vector<std::uint64_t>> selected_counts,
                          const BudgetSpec& budget, std::uint64_t batch_size) {
    budget.validate();
    std::uint64_t cells = 0;
    for (const auto& sample : selected_counts) {
        for (std::uint64_t count : sample) cells += count;
    }
    return batch_size * budget.header_bytes + cells * budget.cell_bytes();
}

double overuse_penalty(double usage, double target_bytes) {
    if (!(target_bytes > 0.0)) {
        throw std::invalid_argument("overuse_penalty: target must be > 0");
    }
    return std::max(0.0, usage / target_bytes - 1.0);
}

double total_objective(double l_det, double risk_mse, double phi, double lambda_risk,
                       double lambda_comm) {
    return l_det + lambda_risk * risk_mse + lambda_comm * phi;
}

}  // namespace sracp
