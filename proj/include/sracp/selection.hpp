#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sracp/grid.hpp"

namespace sracp {

/// Per-link byte accounting. b_cell = b_idx + channels * b_feat.
struct BudgetSpec {
    std::uint64_t budget_bytes = 1024;  // bytes per link per frame
    std::uint32_t header_bytes = 24;    // h_hdr
    std::uint32_t index_bytes = 4;      // b_idx
    std::uint32_t feature_bytes = 1;    // b_feat
    std::uint32_t channels = 64;        // C

    std::uint64_t cell_bytes() const {
        return static_cast<std::uint64_t>(index_bytes) +
               static_cast<std::uint64_t>(channels) * feature_bytes;
    }

    void validate() const {
        if (channels < 1) throw std::invalid_argument("budget: channels must be >= 1");
        if (cell_bytes() == 0) throw std::invalid_argument("budget: cell cost must be > 0");
    }
};

enum class GateMode { SpatialOnly, RiskOnly, Union };

std::string to_string(GateMode mode);

/// Transmission priority per cell: g = alpha * g_sp * g_risk
/// + (1 - alpha) * blind * g_risk.
struct GainMap {
    GridSpec grid{};
    std::vector<double> spatial;        // g_sp
    std::vector<double> risk;           // g_risk
    std::vector<std::uint8_t> blind;    // stabilized blind mask
    double alpha = 0.5;
    std::vector<double> combined;       // g
};

/// Cells chosen for transmission. `selected` holds strictly increasing
/// row-major indices; S and R mark the spatially- and risk-selected cells
/// (identical under the Union gate).
struct SelectionMask {
    GridSpec grid{};
    std::vector<std::uint8_t> S;
    std::vector<std::uint8_t> R;
    std::vector<CellIndex> selected;
};

/// Combines the requester-side spatial saliency (occlusion probability from
/// the shared blind-zone summary), the responder-side risk map, and the blind
/// mask into the budgeted gain. Throws std::invalid_argument on shape
/// mismatch or alpha outside [0, 1].
GainMap compute_gain(const ScalarField& g_sp, const ScalarField& g_risk,
                     const BlindZoneMask& blind, double alpha);

/// Number of cells affordable per link: max(0, floor((B - h_hdr) / b_cell)).
std::uint64_t capacity_cells(const BudgetSpec& budget);

/// Top-k cells under the given gate. SpatialOnly ranks by g_sp, RiskOnly by
/// g_risk, Union by the combined gain. Zero-score cells are never selected;
/// ties break toward the smaller row-major index.
SelectionMask select_cells(const GainMap& gain, std::uint64_t k, GateMode gate);

/// Batch byte usage: batch_size * h_hdr + (total selected cells) * b_cell.
/// `selected_counts` holds, per sample, the per-agent selected-cell counts of
/// the non-ego agents only.
std::uint64_t usage_bytes(std::span<const std::vector<std::uint64_t>> selected_counts,
                          const BudgetSpec& budget, std::uint64_t batch_size);

/// Hinge over-usage penalty: max(0, usage / target - 1). Target must be > 0.
double overuse_penalty(double usage, double target_bytes);

/// l_det + lambda_risk * risk_mse + lambda_comm * phi.
double total_objective(double l_det, double risk_mse, double phi, double lambda_risk,
                       double lambda_comm);

}  // namespace sracp
