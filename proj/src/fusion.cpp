#include "sracp/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sracp/errors.hpp"

namespace sracp {

namespace {

/// Softmax attention over dot(query, value) / sqrt(C). values[0] is the ego.
std::vector<double> attention_weights(std::span<const double> query,
                                      const std::vector<std::vector<double>>& values) {
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(query.size()));
    std::vector<double> scores(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        double dot = 0.0;
        for (std::size_t c = 0; c < query.size(); ++c) dot += query[c] * values[i][c];
        scores[i] = dot * inv_sqrt_c;
    }
    const double max_score = *std::max_element(scores.begin(), scores.end());
    double norm = 0.0;
    std::vector<double> weights(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        weights[i] = std::exp(scores[i] - max_score);
        norm += weights[i];
    }
    for (double& w : weights) w /= norm;
    return weights;
}

}  // namespace

FeatureField apply_masks(const FeatureField& features, const std::vector<std::uint8_t>& S,
                         const std::vector<std::uint8_t>& R) {
    const std::size_t n = features.grid.cell_count();
    if (S.size() != n || R.size() != n) {
        throw std::invalid_argument("apply_masks: mask shape mismatch");
    }
    FeatureField out = features;
    for (std::size_t i = 0; i < n; ++i) {
        if (S[i] || R[i]) continue;
        for (std::uint32_t c = 0; c < out.channels; ++c) {
            out.at(c, static_cast<CellIndex>(i)) = 0.0f;
        }
    }
    return out;
}

namespace {

/// Per-cell contributions: (sender id, quantized features), grouped by cell.
using CellContributions =
    std::map<CellIndex, std::vector<std::pair<std::uint32_t, const PayloadCell*>>>;

struct FusedCell {
    std::vector<double> weights;  // [ego, partners...]
    std::vector<double> fused;    // C channels
};

FusedCell fuse_one_cell(const std::vector<double>& ego_vector, std::uint32_t channels,
                        const std::vector<std::pair<std::uint32_t, const PayloadCell*>>& sources) {
    std::vector<std::vector<double>> values;
    values.reserve(sources.size() + 1);
    values.push_back(ego_vector);
    for (const auto& [agent, cell] : sources) {
        std::vector<double> v(channels);
        for (std::uint32_t c = 0; c < channels; ++c) {
            v[c] = dequantize_feature(cell->features[c]);
        }
        values.push_back(std::move(v));
    }

    FusedCell out;
    out.weights = attention_weights(ego_vector, values);
    out.fused.assign(channels, 0.0);
    for (std::uint32_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) acc += out.weights[i] * values[i][c];
        out.fused[c] = acc;
    }
    return out;
}

FusedCellProvenance::Entry provenance_entry(
    CellIndex idx, const FusedCell& cell,
    const std::vector<std::pair<std::uint32_t, const PayloadCell*>>& sources) {
    FusedCellProvenance::Entry entry;
    entry.cell = idx;
    entry.ego_weight = cell.weights[0];
    for (std::size_t i = 0; i < sources.size(); ++i) {
        entry.partners.emplace_back(sources[i].first, cell.weights[i + 1]);
    }
    return entry;
}

}  // namespace

FusionResult fuse(const FeatureField& ego, const std::vector<PartnerStream>& partners) {
    const std::uint64_t ego_hash = ego.grid.hash();
    const std::size_t cell_count = ego.grid.cell_count();

    CellContributions contribs;
    for (const PartnerStream& partner : partners) {
        if (partner.payload.header.grid_hash != ego_hash) {
            throw ProtocolError("fuse: partner grid hash mismatch");
        }
        for (const PayloadCell& cell : partner.payload.cells) {
            if (cell.features.size() != ego.channels) {
                throw ProtocolError("fuse: partner channel count mismatch");
            }
            if (cell.index >= cell_count) {
                throw ProtocolError("fuse: partner cell index out of range");
            }
            // Safety-focused re-masking: drop cells outside the partner's S | R.
            if (!partner.mask.S.empty()) {
                if (!partner.mask.S[cell.index] && !partner.mask.R[cell.index]) continue;
            }
            contribs[static_cast<CellIndex>(cell.index)].emplace_back(
                partner.payload.header.sender, &cell);
        }
    }

    FusionResult result{ego, {}};
    for (const auto& [idx, sources] : contribs) {
        const std::vector<float> query = ego.cell_vector(idx);
        const std::vector<double> ego_vec(query.begin(), query.end());
        const FusedCell cell = fuse_one_cell(ego_vec, ego.channels, sources);
        for (std::uint32_t c = 0; c < ego.channels; ++c) {
            result.fused.at(c, idx) = static_cast<float>(cell.fused[c]);
        }
        result.provenance.entries.push_back(provenance_entry(idx, cell, sources));
    }
    return result;
}

SparseFusionResult fuse_sparse(const ScalarField& ego_occupancy, const ScalarField& ego_risk,
                               const BlindZoneMask& ego_blind, std::uint32_t channels,
                               const std::vector<SparsePartner>& partners) {
    if (!(ego_occupancy.grid == ego_risk.grid) || !(ego_occupancy.grid == ego_blind.grid)) {
        throw std::invalid_argument("fuse_sparse: mismatched grids");
    }
    const std::uint64_t ego_hash = ego_occupancy.grid.hash();
    const std::size_t cell_count = ego_occupancy.grid.cell_count();

    SparseFusionResult result;
    result.occupancy.assign(cell_count, 0.0);
    result.risk.assign(cell_count, 0.0);
    for (std::size_t i = 0; i < cell_count; ++i) {
        if (ego_blind.occluded[i]) continue;  // blind cells carry no features
        result.occupancy[i] = ego_occupancy.values[i];
        result.risk[i] = ego_risk.values[i];
    }

    CellContributions contribs;
    for (const SparsePartner& partner : partners) {
        if (partner.payload.header.grid_hash != ego_hash) {
            throw ProtocolError("fuse_sparse: partner grid hash mismatch");
        }
        for (const PayloadCell& cell : partner.payload.cells) {
            if (cell.features.size() != channels) {
                throw ProtocolError("fuse_sparse: partner channel count mismatch");
            }
            if (cell.index >= cell_count) {
                throw ProtocolError("fuse_sparse: partner cell index out of range");
            }
            contribs[static_cast<CellIndex>(cell.index)].emplace_back(
                partner.payload.header.sender, &cell);
        }
    }

    for (const auto& [idx, sources] : contribs) {
        const std::size_t i = static_cast<std::size_t>(idx);
        std::vector<float> ego_vec_f(channels, 0.0f);
        if (!ego_blind.occluded[i]) {
            ego_vec_f = expand_cell_features(ego_occupancy.values[i], ego_risk.values[i],
                                             ego_blind.occ_prob[i], channels);
        }
        const std::vector<double> ego_vec(ego_vec_f.begin(), ego_vec_f.end());
        const FusedCell cell = fuse_one_cell(ego_vec, channels, sources);
        result.occupancy[i] = cell.fused[0];
        result.risk[i] = cell.fused[1];
        result.provenance.entries.push_back(provenance_entry(idx, cell, sources));
    }
    return result;
}

std::vector<DetectionBox> decode_detection_planes(const GridSpec& grid,
                                                  std::span<const double> occupancy,
                                                  std::span<const double> risk,
                                                  double occupancy_threshold, int min_cells) {
    if (!(occupancy_threshold > 0.0 && occupancy_threshold < 1.0)) {
        throw std::invalid_argument("decode_detections: threshold must lie in (0, 1)");
    }
    if (occupancy.size() != grid.cell_count() || risk.size() != grid.cell_count()) {
        throw std::invalid_argument("decode_detections: plane shape mismatch");
    }
    const int rows = grid.rows();
    const int cols = grid.cols();
    std::vector<std::uint8_t> visited(grid.cell_count(), 0);
    std::vector<DetectionBox> boxes;
    std::vector<CellIndex> stack;

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const CellIndex seed = grid.index_of(r, c);
            if (visited[seed] || occupancy[seed] <= occupancy_threshold) continue;

            // Flood fill one 4-connected component.
            int min_r = r, max_r = r, min_c = c, max_c = c;
            double score_sum = 0.0;
            double risk_max = 0.0;
            int size = 0;
            stack.assign(1, seed);
            visited[seed] = 1;
            while (!stack.empty()) {
                const CellIndex cur = stack.back();
                stack.pop_back();
                const int cr = grid.row_of(cur);
                const int cc = grid.col_of(cur);
                min_r = std::min(min_r, cr);
                max_r = std::max(max_r, cr);
                min_c = std::min(min_c, cc);
                max_c = std::max(max_c, cc);
                score_sum += occupancy[cur];
                risk_max = std::max(risk_max, risk[cur]);
                ++size;
                const int nr[4] = {cr - 1, cr + 1, cr, cr};
                const int nc[4] = {cc, cc, cc - 1, cc + 1};
                for (int k = 0; k < 4; ++k) {
                    if (!grid.contains_cell(nr[k], nc[k])) continue;
                    const CellIndex nb = grid.index_of(nr[k], nc[k]);
                    if (visited[nb] || occupancy[nb] <= occupancy_threshold) continue;
                    visited[nb] = 1;
                    stack.push_back(nb);
                }
            }
            if (size < min_cells) continue;

            DetectionBox box;
            box.length = (max_c - min_c + 1) * grid.cell_size;
            box.width = (max_r - min_r + 1) * grid.cell_size;
            box.center = {grid.x_min + (min_c + 0.5 * (max_c - min_c + 1)) * grid.cell_size,
                          grid.y_min + (min_r + 0.5 * (max_r - min_r + 1)) * grid.cell_size};
            box.yaw = 0.0;
            box.score = std::min(1.0, score_sum / size);
            box.risk = std::min(1.0, risk_max);
            boxes.push_back(box);
        }
    }
    return boxes;
}

std::vector<DetectionBox> decode_detections(const FeatureField& fused,
                                            double occupancy_threshold, int min_cells) {
    const std::size_t n = fused.grid.cell_count();
    std::vector<double> occ(n), risk(n);
    for (std::size_t i = 0; i < n; ++i) {
        occ[i] = fused.at(0, static_cast<CellIndex>(i));
        risk[i] = fused.at(1, static_cast<CellIndex>(i));
    }
    return decode_detection_planes(fused.grid, occ, risk, occupancy_threshold, min_cells);
}

ScalarField decode_risk(const FeatureField& fused) {
    ScalarField out(fused.grid);
    const std::size_t n = fused.grid.cell_count();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = fused.at(1, static_cast<CellIndex>(i));
        out.values[i] = std::min(1.0, std::max(0.0, v));
    }
    return out;
}

}  // namespace sracp
