#pragma once

#include <cstdint>
#include <vector>

#include "sracp/feature_field.hpp"
#include "sracp/payload.hpp"
#include "sracp/selection.hpp"

namespace sracp {

struct DetectionBox {
    Vec2 center{};
    double length = 0.0;
    double width = 0.0;
    double yaw = 0.0;
    double score = 0.0;
    double risk = 0.0;
};

/// Per-cell attention weights recorded during fusion. Cells the ego kept
/// untouched carry no entry (ego weight 1 implicitly).
struct FusedCellProvenance {
    struct Entry {
        CellIndex cell = 0;
        double ego_weight = 1.0;
        std::vector<std::pair<std::uint32_t, double>> partners;  // (agent id, weight)
    };
    std::vector<Entry> entries;  // sorted by cell index
};

struct FusionResult {
    FeatureField fused;
    FusedCellProvenance provenance;
};

/// A decoded partner transmission: the payload plus the selection masks it
/// was produced under.
struct PartnerStream {
    FeaturePayload payload;
    SelectionMask mask;
};

/// Zeroes every cell outside S | R across all channels.
FeatureField apply_masks(const FeatureField& features, const std::vector<std::uint8_t>& S,
                         const std::vector<std::uint8_t>& R);

/// Location-wise fusion of partner cells into the ego map. Per cell, the ego
/// feature is the query; partners that transmitted the cell (and pass the
/// re-applied S | R mask) contribute keys and values alongside the ego
/// itself. Weights are a softmax over dot(ego, f) / sqrt(C); cells no partner
/// selected are returned bit-identical to the ego's. Throws ProtocolError on
/// grid-hash mismatch.
FusionResult fuse(const FeatureField& ego, const std::vector<PartnerStream>& partners);

/// Surrogate detection decoding: 4-connected components of cells whose
/// channel-0 value exceeds `occupancy_threshold`, of at least `min_cells`
/// cells, become axis-aligned boxes. Score is the mean channel-0 value over
/// the component, risk the max channel-1 value.
std::vector<DetectionBox> decode_detections(const FeatureField& fused,
                                            double occupancy_threshold = 0.3,
                                            int min_cells = 2);

/// Plane-level decode used when only the occupancy and risk channels are
/// materialized. decode_detections(field, ...) is equivalent to calling this
/// on channels 0 and 1.
std::vector<DetectionBox> decode_detection_planes(const GridSpec& grid,
                                                  std::span<const double> occupancy,
                                                  std::span<const double> risk,
                                                  double occupancy_threshold, int min_cells);

/// Channel-1 projection clipped to [0, 1].
ScalarField decode_risk(const FeatureField& fused);

/// Sparse fusion over an agent's base statistics without materializing the
/// full C-channel tensor. Channel vectors are expanded on demand for the
/// cells partners actually transmitted; the math matches fuse() exactly.
struct SparsePartner {
    FeaturePayload payload;
};

struct SparseFusionResult {
    std::vector<double> occupancy;  // fused channel 0
    std::vector<double> risk;       // fused channel 1
    FusedCellProvenance provenance;
};

SparseFusionResult fuse_sparse(const ScalarField& ego_occupancy, const ScalarField& ego_risk,
                               const BlindZoneMask& ego_blind, std::uint32_t channels,
                               const std::vector<SparsePartner>& partners);

}  // namespace sracp
