#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sracp/errors.hpp"
#include "sracp/fusion.hpp"

using namespace sracp;

namespace {

GridSpec tiny_grid(int cells) {
    GridSpec grid;
    grid.x_min = 0.0;
    grid.x_max = cells;
    grid.y_min = 0.0;
    grid.y_max = cells;
    grid.cell_size = 1.0;
    return grid;
}

PartnerStream stream_with_cell(const GridSpec& grid, std::uint32_t sender, CellIndex index,
                               const std::vector<double>& features) {
    PartnerStream stream;
    stream.payload.header = {sender, 0, grid.hash()};
    PayloadCell cell;
    cell.index = static_cast<std::uint32_t>(index);
    for (double f : features) cell.features.push_back(quantize_feature(f));
    stream.payload.cells.push_back(std::move(cell));
    stream.mask.grid = grid;
    stream.mask.S.assign(grid.cell_count(), 0);
    stream.mask.R.assign(grid.cell_count(), 0);
    stream.mask.S[static_cast<std::size_t>(index)] = 1;
    stream.mask.selected = {index};
    return stream;
}

}  // namespace

TEST_CASE("expand_cell_features") {
    SUBCASE("base channels pass through") {
        const auto v = expand_cell_features(0.3, 0.7, 0.9, 8);
        CHECK(v[0] == doctest::Approx(0.3));
        CHECK(v[1] == doctest::Approx(0.7));
        CHECK(v[2] == doctest::Approx(0.9));
    }

    SUBCASE("zero statistics expand to the zero vector") {
        for (float f : expand_cell_features(0.0, 0.0, 0.0, 64)) CHECK(f == 0.0f);
    }

    SUBCASE("all channels stay in [0, 1]") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            for (float f : expand_cell_features(unit(rng), unit(rng), unit(rng), 64)) {
                CHECK(f >= 0.0f);
                CHECK(f <= 1.0f);
            }
        }
    }
}

TEST_CASE("build_feature_field zeroes blind cells") {
    const GridSpec grid = tiny_grid(4);
    ScalarField occ(grid), risk(grid);
    BlindZoneMask blind(grid);
    occ.values[5] = 0.8;
    risk.values[5] = 0.4;
    occ.values[6] = 0.9;
    blind.occluded[6] = 1;
    blind.occ_prob[6] = 1.0;

    const auto field = build_feature_field(occ, risk, blind, 16);
    CHECK(field.at(0, 5) == doctest::Approx(0.8));
    CHECK(field.at(1, 5) == doctest::Approx(0.4));
    for (std::uint32_t c = 0; c < 16; ++c) CHECK(field.at(c, 6) == 0.0f);
}

TEST_CASE("apply_masks") {
    const GridSpec grid = tiny_grid(4);
    FeatureField field(grid, 4);
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        for (std::uint32_t c = 0; c < 4; ++c) {
            field.at(c, static_cast<CellIndex>(i)) = 0.5f;
        }
    }
    std::vector<std::uint8_t> none(grid.cell_count(), 0);
    std::vector<std::uint8_t> all(grid.cell_count(), 1);

    SUBCASE("both masks empty zeroes everything") {
        const auto out = apply_masks(field, none, none);
        for (float v : out.values) CHECK(v == 0.0f);
    }

    SUBCASE("full union is the identity") {
        const auto out = apply_masks(field, all, none);
        CHECK(out.values == field.values);
    }

    SUBCASE("a single masked cell survives alone") {
        auto s = none;
        s[9] = 1;
        const auto out = apply_masks(field, s, none);
        for (std::size_t i = 0; i < grid.cell_count(); ++i) {
            for (std::uint32_t c = 0; c < 4; ++c) {
                CHECK(out.at(c, static_cast<CellIndex>(i)) == (i == 9 ? 0.5f : 0.0f));
            }
        }
    }

    SUBCASE("shape mismatch is rejected") {
        std::vector<std::uint8_t> wrong(3, 0);
        CHECK_THROWS_AS(apply_masks(field, wrong, none), std::invalid_argument);
    }
}

TEST_CASE("fuse") {
    const GridSpec grid = tiny_grid(4);

    SUBCASE("no partners returns the ego field bit-exactly") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<float> unit(0.0f, 1.0f);
        FeatureField ego(grid, 8);
        for (float& v : ego.values) v = unit(rng);
        const auto result = fuse(ego, {});
        CHECK(result.fused.values == ego.values);
        CHECK(result.provenance.entries.empty());
    }

    SUBCASE("identical partner values keep the cell unchanged at equal weight") {
        FeatureField ego(grid, 8);
        std::vector<double> features(8);
        for (std::uint32_t c = 0; c < 8; ++c) {
            const double v = quantize_feature(0.1 * c) / 255.0;  // representable value
            ego.at(c, 5) = static_cast<float>(v);
            features[c] = v;
        }
        const auto result = fuse(ego, {stream_with_cell(grid, 2, 5, features)});
        REQUIRE(result.provenance.entries.size() == 1);
        CHECK(result.provenance.entries[0].ego_weight == doctest::Approx(0.5));
        CHECK(result.provenance.entries[0].partners[0].second == doctest::Approx(0.5));
        for (std::uint32_t c = 0; c < 8; ++c) {
            CHECK(result.fused.at(c, 5) == doctest::Approx(ego.at(c, 5)).epsilon(1e-6));
        }
    }

    SUBCASE("zero ego vector gives equal weights and half the partner value") {
        FeatureField ego(grid, 8);
        std::vector<double> features(8, 0.0);
        features[0] = 200.0 / 255.0;
        features[3] = 100.0 / 255.0;
        const auto result = fuse(ego, {stream_with_cell(grid, 9, 3, features)});
        CHECK(result.fused.at(0, 3) == doctest::Approx(0.5 * features[0]).epsilon(1e-6));
        CHECK(result.fused.at(3, 3) == doctest::Approx(0.5 * features[3]).epsilon(1e-6));
        CHECK(result.provenance.entries[0].ego_weight == doctest::Approx(0.5));
    }

    SUBCASE("cells no partner selected stay bit-identical") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<float> unit(0.0f, 1.0f);
        FeatureField ego(grid, 8);
        for (float& v : ego.values) v = unit(rng);
        const auto result = fuse(ego, {stream_with_cell(grid, 2, 5, std::vector<double>(8, 0.7))});
        for (std::size_t i = 0; i < grid.cell_count(); ++i) {
            if (i == 5) continue;
            for (std::uint32_t c = 0; c < 8; ++c) {
                CHECK(result.fused.at(c, static_cast<CellIndex>(i)) ==
                      ego.at(c, static_cast<CellIndex>(i)));
            }
        }
    }

    SUBCASE("weights sum to one and the result stays in the convex hull") {
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        FeatureField ego(grid, 6);
        for (float& v : ego.values) v = static_cast<float>(unit(rng));

        std::vector<PartnerStream> partners;
        for (std::uint32_t sender = 2; sender < 5; ++sender) {
            std::vector<double> features;
            for (int c = 0; c < 6; ++c) features.push_back(unit(rng));
            partners.push_back(stream_with_cell(grid, sender, 10, features));
        }
        const auto result = fuse(ego, partners);
        REQUIRE(result.provenance.entries.size() == 1);
        const auto& entry = result.provenance.entries[0];
        double total = entry.ego_weight;
        for (const auto& [id, w] : entry.partners) {
            CHECK(w >= 0.0);
            total += w;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

        for (std::uint32_t c = 0; c < 6; ++c) {
            double lo = ego.at(c, 10), hi = ego.at(c, 10);
            for (const PartnerStream& p : partners) {
                const double v = dequantize_feature(p.payload.cells[0].features[c]);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            CHECK(result.fused.at(c, 10) >= lo - 1e-9);
            CHECK(result.fused.at(c, 10) <= hi + 1e-9);
        }
    }

    SUBCASE("re-masking drops partner cells outside S | R") {
        FeatureField ego(grid, 8);
        auto stream = stream_with_cell(grid, 2, 5, std::vector<double>(8, 0.9));
        stream.mask.S[5] = 0;  // cell present in the payload but masked out
        const auto result = fuse(ego, {stream});
        CHECK(result.provenance.entries.empty());
        CHECK(result.fused.values == ego.values);
    }

    SUBCASE("grid hash mismatch is a protocol error") {
        FeatureField ego(grid, 8);
        auto stream = stream_with_cell(grid, 2, 5, std::vector<double>(8, 0.9));
        stream.payload.header.grid_hash ^= 1;
        CHECK_THROWS_AS(fuse(ego, {stream}), ProtocolError);
    }
}

TEST_CASE("fuse_sparse matches fuse on materialized fields") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const GridSpec grid = tiny_grid(6);

    for (int trial = 0; trial < 10; ++trial) {
        ScalarField occ(grid), risk(grid);
        BlindZoneMask blind(grid);
        for (std::size_t i = 0; i < grid.cell_count(); ++i) {
            occ.values[i] = unit(rng) < 0.5 ? unit(rng) : 0.0;
            risk.values[i] = unit(rng) < 0.5 ? unit(rng) : 0.0;
            blind.occluded[i] = unit(rng) < 0.3;
            blind.occ_prob[i] = blind.occluded[i] ? 0.5 + 0.5 * unit(rng) : unit(rng) * 0.4;
        }
        const std::uint32_t channels = 16;
        const FeatureField ego = build_feature_field(occ, risk, blind, channels);

        std::vector<PartnerStream> streams;
        std::vector<SparsePartner> sparse;
        for (std::uint32_t sender = 2; sender < 4; ++sender) {
            std::vector<double> features;
            const auto expanded = expand_cell_features(unit(rng), unit(rng), unit(rng), channels);
            for (float f : expanded) features.push_back(f);
            const CellIndex cell = static_cast<CellIndex>(rng() % grid.cell_count());
            streams.push_back(stream_with_cell(grid, sender, cell, features));
            sparse.push_back({streams.back().payload});
        }

        const auto dense = fuse(ego, streams);
        const auto light = fuse_sparse(occ, risk, blind, channels, sparse);
        for (std::size_t i = 0; i < grid.cell_count(); ++i) {
            CHECK(light.occupancy[i] ==
                  doctest::Approx(dense.fused.at(0, static_cast<CellIndex>(i))).epsilon(1e-6));
            CHECK(light.risk[i] ==
                  doctest::Approx(dense.fused.at(1, static_cast<CellIndex>(i))).epsilon(1e-6));
        }
        REQUIRE(light.provenance.entries.size() == dense.provenance.entries.size());
        for (std::size_t e = 0; e < light.provenance.entries.size(); ++e) {
            CHECK(light.provenance.entries[e].ego_weight ==
                  doctest::Approx(dense.provenance.entries[e].ego_weight).epsilon(1e-9));
        }
    }
}

TEST_CASE("decode_detections") {
    const GridSpec grid = tiny_grid(8);

    SUBCASE("all-zero field yields nothing") {
        const FeatureField field(grid, 2);
        CHECK(decode_detections(field, 0.3, 2).empty());
    }

    SUBCASE("a 2x3 blob becomes one box with that extent") {
        FeatureField field(grid, 2);
        for (int r = 2; r < 4; ++r) {
            for (int c = 1; c < 4; ++c) {
                field.at(0, grid.index_of(r, c)) = 0.9f;
                field.at(1, grid.index_of(r, c)) = 0.4f;
            }
        }
        const auto boxes = decode_detections(field, 0.3, 2);
        REQUIRE(boxes.size() == 1);
        CHECK(boxes[0].length == doctest::Approx(3.0));
        CHECK(boxes[0].width == doctest::Approx(2.0));
        CHECK(boxes[0].center.x == doctest::Approx(2.5));
        CHECK(boxes[0].center.y == doctest::Approx(3.0));
        CHECK(boxes[0].score == doctest::Approx(0.9).epsilon(1e-6));
        CHECK(boxes[0].risk == doctest::Approx(0.4).epsilon(1e-6));
        CHECK(boxes[0].yaw == 0.0);
    }

    SUBCASE("blobs separated by a clear row decode separately") {
        FeatureField field(grid, 2);
        field.at(0, grid.index_of(1, 1)) = 0.8f;
        field.at(0, grid.index_of(1, 2)) = 0.8f;
        field.at(0, grid.index_of(3, 1)) = 0.8f;
        field.at(0, grid.index_of(3, 2)) = 0.8f;
        CHECK(decode_detections(field, 0.3, 2).size() == 2);
    }

    SUBCASE("components below min_cells are dropped") {
        FeatureField field(grid, 2);
        field.at(0, grid.index_of(4, 4)) = 0.9f;
        CHECK(decode_detections(field, 0.3, 2).empty());
        CHECK(decode_detections(field, 0.3, 1).size() == 1);
    }

    SUBCASE("threshold bounds are validated") {
        const FeatureField field(grid, 2);
        CHECK_THROWS_AS(decode_detections(field, 0.0, 2), std::invalid_argument);
        CHECK_THROWS_AS(decode_detections(field, 1.0, 2), std::invalid_argument);
    }
}

TEST_CASE("decode_risk clips channel 1") {
    const GridSpec grid = tiny_grid(4);
    FeatureField field(grid, 2);
    field.at(1, 3) = 0.7f;
    field.at(1, 4) = 1.2f;  // numerically possible after fusion
    const auto map = decode_risk(field);
    CHECK(map.values[3] == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(map.values[4] == 1.0);
    CHECK(map.values[0] == 0.0);
}
