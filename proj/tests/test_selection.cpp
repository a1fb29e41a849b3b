#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sracp/selection.hpp"

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

GainMap random_gain(const GridSpec& grid, std::mt19937_64& rng, double alpha = 0.5) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ScalarField sp(grid), rk(grid);
    BlindZoneMask blind(grid);
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        sp.values[i] = unit(rng) < 0.7 ? unit(rng) : 0.0;
        rk.values[i] = unit(rng) < 0.7 ? unit(rng) : 0.0;
        blind.occluded[i] = unit(rng) < 0.4 ? 1 : 0;
        blind.occ_prob[i] = blind.occluded[i] ? unit(rng) : 0.0;
    }
    return compute_gain(sp, rk, blind, alpha);
}

}  // namespace

TEST_CASE("compute_gain") {
    const GridSpec grid = tiny_grid(4);
    ScalarField sp(grid), rk(grid);
    BlindZoneMask blind(grid);
    sp.values[5] = 0.6;
    rk.values[5] = 0.8;
    blind.occluded[5] = 1;

    SUBCASE("alpha = 1 keeps only the spatial term") {
        const auto gain = compute_gain(sp, rk, blind, 1.0);
        CHECK(gain.combined[5] == doctest::Approx(0.48));
    }

    SUBCASE("alpha = 0 keeps only the blind term") {
        const auto gain = compute_gain(sp, rk, blind, 0.0);
        CHECK(gain.combined[5] == doctest::Approx(0.8));
    }

    SUBCASE("alpha = 0.5 mixes both terms") {
        const auto gain = compute_gain(sp, rk, blind, 0.5);
        CHECK(gain.combined[5] == doctest::Approx(0.5 * 0.48 + 0.5 * 0.8));
        CHECK(gain.combined[5] == doctest::Approx(0.64));
    }

    SUBCASE("shape mismatch and bad alpha are rejected") {
        ScalarField wrong(tiny_grid(5));
        CHECK_THROWS_AS(compute_gain(wrong, rk, blind, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(compute_gain(sp, rk, blind, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(compute_gain(sp, rk, blind, -0.1), std::invalid_argument);
    }
}

TEST_CASE("capacity_cells") {
    BudgetSpec budget;
    budget.budget_bytes = 1024;
    budget.header_bytes = 24;
    budget.index_bytes = 4;
    budget.feature_bytes = 1;
    budget.channels = 64;

    CHECK(budget.cell_bytes() == 68);
    CHECK(capacity_cells(budget) == 14);

    SUBCASE("budget below the header affords nothing") {
        budget.budget_bytes = 10;
        CHECK(capacity_cells(budget) == 0);
    }

    SUBCASE("exact fit affords one cell") {
        budget.budget_bytes = 24 + 68;
        CHECK(capacity_cells(budget) == 1);
    }

    SUBCASE("monotone in the byte budget") {
        std::uint64_t prev = 0;
        for (std::uint64_t bytes = 0; bytes < 4096; bytes += 13) {
            budget.budget_bytes = bytes;
            const std::uint64_t k = capacity_cells(budget);
            CHECK(k >= prev);
            prev = k;
        }
    }
}

TEST_CASE("select_cells") {
    SUBCASE("selects every positive-score cell when k is large") {
        std::mt19937_64 rng(3);
        const auto gain = random_gain(tiny_grid(8), rng);
        const auto mask = select_cells(gain, 10'000, GateMode::Union);
        std::size_t positive = 0;
        for (double g : gain.combined) positive += g > 0.0;
        CHECK(mask.selected.size() == positive);
        for (CellIndex idx : mask.selected) {
            CHECK(gain.combined[static_cast<std::size_t>(idx)] > 0.0);
        }
    }

    SUBCASE("ties break toward the smaller row-major index") {
        const GridSpec grid = tiny_grid(4);
        ScalarField sp(grid), rk(grid);
        BlindZoneMask blind(grid);
        sp.values[3] = 0.5;
        rk.values[3] = 1.0;
        sp.values[9] = 0.5;
        rk.values[9] = 1.0;
        const auto gain = compute_gain(sp, rk, blind, 1.0);
        const auto mask = select_cells(gain, 1, GateMode::Union);
        REQUIRE(mask.selected.size() == 1);
        CHECK(mask.selected[0] == 3);
    }

    SUBCASE("selected list is sorted and consistent with the masks") {
        std::mt19937_64 rng(5);
        const auto gain = random_gain(tiny_grid(8), rng);
        for (GateMode gate : {GateMode::SpatialOnly, GateMode::RiskOnly, GateMode::Union}) {
            const auto mask = select_cells(gain, 9, gate);
            CHECK(std::is_sorted(mask.selected.begin(), mask.selected.end()));
            std::vector<CellIndex> from_masks;
            for (std::size_t i = 0; i < mask.S.size(); ++i) {
                if (mask.S[i] || mask.R[i]) from_masks.push_back(static_cast<CellIndex>(i));
            }
            CHECK(from_masks == mask.selected);
            if (gate == GateMode::Union) CHECK(mask.S == mask.R);
            if (gate == GateMode::SpatialOnly) {
                CHECK(std::count(mask.R.begin(), mask.R.end(), 1) == 0);
            }
            if (gate == GateMode::RiskOnly) {
                CHECK(std::count(mask.S.begin(), mask.S.end(), 1) == 0);
            }
        }
    }

    SUBCASE("matches a full-sort oracle on random 16x16 maps") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 30; ++trial) {
            const auto gain = random_gain(tiny_grid(16), rng);
            const auto mask = select_cells(gain, 10, GateMode::Union);

            std::vector<CellIndex> order(gain.combined.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](CellIndex a, CellIndex b) {
                const double ga = gain.combined[static_cast<std::size_t>(a)];
                const double gb = gain.combined[static_cast<std::size_t>(b)];
                if (ga != gb) return ga > gb;
                return a < b;
            });
            std::vector<CellIndex> expected;
            for (CellIndex idx : order) {
                if (expected.size() == 10) break;
                if (gain.combined[static_cast<std::size_t>(idx)] <= 0.0) break;
                expected.push_back(idx);
            }
            std::sort(expected.begin(), expected.end());
            CHECK(mask.selected == expected);
        }
    }

    SUBCASE("selected gain sum equals the best k-subset (exhaustive oracle)") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 20; ++trial) {
            const auto gain = random_gain(tiny_grid(4), rng);
            const std::size_t k = 1 + trial % 5;
            const auto mask = select_cells(gain, k, GateMode::Union);
            double sum = 0.0;
            for (CellIndex idx : mask.selected) {
                sum += gain.combined[static_cast<std::size_t>(idx)];
            }
            // Exhaustive maximum over all k-subsets of a 16-cell map.
            double best = 0.0;
            const std::size_t n = gain.combined.size();
            for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
                if (static_cast<std::size_t>(std::popcount(bits)) > k) continue;
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (bits & (1u << i)) s += gain.combined[i];
                }
                best = std::max(best, s);
            }
            CHECK(sum == doctest::Approx(best).epsilon(1e-12));
        }
    }

    SUBCASE("union gate dominates the single-cue gates on combined gain") {
        std::mt19937_64 rng(13);
        for (int trial = 0; trial < 30; ++trial) {
            const auto gain = random_gain(tiny_grid(8), rng);
            const auto sum_of = [&](GateMode gate) {
                double s = 0.0;
                for (CellIndex idx : select_cells(gain, 12, gate).selected) {
                    s += gain.combined[static_cast<std::size_t>(idx)];
                }
                return s;
            };
            const double u = sum_of(GateMode::Union);
            CHECK(u >= sum_of(GateMode::SpatialOnly) - 1e-12);
            CHECK(u >= sum_of(GateMode::RiskOnly) - 1e-12);
        }
    }
}

TEST_CASE("usage_bytes") {
    BudgetSpec budget;
    budget.header_bytes = 24;
    budget.index_bytes = 4;
    budget.feature_bytes = 1;
    budget.channels = 64;

    SUBCASE("header-only batch") {
        std::vector<std::vector<std::uint64_t>> counts(4);
        CHECK(usage_bytes(counts, budget, 4) == 96);
    }

    SUBCASE("one sample, one non-ego agent, five cells") {
        std::vector<std::vector<std::uint64_t>> counts{{5}};
        CHECK(usage_bytes(counts, budget, 1) == 24 + 5 * 68);
    }

    SUBCASE("header term is linear in the batch size") {
        std::vector<std::vector<std::uint64_t>> counts;
        CHECK(usage_bytes(counts, budget, 8) == 2 * usage_bytes(counts, budget, 4));
    }

    SUBCASE("cells accumulate across samples and agents") {
        std::vector<std::vector<std::uint64_t>> counts{{2, 3}, {0, 7}};
        CHECK(usage_bytes(counts, budget, 2) == 2 * 24 + 12 * 68);
    }
}

TEST_CASE("overuse_penalty") {
    CHECK(overuse_penalty(100.0, 200.0) == 0.0);
    CHECK(overuse_penalty(300.0, 200.0) == doctest::Approx(0.5));
    CHECK(overuse_penalty(200.0, 200.0) == 0.0);
    CHECK_THROWS_AS(overuse_penalty(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("total_objective") {
    CHECK(total_objective(1.0, 0.0, 0.0, 7.0, 11.0) == doctest::Approx(1.0));
    CHECK(total_objective(0.5, 0.2, 0.5, 1.0, 2.0) == doctest::Approx(1.7));
    CHECK(total_objective(0.42, 0.9, 0.9, 0.0, 0.0) == doctest::Approx(0.42));
}
