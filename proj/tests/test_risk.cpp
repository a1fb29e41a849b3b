#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sracp/risk.hpp"

using namespace sracp;

namespace {

ObjectState make_object(AgentId id, Vec2 p, Vec2 v = {}, double length = 4.5,
                        double width = 2.0, double yaw = 0.0) {
    ObjectState obj;
    obj.id = id;
    obj.position = p;
    obj.velocity = v;
    obj.box = Obb{p, length, width, yaw};
    return obj;
}

}  // namespace

TEST_CASE("distance_risk") {
    CHECK(distance_risk({3.0, 4.0}, {3.0, 4.0}, 0.05) == doctest::Approx(1.0));
    CHECK(distance_risk({20.0, 0.0}, {0.0, 0.0}, 0.05) == doctest::Approx(std::exp(-1.0)));
    CHECK(distance_risk({1e6, 0.0}, {0.0, 0.0}, 0.05) < 1e-300);

    // Strictly decreasing in distance.
    double prev = 2.0;
    for (double d = 0.0; d <= 50.0; d += 0.5) {
        const double r = distance_risk({d, 0.0}, {0.0, 0.0}, 0.05);
        CHECK(r < prev);
        CHECK(r > 0.0);
        CHECK(r <= 1.0);
        prev = r;
    }
}

TEST_CASE("speed_risk") {
    const ObjectState ego = make_object(1, {0, 0}, {0, 0});

    SUBCASE("matching velocity scores zero") {
        const ObjectState obj = make_object(2, {5, 0}, {3, 1});
        const ObjectState moving_ego = make_object(1, {0, 0}, {3, 1});
        std::vector<ObjectState> scene{obj};
        CHECK(speed_risk(obj, moving_ego, scene, 0.01) == 0.0);
    }

    SUBCASE("scene maximum normalizes to just under one") {
        const ObjectState obj = make_object(2, {5, 0}, {10, 0});
        std::vector<ObjectState> scene{obj, make_object(3, {9, 0}, {4, 0})};
        CHECK(speed_risk(obj, ego, scene, 0.01) == doctest::Approx(10.0 / 10.01));
    }

    SUBCASE("all-stationary scene scores zero everywhere") {
        std::vector<ObjectState> scene{make_object(2, {5, 0}), make_object(3, {9, 0})};
        for (const ObjectState& obj : scene) {
            CHECK(speed_risk(obj, ego, scene, 0.01) == 0.0);
        }
    }

    SUBCASE("empty scene is rejected") {
        CHECK_THROWS_AS(speed_risk(ego, ego, {}, 0.01), std::invalid_argument);
    }

    SUBCASE("invariant under a common velocity shift") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> coord(-10.0, 10.0);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<ObjectState> scene;
            for (AgentId id = 2; id < 6; ++id) {
                scene.push_back(make_object(id, {coord(rng), coord(rng)},
                                            {coord(rng), coord(rng)}));
            }
            ObjectState e = make_object(1, {0, 0}, {coord(rng), coord(rng)});
            const double base = speed_risk(scene[0], e, scene, 0.01);

            const Vec2 shift{coord(rng), coord(rng)};
            std::vector<ObjectState> shifted = scene;
            for (ObjectState& o : shifted) o.velocity = o.velocity + shift;
            ObjectState shifted_ego = e;
            shifted_ego.velocity = e.velocity + shift;
            CHECK(speed_risk(shifted[0], shifted_ego, shifted, 0.01) ==
                  doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("intersection_risk") {
    const std::vector<Vec2> q{{0.0, 0.0}, {100.0, 0.0}};
    CHECK(intersection_risk({0.0, 0.0}, q, 0.02) == doctest::Approx(1.0));
    CHECK(intersection_risk({50.0, 0.0}, q, 0.02) == doctest::Approx(std::exp(-1.0)));
    CHECK(intersection_risk({5.0, 0.0}, {}, 0.02) == 0.0);

    // Minimum over the set: the nearer intersection drives the decay.
    CHECK(intersection_risk({90.0, 0.0}, q, 0.02) ==
          doctest::Approx(std::exp(-0.02 * 10.0)));
}

TEST_CASE("total_risk") {
    const RiskWeights weights{};

    CHECK(total_risk(1.0, 1.0, 1.0, weights) == doctest::Approx(1.0));
    CHECK(total_risk(0.3679, 0.0, 0.3679, weights) ==
          doctest::Approx(0.5 * 0.3679 + 0.2 * 0.3679));

    SUBCASE("clips above one") {
        RiskWeights heavy = weights;
        heavy.alpha_d = 1.0;
        heavy.alpha_s = 0.5;
        CHECK(total_risk(1.0, 1.0, 0.0, heavy) == 1.0);
    }

    SUBCASE("monotone non-decreasing in each component") {
        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const double d = unit(rng), s = unit(rng), n = unit(rng);
            const double base = total_risk(d, s, n, weights);
            CHECK(total_risk(d + 0.1, s, n, weights) >= base);
            CHECK(total_risk(d, s + 0.1, n, weights) >= base);
            CHECK(total_risk(d, s, n + 0.1, weights) >= base);
        }
    }
}

TEST_CASE("rasterize_risk_map") {
    GridSpec grid;
    grid.x_min = -8.0;
    grid.x_max = 8.0;
    grid.y_min = -8.0;
    grid.y_max = 8.0;
    grid.cell_size = 1.0;
    const RiskWeights weights{};
    const ObjectState ego = make_object(1, {0, 0});

    SUBCASE("no objects gives an all-zero map") {
        const auto map = rasterize_risk_map({}, ego, {}, weights, grid);
        for (double v : map.values) CHECK(v == 0.0);
    }

    SUBCASE("footprint cells carry the object risk, overlap keeps the max") {
        std::vector<ObjectState> objects{
            make_object(2, {3.0, 3.0}, {}, 2.0, 2.0),
            make_object(3, {3.5, 3.0}, {5.0, 0.0}, 2.0, 2.0),
        };
        std::vector<ObjectState> lone{objects[0]};
        const auto lone_map = rasterize_risk_map(lone, ego, {}, weights, grid);
        const double lone_risk = object_risk(objects[0], ego, lone, {}, weights);
        const CellIndex idx = grid.cell_at({3.0, 3.0});
        CHECK(lone_map.at(idx) == doctest::Approx(lone_risk));

        const auto both = rasterize_risk_map(objects, ego, {}, weights, grid);
        const double faster = object_risk(objects[1], ego, objects, {}, weights);
        const double slower = object_risk(objects[0], ego, objects, {}, weights);
        CHECK(faster > slower);
        CHECK(both.at(idx) == doctest::Approx(faster));
    }

    SUBCASE("matches the per-cell point-in-dilated-box oracle") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> coord(-6.0, 6.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<ObjectState> objects;
            for (AgentId id = 2; id < 6; ++id) {
                objects.push_back(make_object(id, {coord(rng), coord(rng)},
                                              {coord(rng), coord(rng)}, 1.0 + 3.0 * unit(rng),
                                              1.0 + 2.0 * unit(rng), 6.28 * unit(rng)));
            }
            const std::vector<Vec2> q{{coord(rng), coord(rng)}};
            const auto map = rasterize_risk_map(objects, ego, q, weights, grid);

            for (CellIndex idx = 0; idx < static_cast<CellIndex>(grid.cell_count()); ++idx) {
                const Vec2 world = grid.cell_center(idx) + ego.position;
                double expected = 0.0;
                for (const ObjectState& obj : objects) {
                    Obb dilated = obj.box;
                    dilated.length += grid.cell_size;
                    dilated.width += grid.cell_size;
                    if (!dilated.contains(world)) continue;
                    expected = std::max(expected,
                                        object_risk(obj, ego, objects, q, weights));
                }
                CHECK(map.at(idx) == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("pairwise_risk_matrix and dangerous_set") {
    const RiskWeights weights{};
    const ObjectState ego = make_object(1, {0, 0});

    SUBCASE("no neighbors gives an empty matrix") {
        const auto matrix = pairwise_risk_matrix(ego, {}, {}, weights);
        CHECK(matrix.entries.empty());
        CHECK(dangerous_set(matrix, 0.0).empty());
    }

    SUBCASE("coincident stationary neighbor scores alpha_d") {
        std::vector<ObjectState> neighbors{make_object(7, {0, 0})};
        const auto matrix = pairwise_risk_matrix(ego, neighbors, {}, weights);
        REQUIRE(matrix.entries.size() == 1);
        CHECK(matrix.entries[0].second == doctest::Approx(0.5));
    }

    SUBCASE("entries are ordered by id and clipped to [0, 1]") {
        std::mt19937_64 rng(53);
        std::uniform_real_distribution<double> coord(-30.0, 30.0);
        std::vector<ObjectState> neighbors;
        for (AgentId id : {9u, 3u, 6u, 2u}) {
            neighbors.push_back(make_object(id, {coord(rng), coord(rng)},
                                            {coord(rng), coord(rng)}));
        }
        const std::vector<Vec2> q{{1.0, 1.0}};
        const auto matrix = pairwise_risk_matrix(ego, neighbors, q, weights);
        REQUIRE(matrix.entries.size() == 4);
        for (std::size_t i = 0; i + 1 < matrix.entries.size(); ++i) {
            CHECK(matrix.entries[i].first < matrix.entries[i + 1].first);
        }
        for (const auto& [id, rho] : matrix.entries) {
            CHECK(rho >= 0.0);
            CHECK(rho <= 1.0);
        }
    }

    SUBCASE("dangerous set thresholds and shrinks monotonically") {
        RiskMatrix matrix;
        matrix.ego = 1;
        matrix.entries = {{2, 0.8}, {3, 0.3}, {4, 0.55}};
        CHECK(dangerous_set(matrix, 1.0).empty());
        CHECK(dangerous_set(matrix, 0.5) == std::vector<AgentId>{2, 4});
        CHECK(dangerous_set(matrix, 0.0) == std::vector<AgentId>{2, 3, 4});

        for (double lo = 0.0; lo <= 1.0; lo += 0.1) {
            for (double hi = lo; hi <= 1.0; hi += 0.1) {
                const auto big = dangerous_set(matrix, lo);
                for (AgentId id : dangerous_set(matrix, hi)) {
                    CHECK(std::find(big.begin(), big.end(), id) != big.end());
                }
            }
        }
    }
}

TEST_CASE("risk outputs stay in [0, 1] for arbitrary finite inputs") {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> coord(-1000.0, 1000.0);
    const RiskWeights weights{};
    for (int trial = 0; trial < 200; ++trial) {
        const ObjectState ego =
            make_object(1, {coord(rng), coord(rng)}, {coord(rng), coord(rng)});
        const ObjectState obj =
            make_object(2, {coord(rng), coord(rng)}, {coord(rng), coord(rng)});
        std::vector<ObjectState> scene{obj};
        const std::vector<Vec2> q{{coord(rng), coord(rng)}};
        const double r = object_risk(obj, ego, scene, q, weights);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}
