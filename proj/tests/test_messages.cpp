#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sracp/errors.hpp"
#include "sracp/messages.hpp"

using namespace sracp;

namespace {

GridSpec grid_16() {
    GridSpec grid;
    grid.x_min = 0.0;
    grid.x_max = 16.0;
    grid.y_min = 0.0;
    grid.y_max = 16.0;
    grid.cell_size = 1.0;
    return grid;
}

/// Independent run counter: RLE bytes = 1 value byte + one LEB128 varint per
/// run.
std::size_t oracle_rle_length(const std::vector<std::uint8_t>& bits) {
    if (bits.empty()) return 1;
    std::size_t bytes = 1;
    std::size_t run = 1;
    const auto varint_len = [](std::size_t v) {
        std::size_t len = 1;
        while (v >= 0x80) {
            v >>= 7;
            ++len;
        }
        return len;
    };
    for (std::size_t i = 1; i < bits.size(); ++i) {
        if ((bits[i] != 0) == (bits[i - 1] != 0)) {
            ++run;
        } else {
            bytes += varint_len(run);
            run = 1;
        }
    }
    return bytes + varint_len(run);
}

}  // namespace

TEST_CASE("rle") {
    SUBCASE("all-visible mask is a single short run") {
        const std::vector<std::uint8_t> bits(256, 0);
        const auto encoded = rle_encode(bits);
        CHECK(encoded.size() == 3);  // value byte + 2-byte varint for 256
        CHECK(rle_decode(encoded, 256) == bits);
    }

    SUBCASE("checkerboard matches the independent length oracle") {
        std::vector<std::uint8_t> bits(256);
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (i % 2) ? 1 : 0;
        const auto encoded = rle_encode(bits);
        CHECK(encoded.size() == oracle_rle_length(bits));
        CHECK(encoded.size() == 257);
        CHECK(rle_decode(encoded, 256) == bits);
    }

    SUBCASE("random masks round-trip and match the length oracle") {
        std::mt19937_64 rng(19);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::uint8_t> bits(1 + rng() % 3000);
            for (auto& b : bits) b = (rng() % 4 == 0) ? 1 : 0;
            const auto encoded = rle_encode(bits);
            CHECK(encoded.size() == oracle_rle_length(bits));
            CHECK(rle_decode(encoded, bits.size()) == bits);
        }
    }

    SUBCASE("malformed streams are rejected") {
        CHECK_THROWS_AS(rle_decode(std::vector<std::uint8_t>{2, 4}, 4), ProtocolError);
        CHECK_THROWS_AS(rle_decode(std::vector<std::uint8_t>{0, 3}, 4), ProtocolError);
        CHECK_THROWS_AS(rle_decode(std::vector<std::uint8_t>{0, 5}, 4), ProtocolError);
        // Trailing bytes after the runs cover the mask.
        CHECK_THROWS_AS(rle_decode(std::vector<std::uint8_t>{0, 4, 9}, 4), ProtocolError);
    }
}

TEST_CASE("coverage beacon") {
    const GridSpec grid = grid_16();

    CoverageBeacon beacon;
    beacon.sender = 11;
    beacon.frame = 4;
    beacon.position = {3.25, -7.5};
    beacon.velocity = {12.5, -3.25};
    beacon.blind_mask.assign(grid.cell_count(), 0);
    beacon.blind_mask[40] = 1;
    beacon.blind_mask[41] = 1;

    SUBCASE("encodes to a 20-byte header plus the RLE payload") {
        const auto bytes = encode_beacon(beacon);
        CHECK(bytes.size() == 20 + rle_encode(beacon.blind_mask).size());
        CHECK(beacon_bytes(beacon) == bytes.size());
    }

    SUBCASE("decodes back with quantized velocity") {
        const auto decoded = decode_beacon(encode_beacon(beacon), grid);
        CHECK(decoded.sender == 11);
        CHECK(decoded.frame == 4);
        CHECK(decoded.position.x == doctest::Approx(3.25));
        CHECK(decoded.position.y == doctest::Approx(-7.5));
        CHECK(decoded.velocity.x == doctest::Approx(12.5).epsilon(1e-3));
        CHECK(decoded.velocity.y == doctest::Approx(-3.25).epsilon(1e-3));
        CHECK(decoded.blind_mask == beacon.blind_mask);
    }

    SUBCASE("an all-visible beacon is minimal") {
        beacon.blind_mask.assign(grid.cell_count(), 0);
        CHECK(beacon_bytes(beacon) == 20 + 3);
    }

    SUBCASE("truncated beacons are rejected") {
        auto bytes = encode_beacon(beacon);
        bytes.resize(10);
        CHECK_THROWS_AS(decode_beacon(bytes, grid), ProtocolError);
    }
}

TEST_CASE("cp request") {
    const GridSpec grid = grid_16();

    CPRequest request;
    request.requester = 1;
    request.target = 2;
    request.frame = 9;
    request.position = {-4.5, 2.0};
    request.grid_hash = grid.hash();
    request.blind_mask.assign(grid.cell_count(), 0);
    request.risk_q8.assign(grid.cell_count(), 0);
    request.occ_q8.assign(grid.cell_count(), 0);
    for (std::size_t i : {17u, 18u, 33u}) {
        request.blind_mask[i] = 1;
        request.risk_q8[i] = static_cast<std::uint8_t>(100 + i);
        request.occ_q8[i] = static_cast<std::uint8_t>(200 - i);
    }

    SUBCASE("round-trips exactly") {
        const auto decoded = decode_request(encode_request(request), grid);
        CHECK(decoded.requester == request.requester);
        CHECK(decoded.target == request.target);
        CHECK(decoded.frame == request.frame);
        CHECK(decoded.grid_hash == request.grid_hash);
        CHECK(decoded.blind_mask == request.blind_mask);
        CHECK(decoded.risk_q8 == request.risk_q8);
        CHECK(decoded.occ_q8 == request.occ_q8);
    }

    SUBCASE("an empty blind zone is invalid") {
        request.blind_mask.assign(grid.cell_count(), 0);
        CHECK_THROWS_AS(encode_request(request), std::invalid_argument);
    }

    SUBCASE("requesting from oneself is invalid") {
        request.target = request.requester;
        CHECK_THROWS_AS(encode_request(request), std::invalid_argument);
    }

    SUBCASE("trailing bytes are rejected") {
        auto bytes = encode_request(request);
        bytes.push_back(0);
        CHECK_THROWS_AS(decode_request(bytes, grid), ProtocolError);
    }
}

TEST_CASE("cp response") {
    CPResponse response;
    response.responder = 5;
    response.requester = 2;
    response.payload_bytes = {1, 2, 3, 4, 5};

    const auto bytes = encode_response(response);
    CHECK(bytes.size() == 8 + 5);
    const auto decoded = decode_response(bytes);
    CHECK(decoded.responder == 5);
    CHECK(decoded.requester == 2);
    CHECK(decoded.payload_bytes == response.payload_bytes);
}
