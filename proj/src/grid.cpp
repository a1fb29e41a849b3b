#include "sracp/grid.hpp"

#include <cstring>

namespace sracp {

namespace {

void mix(std::uint64_t& h, double v) {
    std::uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
}

}  // namespace

std::uint64_t GridSpec::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    mix(h, x_min);
    mix(h, x_max);
    mix(h, y_min);
    mix(h, y_max);
    mix(h, cell_size);
    mix(h, z_min);
    mix(h, z_max);
    return h;
}

}  // namespace sracp
