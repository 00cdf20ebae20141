#pragma once

// Counter-based Philox4x32-10: every draw is a pure function of
// (seed, particle, step, stream), so results do not depend on the order
// or batching in which particles are simulated.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace fpc {

class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit constexpr Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    constexpr Block operator()(Block ctr) const {
        std::array<std::uint32_t, 2> k = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, k);
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;

    static constexpr Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    std::array<std::uint32_t, 2> key_;
};

/// Stream tags separate independent uses of the same (particle, step).
enum class RngStream : std::uint32_t { Increment = 0, Initial = 1 };

/// Two uniforms in (0, 1) and the Box-Muller pair built from them.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) : philox_(seed) {}

    std::pair<double, double> uniforms(std::uint64_t particle, std::uint32_t step, RngStream stream) const {
        const auto r = philox_({static_cast<std::uint32_t>(particle), static_cast<std::uint32_t>(particle >> 32), step,
                                static_cast<std::uint32_t>(stream)});
        const std::uint64_t a = (std::uint64_t{r[0]} << 32) | r[1];
        const std::uint64_t b = (std::uint64_t{r[2]} << 32) | r[3];
        return {to_open_unit(a), to_open_unit(b)};
    }

    std::pair<double, double> normals(std::uint64_t particle, std::uint32_t step, RngStream stream) const {
        const auto [u1, u2] = uniforms(particle, step, stream);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        return {rad * std::cos(ang), rad * std::sin(ang)};
    }

private:
    // Top 53 bits, shifted half a step off zero.
    static double to_open_unit(std::uint64_t v) { return (static_cast<double>(v >> 11) + 0.5) * 0x1.0p-53; }

    Philox4x32 philox_;
};

} // namespace fpc
