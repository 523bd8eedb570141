#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace semireg {

/// Philox4x32-10 counter-based generator: a pure function of (counter, key).
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Standard normals addressed by (path, step, slot); no state is carried, so
/// any path can be regenerated independently of scheduling.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    /// Two independent N(0,1) draws for block `block` of step `step` on `path`.
    std::array<double, 2> pair(std::uint64_t path, std::uint32_t step, std::uint32_t block) const {
        const Philox4x32::Block out = Philox4x32::generate(
            {static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), step, block}, key_);
        // 53-bit uniforms on (0, 1)
        const double u1 = to_unit(out[0], out[1]);
        const double u2 = to_unit(out[2], out[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    /// Fills z[0..n) with the normals of one step (n ≤ 2·blocks).
    template <class Out>
    void fill(std::uint64_t path, std::uint32_t step, int n, Out& z) const {
        for (int j = 0; j < n; j += 2) {
            const auto p = pair(path, step, static_cast<std::uint32_t>(j / 2));
            z[j] = p[0];
            if (j + 1 < n) z[j + 1] = p[1];
        }
    }

    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

private:
    Philox4x32::Key key_;
};

}  // namespace semireg
