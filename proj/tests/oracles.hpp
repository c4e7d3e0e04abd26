#pragma once

// Reference implementations used only by tests. They share no code with the
// library and favour the obvious formulation over speed.

#include "smartquant/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

// Value of an FP16 pattern, straight from the IEEE formula.
inline double half_value(std::uint16_t h)
{
    const int s = h >> 15, e = (h >> 10) & 31, m = h & 1023;
    double v;
    if (e == 31)
        v = m ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
    else if (e == 0)
        v = std::ldexp(m, -24);
    else
        v = std::ldexp(1024 + m, e - 25);
    return s ? -v : v;
}

// Nearest-even half by brute force over every finite pattern.
inline std::uint16_t half_nearest(double x)
{
    std::uint16_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::uint32_t h = 0; h < 0x10000; ++h) {
        const double v = half_value(static_cast<std::uint16_t>(h));
        if (!std::isfinite(v) || std::signbit(v) != std::signbit(x))
            continue;
        const double err = std::fabs(v - x);
        if (err < best_err || (err == best_err && (h & 1) == 0 && (best & 1) == 1)) {
            best = static_cast<std::uint16_t>(h);
            best_err = err;
        }
    }
    return best;
}

// Exact narrowing reference. Every quantity is an integer count of 2^-24, the
// FP16 quantum, so the arithmetic is exact in 64 bits.
struct Target {
    int exp_bits, man_bits, bias;
    bool same_frame() const { return exp_bits == 5 && bias == 15; }
    int max_field() const { return exp_bits == 5 ? 30 : (1 << exp_bits) - 1; }
};

inline std::uint64_t pow2u(int k) { return std::uint64_t{1} << k; }

// floor(log2(v)) for v > 0 in 2^-24 units, as an unscaled exponent.
inline int ilog2_units(std::uint64_t v)
{
    int e = 63;
    while (!((v >> e) & 1))
        --e;
    return e - 24;
}

// Magnitude -> target pattern without sign. v must be representable.
inline std::uint16_t encode(std::uint64_t v, const Target& t)
{
    if (v == 0)
        return 0;
    int e = ilog2_units(v);
    if (t.same_frame() && e < -14) {
        // subnormal: v = m * 2^(-14 - r_m)
        const std::uint64_t q = pow2u(-14 - t.man_bits + 24);
        return static_cast<std::uint16_t>(v / q);
    }
    const int field = e + t.bias;
    const std::uint64_t q = pow2u(e - t.man_bits + 24);
    const std::uint64_t m = v / q - pow2u(t.man_bits);
    return static_cast<std::uint16_t>((field << t.man_bits) | m);
}

inline std::uint16_t convert(std::uint16_t src, const Target& t, int d_e, int d_m, bool rne)
{
    const int sign = src >> 15;
    const int n_bits = 1 + t.exp_bits + t.man_bits;
    const std::uint16_t sign_out = static_cast<std::uint16_t>(sign << (n_bits - 1));

    // Only fetched planes: unfetched exponent and mantissa LSBs read as zero.
    const int fe = std::min(5, t.exp_bits + d_e);
    const int fm = std::min(10, t.man_bits + d_m);
    const int E = ((src >> 10) & 31) & ~((1 << (5 - fe)) - 1);
    const int M = (src & 1023) & ~((1 << (10 - fm)) - 1);

    const std::uint64_t max_finite =
        pow2u(t.max_field() - t.bias - t.man_bits + 24) * (pow2u(t.man_bits + 1) - 1);
    if (E == 31)
        return sign_out | encode(max_finite, t);

    const std::uint64_t v = E == 0 ? static_cast<std::uint64_t>(M)
                                   : static_cast<std::uint64_t>(1024 + M) << (E - 1);
    if (v == 0)
        return sign_out;
    if (!t.same_frame() && E == 0)
        return sign_out;  // FP16 subnormal sources lie below every narrow normal

    int e = ilog2_units(v);
    if (t.same_frame())
        e = std::max(e, -14);
    const std::uint64_t q = pow2u(e - t.man_bits + 24);
    std::uint64_t r = v / q * q;
    if (rne) {
        const std::uint64_t rem = v - r;
        if (rem * 2 > q || (rem * 2 == q && ((r / q) & 1)))
            r += q;
    }
    if (r > max_finite)
        r = max_finite;
    if (r == 0)
        return sign_out;
    if (!t.same_frame() && r < pow2u(1 - t.bias + 24))
        return sign_out;
    return sign_out | encode(r, t);
}

inline std::uint16_t convert(std::uint16_t src, const sq::FpFormat& f, const sq::GuardConfig& g,
                             sq::RoundingMode mode)
{
    return convert(src, Target{f.exp_bits, f.man_bits, f.bias}, g.exp_guard, g.man_guard,
                   mode == sq::RoundingMode::RoundNearestEvenOnGuards);
}

// Bit i of a LSB-first byte buffer.
inline bool bit_at(const std::vector<std::uint8_t>& buf, std::uint64_t i)
{
    return (buf[i / 8] >> (i % 8)) & 1;
}

}  // namespace oracle
