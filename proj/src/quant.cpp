#include "smartquant/quant.hpp"

#include "smartquant/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace sq {

FpFormat FpFormat::make(std::string name, int exp_bits, int man_bits, std::optional<int> bias)
{
    if (exp_bits < 1 || exp_bits > kFp16ExpBits)
        throw Error("format " + name + ": exponent width must be in [1, 5]");
    if (man_bits < 0 || man_bits > kFp16ManBits)
        throw Error("format " + name + ": mantissa width must be in [0, 10]");
    const int expected_bias = (1 << (exp_bits - 1)) - 1;
    if (bias && *bias != expected_bias)
        throw Error("format " + name + ": bias must be " + std::to_string(expected_bias));
    FpFormat f;
    f.name = std::move(name);
    f.sign_bits = 1;
    f.exp_bits = exp_bits;
    f.man_bits = man_bits;
    f.bias = expected_bias;
    return f;
}

FpFormat FpFormat::skip(std::string name)
{
    FpFormat f;
    f.name = std::move(name);
    f.sign_bits = 0;
    return f;
}

int FpFormat::max_exp_field() const
{
    if (is_skip())
        return 0;
    // FP16-frame formats reserve the all-ones exponent for Inf/NaN.
    return exp_bits == kFp16ExpBits ? (1 << exp_bits) - 2 : (1 << exp_bits) - 1;
}

FpFormat fp16_format() { return FpFormat::make("FP16", 5, 10); }

FormatLadder::FormatLadder(std::vector<FpFormat> formats) : formats_(std::move(formats))
{
    if (formats_.empty())
        throw Error("format ladder is empty");
    for (std::size_t i = 0; i < formats_.size(); ++i) {
        for (std::size_t j = i + 1; j < formats_.size(); ++j) {
            if (formats_[i].name == formats_[j].name)
                throw Error("duplicate format name in ladder: " + formats_[i].name);
        }
        if (i > 0 && formats_[i].total_bits() > formats_[i - 1].total_bits())
            throw Error("format ladder must be ordered by decreasing width");
    }
}

FormatLadder FormatLadder::defaults()
{
    return FormatLadder({
        FpFormat::make("FP16", 5, 10),
        FpFormat::make("FP12", 5, 6),
        FpFormat::make("FP8", 5, 2),
        FpFormat::make("FP6", 3, 2),
        FpFormat::make("FP4", 2, 1),
        FpFormat::skip("FP0"),
    });
}

std::optional<std::size_t> FormatLadder::index_of(std::string_view name) const
{
    for (std::size_t i = 0; i < formats_.size(); ++i)
        if (formats_[i].name == name)
            return i;
    return std::nullopt;
}

const FpFormat& FormatLadder::by_name(std::string_view name) const
{
    auto i = index_of(name);
    if (!i)
        throw Error("unknown format: " + std::string(name));
    return formats_[*i];
}

std::size_t FormatLadder::fp16_index() const
{
    for (std::size_t i = 0; i < formats_.size(); ++i)
        if (formats_[i].total_bits() == 16)
            return i;
    throw Error("format ladder has no 16-bit entry");
}

std::string_view to_string(RoundingMode mode)
{
    return mode == RoundingMode::TruncateTowardZero ? "truncate" : "rne";
}

RoundingMode rounding_mode_from_string(std::string_view s)
{
    if (s == "truncate")
        return RoundingMode::TruncateTowardZero;
    if (s == "rne")
        return RoundingMode::RoundNearestEvenOnGuards;
    throw Error("unknown rounding mode: " + std::string(s));
}

int PlaneSet::size() const { return std::popcount(mask_); }

std::uint16_t PlaneSet::word_mask() const
{
    std::uint16_t m = 0;
    for (int p = 0; p < kNumPlanes; ++p)
        if (contains(p))
            m |= static_cast<std::uint16_t>(1u << word_bit_of_plane(p));
    return m;
}

std::vector<int> PlaneSet::indices() const
{
    std::vector<int> out;
    for (int p = 0; p < kNumPlanes; ++p)
        if (contains(p))
            out.push_back(p);
    return out;
}

int fetched_exp_bits(const FpFormat& format, const GuardConfig& guard)
{
    return std::min(kFp16ExpBits, format.exp_bits + guard.exp_guard);
}

int fetched_man_bits(const FpFormat& format, const GuardConfig& guard)
{
    return std::min(kFp16ManBits, format.man_bits + guard.man_guard);
}

PlaneSet plane_set(const FpFormat& format, const GuardConfig& guard)
{
    if (format.is_skip())
        throw Error("skipped chunk has no planes");
    if (guard.exp_guard < 0 || guard.man_guard < 0)
        throw Error("guard bit counts must be non-negative");
    std::uint16_t mask = 1;  // sign
    const int ne = fetched_exp_bits(format, guard);
    const int nm = fetched_man_bits(format, guard);
    for (int i = 0; i < ne; ++i)
        mask |= static_cast<std::uint16_t>(1u << (1 + i));
    for (int i = 0; i < nm; ++i)
        mask |= static_cast<std::uint16_t>(1u << (6 + i));
    return PlaneSet(mask);
}

namespace {

struct ConvertPlan {
    std::uint16_t fetch_mask;
    int man_bits;
    int guard_bits;  // mantissa bits fetched below the target LSB
    int out_width;
    int bias;
    int max_field;
    bool same_frame;
    bool round;
    std::uint16_t saturate_mag;
};

ConvertPlan make_plan(const FpFormat& target, const GuardConfig& guard, RoundingMode mode)
{
    if (target.is_skip())
        throw Error("cannot convert to a skipped (zero-width) format");
    ConvertPlan p{};
    p.fetch_mask = plane_set(target, guard).word_mask();
    p.man_bits = target.man_bits;
    p.guard_bits = fetched_man_bits(target, guard) - target.man_bits;
    p.out_width = target.total_bits();
    p.bias = target.bias;
    p.max_field = target.max_exp_field();
    p.same_frame = target.shares_fp16_frame();
    p.round = mode == RoundingMode::RoundNearestEvenOnGuards && p.guard_bits > 0;
    p.saturate_mag = static_cast<std::uint16_t>((p.max_field << p.man_bits) | ((1u << p.man_bits) - 1));
    return p;
}

std::uint16_t convert_one(std::uint16_t raw, const ConvertPlan& p)
{
    const std::uint16_t h = raw & p.fetch_mask;
    const unsigned sign = h >> 15;
    const unsigned sign_out = sign << (p.out_width - 1);
    const int exp = (h >> 10) & 0x1F;
    const unsigned man = h & 0x3FF;

    if (exp == 0x1F)
        return static_cast<std::uint16_t>(sign_out | p.saturate_mag);

    const int shift = kFp16ManBits - p.man_bits;
    unsigned keep = man >> shift;
    if (p.round) {
        const unsigned rem = (man >> (shift - p.guard_bits)) & ((1u << p.guard_bits) - 1);
        const unsigned half = 1u << (p.guard_bits - 1);
        if (rem > half || (rem == half && (keep & 1u)))
            ++keep;
    }
    const int carry = static_cast<int>(keep >> p.man_bits);
    keep &= (1u << p.man_bits) - 1;

    int field;
    if (p.same_frame) {
        field = exp + carry;
    } else {
        if (exp == 0)
            return static_cast<std::uint16_t>(sign_out);
        field = exp - kFp16Bias + carry + p.bias;
        if (field < 1)
            return static_cast<std::uint16_t>(sign_out);
    }
    if (field > p.max_field)
        return static_cast<std::uint16_t>(sign_out | p.saturate_mag);
    return static_cast<std::uint16_t>(sign_out | (static_cast<unsigned>(field) << p.man_bits) | keep);
}

}  // namespace

WeightWord convert(WeightWord source, const FpFormat& target, const GuardConfig& guard,
                   RoundingMode mode)
{
    return WeightWord{convert_one(source.bits, make_plan(target, guard, mode))};
}

void convert_many(std::span<const std::uint16_t> source, std::span<std::uint16_t> out,
                  const FpFormat& target, const GuardConfig& guard, RoundingMode mode)
{
    if (out.size() != source.size())
        throw Error("convert_many: output size mismatch");
    const ConvertPlan plan = make_plan(target, guard, mode);
    std::transform(source.begin(), source.end(), out.begin(),
                   [&](std::uint16_t w) { return convert_one(w, plan); });
}

double dequantize(WeightWord word, const FpFormat& format)
{
    if (format.is_skip())
        throw Error("cannot dequantize a skipped format");
    const int n = format.total_bits();
    const unsigned bits = word.bits & ((1u << n) - 1);
    const bool neg = (bits >> (n - 1)) & 1u;
    const int field = static_cast<int>((bits >> format.man_bits) & ((1u << format.exp_bits) - 1));
    const unsigned man = bits & ((1u << format.man_bits) - 1);
    const double frac = std::ldexp(static_cast<double>(man), -format.man_bits);

    double mag;
    if (format.exp_bits == kFp16ExpBits && field == 0x1F) {
        mag = man == 0 ? std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::quiet_NaN();
    } else if (field == 0) {
        mag = std::ldexp(frac, 1 - format.bias);
    } else {
        mag = std::ldexp(1.0 + frac, field - format.bias);
    }
    return neg ? -mag : mag;
}

WeightWord encode_fp16(double value)
{
    if (std::isnan(value))
        throw Error("encode_fp16: NaN input");
    const std::uint16_t sign = std::signbit(value) ? 0x8000 : 0;
    const double mag = std::fabs(value);
    if (mag == 0.0)
        return WeightWord{sign};
    if (mag >= 65520.0)  // would round to infinity
        return WeightWord{static_cast<std::uint16_t>(sign | 0x7BFF)};

    int e2 = 0;
    std::frexp(mag, &e2);
    const int unbiased = e2 - 1;
    if (unbiased < -14) {
        const double q = std::nearbyint(std::ldexp(mag, 24));
        return WeightWord{static_cast<std::uint16_t>(sign | static_cast<unsigned>(q))};
    }
    double m = std::nearbyint((std::ldexp(mag, -unbiased) - 1.0) * 1024.0);
    int field = unbiased + kFp16Bias;
    if (m >= 1024.0) {
        m = 0.0;
        ++field;
    }
    if (field >= 31)
        return WeightWord{static_cast<std::uint16_t>(sign | 0x7BFF)};
    return WeightWord{static_cast<std::uint16_t>(sign | (field << 10) | static_cast<unsigned>(m))};
}

}  // namespace sq
