#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sq {

inline constexpr int kFp16ExpBits = 5;
inline constexpr int kFp16ManBits = 10;
inline constexpr int kFp16Bias = 15;
inline constexpr int kNumPlanes = 16;

/// A minifloat layout that is a sub-slice of IEEE half precision.
///
/// Formats sharing the FP16 exponent frame (5 exponent bits, bias 15) keep
/// IEEE conventions: the all-ones exponent is reserved and subnormals exist.
/// Narrower-exponent formats use every exponent code for finite normals and
/// have no subnormals. FP0 is the zero-width "skip" format.
struct FpFormat {
    std::string name;
    int sign_bits = 1;
    int exp_bits = 0;
    int man_bits = 0;
    int bias = 0;

    /// Validating constructor; bias defaults to 2^(exp_bits-1) - 1.
    static FpFormat make(std::string name, int exp_bits, int man_bits,
                         std::optional<int> bias = std::nullopt);
    static FpFormat skip(std::string name = "FP0");

    int total_bits() const { return sign_bits + exp_bits + man_bits; }
    bool is_skip() const { return total_bits() == 0; }
    bool shares_fp16_frame() const { return exp_bits == kFp16ExpBits && bias == kFp16Bias; }
    int max_exp_field() const;

    friend bool operator==(const FpFormat&, const FpFormat&) = default;
};

FpFormat fp16_format();

/// Ordered list of formats, highest precision first.
class FormatLadder {
public:
    FormatLadder() = default;
    explicit FormatLadder(std::vector<FpFormat> formats);

    static FormatLadder defaults();

    const std::vector<FpFormat>& formats() const { return formats_; }
    std::size_t size() const { return formats_.size(); }
    const FpFormat& operator[](std::size_t i) const { return formats_[i]; }
    const FpFormat& by_name(std::string_view name) const;
    std::optional<std::size_t> index_of(std::string_view name) const;
    /// Index of the full-precision FP16 entry (throws if absent).
    std::size_t fp16_index() const;

private:
    std::vector<FpFormat> formats_;
};

struct GuardConfig {
    int exp_guard = 0;  // d_e
    int man_guard = 0;  // d_m

    friend bool operator==(const GuardConfig&, const GuardConfig&) = default;
};

enum class RoundingMode { TruncateTowardZero, RoundNearestEvenOnGuards };

std::string_view to_string(RoundingMode mode);
RoundingMode rounding_mode_from_string(std::string_view s);

struct WeightWord {
    std::uint16_t bits = 0;
    friend bool operator==(const WeightWord&, const WeightWord&) = default;
};

/// Set of bit-plane indices. Plane 0 is the sign, planes 1-5 the exponent
/// (MSB first), planes 6-15 the mantissa (MSB first); plane p therefore holds
/// bit 15-p of every stored FP16 word.
class PlaneSet {
public:
    constexpr PlaneSet() = default;
    constexpr explicit PlaneSet(std::uint16_t mask) : mask_(mask) {}

    static constexpr PlaneSet all() { return PlaneSet(0xFFFF); }

    constexpr bool contains(int plane) const { return (mask_ >> plane) & 1u; }
    int size() const;
    bool empty() const { return mask_ == 0; }
    std::uint16_t mask() const { return mask_; }
    /// Word-level mask of the FP16 bits that these planes carry.
    std::uint16_t word_mask() const;
    std::vector<int> indices() const;

    friend bool operator==(const PlaneSet&, const PlaneSet&) = default;

private:
    std::uint16_t mask_ = 0;
};

constexpr int word_bit_of_plane(int plane) { return 15 - plane; }

int fetched_exp_bits(const FpFormat& format, const GuardConfig& guard);
int fetched_man_bits(const FpFormat& format, const GuardConfig& guard);

PlaneSet plane_set(const FpFormat& format, const GuardConfig& guard);

/// Narrows a stored FP16 pattern to `target` using only the bits carried by
/// plane_set(target, guard).
WeightWord convert(WeightWord source, const FpFormat& target, const GuardConfig& guard,
                   RoundingMode mode);

/// Applies convert() to a span of already-masked or raw FP16 words.
void convert_many(std::span<const std::uint16_t> source, std::span<std::uint16_t> out,
                  const FpFormat& target, const GuardConfig& guard, RoundingMode mode);

double dequantize(WeightWord word, const FpFormat& format);

/// Nearest-even IEEE half encoding; magnitudes above 65504 saturate.
WeightWord encode_fp16(double value);

}  // namespace sq
