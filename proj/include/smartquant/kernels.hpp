#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

// Bit-transpose kernels between FP16 word arrays and 16 bit-plane arrays.
//
// Plane p holds bit 15-p of every word. Within a plane, word i lives in
// byte i/8 at bit position i%8. Every plane buffer must hold ceil(n/8)
// bytes. Each kernel has a scalar reference and, where the target allows,
// an AVX2 variant; the variants are bit-exact with each other.
namespace sq::kernels {

using PlaneOutputs = std::array<std::uint8_t*, 16>;
// A null input plane reads as all-zero bits.
using PlaneInputs = std::array<const std::uint8_t*, 16>;

using ToPlanesFn = void (*)(std::span<const std::uint16_t> words, const PlaneOutputs& planes);
using FromPlanesFn = void (*)(const PlaneInputs& planes, std::span<std::uint16_t> words);

struct KernelSet {
    std::string_view name;
    ToPlanesFn to_planes;
    FromPlanesFn from_planes;
};

const KernelSet& scalar();
/// Null when the build or the running CPU lacks AVX2.
const KernelSet* avx2();
/// Best available set. SMARTQUANT_KERNELS=scalar forces the reference path.
const KernelSet& active();

namespace detail {
void to_planes_scalar(std::span<const std::uint16_t> words, const PlaneOutputs& planes);
void from_planes_scalar(const PlaneInputs& planes, std::span<std::uint16_t> words);
void to_planes_scalar_range(std::span<const std::uint16_t> words, const PlaneOutputs& planes,
                            std::size_t first);
void from_planes_scalar_range(const PlaneInputs& planes, std::span<std::uint16_t> words,
                              std::size_t first);
#if defined(SQ_BUILD_AVX2)
void to_planes_avx2(std::span<const std::uint16_t> words, const PlaneOutputs& planes);
void from_planes_avx2(const PlaneInputs& planes, std::span<std::uint16_t> words);
#endif
}  // namespace detail

}  // namespace sq::kernels
