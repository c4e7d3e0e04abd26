#include "smartquant/kernels.hpp"

namespace sq::kernels::detail {

// `first` must be a multiple of 8; words before it are left untouched.
void to_planes_scalar_range(std::span<const std::uint16_t> words, const PlaneOutputs& planes,
                            std::size_t first)
{
    const std::size_t n = words.size();
    for (std::size_t base = first; base < n; base += 8) {
        const std::size_t group = n - base < 8 ? n - base : 8;
        for (int p = 0; p < 16; ++p) {
            const int bit = 15 - p;
            unsigned byte = 0;
            for (std::size_t i = 0; i < group; ++i)
                byte |= ((words[base + i] >> bit) & 1u) << i;
            planes[p][base / 8] = static_cast<std::uint8_t>(byte);
        }
    }
}

void from_planes_scalar_range(const PlaneInputs& planes, std::span<std::uint16_t> words,
                              std::size_t first)
{
    const std::size_t n = words.size();
    for (std::size_t i = first; i < n; ++i)
        words[i] = 0;
    for (int p = 0; p < 16; ++p) {
        if (!planes[p])
            continue;
        const int bit = 15 - p;
        for (std::size_t i = first; i < n; ++i) {
            const unsigned b = (planes[p][i / 8] >> (i % 8)) & 1u;
            words[i] = static_cast<std::uint16_t>(words[i] | (b << bit));
        }
    }
}

void to_planes_scalar(std::span<const std::uint16_t> words, const PlaneOutputs& planes)
{
    to_planes_scalar_range(words, planes, 0);
}

void from_planes_scalar(const PlaneInputs& planes, std::span<std::uint16_t> words)
{
    from_planes_scalar_range(planes, words, 0);
}

}  // namespace sq::kernels::detail
