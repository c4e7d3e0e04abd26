#include "smartquant/kernels.hpp"

#if defined(SQ_BUILD_AVX2)

#include <immintrin.h>

#include <cstring>

namespace sq::kernels::detail {

namespace {

// Splits 32 words into their low and high bytes, each in word order.
inline void split_bytes(const std::uint16_t* src, __m256i& lo, __m256i& hi)
{
    const __m256i shuf = _mm256_setr_epi8(0, 2, 4, 6, 8, 10, 12, 14, 1, 3, 5, 7, 9, 11, 13, 15,
                                          0, 2, 4, 6, 8, 10, 12, 14, 1, 3, 5, 7, 9, 11, 13, 15);
    __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src));
    __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + 16));
    a = _mm256_permute4x64_epi64(_mm256_shuffle_epi8(a, shuf), _MM_SHUFFLE(3, 1, 2, 0));
    b = _mm256_permute4x64_epi64(_mm256_shuffle_epi8(b, shuf), _MM_SHUFFLE(3, 1, 2, 0));
    lo = _mm256_permute2x128_si256(a, b, 0x20);
    hi = _mm256_permute2x128_si256(a, b, 0x31);
}

inline std::uint32_t bit_column(__m256i bytes, int k)
{
    // Shifting 16-bit lanes moves bit k of both bytes into their MSBs.
    const __m256i shifted = _mm256_sll_epi16(bytes, _mm_cvtsi32_si128(7 - k));
    return static_cast<std::uint32_t>(_mm256_movemask_epi8(shifted));
}

inline __m256i expand_bits(std::uint32_t mask)
{
    const __m256i spread = _mm256_setr_epi8(0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1,
                                            2, 2, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 3);
    const __m256i select = _mm256_set1_epi64x(static_cast<long long>(0x8040201008040201ULL));
    __m256i v = _mm256_shuffle_epi8(_mm256_set1_epi32(static_cast<int>(mask)), spread);
    return _mm256_cmpeq_epi8(_mm256_and_si256(v, select), select);
}

}  // namespace

void to_planes_avx2(std::span<const std::uint16_t> words, const PlaneOutputs& planes)
{
    const std::size_t n = words.size();
    const std::size_t vec_end = n & ~std::size_t{31};
    for (std::size_t base = 0; base < vec_end; base += 32) {
        __m256i lo, hi;
        split_bytes(words.data() + base, lo, hi);
        for (int k = 0; k < 8; ++k) {
            const std::uint32_t lo_col = bit_column(lo, k);
            const std::uint32_t hi_col = bit_column(hi, k);
            std::memcpy(planes[15 - k] + base / 8, &lo_col, 4);
            std::memcpy(planes[7 - k] + base / 8, &hi_col, 4);
        }
    }
    to_planes_scalar_range(words, planes, vec_end);
}

void from_planes_avx2(const PlaneInputs& planes, std::span<std::uint16_t> words)
{
    const std::size_t n = words.size();
    const std::size_t vec_end = n & ~std::size_t{31};
    for (std::size_t base = 0; base < vec_end; base += 32) {
        __m256i lo = _mm256_setzero_si256();
        __m256i hi = _mm256_setzero_si256();
        for (int p = 0; p < 16; ++p) {
            if (!planes[p])
                continue;
            std::uint32_t col;
            std::memcpy(&col, planes[p] + base / 8, 4);
            const int bit = 15 - p;
            const __m256i set = _mm256_and_si256(expand_bits(col),
                                                 _mm256_set1_epi8(static_cast<char>(1u << (bit & 7))));
            if (bit >= 8)
                hi = _mm256_or_si256(hi, set);
            else
                lo = _mm256_or_si256(lo, set);
        }
        const __m256i a = _mm256_unpacklo_epi8(lo, hi);
        const __m256i b = _mm256_unpackhi_epi8(lo, hi);
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(words.data() + base),
                            _mm256_permute2x128_si256(a, b, 0x20));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(words.data() + base + 16),
                            _mm256_permute2x128_si256(a, b, 0x31));
    }
    from_planes_scalar_range(planes, words, vec_end);
}

}  // namespace sq::kernels::detail

#endif
