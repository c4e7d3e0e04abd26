#include "smartquant/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace sq::kernels {

const KernelSet& scalar()
{
    static const KernelSet set{"scalar", detail::to_planes_scalar, detail::from_planes_scalar};
    return set;
}

const KernelSet* avx2()
{
#if defined(SQ_BUILD_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    static const KernelSet set{"avx2", detail::to_planes_avx2, detail::from_planes_avx2};
    return supported ? &set : nullptr;
#else
    return nullptr;
#endif
}

const KernelSet& active()
{
    static const KernelSet* chosen = [] {
        const char* env = std::getenv("SMARTQUANT_KERNELS");
        if (env && std::string_view(env) == "scalar")
            return &scalar();
        const KernelSet* v = avx2();
        return v ? v : &scalar();
    }();
    return *chosen;
}

}  // namespace sq::kernels
