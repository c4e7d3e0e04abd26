#include "smartquant/address.hpp"
#include "smartquant/error.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace sq;

namespace {

const FormatLadder& ladder()
{
    static const FormatLadder l = FormatLadder::defaults();
    return l;
}

const FpFormat& fmt(const char* n) { return ladder().by_name(n); }

// Set of 64-byte lines touched by a bit range of one plane.
std::set<std::uint64_t> lines_for(const PlaneLayout& layout, int plane, std::uint64_t start, std::uint64_t count)
{
    std::set<std::uint64_t> lines;
    for (std::uint64_t b = start; b < start + count; ++b)
        lines.insert((layout.plane_addr(plane) + b / 8) / 64);
    return lines;
}

}  // namespace

TEST(Regions, Sizes)
{
    const RegionTable t = build_regions(1000, ladder());
    ASSERT_EQ(t.regions().size(), 5u);
    const std::uint64_t sizes[] = {16000, 12000, 8000, 6000, 4000};
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_EQ(t.regions()[i].size_bits, sizes[i]);
    EXPECT_EQ(t.total_logical_bits(), 46000u);
    EXPECT_EQ(t.physical_bits(), 16000u);
    EXPECT_THROW(t.region_for(5), Error);  // FP0

    const RegionTable one = build_regions(1, FormatLadder({fp16_format()}));
    EXPECT_EQ(one.total_logical_bits(), 16u);
    EXPECT_EQ(one.total_logical_bits(), one.physical_bits());
    EXPECT_THROW(build_regions(0, ladder()), Error);
}

TEST(Regions, PrefixBases)
{
    const RegionTable t = build_regions(64, ladder());
    const std::uint64_t bases[] = {0, 1024, 1792, 2304, 2688};
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_EQ(t.regions()[i].base_bit, bases[i]);
}

TEST(Resolve, Examples)
{
    const RegionTable t = build_regions(64, ladder());
    ResolvedRead r = resolve(t, {1024, 24});
    EXPECT_EQ(r.format.name, "FP12");
    EXPECT_EQ(r.weights.start, 0u);
    EXPECT_EQ(r.weights.count, 2u);
    r = resolve(t, {0, 1024});
    EXPECT_EQ(r.format.name, "FP16");
    EXPECT_EQ(r.weights.count, 64u);
    r = resolve(t, {1792 + 8 * 10, 8 * 5});
    EXPECT_EQ(r.format.name, "FP8");
    EXPECT_EQ(r.weights.start, 10u);
    EXPECT_EQ(r.weights.count, 5u);
}

TEST(Resolve, Errors)
{
    const RegionTable t = build_regions(64, ladder());
    auto msg = [&](LogicalRead rd) {
        try {
            resolve(t, rd);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(msg({1000, 48}).find("cross-region read"), std::string::npos);
    EXPECT_NE(msg({1024 + 6, 12}).find("not weight-aligned"), std::string::npos);
    EXPECT_NE(msg({1024, 13}).find("not weight-aligned"), std::string::npos);
    EXPECT_NE(msg({2688 + 256, 4}), "no error");
}

TEST(Resolve, RoundTripsRegionAddressing)
{
    std::mt19937_64 rng(4);
    const std::uint64_t L = 12'345;
    const RegionTable t = build_regions(L, ladder());
    for (const Region& reg : t.regions())
        for (int k = 0; k < 200; ++k) {
            const std::uint64_t a = rng() % L;
            const std::uint64_t n = 1 + rng() % (L - a);
            const ResolvedRead r = resolve(t, region_read(reg, {a, n}));
            ASSERT_EQ(r.ladder_index, reg.ladder_index);
            ASSERT_EQ(r.weights.start, a);
            ASSERT_EQ(r.weights.count, n);
        }
}

TEST(Translate, WholePlanes)
{
    const PlaneLayout layout = PlaneLayout::for_weights(32'768);
    ASSERT_EQ(layout.plane_stride, 4096u);
    const auto reqs = translate(fp16_format(), {0, 32'768}, {}, layout);
    ASSERT_EQ(reqs.size(), 16u);
    for (const auto& r : reqs)
        EXPECT_EQ(r.len_bytes, 4096u);
}

TEST(Translate, Fp8OneBurstPerPlane)
{
    const PlaneLayout layout = PlaneLayout::for_weights(4096);
    const auto reqs = translate(fmt("FP8"), {0, 512}, {}, layout);
    ASSERT_EQ(reqs.size(), 8u);
    for (const auto& r : reqs) {
        EXPECT_EQ(r.len_bytes, 64u);
        EXPECT_EQ(r.byte_addr, layout.plane_addr(r.plane));
    }
}

TEST(Translate, NeuronChunkFp6)
{
    const PlaneLayout layout = PlaneLayout::for_weights(100'000);
    const auto reqs = translate(fmt("FP6"), {0, 7'200}, {}, layout);
    ASSERT_EQ(reqs.size(), 6u);
    for (const auto& r : reqs)
        EXPECT_EQ(r.len_bytes, 960u);
}

// Requested lines equal the brute-force set of lines that hold the chunk's bits.
TEST(Translate, MatchesBruteForceLineSet)
{
    std::mt19937_64 rng(12);
    const PlaneLayout layout = PlaneLayout::for_weights(50'000, 1 << 20);
    for (int k = 0; k < 100; ++k) {
        const std::uint64_t a = rng() % 50'000;
        const std::uint64_t n = 1 + rng() % std::min<std::uint64_t>(5'000, 50'000 - a);
        const FpFormat& f = ladder()[rng() % 5];
        const GuardConfig g{static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)};
        const auto reqs = translate(f, {a, n}, g, layout);
        std::set<std::uint64_t> expect, got;
        for (int p : plane_set(f, g).indices())
            for (auto l : lines_for(layout, p, a, n))
                expect.insert(l);
        std::uint64_t prev_end = 0;
        for (const auto& r : reqs) {
            ASSERT_EQ(r.byte_addr % 64, 0u);
            ASSERT_EQ(r.len_bytes % 64, 0u);
            ASSERT_GE(r.byte_addr, prev_end) << "sorted and disjoint";
            prev_end = r.byte_addr + r.len_bytes;
            for (std::uint64_t x = r.byte_addr; x < prev_end; x += 64)
                got.insert(x / 64);
        }
        ASSERT_EQ(got, expect);
    }
}

TEST(Translate, SkipFormatRejected)
{
    const PlaneLayout layout = PlaneLayout::for_weights(1000);
    EXPECT_THROW(translate(fmt("FP0"), {0, 10}, {}, layout), Error);
}

TEST(Translate, ProportionalityApproachesPlaneRatio)
{
    for (std::uint64_t count : {1u << 10, 1u << 16, 1u << 20}) {
        const PlaneLayout layout = PlaneLayout::for_weights(count);
        const TraditionalLayout trad = TraditionalLayout::contiguous(count);
        for (const char* name : {"FP12", "FP8", "FP6", "FP4"}) {
            const FpFormat& f = fmt(name);
            const double ratio = static_cast<double>(total_bytes(translate(f, {0, count}, {}, layout))) /
                                 static_cast<double>(total_bytes(translate_traditional(f, {0, count}, trad)));
            const double expect = plane_set(f, {}).size() / 16.0;
            EXPECT_NEAR(ratio, expect, 64.0 * 16.0 / static_cast<double>(count)) << name << " count " << count;
        }
    }
}

TEST(Traditional, FormatIndependent)
{
    const TraditionalLayout trad = TraditionalLayout::contiguous(4096);
    const auto full = translate_traditional(fp16_format(), {0, 512}, trad);
    EXPECT_EQ(full.size(), 16u);
    EXPECT_EQ(total_bytes(full), 1024u);
    for (const auto& r : full)
        EXPECT_EQ(r.len_bytes, 64u);
    EXPECT_EQ(translate_traditional(fmt("FP8"), {0, 512}, trad), full);
    EXPECT_TRUE(translate_traditional(fmt("FP0"), {0, 512}, trad).empty());
}

TEST(Traditional, ChunkBasesAreAligned)
{
    const ChunkDirectory dir({{0, 0, 33, ChunkKind::AttentionHead}, {1, 33, 40, ChunkKind::MlpNeuron}});
    const TraditionalLayout trad = TraditionalLayout::from_directory(dir);
    const auto ext = trad.extents({33, 40});
    ASSERT_EQ(ext.size(), 1u);
    EXPECT_EQ(ext[0].first, 128u);  // 66 bytes round up to 128
    EXPECT_EQ(ext[0].second, 208u);
}

TEST(PlaneLineBuffer, TrimsSharedLeadingLine)
{
    const PlaneLayout layout = PlaneLayout::for_weights(100'000);
    PlaneLineBuffer buf;
    // Chunk 0 ends mid-line; chunk 1 starts in that line.
    const auto a = buf.filter(translate(fmt("FP8"), {0, 7'200}, {}, layout));
    const auto b = buf.filter(translate(fmt("FP8"), {7'200, 7'200}, {}, layout));
    EXPECT_EQ(total_bytes(a), 8u * 960u);
    EXPECT_EQ(total_bytes(b), 8u * 896u);
    // A non-adjacent chunk shares nothing.
    const auto c = buf.filter(translate(fmt("FP8"), {50'000, 7'200}, {}, layout));
    EXPECT_EQ(total_bytes(c), total_bytes(translate(fmt("FP8"), {50'000, 7'200}, {}, layout)));
}
