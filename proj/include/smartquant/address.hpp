#pragma once

#include "smartquant/bitplane.hpp"
#include "smartquant/quant.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace sq {

/// One region of the bloated logical space: L * N_i bits for format i.
struct Region {
    FpFormat format;
    std::size_t ladder_index = 0;
    std::uint64_t base_bit = 0;
    std::uint64_t size_bits = 0;

    std::uint64_t end_bit() const { return base_bit + size_bits; }
};

class RegionTable {
public:
    RegionTable() = default;
    RegionTable(std::uint64_t num_weights, std::vector<Region> regions);

    const std::vector<Region>& regions() const { return regions_; }
    std::uint64_t num_weights() const { return num_weights_; }
    std::uint64_t total_logical_bits() const;
    std::uint64_t physical_bits() const { return num_weights_ * 16; }
    /// Region backing ladder entry `ladder_index`; throws for FP0.
    const Region& region_for(std::size_t ladder_index) const;

private:
    std::uint64_t num_weights_ = 0;
    std::vector<Region> regions_;
};

RegionTable build_regions(std::uint64_t num_weights, const FormatLadder& ladder);

struct LogicalRead {
    std::uint64_t addr_bit = 0;
    std::uint64_t len_bits = 0;
};

struct ResolvedRead {
    FpFormat format;
    std::size_t ladder_index = 0;
    WeightRange weights;
};

/// Host-side address formula: the logical read that fetches `weights` from a region.
LogicalRead region_read(const Region& region, WeightRange weights);

ResolvedRead resolve(const RegionTable& table, const LogicalRead& read);

inline constexpr std::uint32_t kNoChunk = 0xFFFFFFFFu;

struct PhysicalRequest {
    std::uint64_t byte_addr = 0;  // 64-byte aligned
    std::uint64_t len_bytes = 0;  // multiple of 64
    int plane = -1;               // -1 for weight-contiguous fetches
    std::optional<ChunkKind> tag;
    std::uint32_t chunk = kNoChunk;

    friend bool operator==(const PhysicalRequest&, const PhysicalRequest&) = default;
};

std::uint64_t total_bytes(const std::vector<PhysicalRequest>& requests);

std::vector<PhysicalRequest> translate(const FpFormat& format, WeightRange weights,
                                       const GuardConfig& guard, const PlaneLayout& layout);
std::vector<PhysicalRequest> translate(const ResolvedRead& resolved, const GuardConfig& guard,
                                       const PlaneLayout& layout);

/// Weight-by-weight FP16 storage; each chunk starts on a 64-byte boundary.
class TraditionalLayout {
public:
    static TraditionalLayout contiguous(std::uint64_t num_weights, std::uint64_t base_addr = 0);
    static TraditionalLayout from_directory(const ChunkDirectory& directory,
                                            std::uint64_t base_addr = 0);

    std::uint64_t num_weights() const { return num_weights_; }
    std::uint64_t footprint() const { return footprint_; }
    /// Byte extents [begin, end) holding `weights`, one per chunk touched.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> extents(WeightRange weights) const;

private:
    std::uint64_t num_weights_ = 0;
    std::uint64_t footprint_ = 0;
    std::vector<std::uint64_t> chunk_starts_;  // weight index of each chunk
    std::vector<std::uint64_t> chunk_bases_;   // byte address of each chunk
};

/// Full-precision fetch in 64-byte requests; FP0 returns nothing.
std::vector<PhysicalRequest> translate_traditional(const FpFormat& format, WeightRange weights,
                                                   const TraditionalLayout& layout);

/// Device-side buffer that retains the most recently fetched 64-byte line of
/// each plane, so consecutive chunk reads do not re-fetch a shared boundary line.
class PlaneLineBuffer {
public:
    std::vector<PhysicalRequest> filter(std::vector<PhysicalRequest> requests);
    void clear() { last_line_.fill(std::nullopt); }

private:
    std::array<std::optional<std::uint64_t>, kNumPlanes> last_line_{};
};

}  // namespace sq
