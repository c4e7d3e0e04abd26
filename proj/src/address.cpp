#include "smartquant/address.hpp"

#include "smartquant/error.hpp"

#include <algorithm>

namespace sq {

RegionTable::RegionTable(std::uint64_t num_weights, std::vector<Region> regions)
    : num_weights_(num_weights), regions_(std::move(regions))
{
    std::uint64_t next = 0;
    for (const Region& r : regions_) {
        if (r.base_bit != next)
            throw Error("regions must be contiguous");
        if (r.size_bits != num_weights_ * static_cast<std::uint64_t>(r.format.total_bits()) ||
            r.size_bits == 0)
            throw Error("region size must equal L * N_i");
        next = r.end_bit();
    }
}

std::uint64_t RegionTable::total_logical_bits() const
{
    return regions_.empty() ? 0 : regions_.back().end_bit();
}

const Region& RegionTable::region_for(std::size_t ladder_index) const
{
    for (const Region& r : regions_)
        if (r.ladder_index == ladder_index)
            return r;
    throw Error("no logical region for ladder entry " + std::to_string(ladder_index));
}

RegionTable build_regions(std::uint64_t num_weights, const FormatLadder& ladder)
{
    if (num_weights == 0)
        throw Error("build_regions: L must be at least 1");
    std::vector<Region> regions;
    std::uint64_t base = 0;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        const FpFormat& f = ladder[i];
        if (f.is_skip())
            continue;
        Region r{f, i, base, num_weights * static_cast<std::uint64_t>(f.total_bits())};
        base = r.end_bit();
        regions.push_back(std::move(r));
    }
    return RegionTable(num_weights, std::move(regions));
}

LogicalRead region_read(const Region& region, WeightRange weights)
{
    const std::uint64_t n = static_cast<std::uint64_t>(region.format.total_bits());
    if (weights.end() * n > region.size_bits)
        throw Error("weight range outside region");
    return LogicalRead{region.base_bit + weights.start * n, weights.count * n};
}

ResolvedRead resolve(const RegionTable& table, const LogicalRead& read)
{
    const auto& regions = table.regions();
    auto it = std::upper_bound(regions.begin(), regions.end(), read.addr_bit,
                               [](std::uint64_t a, const Region& r) { return a < r.base_bit; });
    if (it == regions.begin() || read.addr_bit >= table.total_logical_bits())
        throw Error("logical read outside the region table");
    const Region& r = *std::prev(it);
    if (read.addr_bit + read.len_bits > r.end_bit())
        throw Error("cross-region read");
    const std::uint64_t n = static_cast<std::uint64_t>(r.format.total_bits());
    const std::uint64_t offset = read.addr_bit - r.base_bit;
    if (offset % n != 0 || read.len_bits % n != 0)
        throw Error("not weight-aligned");
    return ResolvedRead{r.format, r.ladder_index, WeightRange{offset / n, read.len_bits / n}};
}

std::uint64_t total_bytes(const std::vector<PhysicalRequest>& requests)
{
    std::uint64_t sum = 0;
    for (const auto& r : requests)
        sum += r.len_bytes;
    return sum;
}

std::vector<PhysicalRequest> translate(const FpFormat& format, WeightRange weights,
                                       const GuardConfig& guard, const PlaneLayout& layout)
{
    if (format.is_skip())
        throw Error("translate: FP0 chunks are skipped upstream");
    if (weights.end() > layout.num_weights)
        throw Error("translate: weight range outside image");
    std::vector<PhysicalRequest> out;
    if (weights.count == 0)
        return out;
    const std::uint64_t first_byte = weights.start / 8;
    const std::uint64_t last_byte = (weights.end() + 7) / 8;
    const std::uint64_t begin = align_down(first_byte, kGranuleBytes);
    const std::uint64_t end = align_up(last_byte, kGranuleBytes);
    for (int p : plane_set(format, guard).indices()) {
        PhysicalRequest r;
        r.byte_addr = layout.plane_addr(p) + begin;
        r.len_bytes = end - begin;
        r.plane = p;
        out.push_back(r);
    }
    return out;
}

std::vector<PhysicalRequest> translate(const ResolvedRead& resolved, const GuardConfig& guard,
                                       const PlaneLayout& layout)
{
    return translate(resolved.format, resolved.weights, guard, layout);
}

TraditionalLayout TraditionalLayout::contiguous(std::uint64_t num_weights, std::uint64_t base_addr)
{
    if (base_addr % kGranuleBytes != 0)
        throw Error("traditional layout base must be 64-byte aligned");
    TraditionalLayout l;
    l.num_weights_ = num_weights;
    l.chunk_starts_ = {0};
    l.chunk_bases_ = {base_addr};
    l.footprint_ = align_up(num_weights * 2, kGranuleBytes);
    return l;
}

TraditionalLayout TraditionalLayout::from_directory(const ChunkDirectory& directory,
                                                    std::uint64_t base_addr)
{
    if (base_addr % kGranuleBytes != 0)
        throw Error("traditional layout base must be 64-byte aligned");
    TraditionalLayout l;
    l.num_weights_ = directory.num_weights();
    std::uint64_t addr = base_addr;
    for (const Chunk& c : directory.chunks()) {
        l.chunk_starts_.push_back(c.start);
        l.chunk_bases_.push_back(addr);
        addr += align_up(c.length * 2, kGranuleBytes);
    }
    l.footprint_ = addr - base_addr;
    return l;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> TraditionalLayout::extents(WeightRange weights) const
{
    if (weights.end() > num_weights_)
        throw Error("weight range outside traditional layout");
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    std::uint64_t w = weights.start;
    while (w < weights.end()) {
        auto it = std::upper_bound(chunk_starts_.begin(), chunk_starts_.end(), w);
        const auto i = static_cast<std::size_t>(std::distance(chunk_starts_.begin(), it) - 1);
        const std::uint64_t chunk_end = i + 1 < chunk_starts_.size() ? chunk_starts_[i + 1] : num_weights_;
        const std::uint64_t stop = std::min(chunk_end, weights.end());
        out.emplace_back(chunk_bases_[i] + (w - chunk_starts_[i]) * 2,
                         chunk_bases_[i] + (stop - chunk_starts_[i]) * 2);
        w = stop;
    }
    return out;
}

std::vector<PhysicalRequest> translate_traditional(const FpFormat& format, WeightRange weights,
                                                   const TraditionalLayout& layout)
{
    std::vector<PhysicalRequest> out;
    if (format.is_skip() || weights.count == 0)
        return out;
    std::uint64_t last_emitted = 0;
    bool any = false;
    for (auto [begin, end] : layout.extents(weights)) {
        for (std::uint64_t a = align_down(begin, kGranuleBytes); a < end; a += kGranuleBytes) {
            if (any && a <= last_emitted)
                continue;
            PhysicalRequest r;
            r.byte_addr = a;
            r.len_bytes = kGranuleBytes;
            out.push_back(r);
            last_emitted = a;
            any = true;
        }
    }
    return out;
}

std::vector<PhysicalRequest> PlaneLineBuffer::filter(std::vector<PhysicalRequest> requests)
{
    std::vector<PhysicalRequest> out;
    out.reserve(requests.size());
    for (PhysicalRequest r : requests) {
        if (r.plane >= 0 && r.plane < kNumPlanes) {
            auto& last = last_line_[r.plane];
            if (last && *last == r.byte_addr) {
                r.byte_addr += kGranuleBytes;
                r.len_bytes -= kGranuleBytes;
            }
            if (r.len_bytes == 0)
                continue;
            last = r.byte_addr + r.len_bytes - kGranuleBytes;
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace sq
