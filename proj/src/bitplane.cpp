#include "smartquant/bitplane.hpp"

#include "smartquant/error.hpp"
#include "smartquant/kernels.hpp"

#include <algorithm>

namespace sq {

std::string_view to_string(ChunkKind kind)
{
    switch (kind) {
    case ChunkKind::AttentionHead: return "attention";
    case ChunkKind::MlpNeuron: return "mlp";
    case ChunkKind::Predictor: return "predictor";
    }
    return "?";
}

ChunkKind chunk_kind_from_string(std::string_view s)
{
    if (s == "attention")
        return ChunkKind::AttentionHead;
    if (s == "mlp")
        return ChunkKind::MlpNeuron;
    if (s == "predictor")
        return ChunkKind::Predictor;
    throw Error("unknown chunk kind: " + std::string(s));
}

ChunkDirectory::ChunkDirectory(std::vector<Chunk> chunks) : chunks_(std::move(chunks))
{
    std::uint64_t next = 0;
    for (const Chunk& c : chunks_) {
        if (c.start != next)
            throw Error("chunk " + std::to_string(c.id) + " does not start where the previous ends");
        if (c.length == 0)
            throw Error("chunk " + std::to_string(c.id) + " is empty");
        next = c.start + c.length;
    }
}

std::uint64_t ChunkDirectory::num_weights() const
{
    return chunks_.empty() ? 0 : chunks_.back().start + chunks_.back().length;
}

std::size_t ChunkDirectory::find(std::uint64_t w) const
{
    auto it = std::upper_bound(chunks_.begin(), chunks_.end(), w,
                               [](std::uint64_t v, const Chunk& c) { return v < c.start; });
    if (it == chunks_.begin() || w >= num_weights())
        throw Error("weight index outside chunk directory");
    return static_cast<std::size_t>(std::distance(chunks_.begin(), it) - 1);
}

PlaneLayout PlaneLayout::for_weights(std::uint64_t num_weights, std::uint64_t base_addr)
{
    if (base_addr % kGranuleBytes != 0)
        throw Error("plane image base address must be 64-byte aligned");
    PlaneLayout l;
    l.num_weights = num_weights;
    l.plane_stride = align_up((num_weights + 7) / 8, kGranuleBytes);
    l.base_addr = base_addr;
    return l;
}

BitPlaneImage::BitPlaneImage(PlaneLayout layout, std::vector<std::uint8_t> storage)
    : layout_(layout), storage_(std::move(storage))
{
    if (storage_.size() != layout_.footprint())
        throw Error("bit-plane storage does not match layout footprint");
    if (layout_.plane_stride * 8 < layout_.num_weights)
        throw Error("plane stride too small for weight count");
}

std::span<const std::uint8_t> BitPlaneImage::plane(int p) const
{
    if (p < 0 || p >= kNumPlanes)
        throw Error("plane index out of range");
    return std::span<const std::uint8_t>(storage_).subspan(p * layout_.plane_stride,
                                                           layout_.plane_stride);
}

BitPlaneImage pack(std::span<const std::uint16_t> weights, std::uint64_t base_addr)
{
    if (weights.empty())
        throw Error("pack: empty weight sequence");
    const PlaneLayout layout = PlaneLayout::for_weights(weights.size(), base_addr);
    std::vector<std::uint8_t> storage(layout.footprint(), 0);
    kernels::PlaneOutputs planes{};
    for (int p = 0; p < kNumPlanes; ++p)
        planes[p] = storage.data() + p * layout.plane_stride;
    kernels::active().to_planes(weights, planes);
    return BitPlaneImage(layout, std::move(storage));
}

std::vector<std::uint8_t> extract_bits(std::span<const std::uint8_t> src, std::uint64_t bit_offset,
                                       std::uint64_t bit_length)
{
    if (bit_offset + bit_length > src.size() * 8)
        throw Error("bit extraction past end of buffer");
    std::vector<std::uint8_t> out((bit_length + 7) / 8, 0);
    const std::uint64_t byte0 = bit_offset / 8;
    const unsigned shift = bit_offset % 8;
    if (shift == 0) {
        std::copy_n(src.begin() + byte0, out.size(), out.begin());
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            unsigned v = src[byte0 + i] >> shift;
            if (byte0 + i + 1 < src.size())
                v |= static_cast<unsigned>(src[byte0 + i + 1]) << (8 - shift);
            out[i] = static_cast<std::uint8_t>(v);
        }
    }
    if (const unsigned tail = bit_length % 8; tail != 0)
        out.back() &= static_cast<std::uint8_t>((1u << tail) - 1);
    return out;
}

std::vector<std::uint16_t> unpack_full(const BitPlaneImage& image, WeightRange range)
{
    if (range.end() > image.num_weights())
        throw Error("unpack_full: range outside image");
    std::vector<std::uint16_t> words(range.count);
    if (range.count == 0)
        return words;
    std::array<std::vector<std::uint8_t>, kNumPlanes> bits;
    kernels::PlaneInputs in{};
    for (int p = 0; p < kNumPlanes; ++p) {
        bits[p] = extract_bits(image.plane(p), range.start, range.count);
        in[p] = bits[p].data();
    }
    kernels::active().from_planes(in, words);
    return words;
}

std::vector<PlaneSegment> fetch_planes(const BitPlaneImage& image, WeightRange chunk,
                                       const PlaneSet& planes)
{
    if (planes.empty())
        throw Error("fetch_planes: empty plane set");
    if (chunk.end() > image.num_weights())
        throw Error("fetch_planes: chunk outside image");
    std::vector<PlaneSegment> out;
    for (int p : planes.indices()) {
        PlaneSegment seg;
        seg.plane_index = p;
        seg.bit_offset = chunk.start;
        seg.bit_length = chunk.count;
        seg.payload = extract_bits(image.plane(p), chunk.start, chunk.count);
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<std::uint16_t> reconstruct(std::span<const PlaneSegment> segments,
                                       const FpFormat& target, const GuardConfig& guard,
                                       RoundingMode mode)
{
    const PlaneSet expected = plane_set(target, guard);
    if (segments.empty())
        throw Error("reconstruct: no segments");
    const std::uint64_t n = segments.front().bit_length;
    std::uint16_t seen = 0;
    kernels::PlaneInputs in{};
    for (const PlaneSegment& s : segments) {
        if (s.bit_length != n)
            throw Error("reconstruct: mismatched segment lengths");
        if (s.plane_index < 0 || s.plane_index >= kNumPlanes || (seen >> s.plane_index) & 1u)
            throw Error("reconstruct: invalid or duplicate plane index");
        if (s.payload.size() * 8 < n)
            throw Error("reconstruct: segment payload shorter than its length");
        seen |= static_cast<std::uint16_t>(1u << s.plane_index);
        in[s.plane_index] = s.payload.data();
    }
    if (PlaneSet(seen) != expected)
        throw Error("reconstruct: segments do not match the target plane set");
    std::vector<std::uint16_t> partial(n);
    kernels::active().from_planes(in, partial);
    std::vector<std::uint16_t> out(n);
    convert_many(partial, out, target, guard, mode);
    return out;
}

}  // namespace sq
