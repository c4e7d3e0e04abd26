#pragma once

#include "smartquant/quant.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace sq {

inline constexpr std::uint64_t kGranuleBytes = 64;

constexpr std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }
constexpr std::uint64_t align_down(std::uint64_t v, std::uint64_t a) { return v / a * a; }

/// Half-open range of weight indices.
struct WeightRange {
    std::uint64_t start = 0;
    std::uint64_t count = 0;
    std::uint64_t end() const { return start + count; }
};

enum class ChunkKind : std::uint8_t { AttentionHead, MlpNeuron, Predictor };

std::string_view to_string(ChunkKind kind);
ChunkKind chunk_kind_from_string(std::string_view s);

struct Chunk {
    std::uint32_t id = 0;
    std::uint64_t start = 0;
    std::uint64_t length = 0;
    ChunkKind kind = ChunkKind::AttentionHead;

    WeightRange range() const { return {start, length}; }
};

/// Ordered chunk list that tiles [0, L) exactly.
class ChunkDirectory {
public:
    ChunkDirectory() = default;
    explicit ChunkDirectory(std::vector<Chunk> chunks);

    const std::vector<Chunk>& chunks() const { return chunks_; }
    std::size_t size() const { return chunks_.size(); }
    const Chunk& operator[](std::size_t i) const { return chunks_[i]; }
    std::uint64_t num_weights() const;
    /// Index of the chunk containing weight `w`.
    std::size_t find(std::uint64_t w) const;

private:
    std::vector<Chunk> chunks_;
};

/// Placement metadata of a bit-plane image, without the payload.
struct PlaneLayout {
    std::uint64_t num_weights = 0;
    std::uint64_t plane_stride = 0;  // bytes, multiple of 64
    std::uint64_t base_addr = 0;     // physical byte address of plane 0

    static PlaneLayout for_weights(std::uint64_t num_weights, std::uint64_t base_addr = 0);
    std::uint64_t plane_addr(int plane) const { return base_addr + plane * plane_stride; }
    std::uint64_t footprint() const { return kNumPlanes * plane_stride; }

    friend bool operator==(const PlaneLayout&, const PlaneLayout&) = default;
};

/// Plane-major physical image of L FP16 weights. Immutable after pack().
class BitPlaneImage {
public:
    BitPlaneImage() = default;
    BitPlaneImage(PlaneLayout layout, std::vector<std::uint8_t> storage);

    const PlaneLayout& layout() const { return layout_; }
    std::uint64_t num_weights() const { return layout_.num_weights; }
    std::uint64_t plane_stride() const { return layout_.plane_stride; }
    std::span<const std::uint8_t> plane(int p) const;
    std::span<const std::uint8_t> storage() const { return storage_; }

    friend bool operator==(const BitPlaneImage&, const BitPlaneImage&) = default;

private:
    PlaneLayout layout_;
    std::vector<std::uint8_t> storage_;
};

struct PlaneSegment {
    int plane_index = 0;
    std::uint64_t bit_offset = 0;
    std::uint64_t bit_length = 0;
    /// Segment bits re-based to bit 0, LSB-first within each byte.
    std::vector<std::uint8_t> payload;

    bool bit(std::uint64_t i) const { return (payload[i / 8] >> (i % 8)) & 1u; }
};

BitPlaneImage pack(std::span<const std::uint16_t> weights, std::uint64_t base_addr = 0);

std::vector<std::uint16_t> unpack_full(const BitPlaneImage& image, WeightRange range);

std::vector<PlaneSegment> fetch_planes(const BitPlaneImage& image, WeightRange chunk,
                                       const PlaneSet& planes);

/// Assembles partial words from fetched segments and narrows them to `target`.
std::vector<std::uint16_t> reconstruct(std::span<const PlaneSegment> segments,
                                       const FpFormat& target, const GuardConfig& guard,
                                       RoundingMode mode);

/// Copies `bit_length` bits starting at `bit_offset` into a zero-based buffer.
std::vector<std::uint8_t> extract_bits(std::span<const std::uint8_t> src, std::uint64_t bit_offset,
                                       std::uint64_t bit_length);

// Store-image file ("SQBP"); byte layout documented in docs/formats.md.
void write_image(const std::filesystem::path& path, const BitPlaneImage& image,
                 const FormatLadder& ladder);
struct LoadedImage {
    BitPlaneImage image;
    FormatLadder ladder;
};
LoadedImage read_image(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_image(const BitPlaneImage& image, const FormatLadder& ladder);
LoadedImage deserialize_image(std::span<const std::uint8_t> bytes);

}  // namespace sq
