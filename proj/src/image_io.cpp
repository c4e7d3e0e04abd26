#include "smartquant/bitplane.hpp"

#include "smartquant/error.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace sq {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'B', 'P'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kFixedHeader = 40;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v)
{
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    std::string get_string(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size())
            throw Error("SQBP image truncated");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_image(const BitPlaneImage& image, const FormatLadder& ladder)
{
    std::vector<std::uint8_t> ladder_bytes;
    for (const FpFormat& f : ladder.formats()) {
        if (f.name.size() > 255)
            throw Error("format name too long for SQBP header");
        ladder_bytes.push_back(static_cast<std::uint8_t>(f.name.size()));
        ladder_bytes.insert(ladder_bytes.end(), f.name.begin(), f.name.end());
        ladder_bytes.push_back(static_cast<std::uint8_t>(f.exp_bits));
        ladder_bytes.push_back(static_cast<std::uint8_t>(f.man_bits));
        ladder_bytes.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(f.bias)));
    }
    const std::uint32_t header_bytes =
        static_cast<std::uint32_t>(align_up(kFixedHeader + ladder_bytes.size(), kGranuleBytes));

    std::vector<std::uint8_t> out;
    out.reserve(header_bytes + image.storage().size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_le<std::uint16_t>(out, kVersion);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ladder.size()));
    put_le<std::uint64_t>(out, image.num_weights());
    put_le<std::uint64_t>(out, image.plane_stride());
    put_le<std::uint64_t>(out, image.layout().base_addr);
    put_le<std::uint32_t>(out, header_bytes);
    put_le<std::uint32_t>(out, 0);
    out.insert(out.end(), ladder_bytes.begin(), ladder_bytes.end());
    out.resize(header_bytes, 0);
    out.insert(out.end(), image.storage().begin(), image.storage().end());
    return out;
}

LoadedImage deserialize_image(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    if (r.get_string(4) != std::string(kMagic, 4))
        throw Error("not an SQBP image (bad magic)");
    const auto version = r.get<std::uint16_t>();
    if (version != kVersion)
        throw Error("unsupported SQBP version " + std::to_string(version));
    const auto ladder_count = r.get<std::uint16_t>();
    PlaneLayout layout;
    layout.num_weights = r.get<std::uint64_t>();
    layout.plane_stride = r.get<std::uint64_t>();
    layout.base_addr = r.get<std::uint64_t>();
    const auto header_bytes = r.get<std::uint32_t>();
    r.get<std::uint32_t>();

    if (layout.plane_stride != PlaneLayout::for_weights(layout.num_weights).plane_stride)
        throw Error("SQBP plane stride inconsistent with weight count");

    std::vector<FpFormat> formats;
    for (std::uint16_t i = 0; i < ladder_count; ++i) {
        const auto len = r.get<std::uint8_t>();
        std::string name = r.get_string(len);
        const int e = r.get<std::uint8_t>();
        const int m = r.get<std::uint8_t>();
        const int bias = static_cast<std::int8_t>(r.get<std::uint8_t>());
        formats.push_back(e == 0 && m == 0 ? FpFormat::skip(std::move(name))
                                           : FpFormat::make(std::move(name), e, m, bias));
    }
    if (r.pos() > header_bytes || header_bytes % kGranuleBytes != 0)
        throw Error("SQBP header size field is inconsistent");
    if (bytes.size() != header_bytes + layout.footprint())
        throw Error("SQBP payload size mismatch");

    std::vector<std::uint8_t> storage(bytes.begin() + header_bytes, bytes.end());
    return LoadedImage{BitPlaneImage(layout, std::move(storage)), FormatLadder(std::move(formats))};
}

void write_image(const std::filesystem::path& path, const BitPlaneImage& image,
                 const FormatLadder& ladder)
{
    const auto bytes = serialize_image(image, ladder);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error("failed writing " + path.string());
}

LoadedImage read_image(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_image(bytes);
}

}  // namespace sq
