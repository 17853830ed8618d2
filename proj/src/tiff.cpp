#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <string>

#include "emip/io.hpp"

namespace emip::io {

namespace {

enum Tag : std::uint16_t {
    ImageWidth = 256,
    ImageLength = 257,
    BitsPerSample = 258,
    Compression = 259,
    Photometric = 262,
    StripOffsets = 273,
    SamplesPerPixel = 277,
    RowsPerStrip = 278,
    StripByteCounts = 279,
    PlanarConfig = 284,
    TileWidth = 322,
    TileOffsets = 324,
    SampleFormat = 339,
};

enum FieldType : std::uint16_t { Byte = 1, Short = 3, Long = 4 };

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": " + what);
}

[[noreturn]] void unsupported(const std::filesystem::path& path, const std::string& what) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + ": " + what);
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

class Reader {
public:
    Reader(const std::filesystem::path& path, std::vector<std::uint8_t> bytes)
        : path_(path), b_(std::move(bytes)) {
        if (b_.size() < 8) corrupt(path_, "file too short for a TIFF header");
        if (b_[0] == 'I' && b_[1] == 'I')
            big_ = false;
        else if (b_[0] == 'M' && b_[1] == 'M')
            big_ = true;
        else
            unsupported(path_, "not a TIFF file");
        const auto magic = u16(2);
        if (magic == 43) unsupported(path_, "BigTIFF is not supported");
        if (magic != 42) unsupported(path_, "bad TIFF magic number");
    }

    std::size_t size() const noexcept { return b_.size(); }

    std::uint16_t u16(std::size_t off) const {
        need(off, 2);
        return big_ ? static_cast<std::uint16_t>(b_[off] << 8 | b_[off + 1])
                    : static_cast<std::uint16_t>(b_[off + 1] << 8 | b_[off]);
    }

    std::uint32_t u32(std::size_t off) const {
        need(off, 4);
        const std::uint32_t a = b_[off], c = b_[off + 1], d = b_[off + 2], e = b_[off + 3];
        return big_ ? (a << 24 | c << 16 | d << 8 | e) : (e << 24 | d << 16 | c << 8 | a);
    }

    std::uint16_t sample(std::size_t off, int bits) const { return bits == 8 ? b_[off] : u16(off); }

    void need(std::size_t off, std::size_t len) const {
        if (off > b_.size() || len > b_.size() - off) corrupt(path_, "offset beyond end of file");
    }

    // Values of one IFD entry widened to 32 bits.
    std::vector<std::uint32_t> values(std::size_t entry) const {
        const auto type = u16(entry + 2);
        const std::uint32_t count = u32(entry + 4);
        std::size_t width = 0;
        switch (type) {
            case Byte: width = 1; break;
            case Short: width = 2; break;
            case Long: width = 4; break;
            default: unsupported(path_, "unsupported field type " + std::to_string(type));
        }
        if (count > b_.size()) corrupt(path_, "field count exceeds file size");
        const std::size_t bytes = width * count;
        const std::size_t base = bytes <= 4 ? entry + 8 : u32(entry + 8);
        need(base, bytes);
        std::vector<std::uint32_t> out(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::size_t at = base + i * width;
            out[i] = width == 1 ? b_[at] : width == 2 ? u16(at) : u32(at);
        }
        return out;
    }

private:
    std::filesystem::path path_;
    std::vector<std::uint8_t> b_;
    bool big_ = false;
};

struct Page {
    int width = 0;
    int height = 0;
    int bits = 0;
    bool inverted = false;
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> counts;
};

Page read_ifd(const Reader& r, std::size_t ifd, const std::filesystem::path& path, std::uint32_t& next) {
    const std::uint16_t n = r.u16(ifd);
    r.need(ifd + 2, static_cast<std::size_t>(n) * 12 + 4);
    std::map<std::uint16_t, std::vector<std::uint32_t>> tags;
    for (std::uint16_t i = 0; i < n; ++i) {
        const std::size_t entry = ifd + 2 + static_cast<std::size_t>(i) * 12;
        const auto tag = r.u16(entry);
        if (tag == TileWidth || tag == TileOffsets) unsupported(path, "tiled TIFF is not supported");
        switch (tag) {
            case ImageWidth: case ImageLength: case BitsPerSample: case Compression: case Photometric:
            case StripOffsets: case SamplesPerPixel: case RowsPerStrip: case StripByteCounts: case SampleFormat:
                tags[tag] = r.values(entry);
                break;
            default:
                break;
        }
    }
    next = r.u32(ifd + 2 + static_cast<std::size_t>(n) * 12);

    const auto scalar = [&](Tag tag, std::uint32_t fallback, bool required) -> std::uint32_t {
        const auto it = tags.find(tag);
        if (it == tags.end() || it->second.empty()) {
            if (required) corrupt(path, "missing required tag " + std::to_string(tag));
            return fallback;
        }
        return it->second.front();
    };

    Page p;
    p.width = static_cast<int>(scalar(ImageWidth, 0, true));
    p.height = static_cast<int>(scalar(ImageLength, 0, true));
    if (p.width <= 0 || p.height <= 0) corrupt(path, "zero image size");
    if (scalar(SamplesPerPixel, 1, false) != 1) unsupported(path, "only single-sample (grayscale) images are supported");
    if (scalar(Compression, 1, false) != 1) unsupported(path, "compressed TIFF is not supported");
    if (scalar(SampleFormat, 1, false) != 1) unsupported(path, "only unsigned integer samples are supported");
    const auto photometric = scalar(Photometric, 1, false);
    if (photometric > 1) unsupported(path, "only grayscale photometric interpretations are supported");
    p.inverted = photometric == 0;
    p.bits = static_cast<int>(scalar(BitsPerSample, 1, false));
    if (p.bits != 8 && p.bits != 16) unsupported(path, "bit depth " + std::to_string(p.bits) + " is not supported");

    if (!tags.count(StripOffsets)) corrupt(path, "missing strip offsets");
    if (!tags.count(StripByteCounts)) corrupt(path, "missing strip byte counts");
    p.offsets = tags[StripOffsets];
    p.counts = tags[StripByteCounts];
    if (p.offsets.size() != p.counts.size()) corrupt(path, "strip offset and byte count tables differ in length");
    return p;
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

RawStack read_stack(const std::filesystem::path& path) {
    const Reader r(path, slurp(path));
    RawStack out;
    std::set<std::uint32_t> visited;
    std::uint32_t ifd = r.u32(4);
    if (ifd == 0) corrupt(path, "no image directory");
    while (ifd != 0) {
        if (!visited.insert(ifd).second) corrupt(path, "image directory chain loops");
        std::uint32_t next = 0;
        const Page p = read_ifd(r, ifd, path, next);
        if (out.shape.depth == 0) {
            out.shape = {p.width, p.height, 0};
            out.bits = p.bits;
        } else if (p.width != out.shape.width || p.height != out.shape.height || p.bits != out.bits) {
            unsupported(path, "pages differ in size or bit depth");
        }

        const std::size_t bytes_per = static_cast<std::size_t>(p.bits / 8);
        const std::size_t need = out.shape.slice_size() * bytes_per;
        const std::size_t base = out.samples.size();
        out.samples.resize(base + out.shape.slice_size());
        std::size_t filled = 0;
        for (std::size_t s = 0; s < p.offsets.size() && filled < need; ++s) {
            r.need(p.offsets[s], p.counts[s]);
            const std::size_t take = std::min<std::size_t>(p.counts[s], need - filled) / bytes_per * bytes_per;
            for (std::size_t k = 0; k < take; k += bytes_per)
                out.samples[base + (filled + k) / bytes_per] = r.sample(p.offsets[s] + k, p.bits);
            filled += take;
        }
        if (filled < need) corrupt(path, "strips hold fewer bytes than the image needs");
        if (p.inverted) {
            const auto maxv = static_cast<std::uint16_t>(p.bits == 8 ? 255 : 65535);
            for (std::size_t i = base; i < out.samples.size(); ++i)
                out.samples[i] = static_cast<std::uint16_t>(maxv - out.samples[i]);
        }
        ++out.shape.depth;
        ifd = next;
    }
    return out;
}

void write_stack(const std::filesystem::path& path, const RawStack& stack) {
    if (stack.bits != 8 && stack.bits != 16) throw Error(ErrorCode::InvalidArgument, "bit depth must be 8 or 16");
    if (!stack.shape.valid()) throw Error(ErrorCode::InvalidArgument, "stack dimensions must be positive");
    if (stack.samples.size() != stack.shape.voxel_count())
        throw Error(ErrorCode::DimensionMismatch, "sample count does not match stack dimensions");
    if (stack.bits == 8 && std::any_of(stack.samples.begin(), stack.samples.end(), [](auto v) { return v > 255; }))
        throw Error(ErrorCode::InvalidArgument, "sample does not fit 8 bits");

    const std::size_t page_bytes = stack.shape.slice_size() * static_cast<std::size_t>(stack.bits / 8);
    constexpr std::uint16_t kEntries = 11;
    const std::size_t ifd_bytes = 2 + kEntries * 12 + 4;
    if (8 + static_cast<double>(stack.shape.depth) * (page_bytes + ifd_bytes + 1) > 4294967295.0)
        throw Error(ErrorCode::InvalidArgument, "stack too large for classic TIFF");

    std::vector<std::uint8_t> out;
    out.reserve(8 + stack.shape.depth * (page_bytes + ifd_bytes + 1));
    out.insert(out.end(), {'I', 'I'});
    append_u16(out, 42);
    append_u32(out, 0);  // patched with the first IFD offset
    std::size_t link = 4;

    for (int z = 0; z < stack.shape.depth; ++z) {
        const auto data_offset = static_cast<std::uint32_t>(out.size());
        const auto* src = stack.samples.data() + static_cast<std::size_t>(z) * stack.shape.slice_size();
        for (std::size_t i = 0; i < stack.shape.slice_size(); ++i) {
            if (stack.bits == 8)
                out.push_back(static_cast<std::uint8_t>(src[i]));
            else
                append_u16(out, src[i]);
        }
        if (out.size() % 2) out.push_back(0);

        const auto ifd = static_cast<std::uint32_t>(out.size());
        for (int s = 0; s < 32; s += 8) out[link + s / 8] = static_cast<std::uint8_t>(ifd >> s);

        append_u16(out, kEntries);
        const auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t value) {
            append_u16(out, tag);
            append_u16(out, type);
            append_u32(out, 1);
            if (type == Short) {
                append_u16(out, static_cast<std::uint16_t>(value));
                append_u16(out, 0);
            } else {
                append_u32(out, value);
            }
        };
        entry(ImageWidth, Long, static_cast<std::uint32_t>(stack.shape.width));
        entry(ImageLength, Long, static_cast<std::uint32_t>(stack.shape.height));
        entry(BitsPerSample, Short, static_cast<std::uint32_t>(stack.bits));
        entry(Compression, Short, 1);
        entry(Photometric, Short, 1);
        entry(StripOffsets, Long, data_offset);
        entry(SamplesPerPixel, Short, 1);
        entry(RowsPerStrip, Long, static_cast<std::uint32_t>(stack.shape.height));
        entry(StripByteCounts, Long, static_cast<std::uint32_t>(page_bytes));
        entry(PlanarConfig, Short, 1);
        entry(SampleFormat, Short, 1);
        link = out.size();
        append_u32(out, 0);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::uint16_t quantize(float v, int bits) noexcept {
    const float maxv = bits == 8 ? 255.0f : 65535.0f;
    const float c = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint16_t>(std::lround(c * maxv));
}

float dequantize(std::uint16_t q, int bits) noexcept {
    return static_cast<float>(q) / (bits == 8 ? 255.0f : 65535.0f);
}

ChannelVolume read_volume(const std::filesystem::path& path) {
    const RawStack s = read_stack(path);
    std::vector<float> v(s.samples.size());
    std::transform(s.samples.begin(), s.samples.end(), v.begin(), [&](auto q) { return dequantize(q, s.bits); });
    return ChannelVolume(s.shape, std::move(v));
}

void write_volume(const std::filesystem::path& path, const ChannelVolume& volume, int bits) {
    if (bits != 8 && bits != 16) throw Error(ErrorCode::InvalidArgument, "bit depth must be 8 or 16");
    RawStack s{volume.shape(), bits, {}};
    s.samples.reserve(volume.voxels().size());
    for (float v : volume.voxels()) s.samples.push_back(quantize(v, bits));
    write_stack(path, s);
}

void write_image(const std::filesystem::path& path, const Image2D& image, int bits) {
    write_volume(path, ChannelVolume(Shape3{image.width(), image.height(), 1},
                                       std::vector<float>(image.values().begin(), image.values().end())), bits);
}

}  // namespace emip::io
