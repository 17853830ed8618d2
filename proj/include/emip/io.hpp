#pragma once

// File formats: baseline multi-page TIFF stacks, 8-bit RGB PNG, point CSVs and
// flat key=value config files.
//
// Supported TIFF profile: classic (non-Big) TIFF, either byte order,
// uncompressed, striped, one unsigned 8- or 16-bit sample per pixel, every
// page the same size. Anything else is UnsupportedFormat.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "emip/core.hpp"
#include "emip/eval.hpp"
#include "emip/projection.hpp"

namespace emip::io {

/// Raw integer samples of a stack, one page per slice.
struct RawStack {
    Shape3 shape;
    int bits = 8;
    std::vector<std::uint16_t> samples;
};

RawStack read_stack(const std::filesystem::path& path);
/// Throws InvalidArgument for bits other than 8/16 or samples that do not fit.
void write_stack(const std::filesystem::path& path, const RawStack& stack);

/// Samples normalized to [0, 1] by the maximum code of the bit depth.
ChannelVolume read_volume(const std::filesystem::path& path);
/// Quantizes with round(clamp(v, 0, 1) * max_code).
void write_volume(const std::filesystem::path& path, const ChannelVolume& volume, int bits = 16);
void write_image(const std::filesystem::path& path, const Image2D& image, int bits = 16);

std::uint16_t quantize(float v, int bits) noexcept;
float dequantize(std::uint16_t q, int bits) noexcept;

/// 8-bit RGB; channel values are quantized like write_volume.
void write_png(const std::filesystem::path& path, const CompositeImage& image);
CompositeImage read_png(const std::filesystem::path& path);

/// CSV with header `x,y,z,class`; class must be 0 or 1. Blank lines are
/// skipped. ParseError carries the 1-based line number.
AnnotationSet parse_annotations(std::istream& in);
AnnotationSet read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const AnnotationSet& annotations);

/// Same layout with an optional trailing `confidence` column.
std::vector<Detection> parse_detections(std::istream& in);
std::vector<Detection> read_detections(const std::filesystem::path& path);
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& detections);

/// `key = value` per line; `#` starts a comment. Keys are not interpreted
/// here. Duplicate keys and lines without '=' raise ParseError.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace emip::io
