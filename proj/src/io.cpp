#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

#include "emip/io.hpp"

namespace emip::io {

void write_png(const std::filesystem::path& path, const CompositeImage& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.rgb.size() != 3 * static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height))
        throw Error(ErrorCode::DimensionMismatch, "composite buffer does not match its dimensions");
    std::vector<std::uint8_t> bytes(image.rgb.size());
    std::transform(image.rgb.begin(), image.rgb.end(), bytes.begin(),
                   [](float v) { return static_cast<std::uint8_t>(quantize(v, 8)); });

    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorCode::Io, "cannot write " + path.string() + ": " + msg);
    }
}

CompositeImage read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        const std::string msg = png.message;
        png_image_free(&png);
        if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "cannot open " + path.string());
        throw Error(ErrorCode::CorruptFile, path.string() + ": " + msg);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorCode::CorruptFile, path.string() + ": " + msg);
    }
    CompositeImage out{static_cast<int>(png.width), static_cast<int>(png.height), {}};
    out.rgb.resize(bytes.size());
    std::transform(bytes.begin(), bytes.end(), out.rgb.begin(), [](std::uint8_t q) { return dequantize(q, 8); });
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) return out;
        start = comma + 1;
    }
}

[[noreturn]] void parse_error(int line, const std::string& what) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what, line);
}

template <typename T>
T parse_number(std::string_view field, int line, const char* name) {
    T v{};
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || end != field.data() + field.size() || field.empty())
        parse_error(line, std::string("bad ") + name + " value '" + std::string(field) + "'");
    return v;
}

// Reads the header and each data row of a point CSV. `extra` names optional
// trailing columns accepted after x,y,z,class.
template <typename Row>
void parse_point_rows(std::istream& in, std::span<const std::string_view> extra, Row&& row) {
    std::string text;
    int line = 0;
    std::size_t columns = 0;
    while (std::getline(in, text)) {
        ++line;
        const auto t = trim(text);
        if (columns == 0) {
            const auto header = split_csv(t);
            const std::array<std::string_view, 4> base{"x", "y", "z", "class"};
            const bool ok = header.size() >= base.size() && header.size() <= base.size() + extra.size() &&
                            std::equal(base.begin(), base.end(), header.begin()) &&
                            std::equal(header.begin() + 4, header.end(), extra.begin());
            if (!ok) parse_error(line, "expected header 'x,y,z,class'");
            columns = header.size();
            continue;
        }
        if (t.empty()) continue;
        const auto fields = split_csv(t);
        if (fields.size() != columns)
            parse_error(line, "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
        Detection d;
        d.x = parse_number<int>(fields[0], line, "x");
        d.y = parse_number<int>(fields[1], line, "y");
        d.z = parse_number<int>(fields[2], line, "z");
        d.class_id = parse_number<int>(fields[3], line, "class");
        if (d.class_id != kNegativeClass && d.class_id != kPositiveClass) parse_error(line, "class must be 0 or 1");
        if (columns > 4) d.confidence = parse_number<double>(fields[4], line, "confidence");
        row(d, line);
    }
    if (columns == 0) parse_error(std::max(line, 1), "missing header 'x,y,z,class'");
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return f;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return f;
}

}  // namespace

AnnotationSet parse_annotations(std::istream& in) {
    std::vector<PointAnnotation> points;
    parse_point_rows(in, {}, [&](const Detection& d, int) { points.push_back({d.x, d.y, d.z, d.class_id}); });
    return AnnotationSet(std::move(points));
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
    auto f = open_in(path);
    return parse_annotations(f);
}

void write_annotations(const std::filesystem::path& path, const AnnotationSet& annotations) {
    auto f = open_out(path);
    f << "x,y,z,class\n";
    for (const auto& p : annotations.points()) f << p.x << ',' << p.y << ',' << p.z << ',' << p.class_id << '\n';
    if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<Detection> parse_detections(std::istream& in) {
    static constexpr std::array<std::string_view, 1> kExtra{"confidence"};
    std::vector<Detection> out;
    parse_point_rows(in, kExtra, [&](const Detection& d, int) { out.push_back(d); });
    return out;
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
    auto f = open_in(path);
    return parse_detections(f);
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& detections) {
    auto f = open_out(path);
    f << "x,y,z,class,confidence\n";
    char buf[32];
    for (const auto& d : detections) {
        const auto end = std::to_chars(buf, buf + sizeof buf, d.confidence).ptr;
        f << d.x << ',' << d.y << ',' << d.z << ',' << d.class_id << ',' << std::string_view(buf, end - buf) << '\n';
    }
    if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string text;
    int line = 0;
    while (std::getline(in, text)) {
        ++line;
        std::string_view t = text;
        if (const auto hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
        t = trim(t);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) parse_error(line, "expected 'key = value'");
        const std::string key(trim(t.substr(0, eq)));
        const std::string value(trim(t.substr(eq + 1)));
        if (key.empty()) parse_error(line, "empty key");
        if (value.empty()) parse_error(line, "empty value for '" + key + "'");
        if (!out.emplace(key, value).second) parse_error(line, "duplicate key '" + key + "'");
    }
    return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    auto f = open_in(path);
    return parse_key_values(f);
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::uint64_t h = fnv1a(nullptr, 0);
    std::array<char, 1 << 16> buf;
    while (f) {
        f.read(buf.data(), buf.size());
        h = fnv1a(buf.data(), static_cast<std::size_t>(f.gcount()), h);
    }
    return h;
}

}  // namespace emip::io
