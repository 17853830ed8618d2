#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "emip/io.hpp"

using namespace emip;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "emip_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v, bool big) {
    if (big) b.insert(b.end(), {std::uint8_t(v >> 8), std::uint8_t(v)});
    else b.insert(b.end(), {std::uint8_t(v), std::uint8_t(v >> 8)});
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v, bool big) {
    if (big) {
        put_u16(b, std::uint16_t(v >> 16), true);
        put_u16(b, std::uint16_t(v), true);
    } else {
        put_u16(b, std::uint16_t(v), false);
        put_u16(b, std::uint16_t(v >> 16), false);
    }
}

struct Entry {
    std::uint16_t tag, type;
    std::uint32_t value;
};

// Hand-assembled single-page TIFF: `pixels` are raw sample bytes stored in
// `strips` equal pieces, followed by one IFD with the given entries plus the
// strip tables.
std::vector<std::uint8_t> tiff_bytes(int w, int h, int bits, const std::vector<std::uint8_t>& pixels, bool big,
                                     int strips, std::vector<Entry> extra) {
    std::vector<std::uint8_t> b{big ? std::uint8_t('M') : std::uint8_t('I'), big ? std::uint8_t('M') : std::uint8_t('I')};
    put_u16(b, 42, big);
    put_u32(b, 0, big);
    const std::size_t piece = pixels.size() / strips;
    std::vector<std::uint32_t> offsets, counts;
    for (int s = 0; s < strips; ++s) {
        offsets.push_back(static_cast<std::uint32_t>(b.size()));
        const std::size_t len = s + 1 == strips ? pixels.size() - piece * s : piece;
        counts.push_back(static_cast<std::uint32_t>(len));
        b.insert(b.end(), pixels.begin() + piece * s, pixels.begin() + piece * s + len);
    }
    const auto table = [&](const std::vector<std::uint32_t>& v) {
        const auto at = static_cast<std::uint32_t>(b.size());
        for (auto x : v) put_u32(b, x, big);
        return at;
    };
    const std::uint32_t off_at = strips > 1 ? table(offsets) : offsets[0];
    const std::uint32_t cnt_at = strips > 1 ? table(counts) : counts[0];
    std::vector<Entry> e{{256, 4, std::uint32_t(w)}, {257, 4, std::uint32_t(h)}, {258, 3, std::uint32_t(bits)}};
    e.insert(e.end(), extra.begin(), extra.end());
    const std::size_t ifd = b.size();
    for (int i = 0; i < 4; ++i) b[4 + i] = big ? std::uint8_t(ifd >> (24 - 8 * i)) : std::uint8_t(ifd >> (8 * i));
    put_u16(b, static_cast<std::uint16_t>(e.size() + 2), big);
    for (const auto& x : e) {
        put_u16(b, x.tag, big);
        put_u16(b, x.type, big);
        put_u32(b, 1, big);
        if (x.type == 3) {
            put_u16(b, static_cast<std::uint16_t>(x.value), big);
            put_u16(b, 0, big);
        } else {
            put_u32(b, x.value, big);
        }
    }
    for (auto [tag, at] : {std::pair<std::uint16_t, std::uint32_t>{273, off_at}, {279, cnt_at}}) {
        put_u16(b, tag, big);
        put_u16(b, 4, big);
        put_u32(b, static_cast<std::uint32_t>(strips), big);
        put_u32(b, at, big);
    }
    put_u32(b, 0, big);
    return b;
}

fs::path write_bytes(const std::string& name, const std::vector<std::uint8_t>& b) {
    const auto p = scratch(name);
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    return p;
}

ErrorCode code_of(const fs::path& p) {
    try {
        io::read_volume(p);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("8-bit constant stack reads as ones") {
    const auto p = scratch("ones.tif");
    io::write_stack(p, {{5, 4, 3}, 8, std::vector<std::uint16_t>(60, 255)});
    const auto v = io::read_volume(p);
    CHECK(v.shape() == Shape3{5, 4, 3});
    for (float x : v.voxels()) CHECK(x == 1.0f);
}

TEST_CASE("16-bit normalization") {
    const auto p = scratch("half.tif");
    io::write_stack(p, {{1, 1, 1}, 16, {32768}});
    CHECK(io::read_volume(p).at(0, 0, 0) == doctest::Approx(32768.0 / 65535.0));
}

TEST_CASE("volume round-trip is bit-exact after quantization") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> vals(17 * 9 * 4);
    for (auto& x : vals) x = u(rng);
    const ChannelVolume v({17, 9, 4}, vals);
    for (int bits : {8, 16}) {
        const auto p = scratch("rt" + std::to_string(bits) + ".tif");
        io::write_volume(p, v, bits);
        const auto back = io::read_volume(p);
        REQUIRE(back.shape() == v.shape());
        for (std::size_t i = 0; i < vals.size(); ++i)
            REQUIRE(back.voxels()[i] == io::dequantize(io::quantize(vals[i], bits), bits));
        // A second trip is the identity.
        io::write_volume(p, back, bits);
        CHECK(io::read_volume(p) == back);
    }
}

TEST_CASE("reader handles big-endian files, multiple strips and inverted grayscale") {
    std::vector<std::uint8_t> px16;
    for (std::uint16_t v : {0, 1000, 40000, 65535, 7, 300}) put_u16(px16, v, true);
    const auto be = write_bytes("be.tif", tiff_bytes(3, 2, 16, px16, true, 2, {{262, 3, 1}}));
    const auto s = io::read_stack(be);
    CHECK(s.bits == 16);
    CHECK(s.samples == std::vector<std::uint16_t>{0, 1000, 40000, 65535, 7, 300});

    const std::vector<std::uint8_t> px8{0, 10, 255, 128};
    const auto inv = write_bytes("inv.tif", tiff_bytes(2, 2, 8, px8, false, 1, {{262, 3, 0}}));
    CHECK(io::read_stack(inv).samples == std::vector<std::uint16_t>{255, 245, 0, 127});
}

TEST_CASE("unsupported variants") {
    const std::vector<std::uint8_t> px{1, 2, 3, 4};
    CHECK(code_of(write_bytes("lzw.tif", tiff_bytes(2, 2, 8, px, false, 1, {{259, 3, 5}}))) ==
          ErrorCode::UnsupportedFormat);
    CHECK(code_of(write_bytes("rgb.tif", tiff_bytes(2, 2, 8, px, false, 1, {{262, 3, 2}}))) ==
          ErrorCode::UnsupportedFormat);
    CHECK(code_of(write_bytes("spp.tif", tiff_bytes(2, 2, 8, px, false, 1, {{277, 3, 3}}))) ==
          ErrorCode::UnsupportedFormat);
    CHECK(code_of(write_bytes("tile.tif", tiff_bytes(2, 2, 8, px, false, 1, {{322, 3, 16}}))) ==
          ErrorCode::UnsupportedFormat);
    CHECK(code_of(write_bytes("float.tif", tiff_bytes(2, 2, 8, px, false, 1, {{339, 3, 3}}))) ==
          ErrorCode::UnsupportedFormat);
    CHECK(code_of(write_bytes("b4.tif", tiff_bytes(2, 2, 4, px, false, 1, {}))) == ErrorCode::UnsupportedFormat);
    CHECK(code_of(write_bytes("big.tif", {'I', 'I', 43, 0, 8, 0, 0, 0})) == ErrorCode::UnsupportedFormat);
    CHECK(code_of(write_bytes("png.tif", {0x89, 'P', 'N', 'G', 0, 0, 0, 0})) == ErrorCode::UnsupportedFormat);
}

TEST_CASE("corrupt files") {
    CHECK(code_of(write_bytes("short.tif", {'I', 'I', 42})) == ErrorCode::CorruptFile);
    auto b = tiff_bytes(4, 4, 8, std::vector<std::uint8_t>(16, 9), false, 1, {});
    auto truncated = b;
    truncated.resize(20);
    CHECK(code_of(write_bytes("trunc.tif", truncated)) == ErrorCode::CorruptFile);
    // Declares 4x4 but carries only 8 pixel bytes.
    CHECK(code_of(write_bytes("thin.tif", tiff_bytes(4, 4, 8, std::vector<std::uint8_t>(8, 1), false, 1, {}))) ==
          ErrorCode::CorruptFile);
    // IFD pointing at itself as the next directory.
    auto loop = b;
    const std::uint32_t ifd = loop[4] | loop[5] << 8 | loop[6] << 16 | loop[7] << 24;
    const std::size_t next = loop.size() - 4;
    for (int i = 0; i < 4; ++i) loop[next + i] = std::uint8_t(ifd >> (8 * i));
    CHECK(code_of(write_bytes("loop.tif", loop)) == ErrorCode::CorruptFile);
    CHECK(code_of(scratch("does_not_exist.tif")) == ErrorCode::Io);
}

TEST_CASE("writer rejects bad stacks") {
    CHECK_THROWS_AS(io::write_stack(scratch("x.tif"), {{2, 2, 1}, 12, std::vector<std::uint16_t>(4)}), Error);
    CHECK_THROWS_AS(io::write_stack(scratch("x.tif"), {{2, 2, 1}, 8, std::vector<std::uint16_t>(3)}), Error);
    CHECK_THROWS_AS(io::write_stack(scratch("x.tif"), {{2, 2, 1}, 8, {0, 1, 256, 0}}), Error);
}

TEST_CASE("png round trip") {
    CompositeImage c{3, 2, {}};
    for (int i = 0; i < 18; ++i) c.rgb.push_back(static_cast<float>(i * 14) / 255.0f);
    const auto p = scratch("c.png");
    io::write_png(p, c);
    const auto back = io::read_png(p);
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    for (std::size_t i = 0; i < c.rgb.size(); ++i) CHECK(back.rgb[i] == io::dequantize(io::quantize(c.rgb[i], 8), 8));
    CHECK_THROWS_AS(io::read_png(scratch("missing.png")), Error);
}

TEST_CASE("annotation csv") {
    std::istringstream ok("x,y,z,class\n10,20,3,1\n");
    const auto a = io::parse_annotations(ok);
    REQUIRE(a.size() == 1);
    CHECK(a[0] == PointAnnotation{10, 20, 3, 1});

    std::istringstream crlf("x,y,z,class\r\n 1, 2, 0, 0\r\n\r\n5,6,1,1\r\n");
    CHECK(io::parse_annotations(crlf).size() == 2);

    const auto line_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            io::parse_annotations(in);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ParseError);
            return e.line();
        }
        return -1;
    };
    CHECK(line_of("10,20,3,1\n") == 1);
    CHECK(line_of("") == 1);
    CHECK(line_of("x,y,z,class\n1,2,3,1\n4,five,6,0\n") == 3);
    CHECK(line_of("x,y,z,class\n1,2,3\n") == 2);
    CHECK(line_of("x,y,z,class\n1,2,3,2\n") == 2);

    std::istringstream dup("x,y,z,class\n4,4,0,0\n4,4,2,1\n");
    try {
        io::parse_annotations(dup);
        FAIL("expected DuplicatePoint");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicatePoint);
    }

    const auto p = scratch("pts.csv");
    const AnnotationSet set({{1, 2, 3, 0}, {4, 5, 6, 1}});
    io::write_annotations(p, set);
    CHECK(io::read_annotations(p) == set);
}

TEST_CASE("detection csv") {
    std::istringstream plain("x,y,z,class\n1,2,0,1\n1,2,1,0\n");
    const auto d = io::parse_detections(plain);
    REQUIRE(d.size() == 2);  // detections may repeat an xy
    CHECK(d[0].confidence == 1.0);
    std::istringstream conf("x,y,z,class,confidence\n1,2,0,1,0.25\n");
    CHECK(io::parse_detections(conf)[0].confidence == 0.25);

    const auto p = scratch("dets.csv");
    const std::vector<Detection> ds{{1, 2, 3, 1, 0.1}, {7, 8, 9, 0, 1.0 / 3.0}};
    io::write_detections(p, ds);
    CHECK(io::read_detections(p) == ds);
}

TEST_CASE("key-value config") {
    std::istringstream in("# comment\nk = 3\n\n tau=0.5  # inline\n");
    const auto kv = io::parse_key_values(in);
    CHECK(kv.at("k") == "3");
    CHECK(kv.at("tau") == "0.5");
    const auto line_of = [](const std::string& text) {
        std::istringstream s(text);
        try {
            io::parse_key_values(s);
        } catch (const Error& e) {
            return e.line();
        }
        return -1;
    };
    CHECK(line_of("a = 1\nnonsense\n") == 2);
    CHECK(line_of("a = 1\na = 2\n") == 2);
    CHECK(line_of("= 2\n") == 1);
}

TEST_CASE("fnv1a reference values") {
    CHECK(io::fnv1a("", 0) == 0xcbf29ce484222325ULL);
    CHECK(io::fnv1a("a", 1) == 0xaf63dc4c8601ec8cULL);
    CHECK(io::fnv1a("foobar", 6) == 0x85944171f73967e8ULL);
}
