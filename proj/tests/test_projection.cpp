#include <doctest.h>

#include <random>

#include "emip/projection.hpp"
#include "emip/synth.hpp"
#include "oracles.hpp"

using namespace emip;

namespace {

ChannelVolume random_volume(std::mt19937_64& rng, const Shape3& s) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(s.voxel_count());
    for (auto& x : v) x = u(rng);
    return ChannelVolume(s, std::move(v));
}

BinaryMask3D random_mask(std::mt19937_64& rng, const Shape3& s, double density) {
    std::bernoulli_distribution b(density);
    BinaryMask3D m{s, std::vector<std::uint8_t>(s.voxel_count())};
    for (auto& x : m.values) x = b(rng);
    return m;
}

BinaryMask3D full_mask(const Shape3& s) { return {s, std::vector<std::uint8_t>(s.voxel_count(), 1)}; }

}  // namespace

TEST_CASE("mip of a single slice is the slice") {
    std::mt19937_64 rng(1);
    const auto v = random_volume(rng, {7, 5, 1});
    const auto m = mip(v);
    CHECK(std::equal(m.values().begin(), m.values().end(), v.voxels().begin()));
}

TEST_CASE("mip takes the larger value") {
    const ChannelVolume v({1, 1, 2}, {0.2f, 0.7f});
    CHECK(mip(v).at(0, 0) == 0.7f);
}

TEST_CASE("mip matches the exhaustive scan") {
    std::mt19937_64 rng(2);
    const auto v = random_volume(rng, {64, 64, 8});
    const auto m = mip(v);
    const auto ref = oracle::mip(v);
    CHECK(std::equal(ref.begin(), ref.end(), m.values().begin()));
}

TEST_CASE("slice sets") {
    const Shape3 s{4, 4, 12};
    const auto vor = voronoi_partition(AnnotationSet({{1, 1, 0, 0}, {3, 3, 0, 0}}), 4, 4);
    const auto cell0 = cell_mask(vor, 0);
    BinaryMask3D m{s, std::vector<std::uint8_t>(s.voxel_count(), 0)};
    for (int z = 4; z <= 9; ++z) m.values[s.index(1, 1, z)] = 1;
    CHECK(slice_set(m, cell0, 1) == SliceSet{4, 5, 6, 7, 8, 9});
    CHECK(slice_set(m, cell_mask(vor, 1), 1).empty());

    BinaryMask3D single{s, std::vector<std::uint8_t>(s.voxel_count(), 0)};
    single.values[s.index(0, 0, 3)] = 1;
    CHECK(slice_set(single, cell0, 1) == SliceSet{3});
    CHECK(slice_set(single, cell0, 2).empty());
}

TEST_CASE("emip avoids a marker on other slices and keeps a co-located one") {
    const Shape3 s{8, 8, 10};
    const auto vor = voronoi_partition(AnnotationSet({{2, 4, 6, 0}, {6, 4, 5, 1}}), 8, 8);
    std::vector<float> nuc(s.voxel_count(), 0.0f), mark(s.voxel_count(), 0.0f);
    BinaryMask3D mask{s, std::vector<std::uint8_t>(s.voxel_count(), 0)};
    for (int y = 3; y <= 5; ++y) {
        for (int z = 4; z <= 9; ++z) {  // nucleus in cell 0 on z 4..9
            mask.values[s.index(2, y, z)] = 1;
            nuc[s.index(2, y, z)] = 0.1f * static_cast<float>(z - 3);
        }
        for (int z = 0; z <= 3; ++z) mark[s.index(2, y, z)] = 0.9f;  // marker on z 0..3
        mask.values[s.index(6, y, 5)] = 1;  // nucleus in cell 1 on z 5 only, marker there too
        nuc[s.index(6, y, 5)] = 0.8f;
        mark[s.index(6, y, 5)] = 0.6f;
        mark[s.index(6, y, 8)] = 1.0f;  // and a brighter marker off the nucleus slice
    }
    const MultiChannelVolume vol(ChannelVolume(s, nuc), ChannelVolume(s, mark));
    const auto r = emip::emip(vol, mask, vor);
    CHECK(r.slice_sets[0] == SliceSet{4, 5, 6, 7, 8, 9});
    CHECK(r.slice_sets[1] == SliceSet{5});
    CHECK(r.fallback_cells.empty());
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            if (vor.at(x, y) == 0) {
                CHECK(r.projection.marker.at(x, y) == 0.0f);
                float m = 0.0f;
                for (int z = 4; z <= 9; ++z) m = std::max(m, vol.nuclei().at(x, y, z));
                CHECK(r.projection.nuclei.at(x, y) == m);
            } else {
                CHECK(r.projection.marker.at(x, y) == vol.marker().at(x, y, 5));
            }
        }
    CHECK(mip(vol.marker()).at(2, 4) == 0.9f);  // the plain projection shows a false overlap
}

TEST_CASE("emip with a full mask is the plain mip") {
    std::mt19937_64 rng(4);
    const Shape3 s{40, 30, 6};
    const MultiChannelVolume vol(random_volume(rng, s), random_volume(rng, s));
    const auto vor = voronoi_partition(AnnotationSet({{3, 3, 0, 0}, {30, 20, 1, 0}, {12, 25, 5, 1}}), 40, 30);
    const auto r = emip::emip(vol, full_mask(s), vor);
    CHECK(r.projection.nuclei == mip(vol.nuclei()));
    CHECK(r.projection.marker == mip(vol.marker()));
}

TEST_CASE("emip matches the oracle, never exceeds mip and reports fallbacks") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const Shape3 s{32, 24, 7};
        const MultiChannelVolume vol(random_volume(rng, s), random_volume(rng, s));
        const auto mask = random_mask(rng, s, 0.02);
        std::vector<PointAnnotation> pts;
        for (int i = 0; i < 8; ++i) pts.push_back({i * 4, (i * 7) % 24, 0, 0});
        const AnnotationSet ann(pts);
        const auto vor = voronoi_partition(ann, s.width, s.height);
        for (std::size_t mp : {1u, 2u}) {
            const auto r = emip::emip(vol, mask, vor, {.min_pixels = mp});
            const auto ref_n = oracle::emip(vol.nuclei(), mask, vor, mp);
            const auto ref_m = oracle::emip(vol.marker(), mask, vor, mp);
            CHECK(std::equal(ref_n.begin(), ref_n.end(), r.projection.nuclei.values().begin()));
            CHECK(std::equal(ref_m.begin(), ref_m.end(), r.projection.marker.values().begin()));
            const auto full = mip(vol.marker());
            for (std::size_t i = 0; i < ref_m.size(); ++i) REQUIRE(r.projection.marker.values()[i] <= full.values()[i]);
            for (std::size_t j = 0; j < ann.size(); ++j) {
                const bool listed = std::find(r.fallback_cells.begin(), r.fallback_cells.end(), j) != r.fallback_cells.end();
                CHECK(listed == r.slice_sets[j].empty());
            }
        }
    }
}

TEST_CASE("disabled fallback leaves empty cells dark") {
    const Shape3 s{4, 2, 3};
    const MultiChannelVolume vol(ChannelVolume::filled(s, 0.5f), ChannelVolume::filled(s, 0.5f));
    const auto vor = voronoi_partition(AnnotationSet({{0, 0, 0, 0}, {3, 0, 0, 0}}), 4, 2);
    BinaryMask3D mask{s, std::vector<std::uint8_t>(s.voxel_count(), 0)};
    mask.values[s.index(0, 0, 1)] = 1;
    const auto r = emip::emip(vol, mask, vor, {.min_pixels = 1, .empty_fallback = false});
    CHECK(r.fallback_cells == std::vector<std::size_t>{1});
    CHECK(r.projection.marker.at(3, 1) == 0.0f);
    CHECK(r.projection.marker.at(0, 1) == 0.5f);
    const auto on = emip::emip(vol, mask, vor);
    CHECK(on.projection.marker.at(3, 1) == 0.5f);
}

TEST_CASE("emip rejects mismatched inputs") {
    const Shape3 s{4, 4, 2};
    const MultiChannelVolume vol(ChannelVolume::filled(s), ChannelVolume::filled(s));
    const auto vor = voronoi_partition(AnnotationSet({{0, 0, 0, 0}}), 4, 4);
    try {
        emip::emip(vol, full_mask({4, 4, 3}), vor);
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
    CHECK_THROWS_AS(emip::emip(vol, full_mask(s), voronoi_partition(AnnotationSet({{0, 0, 0, 0}}), 5, 4)), Error);
}

TEST_CASE("composite channel mapping") {
    const ProjectionPair p{Image2D(2, 1, {0.5f, 1.0f}), Image2D(2, 1, {0.0f, 1.0f})};
    const auto c = compose(p);
    CHECK(c.r(0, 0) == 0.0f);
    CHECK(c.g(0, 0) == 0.0f);
    CHECK(c.b(0, 0) == 0.5f);
    CHECK(c.r(1, 0) == 1.0f);
    CHECK(c.g(1, 0) == 0.0f);
    CHECK(c.b(1, 0) == 1.0f);
    const auto black = compose(p, 0.0, 0.0);
    CHECK(std::all_of(black.rgb.begin(), black.rgb.end(), [](float v) { return v == 0.0f; }));
    CHECK_THROWS_AS(compose(p, 1.5, 1.0), Error);
    CHECK_THROWS_AS(compose({Image2D(2, 1, {0, 0}), Image2D(1, 1, {0})}), Error);
}

TEST_CASE("per-slice composites") {
    std::mt19937_64 rng(6);
    const Shape3 s{5, 4, 3};
    const MultiChannelVolume vol(random_volume(rng, s), random_volume(rng, s));
    const auto comps = per_slice_composites(vol, 0.7, 0.4);
    REQUIRE(comps.size() == 3);
    for (int z = 0; z < 3; ++z) {
        const auto n = vol.nuclei().slice(z), m = vol.marker().slice(z);
        const ProjectionPair p{Image2D(5, 4, {n.begin(), n.end()}), Image2D(5, 4, {m.begin(), m.end()})};
        CHECK(comps[z] == compose(p, 0.7, 0.4));
    }
    const MultiChannelVolume dark(random_volume(rng, s), ChannelVolume::filled(s));
    for (const auto& c : per_slice_composites(dark))
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 5; ++x) CHECK(c.r(x, y) == 0.0f);
}
