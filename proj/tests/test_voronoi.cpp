#include <doctest.h>

#include <random>
#include <set>

#include "emip/voronoi.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace emip;

namespace {

emip::AnnotationSet random_points(std::mt19937_64& rng, int n, int w, int h) {
    return fixture::random_points(rng, n, {w, h, 1});
}

}  // namespace

TEST_CASE("single point owns the whole plane") {
    const auto vor = voronoi_partition(AnnotationSet({{3, 4, 0, 0}}), 9, 7);
    CHECK(vor.cell_count() == 1);
    for (auto id : vor.cell_ids()) CHECK(id == 0);
    const auto m = cell_mask(vor, 0);
    CHECK(std::all_of(m.values.begin(), m.values.end(), [](auto v) { return v == 1; }));
}

TEST_CASE("bisector column goes to the lower index") {
    const auto vor = voronoi_partition(AnnotationSet({{2, 5, 0, 0}, {8, 5, 0, 0}}), 11, 11);
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) CHECK(vor.at(x, y) == (x <= 5 ? 0u : 1u));
    const auto m = cell_mask(vor, 1);
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) CHECK(m.at(x, y) == (vor.at(x, y) == 1 ? 1 : 0));
}

TEST_CASE("tie-break holds regardless of which point comes first in the plane") {
    // Index 0 is the right-hand point here, so the bisector goes right.
    const auto vor = voronoi_partition(AnnotationSet({{8, 5, 0, 0}, {2, 5, 0, 0}}), 11, 11);
    for (int y = 0; y < 11; ++y) CHECK(vor.at(5, y) == 0u);
}

TEST_CASE("partition matches the brute-force nearest seed on random layouts") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const auto ann = random_points(rng, 50, 128, 128);
        const auto vor = voronoi_partition(ann, 128, 128);
        const auto ref = oracle::voronoi(ann, 128, 128);
        CHECK(std::equal(ref.begin(), ref.end(), vor.cell_ids().begin()));
    }
}

TEST_CASE("clustered and collinear seeds match the oracle") {
    std::vector<PointAnnotation> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({i * 3, 7, 0, 0});   // a row of seeds
    for (int i = 0; i < 5; ++i) pts.push_back({90 + i, 90 + i, 0, 0});  // a tight diagonal clump
    const AnnotationSet ann(pts);
    const auto vor = voronoi_partition(ann, 101, 97);
    const auto ref = oracle::voronoi(ann, 101, 97);
    CHECK(std::equal(ref.begin(), ref.end(), vor.cell_ids().begin()));
}

TEST_CASE("cells tile the plane and contain their own seed") {
    std::mt19937_64 rng(99);
    const auto ann = random_points(rng, 30, 64, 48);
    const auto vor = voronoi_partition(ann, 64, 48);
    std::vector<int> cover(64 * 48, 0);
    for (std::size_t j = 0; j < ann.size(); ++j) {
        const auto m = cell_mask(vor, j);
        for (std::size_t i = 0; i < m.values.size(); ++i) cover[i] += m.values[i];
        CHECK(vor.at(ann[j].x, ann[j].y) == j);
    }
    CHECK(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }));
}

TEST_CASE("voronoi errors") {
    try {
        voronoi_partition(AnnotationSet{}, 4, 4);
        FAIL("expected EmptyAnnotations");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyAnnotations);
    }
    try {
        voronoi_partition(AnnotationSet({{4, 0, 0, 0}}), 4, 4);
        FAIL("expected OutOfBounds");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfBounds);
    }
    const auto vor = voronoi_partition(AnnotationSet({{1, 1, 0, 0}}), 4, 4);
    try {
        cell_mask(vor, 1);
        FAIL("expected InvalidCellId");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidCellId);
    }
}
