#include <doctest.h>

#include <random>
#include <set>

#include "emip/eval.hpp"
#include "emip/synth.hpp"
#include "oracles.hpp"

using namespace emip;

TEST_CASE("prf1 arithmetic") {
    const auto a = prf1(8, 2, 2);
    CHECK(a.precision == doctest::Approx(0.8));
    CHECK(a.recall == doctest::Approx(0.8));
    CHECK(a.f1 == doctest::Approx(0.8));
    const auto z = prf1(0, 0, 0);
    CHECK(z.precision == 0.0);
    CHECK(z.recall == 0.0);
    CHECK(z.f1 == 0.0);
    const auto b = prf1(3, 1, 2);
    CHECK(b.precision == doctest::Approx(0.75));
    CHECK(b.recall == doctest::Approx(0.6));
    CHECK(b.f1 == doctest::Approx(6.0 / 9.0));
}

TEST_CASE("prf1 ranges and harmonic mean") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> u(0, 20);
    for (int i = 0; i < 500; ++i) {
        const auto s = prf1(u(rng), u(rng), u(rng));
        for (double v : {s.precision, s.recall, s.f1}) CHECK((v >= 0.0 && v <= 1.0));
        if (s.precision > 0 && s.recall > 0)
            CHECK(s.f1 == doctest::Approx(2 * s.precision * s.recall / (s.precision + s.recall)));
    }
}

TEST_CASE("match_points small cases") {
    const AnnotationSet one({{10, 10, 0, 1}});
    const std::vector<Detection> hit{{10, 10, 0, 1}};
    const auto m = match_points(hit, one);
    CHECK(m.tp == 1);
    CHECK(m.fp == 0);
    CHECK(m.fn == 0);
    const auto none = match_points({}, AnnotationSet({{1, 1, 0, 0}, {20, 20, 0, 0}, {40, 40, 0, 0}}));
    CHECK(none.tp == 0);
    CHECK(none.fp == 0);
    CHECK(none.fn == 3);
    // Radius is inclusive.
    CHECK(match_points(std::vector<Detection>{{16, 10, 0, 1}}, one, 6.0).tp == 1);
    CHECK(match_points(std::vector<Detection>{{17, 10, 0, 1}}, one, 6.0).tp == 0);
    CHECK_THROWS_AS(match_points(hit, one, 0.0), Error);
}

namespace {

// Ground-truth points on a coarse grid and detections jittered around some of
// them plus a few spurious ones: every detection is near at most one point.
void fixture(std::mt19937_64& rng, std::vector<Detection>& dets, AnnotationSet& gts) {
    std::uniform_int_distribution<int> count(0, 8), jitter(-4, 4), coin(0, 3);
    const int n = count(rng);
    std::vector<PointAnnotation> g;
    std::set<std::pair<int, int>> cells;
    std::uniform_int_distribution<int> cell(0, 5);
    while (static_cast<int>(g.size()) < n) {
        const int cx = cell(rng), cy = cell(rng);
        if (cells.insert({cx, cy}).second) g.push_back({cx * 30 + 15, cy * 30 + 15, 0, coin(rng) % 2});
    }
    gts = AnnotationSet(g);
    dets.clear();
    for (const auto& p : g)
        if (coin(rng) != 0 && dets.size() < 8) dets.push_back({p.x + jitter(rng), p.y + jitter(rng), 0, coin(rng) % 2});
    while (dets.size() < 8 && coin(rng) == 0) dets.push_back({cell(rng) * 30, cell(rng) * 30, 0, 0});
}

}  // namespace

TEST_CASE("greedy matching equals the exhaustive optimum on separated fixtures") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
        std::vector<Detection> dets;
        AnnotationSet gts;
        fixture(rng, dets, gts);
        const auto m = match_points(dets, gts, 6.0);
        CHECK(m.tp == oracle::max_matching(dets, gts, 6.0));
        CHECK(m.tp + m.fp == dets.size());
        CHECK(m.tp + m.fn == gts.size());
    }
}

TEST_CASE("maximum-cardinality matching equals the exhaustive optimum on crowded fixtures") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> pos(0, 14), n(0, 8);
    for (int i = 0; i < 200; ++i) {
        std::set<std::pair<int, int>> seen;
        std::vector<PointAnnotation> g;
        const int ng = n(rng);
        while (static_cast<int>(g.size()) < ng) {
            const int x = pos(rng), y = pos(rng);
            if (seen.insert({x, y}).second) g.push_back({x, y, 0, 0});
        }
        const AnnotationSet gts(g);
        std::vector<Detection> dets(static_cast<std::size_t>(n(rng)));
        for (auto& d : dets) d = {pos(rng), pos(rng), 0, 0};
        const auto best = oracle::max_matching(dets, gts, 5.0);
        const auto m = match_points(dets, gts, 5.0, MatchMode::MaximumCardinality);
        CHECK(m.tp == best);
        CHECK(match_points(dets, gts, 5.0).tp <= best);
        std::set<std::size_t> ds, gs;
        for (auto [d, gi] : m.pairs) {
            CHECK(ds.insert(d).second);
            CHECK(gs.insert(gi).second);
        }
    }
}

TEST_CASE("greedy can be beaten on an adversarial chain") {
    // d0 sits closest to g1 and steals it, leaving g0 unmatched.
    const AnnotationSet gts({{0, 0, 0, 0}, {5, 0, 0, 0}});
    const std::vector<Detection> dets{{4, 0, 0, 0}, {9, 0, 0, 0}};
    CHECK(match_points(dets, gts, 4.5).tp == 1);
    CHECK(match_points(dets, gts, 4.5, MatchMode::MaximumCardinality).tp == 2);
}

TEST_CASE("greedy pairs do not depend on detection order when distances are distinct") {
    const AnnotationSet gts({{0, 0, 0, 0}, {20, 0, 0, 0}, {40, 3, 0, 0}});
    std::vector<Detection> dets{{1, 0, 0, 0}, {22, 1, 0, 0}, {37, 3, 0, 0}, {18, 0, 0, 0}};
    auto pairs_by_position = [&](const std::vector<Detection>& ds) {
        std::set<std::tuple<int, int, std::size_t>> out;
        for (auto [d, g] : match_points(ds, gts).pairs) out.insert({ds[d].x, ds[d].y, g});
        return out;
    };
    const auto ref = pairs_by_position(dets);
    std::sort(dets.begin(), dets.end(), [](auto& a, auto& b) { return a.x > b.x; });
    CHECK(pairs_by_position(dets) == ref);
}

TEST_CASE("classification counts") {
    const AnnotationSet gts({{0, 0, 0, 1}, {20, 0, 0, 0}, {40, 0, 0, 1}});
    const std::vector<Detection> right{{0, 0, 0, 1}, {20, 0, 0, 0}, {40, 0, 0, 1}};
    auto cs = classification_scores(match_points(right, gts), right, gts);
    CHECK(cs.detection.f1 == 1.0);
    CHECK(cs.per_class.at(0).scores.f1 == 1.0);
    CHECK(cs.per_class.at(1).scores.f1 == 1.0);

    std::vector<Detection> flipped = right;
    for (auto& d : flipped) d.class_id = 1 - d.class_id;
    cs = classification_scores(match_points(flipped, gts), flipped, gts);
    CHECK(cs.detection.f1 == 1.0);
    CHECK(cs.per_class.at(0).scores.f1 == 0.0);
    CHECK(cs.per_class.at(1).scores.f1 == 0.0);
}

TEST_CASE("classification counts match an exhaustive tally") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> coin(0, 1), jit(-2, 2);
    std::vector<PointAnnotation> g;
    for (int i = 0; i < 10; ++i) g.push_back({i * 20, 0, 0, coin(rng)});
    const AnnotationSet gts(g);
    std::vector<Detection> dets;
    for (int i = 0; i < 10; ++i)
        if (i != 3) dets.push_back({i * 20 + jit(rng), jit(rng), 0, coin(rng)});
    dets.push_back({500, 500, 0, 1});
    const auto m = match_points(dets, gts);
    const auto cs = classification_scores(m, dets, gts);
    for (int k : {0, 1}) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (dets[d].class_id != k) continue;
            bool ok = false;
            for (auto [pd, pg] : m.pairs) ok = ok || (pd == d && gts[pg].class_id == k);
            ok ? ++tp : ++fp;
        }
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (gts[gi].class_id != k) continue;
            bool ok = false;
            for (auto [pd, pg] : m.pairs) ok = ok || (pg == gi && dets[pd].class_id == k);
            if (!ok) ++fn;
        }
        CHECK(cs.per_class.at(k).tp == tp);
        CHECK(cs.per_class.at(k).fp == fp);
        CHECK(cs.per_class.at(k).fn == fn);
    }
}

TEST_CASE("track linking") {
    const std::vector<std::vector<Detection>> same{{}, {}, {{5, 5, 0, 0}}, {{5, 5, 0, 1}}, {{6, 5, 0, 0}}};
    const auto t = link_tracks(same);
    REQUIRE(t.size() == 1);
    CHECK(t[0].members.size() == 3);
    CHECK(t[0].members[0].z == 2);
    CHECK(t[0].class_id == kPositiveClass);

    const std::vector<std::vector<Detection>> apart{{{0, 0, 0, 0}, {50, 0, 0, 0}}};
    CHECK(link_tracks(apart, 10.0).size() == 2);
    // A gap in z breaks the chain.
    const std::vector<std::vector<Detection>> gap{{{0, 0, 0, 0}}, {}, {{0, 0, 0, 0}}};
    CHECK(link_tracks(gap).size() == 2);
}

TEST_CASE("tracks recover synthetic nuclei") {
    synth::ScenarioConfig cfg;
    cfg.shape = {128, 128, 12};
    cfg.nucleus_count = 5;
    cfg.seed = 9;
    const auto sc = synth::generate(cfg);
    std::vector<std::vector<Detection>> per_slice(12);
    for (const auto& n : sc.truth.nuclei)
        for (int z = n.z_min; z <= n.z_max; ++z) per_slice[z].push_back({n.spec.cx, n.spec.cy, z, n.class_id});
    const auto tracks = link_tracks(per_slice);
    CHECK(tracks.size() == 5);
    for (const auto& n : sc.truth.nuclei) CHECK((n.z_max - n.z_min + 1 >= 3 && n.z_max - n.z_min + 1 <= 6));
}

TEST_CASE("slice integration") {
    const auto track = [](std::vector<int> classes) {
        NucleusTrack t;
        for (std::size_t i = 0; i < classes.size(); ++i) t.members.push_back({0, 0, static_cast<int>(i), classes[i]});
        return t;
    };
    CHECK(integrate_slices(track({0, 1, 0})).class_id == kPositiveClass);
    CHECK(integrate_slices(track({0, 0, 0})).class_id == kNegativeClass);
    CHECK(integrate_slices(track({1})).class_id == kPositiveClass);
    try {
        integrate_slices(NucleusTrack{});
        FAIL("expected EmptyTrack");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyTrack);
    }
    NucleusTrack conf = track({0, 0, 0});
    conf.members[1].confidence = 3.0;
    CHECK(integrate_slices(conf).representative.z == 1);
}

TEST_CASE("slice integration is an order-invariant, monotone OR") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> len(1, 12), coin(0, 1);
    for (int i = 0; i < 1000; ++i) {
        NucleusTrack t;
        bool any = false;
        const int n = len(rng);
        for (int z = 0; z < n; ++z) {
            const int c = coin(rng) && coin(rng);
            any = any || c == 1;
            t.members.push_back({0, 0, z, c});
        }
        const int got = integrate_slices(t).class_id;
        REQUIRE(got == (any ? 1 : 0));
        std::shuffle(t.members.begin(), t.members.end(), rng);
        REQUIRE(integrate_slices(t).class_id == got);
        t.members.push_back({0, 0, n, kPositiveClass});
        REQUIRE(integrate_slices(t).class_id == kPositiveClass);
    }
}
