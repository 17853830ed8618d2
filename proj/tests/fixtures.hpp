#pragma once

// Random inputs shared by unit and acceptance tests.

#include <algorithm>
#include <array>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "emip/core.hpp"
#include "emip/weaklabel.hpp"

namespace fixture {

/// `n` points with distinct xy, uniform over the volume.
inline emip::AnnotationSet random_points(std::mt19937_64& rng, int n, const emip::Shape3& s) {
    std::set<std::pair<int, int>> seen;
    std::vector<emip::PointAnnotation> pts;
    std::uniform_int_distribution<int> ux(0, s.width - 1), uy(0, s.height - 1), uz(0, s.depth - 1);
    while (static_cast<int>(pts.size()) < n) {
        const int x = ux(rng), y = uy(rng);
        if (seen.insert({x, y}).second) pts.push_back({x, y, uz(rng), 0});
    }
    return emip::AnnotationSet(std::move(pts));
}

/// Three tight Gaussian blobs in feature space, shuffled; `truth` receives
/// the blob of each voxel.
inline emip::FeatureField planted_blobs(std::uint64_t seed, std::size_t per_blob, std::vector<int>& truth) {
    const std::array<emip::Feature, 3> centres{{{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.9}}};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.02);
    emip::FeatureField f{{static_cast<int>(per_blob), 3, 1}, {}};
    truth.clear();
    for (int b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < per_blob; ++i) {
            f.values.push_back({centres[b][0] + noise(rng), centres[b][1] + noise(rng)});
            truth.push_back(b);
        }
    std::vector<std::size_t> order(truth.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    emip::FeatureField g = f;
    std::vector<int> t(truth.size());
    for (std::size_t i = 0; i < order.size(); ++i) g.values[i] = f.values[order[i]], t[i] = truth[order[i]];
    truth = t;
    return g;
}

/// Fraction of voxels whose cluster maps to their planted blob under the
/// best relabeling of the three clusters.
inline double best_agreement(const emip::ClusterField& c, const std::vector<int>& truth) {
    std::array<int, 3> perm{0, 1, 2};
    double best = 0.0;
    do {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) hit += perm[c.ids[i]] == truth[i];
        best = std::max(best, static_cast<double>(hit) / static_cast<double>(truth.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace fixture
