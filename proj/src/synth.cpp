#include "emip/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace emip::synth {

std::string_view to_string(MarkerMode mode) {
    switch (mode) {
        case MarkerMode::OverlapInZ: return "overlap_in_z";
        case MarkerMode::DisjointInZ: return "disjoint_in_z";
        case MarkerMode::PartialOverlap: return "partial_overlap";
        case MarkerMode::Absent: return "absent";
    }
    return "unknown";
}

MarkerMode marker_mode_from_string(std::string_view name) {
    for (auto m : {MarkerMode::OverlapInZ, MarkerMode::DisjointInZ, MarkerMode::PartialOverlap, MarkerMode::Absent})
        if (to_string(m) == name) return m;
    throw Error(ErrorCode::InvalidArgument, "unknown marker mode '" + std::string(name) + "'");
}

namespace {

constexpr int kMaxPlacementTries = 1000;

bool level_ok(float v) { return v >= 0.0f && v <= 1.0f; }

void check_levels(const Intensities& levels) {
    if (!level_ok(levels.background) || !level_ok(levels.nucleus) || !level_ok(levels.marker))
        throw Error(ErrorCode::InvalidArgument, "intensity levels must lie in [0, 1]");
    if (!(levels.noise_sigma >= 0.0f)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
}

// Chooses the nucleus centre slice and marker slab for one nucleus, or
// returns false when the depth cannot hold the requested mode.
bool place_in_z(NucleusSpec& n, int depth, std::mt19937_64& rng) {
    const int ext = static_cast<int>(std::floor(n.radius_z));
    const auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    switch (n.mode) {
        case MarkerMode::Absent:
        case MarkerMode::OverlapInZ: {
            if (depth - 1 - ext < ext) return false;
            const int cz = pick(ext, depth - 1 - ext);
            n.cz = cz;
            n.marker_radius = 0.6 * n.radius_xy;
            n.marker_z_min = std::max(cz - 1, cz - ext);
            n.marker_z_max = std::min(cz + 1, cz + ext);
            return true;
        }
        case MarkerMode::PartialOverlap:
        case MarkerMode::DisjointInZ: {
            const bool disjoint = n.mode == MarkerMode::DisjointInZ;
            const int len = disjoint ? pick(2, 3) : pick(1, 2);
            const int gap = disjoint ? pick(0, 1) : 0;
            // Slices the marker needs beyond the nucleus extent on its side.
            const int beyond = disjoint ? gap + len : len;
            const bool up_ok = depth - 1 - ext - beyond >= ext;
            const bool down_ok = depth - 1 - ext >= ext + beyond;
            if (!up_ok && !down_ok) return false;
            const bool up = up_ok && (!down_ok || pick(0, 1) == 1);
            const int cz = up ? pick(ext, depth - 1 - ext - beyond) : pick(ext + beyond, depth - 1 - ext);
            n.cz = cz;
            n.marker_radius = (disjoint ? 0.7 : 0.6) * n.radius_xy;
            if (disjoint) {
                n.marker_z_min = up ? cz + ext + 1 + gap : cz - ext - gap - len;
                n.marker_z_max = n.marker_z_min + len - 1;
            } else {
                n.marker_z_min = up ? cz + ext : cz - ext - len;
                n.marker_z_max = up ? cz + ext + len : cz - ext;
            }
            return true;
        }
    }
    return false;
}

}  // namespace

Scenario render(const Shape3& shape, const std::vector<NucleusSpec>& nuclei, const Intensities& levels,
                std::uint64_t seed) {
    if (!shape.valid()) throw Error(ErrorCode::InvalidArgument, "volume dimensions must be positive");
    if (nuclei.size() >= 65535) throw Error(ErrorCode::InvalidArgument, "too many nuclei");
    check_levels(levels);

    const std::size_t nvox = shape.voxel_count();
    std::vector<float> nuc(nvox, levels.background), mark(nvox, 0.0f);
    GroundTruth truth;
    truth.shape = shape;
    truth.nucleus_labels.assign(nvox, 0);
    truth.marker_labels.assign(nvox, 0);

    std::vector<PointAnnotation> points;
    for (std::size_t j = 0; j < nuclei.size(); ++j) {
        const NucleusSpec& s = nuclei[j];
        const int az = static_cast<int>(std::floor(s.cz));
        if (!shape.contains(s.cx, s.cy, az))
            throw Error(ErrorCode::InvalidArgument, "nucleus " + std::to_string(j) + " centre lies outside the volume");
        if (!(s.radius_xy > 0.0) || !(s.radius_z > 0.0))
            throw Error(ErrorCode::InvalidArgument, "nucleus radii must be positive");
        const auto label = static_cast<std::uint16_t>(j + 1);

        NucleusTruth t{s, shape.depth, -1, kNegativeClass};
        const int rxy = static_cast<int>(std::ceil(s.radius_xy));
        const int z0 = std::max(0, static_cast<int>(std::ceil(s.cz - s.radius_z)));
        const int z1 = std::min(shape.depth - 1, static_cast<int>(std::floor(s.cz + s.radius_z)));
        for (int z = z0; z <= z1; ++z)
            for (int y = std::max(0, s.cy - rxy); y <= std::min(shape.height - 1, s.cy + rxy); ++y)
                for (int x = std::max(0, s.cx - rxy); x <= std::min(shape.width - 1, s.cx + rxy); ++x) {
                    const double dx = (x - s.cx) / s.radius_xy;
                    const double dy = (y - s.cy) / s.radius_xy;
                    const double dz = (z - s.cz) / s.radius_z;
                    const double rho2 = dx * dx + dy * dy + dz * dz;
                    if (rho2 > 1.0) continue;
                    const std::size_t i = shape.index(x, y, z);
                    truth.nucleus_labels[i] = label;
                    const double falloff = std::exp(-std::numbers::ln2 * rho2);
                    nuc[i] = std::max(nuc[i], static_cast<float>(levels.background +
                                                                 (levels.nucleus - levels.background) * falloff));
                    t.z_min = std::min(t.z_min, z);
                    t.z_max = std::max(t.z_max, z);
                }

        if (s.mode != MarkerMode::Absent) {
            if (!(s.marker_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "marker radius must be positive");
            const int mr = static_cast<int>(std::ceil(s.marker_radius));
            const double mr2 = s.marker_radius * s.marker_radius;
            for (int z = std::max(0, s.marker_z_min); z <= std::min(shape.depth - 1, s.marker_z_max); ++z)
                for (int y = std::max(0, s.cy - mr); y <= std::min(shape.height - 1, s.cy + mr); ++y)
                    for (int x = std::max(0, s.cx - mr); x <= std::min(shape.width - 1, s.cx + mr); ++x) {
                        const double dx = x - s.cx;
                        const double dy = y - s.cy;
                        if (dx * dx + dy * dy > mr2) continue;
                        const std::size_t i = shape.index(x, y, z);
                        truth.marker_labels[i] = label;
                        mark[i] = levels.marker;
                    }
        }
        points.push_back({s.cx, s.cy, az, kNegativeClass});
        truth.nuclei.push_back(t);
    }

    // Positive iff the nucleus and its marker share at least one voxel.
    for (std::size_t i = 0; i < nvox; ++i) {
        const auto l = truth.nucleus_labels[i];
        if (l != 0 && truth.marker_labels[i] == l) truth.nuclei[l - 1].class_id = kPositiveClass;
    }
    for (std::size_t j = 0; j < points.size(); ++j) points[j].class_id = truth.nuclei[j].class_id;
    truth.annotations = AnnotationSet(std::move(points));

    std::mt19937_64 rng(seed);
    std::normal_distribution<float> noise(0.0f, levels.noise_sigma);
    if (levels.noise_sigma > 0.0f) {
        for (std::size_t i = 0; i < nvox; ++i) nuc[i] = std::clamp(nuc[i] + noise(rng), 0.0f, 1.0f);
        for (std::size_t i = 0; i < nvox; ++i)
            if (truth.marker_labels[i] != 0) mark[i] = std::clamp(mark[i] + noise(rng), 0.0f, 1.0f);
    }

    return {MultiChannelVolume(ChannelVolume(shape, std::move(nuc)), ChannelVolume(shape, std::move(mark))),
            std::move(truth)};
}

Scenario generate(const ScenarioConfig& config) {
    const Shape3& shape = config.shape;
    if (!shape.valid()) throw Error(ErrorCode::InvalidArgument, "volume dimensions must be positive");
    if (config.nucleus_count < 0) throw Error(ErrorCode::InvalidArgument, "nucleus count must be >= 0");
    if (!(config.radius_xy_min > 0.0) || config.radius_xy_max < config.radius_xy_min ||
        !(config.radius_z_min > 0.0) || config.radius_z_max < config.radius_z_min)
        throw Error(ErrorCode::InvalidArgument, "radius ranges must be positive and ordered");
    const int margin_max = static_cast<int>(std::ceil(config.radius_xy_max)) + 1;
    if (2 * margin_max >= std::min(shape.width, shape.height))
        throw Error(ErrorCode::InvalidArgument, "nucleus radius does not fit the volume");
    check_levels(config.levels);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> rxy_dist(config.radius_xy_min, config.radius_xy_max);
    std::uniform_real_distribution<double> rz_dist(config.radius_z_min, config.radius_z_max);

    std::vector<NucleusSpec> specs;
    for (int i = 0; i < config.nucleus_count; ++i) {
        NucleusSpec n;
        n.mode = config.modes.empty() ? MarkerMode::OverlapInZ : config.modes[i % config.modes.size()];
        bool placed = false;
        for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
            n.radius_xy = rxy_dist(rng);
            n.radius_z = rz_dist(rng);
            const int margin = static_cast<int>(std::ceil(n.radius_xy)) + 1;
            n.cx = std::uniform_int_distribution<int>(margin, shape.width - 1 - margin)(rng);
            n.cy = std::uniform_int_distribution<int>(margin, shape.height - 1 - margin)(rng);
            // Footprints stay inside their own Voronoi cells: centres are at
            // least twice the larger radius (plus a gap) apart.
            placed = std::all_of(specs.begin(), specs.end(), [&](const NucleusSpec& o) {
                const double need = 2.0 * std::max(n.radius_xy, o.radius_xy) + 2.0;
                const double dx = n.cx - o.cx;
                const double dy = n.cy - o.cy;
                return dx * dx + dy * dy >= need * need;
            });
        }
        if (!placed)
            throw Error(ErrorCode::PlacementFailure, "could not place nucleus " + std::to_string(i) + " after " +
                                                         std::to_string(kMaxPlacementTries) + " attempts");
        if (!place_in_z(n, shape.depth, rng))
            throw Error(ErrorCode::InvalidArgument, "depth " + std::to_string(shape.depth) + " cannot hold mode " +
                                                        std::string(to_string(n.mode)));
        specs.push_back(n);
    }
    return render(shape, specs, config.levels, rng());
}

Scenario challenge_fixture(int id) {
    const Shape3 shape{64, 64, 10};
    NucleusSpec n;
    n.cx = 32;
    n.cy = 32;
    n.radius_xy = 9.0;
    switch (id) {
        case 1:  // slices 2..6, marker inside the central slices
            n.cz = 4.0;
            n.radius_z = 2.5;
            n.mode = MarkerMode::OverlapInZ;
            n.marker_radius = 5.0;
            n.marker_z_min = 3;
            n.marker_z_max = 5;
            break;
        case 2:  // slices 2..6, marker on 6..8 so only slice 6 is shared
            n.cz = 4.0;
            n.radius_z = 2.5;
            n.mode = MarkerMode::PartialOverlap;
            n.marker_radius = 5.0;
            n.marker_z_min = 6;
            n.marker_z_max = 8;
            break;
        case 3:  // slices 4..9, marker on 0..3
            n.cz = 6.5;
            n.radius_z = 3.0;
            n.mode = MarkerMode::DisjointInZ;
            n.marker_radius = 6.0;
            n.marker_z_min = 0;
            n.marker_z_max = 3;
            break;
        default:
            throw Error(ErrorCode::InvalidArgument, "challenge fixture id must be 1, 2 or 3");
    }
    return render(shape, {n}, Intensities{}, static_cast<std::uint64_t>(id));
}

}  // namespace emip::synth
