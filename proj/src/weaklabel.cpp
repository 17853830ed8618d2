#include "emip/weaklabel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "emip/parallel.hpp"

namespace emip {

std::size_t BinaryMask3D::count() const noexcept {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance transform of one sampled line: out[q] = min_p f[p] + w (q-p)^2.
// Infinite samples are not sites. Scratch buffers must hold n and n+1 entries.
void envelope_1d(const double* f, int n, double w, double* out, int* v, double* z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double s = 0.0;
        for (;;) {
            const int p = v[k];
            s = ((f[q] + w * q * q) - (f[p] + w * p * p)) / (2.0 * w * (q - p));
            if (s <= z[k])
                --k;  // z[0] == -inf stops this before k goes negative
            else
                break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        std::fill(out, out + n, kInf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double d = q - v[j];
        out[q] = w * d * d + f[v[j]];
    }
}

// Applies envelope_1d along one axis of a 3D field. Lines are enumerated by
// (a, b) over the two other axes; offset(a, b) is the first sample and
// `stride` the step between samples.
template <typename Offset>
void transform_axis(std::vector<double>& field, int n, std::size_t stride, std::size_t lines_a, std::size_t lines_b,
                    double w, Offset offset) {
    parallel_for(
        lines_a * lines_b,
        [&](std::size_t lo, std::size_t hi) {
            std::vector<double> in(n), out(n), z(n + 1);
            std::vector<int> v(n);
            for (std::size_t line = lo; line < hi; ++line) {
                const std::size_t base = offset(line % lines_a, line / lines_a);
                for (int i = 0; i < n; ++i) in[i] = field[base + i * stride];
                if (w == 0.0) {
                    const double m = *std::min_element(in.begin(), in.end());
                    std::fill(out.begin(), out.end(), m);
                } else {
                    envelope_1d(in.data(), n, w, out.data(), v.data(), z.data());
                }
                for (int i = 0; i < n; ++i) field[base + i * stride] = out[i];
            }
        },
        16);
}

double squared_distance(const Feature& a, const Feature& b) noexcept {
    const double d0 = a[0] - b[0];
    const double d1 = a[1] - b[1];
    return d0 * d0 + d1 * d1;
}

std::uint16_t nearest_centroid(const Feature& f, const std::vector<Feature>& centroids) noexcept {
    std::uint16_t best = 0;
    double best_d = squared_distance(f, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = squared_distance(f, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint16_t>(c);
        }
    }
    return best;
}

std::vector<Feature> kmeans_pp_seed(const std::vector<Feature>& x, int k, std::mt19937_64& rng) {
    const std::size_t n = x.size();
    std::vector<Feature> centroids;
    centroids.reserve(k);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centroids.push_back(x[pick(rng)]);

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x[i], centroids[0]);

    while (static_cast<int>(centroids.size()) < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > u && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // Every voxel coincides with a chosen centroid.
            chosen = pick(rng);
        }
        centroids.push_back(x[chosen]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x[i], centroids.back()));
    }
    return centroids;
}

}  // namespace

ScalarField3D distance_map(const AnnotationSet& annotations, const Shape3& shape, double z_scale) {
    if (annotations.empty()) throw Error(ErrorCode::EmptyAnnotations, "distance map needs at least one point");
    if (!shape.valid()) throw Error(ErrorCode::InvalidArgument, "volume dimensions must be positive");
    if (!(z_scale >= 0.0) || !std::isfinite(z_scale))
        throw Error(ErrorCode::InvalidArgument, "z_scale must be finite and >= 0");
    check_annotations_in_bounds(annotations, shape);

    const auto W = static_cast<std::size_t>(shape.width);
    const auto H = static_cast<std::size_t>(shape.height);
    const auto D = static_cast<std::size_t>(shape.depth);
    std::vector<double> field(shape.voxel_count(), kInf);
    for (const auto& p : annotations.points()) field[shape.index(p.x, p.y, p.z)] = 0.0;

    // x lines indexed by (y, z); y lines by (x, z); z lines by (x, y).
    transform_axis(field, shape.width, 1, H, D, 1.0, [&](std::size_t y, std::size_t z) { return (z * H + y) * W; });
    transform_axis(field, shape.height, W, W, D, 1.0, [&](std::size_t x, std::size_t z) { return z * H * W + x; });
    transform_axis(field, shape.depth, W * H, W, H, z_scale * z_scale,
                   [&](std::size_t x, std::size_t y) { return y * W + x; });

    for (double& v : field) v = std::sqrt(v);
    return {shape, std::move(field)};
}

FeatureField build_feature_map(const ChannelVolume& nuclei, const ScalarField3D& dist, double d_clip) {
    if (!(nuclei.shape() == dist.shape) || dist.values.size() != nuclei.shape().voxel_count())
        throw Error(ErrorCode::DimensionMismatch, "distance map and nuclei channel differ in shape");
    if (!(d_clip > 0.0) || !std::isfinite(d_clip)) throw Error(ErrorCode::InvalidArgument, "d_clip must be > 0");

    FeatureField out{nuclei.shape(), std::vector<Feature>(dist.values.size())};
    const auto voxels = nuclei.voxels();
    parallel_for(out.values.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            out.values[i] = {static_cast<double>(voxels[i]), std::min(dist.values[i], d_clip) / d_clip};
    });
    return out;
}

ClusterField kmeans(const FeatureField& features, const KMeansOptions& options) {
    const int k = options.k;
    if (k < 1 || k > 65535) throw Error(ErrorCode::InvalidArgument, "k must be in [1, 65535]");
    const auto& x = features.values;
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(k))
        throw Error(ErrorCode::TooFewVoxels, std::to_string(n) + " voxels for " + std::to_string(k) + " clusters");

    std::mt19937_64 rng(options.seed);
    ClusterField out;
    out.shape = features.shape;
    out.k = k;
    out.centroids = kmeans_pp_seed(x, k, rng);
    out.ids.assign(n, 0);
    out.sizes.assign(k, 0);

    std::vector<double> err(n);
    for (int iter = 0; iter < std::max(1, options.max_iter); ++iter) {
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) out.ids[i] = nearest_centroid(x[i], out.centroids);
        });

        // Sequential update keeps the floating-point sums in voxel order.
        std::vector<Feature> sums(k, Feature{0.0, 0.0});
        std::fill(out.sizes.begin(), out.sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[out.ids[i]];
            s[0] += x[i][0];
            s[1] += x[i][1];
            ++out.sizes[out.ids[i]];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (out.sizes[c] == 0) continue;  // empty cluster keeps its centroid
            const double cnt = static_cast<double>(out.sizes[c]);
            const Feature next{sums[c][0] / cnt, sums[c][1] / cnt};
            shift = std::max(shift, std::sqrt(squared_distance(next, out.centroids[c])));
            out.centroids[c] = next;
        }

        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) err[i] = squared_distance(x[i], out.centroids[out.ids[i]]);
        });
        out.objective_history.push_back(std::accumulate(err.begin(), err.end(), 0.0));
        out.iterations = iter + 1;
        if (shift < options.tol) break;
    }
    return out;
}

BinaryMask3D dilate_points(const AnnotationSet& annotations, const Shape3& shape, int r_xy, int r_z) {
    if (r_xy < 0 || r_z < 0) throw Error(ErrorCode::InvalidArgument, "dilation radii must be >= 0");
    BinaryMask3D mask{shape, std::vector<std::uint8_t>(shape.voxel_count(), 0)};
    const std::int64_t rxy2 = static_cast<std::int64_t>(r_xy) * r_xy;
    const std::int64_t rz2 = static_cast<std::int64_t>(r_z) * r_z;
    // Integer form of (dx^2+dy^2)/r_xy^2 + dz^2/r_z^2 <= 1 that stays valid for zero radii.
    const auto inside = [&](std::int64_t dxy2, std::int64_t dz2) {
        if (r_xy == 0 && dxy2 != 0) return false;
        if (r_z == 0 && dz2 != 0) return false;
        if (r_xy == 0) return dz2 <= rz2;
        if (r_z == 0) return dxy2 <= rxy2;
        return dxy2 * rz2 + dz2 * rxy2 <= rxy2 * rz2;
    };
    for (const auto& p : annotations.points()) {
        for (int dz = -r_z; dz <= r_z; ++dz) {
            const int z = p.z + dz;
            if (z < 0 || z >= shape.depth) continue;
            for (int dy = -r_xy; dy <= r_xy; ++dy) {
                const int y = p.y + dy;
                if (y < 0 || y >= shape.height) continue;
                for (int dx = -r_xy; dx <= r_xy; ++dx) {
                    const int x = p.x + dx;
                    if (x < 0 || x >= shape.width) continue;
                    if (inside(static_cast<std::int64_t>(dx) * dx + static_cast<std::int64_t>(dy) * dy,
                               static_cast<std::int64_t>(dz) * dz))
                        mask.values[shape.index(x, y, z)] = 1;
                }
            }
        }
    }
    return mask;
}

int identify_background(const ClusterField& clusters, const BinaryMask3D& dilated) {
    if (!(clusters.shape == dilated.shape) || clusters.ids.size() != dilated.values.size())
        throw Error(ErrorCode::DimensionMismatch, "cluster field and dilated mask differ in shape");
    std::vector<std::uint64_t> overlap(clusters.k, 0), size(clusters.k, 0);
    for (std::size_t i = 0; i < clusters.ids.size(); ++i) {
        ++size[clusters.ids[i]];
        overlap[clusters.ids[i]] += dilated.values[i] != 0;
    }
    int best = -1;
    for (int c = 0; c < clusters.k; ++c) {
        if (size[c] == 0) continue;
        // overlap[c]/size[c] < overlap[best]/size[best], compared without rounding.
        if (best < 0 || overlap[c] * size[best] < overlap[best] * size[c]) best = c;
    }
    return best < 0 ? 0 : best;
}

std::optional<int> nuclei_cluster(const ClusterField& clusters, int background_id) {
    std::optional<int> best;
    for (int c = 0; c < clusters.k; ++c) {
        if (c == background_id || clusters.sizes[c] == 0) continue;
        if (!best || clusters.centroids[c][0] > clusters.centroids[*best][0]) best = c;
    }
    return best;
}

BinaryMask3D binary_mask_3d(const ClusterField& clusters, int background_id, NucleiRule rule) {
    if (background_id < 0 || background_id >= clusters.k)
        throw Error(ErrorCode::InvalidArgument, "background id outside [0, k)");
    BinaryMask3D mask{clusters.shape, std::vector<std::uint8_t>(clusters.ids.size(), 0)};
    if (rule == NucleiRule::AllNonBackground) {
        for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = clusters.ids[i] != background_id;
        return mask;
    }
    const auto nuc = nuclei_cluster(clusters, background_id);
    if (!nuc) return mask;
    for (std::size_t i = 0; i < mask.values.size(); ++i) mask.values[i] = clusters.ids[i] == *nuc;
    return mask;
}

PixelLabelMask training_label_masks(const ClusterField& clusters, int background_id, const VoronoiLabel& vor,
                                    const AnnotationSet& annotations) {
    const Shape3& shape = clusters.shape;
    if (vor.width() != shape.width || vor.height() != shape.height)
        throw Error(ErrorCode::DimensionMismatch, "voronoi label and cluster field differ in xy shape");
    if (vor.cell_count() != annotations.size())
        throw Error(ErrorCode::DimensionMismatch, "voronoi cell count differs from annotation count");
    if (background_id < 0 || background_id >= clusters.k)
        throw Error(ErrorCode::InvalidArgument, "background id outside [0, k)");

    const auto nuc = nuclei_cluster(clusters, background_id);
    PixelLabelMask out{shape, std::vector<Region>(clusters.ids.size()), std::vector<int>(clusters.ids.size(), kNoClass)};
    const std::size_t plane = shape.slice_size();
    const auto ids = vor.cell_ids();
    for (std::size_t i = 0; i < clusters.ids.size(); ++i) {
        const int c = clusters.ids[i];
        if (c == background_id) {
            out.regions[i] = Region::Background;
        } else if (nuc && c == *nuc) {
            out.regions[i] = Region::Nucleus;
            out.classes[i] = annotations[ids[i % plane]].class_id;
        } else {
            out.regions[i] = Region::Unlabeled;
        }
    }
    return out;
}

WeakLabels generate_weak_labels(const ChannelVolume& nuclei, const AnnotationSet& annotations,
                                const WeakLabelConfig& config) {
    WeakLabels out;
    out.distance = distance_map(annotations, nuclei.shape(), config.z_scale);
    const FeatureField features = build_feature_map(nuclei, out.distance, config.d_clip);
    out.clusters = kmeans(features, config.kmeans);
    const BinaryMask3D dilated = dilate_points(annotations, nuclei.shape(), config.r_xy, config.r_z);
    out.background_id = identify_background(out.clusters, dilated);
    out.mask = binary_mask_3d(out.clusters, out.background_id);
    out.voronoi = voronoi_partition(annotations, nuclei.width(), nuclei.height());
    out.labels = training_label_masks(out.clusters, out.background_id, out.voronoi, annotations);
    return out;
}

}  // namespace emip
