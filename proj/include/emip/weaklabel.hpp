#pragma once

// Weak pixel labels from point annotations: distance map, intensity/distance
// feature map, k-means clustering, background cluster identification and the
// derived binary and three-region masks.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "emip/core.hpp"
#include "emip/voronoi.hpp"

namespace emip {

/// Per-voxel distance (in pixels, z scaled) to the nearest annotation.
struct ScalarField3D {
    Shape3 shape;
    std::vector<double> values;

    double at(int x, int y, int z) const noexcept { return values[shape.index(x, y, z)]; }
};

using Feature = std::array<double, 2>;

/// Per-voxel (intensity, clipped normalized distance), both in [0, 1].
struct FeatureField {
    Shape3 shape;
    std::vector<Feature> values;
};

struct ClusterField {
    Shape3 shape;
    int k = 0;
    std::vector<std::uint16_t> ids;
    std::vector<Feature> centroids;
    /// Number of voxels assigned to each cluster.
    std::vector<std::size_t> sizes;
    /// Sum of squared feature-to-centroid distances after each iteration.
    std::vector<double> objective_history;
    int iterations = 0;
};

/// 1 = nucleus, 0 = not nucleus.
struct BinaryMask3D {
    Shape3 shape;
    std::vector<std::uint8_t> values;

    std::uint8_t at(int x, int y, int z) const noexcept { return values[shape.index(x, y, z)]; }
    std::size_t count() const noexcept;
};

enum class Region : std::uint8_t { Background = 0, Unlabeled = 1, Nucleus = 2 };

inline constexpr int kNoClass = -1;

struct PixelLabelMask {
    Shape3 shape;
    std::vector<Region> regions;
    /// Class of the owning annotation for nucleus voxels, kNoClass elsewhere.
    std::vector<int> classes;
};

struct KMeansOptions {
    int k = 3;
    std::uint64_t seed = 0;
    int max_iter = 100;
    double tol = 1e-6;
};

enum class NucleiRule {
    /// The non-background cluster with the highest mean intensity is nucleus.
    HighestMeanIntensity,
    /// Every non-background cluster is nucleus.
    AllNonBackground,
};

/// Euclidean distance to the nearest annotation with the z axis scaled by
/// `z_scale`. Exact separable transform (lower envelope of parabolas).
/// Throws EmptyAnnotations, OutOfBounds, InvalidArgument (negative z_scale).
ScalarField3D distance_map(const AnnotationSet& annotations, const Shape3& shape, double z_scale = 1.0);

/// Throws DimensionMismatch on shape disagreement, InvalidArgument if d_clip <= 0.
FeatureField build_feature_map(const ChannelVolume& nuclei, const ScalarField3D& dist, double d_clip = 20.0);

/// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed,
/// independent of the worker count. Throws TooFewVoxels when fewer voxels
/// than clusters, InvalidArgument when k < 1 or k > 65535.
ClusterField kmeans(const FeatureField& features, const KMeansOptions& options = {});

/// Ellipsoids of radii (r_xy, r_xy, r_z) stamped around each annotation,
/// clipped to the volume.
BinaryMask3D dilate_points(const AnnotationSet& annotations, const Shape3& shape, int r_xy = 3, int r_z = 1);

/// Cluster whose fraction of voxels inside `dilated` is smallest; ties go to
/// the lower id. Empty clusters are never chosen unless every cluster is empty.
int identify_background(const ClusterField& clusters, const BinaryMask3D& dilated);

/// Cluster designated as nucleus under HighestMeanIntensity, or nullopt when no
/// non-empty, non-background cluster exists.
std::optional<int> nuclei_cluster(const ClusterField& clusters, int background_id);

BinaryMask3D binary_mask_3d(const ClusterField& clusters, int background_id,
                            NucleiRule rule = NucleiRule::HighestMeanIntensity);

/// Background cluster -> Background, nuclei cluster -> Nucleus carrying the
/// class of the annotation owning the enclosing Voronoi cell, other clusters ->
/// Unlabeled.
PixelLabelMask training_label_masks(const ClusterField& clusters, int background_id, const VoronoiLabel& vor,
                                    const AnnotationSet& annotations);

struct WeakLabelConfig {
    double z_scale = 1.0;
    double d_clip = 20.0;
    KMeansOptions kmeans{};
    int r_xy = 3;
    int r_z = 1;
};

struct WeakLabels {
    ScalarField3D distance;
    ClusterField clusters;
    int background_id = 0;
    BinaryMask3D mask;
    VoronoiLabel voronoi;
    PixelLabelMask labels;
};

/// Runs the full weak-label chain on the nuclei channel.
WeakLabels generate_weak_labels(const ChannelVolume& nuclei, const AnnotationSet& annotations,
                                const WeakLabelConfig& config = {});

}  // namespace emip
