#pragma once

// Synthetic nuclei/marker volumes with known ground truth.
//
// Nuclei are axis-aligned ellipsoids whose intensity falls off as
// exp(-ln2 * rho^2) with rho the normalized ellipsoidal radius, so the
// boundary sits at half the peak contrast. Markers are cylinders sharing the
// nucleus centre in xy; the marker channel is exactly 0 outside them.

#include <cstdint>
#include <string_view>
#include <vector>

#include "emip/core.hpp"

namespace emip::synth {

enum class MarkerMode {
    /// Marker occupies the central slices of the nucleus.
    OverlapInZ,
    /// Marker sits above or below the nucleus without sharing a slice.
    DisjointInZ,
    /// Marker shares exactly one edge slice with the nucleus and extends past it.
    PartialOverlap,
    Absent,
};

std::string_view to_string(MarkerMode mode);
/// Throws InvalidArgument for an unknown name.
MarkerMode marker_mode_from_string(std::string_view name);

struct Intensities {
    float background = 0.05f;
    float nucleus = 0.8f;
    float marker = 0.9f;
    float noise_sigma = 0.02f;
};

/// z voxel spacing relative to xy implied by the default radius ranges
/// (round nuclei imaged at roughly three times coarser z sampling). Weak
/// labels on these volumes should use it as their z scale.
inline constexpr double kSliceSpacing = 3.0;

struct ScenarioConfig {
    Shape3 shape{256, 256, 12};
    int nucleus_count = 20;
    double radius_xy_min = 6.0;
    double radius_xy_max = 9.0;
    double radius_z_min = 2.2;
    double radius_z_max = 2.9;
    /// Mode of nucleus i is modes[i % modes.size()]; empty means OverlapInZ.
    std::vector<MarkerMode> modes;
    Intensities levels{};
    std::uint64_t seed = 0;
};

/// Geometry of one nucleus and its marker.
struct NucleusSpec {
    int cx = 0;
    int cy = 0;
    double cz = 0.0;
    double radius_xy = 1.0;
    double radius_z = 1.0;
    MarkerMode mode = MarkerMode::Absent;
    /// Marker cylinder; ignored when mode == Absent.
    double marker_radius = 0.0;
    int marker_z_min = 0;
    int marker_z_max = -1;
};

struct NucleusTruth {
    NucleusSpec spec;
    /// Slices that contain at least one voxel of the nucleus.
    int z_min = 0;
    int z_max = -1;
    int class_id = kNegativeClass;
};

struct GroundTruth {
    Shape3 shape;
    /// One point per nucleus at its centre, on slice floor(cz).
    AnnotationSet annotations;
    std::vector<NucleusTruth> nuclei;
    /// Per voxel: index + 1 of the nucleus covering it, 0 elsewhere.
    std::vector<std::uint16_t> nucleus_labels;
    /// Per voxel: index + 1 of the nucleus whose marker covers it, 0 elsewhere.
    std::vector<std::uint16_t> marker_labels;
};

struct Scenario {
    MultiChannelVolume volume;
    GroundTruth truth;
};

/// Draws nucleus geometry (non-overlapping footprints, each inside its own
/// Voronoi cell) and renders it. Throws InvalidArgument for inconsistent
/// configs and PlacementFailure after 1000 rejected placements of a nucleus.
Scenario generate(const ScenarioConfig& config);

/// Renders explicit geometry; noise is drawn from `seed`.
Scenario render(const Shape3& shape, const std::vector<NucleusSpec>& nuclei, const Intensities& levels,
                std::uint64_t seed);

/// Canned 64x64x10 volumes:
///   1: one nucleus over five slices with a single centre annotation
///   2: positive nucleus whose marker meets it on one of its five slices
///   3: nucleus on slices 4-9 with the marker on slices 0-3 at the same xy
/// Throws InvalidArgument for other ids.
Scenario challenge_fixture(int id);

}  // namespace emip::synth
