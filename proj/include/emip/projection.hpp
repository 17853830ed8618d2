#pragma once

// Maximum intensity projections: the plain per-pixel max over all slices and
// the per-Voronoi-cell variant restricted to the slices that contain that
// cell's nucleus, plus the RGB linear-combination composites.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "emip/core.hpp"
#include "emip/voronoi.hpp"
#include "emip/weaklabel.hpp"

namespace emip {

/// Sorted slice indices.
using SliceSet = std::vector<int>;

struct ProjectionPair {
    Image2D nuclei;
    Image2D marker;
};

/// Interleaved RGB, marker in R, nuclei in B, G unused.
struct CompositeImage {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    float r(int x, int y) const noexcept { return rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
    float g(int x, int y) const noexcept { return rgb[3 * (static_cast<std::size_t>(y) * width + x) + 1]; }
    float b(int x, int y) const noexcept { return rgb[3 * (static_cast<std::size_t>(y) * width + x) + 2]; }

    friend bool operator==(const CompositeImage&, const CompositeImage&) = default;
};

Image2D mip(const ChannelVolume& channel);

/// z is in the set iff (mask AND cell) has at least `min_pixels` pixels on slice z.
SliceSet slice_set(const BinaryMask3D& mask, const CellMask2D& cell, std::size_t min_pixels = 1);

struct EmipOptions {
    std::size_t min_pixels = 1;
    /// When a cell's slice set is empty, project that cell over every slice
    /// (recorded in EmipResult::fallback_cells). Otherwise the cell stays 0.
    bool empty_fallback = true;
};

struct EmipResult {
    ProjectionPair projection;
    /// Slice set per Voronoi cell, indexed by cell id.
    std::vector<SliceSet> slice_sets;
    /// Cells whose slice set was empty, ascending.
    std::vector<std::size_t> fallback_cells;
};

/// Per-cell projection. Throws DimensionMismatch when the mask or Voronoi
/// label disagree with the volume.
EmipResult emip(const MultiChannelVolume& volume, const BinaryMask3D& mask, const VoronoiLabel& vor,
                const EmipOptions& options = {});

/// B = clamp(w_nuclei * nuclei), R = clamp(w_marker * marker), G = 0.
/// Throws InvalidArgument for weights outside [0, 1] and DimensionMismatch
/// when the pair's images differ in size.
CompositeImage compose(const ProjectionPair& pair, double w_nuclei = 1.0, double w_marker = 1.0);

/// One composite per slice, built from that slice of each channel.
std::vector<CompositeImage> per_slice_composites(const MultiChannelVolume& volume, double w_nuclei = 1.0,
                                                 double w_marker = 1.0);

}  // namespace emip
