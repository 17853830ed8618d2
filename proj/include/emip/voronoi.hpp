#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emip/core.hpp"

namespace emip {

/// Discrete 2D Voronoi partition: each pixel holds the index of the nearest
/// annotation point in the xy plane (z ignored). Equidistant pixels resolve
/// to the lowest point index.
class VoronoiLabel {
public:
    VoronoiLabel() = default;
    VoronoiLabel(int width, int height, std::size_t cell_count, std::vector<std::uint32_t> cell_ids);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t cell_count() const noexcept { return cell_count_; }
    std::uint32_t at(int x, int y) const noexcept { return ids_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<const std::uint32_t> cell_ids() const noexcept { return ids_; }

    friend bool operator==(const VoronoiLabel&, const VoronoiLabel&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::size_t cell_count_ = 0;
    std::vector<std::uint32_t> ids_;
};

/// Indicator image of a single Voronoi cell.
struct CellMask2D {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    std::uint8_t at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Throws EmptyAnnotations when `annotations` is empty and OutOfBounds when a
/// point lies outside the width x height plane.
VoronoiLabel voronoi_partition(const AnnotationSet& annotations, int width, int height);

/// Throws InvalidCellId when `cell` >= vor.cell_count().
CellMask2D cell_mask(const VoronoiLabel& vor, std::size_t cell);

}  // namespace emip
