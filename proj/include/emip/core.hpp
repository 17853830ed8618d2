#pragma once

// Shared volumetric and annotation types.
//
// Coordinates: x = column, y = row, z = slice, origin at the top-left of
// slice 0. Voxels are stored row-major within a slice, slices ordered by z,
// so the linear index of (x, y, z) is (z * height + y) * width + x.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "emip/error.hpp"

namespace emip {

struct Shape3 {
    int width = 0;
    int height = 0;
    int depth = 0;

    std::size_t slice_size() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::size_t voxel_count() const noexcept {
        return slice_size() * static_cast<std::size_t>(depth);
    }
    std::size_t index(int x, int y, int z) const noexcept {
        return (static_cast<std::size_t>(z) * height + y) * width + x;
    }
    bool contains(int x, int y, int z) const noexcept {
        return x >= 0 && y >= 0 && z >= 0 && x < width && y < height && z < depth;
    }
    bool valid() const noexcept { return width > 0 && height > 0 && depth > 0; }

    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// One z-stack of normalized intensities in [0, 1].
class ChannelVolume {
public:
    ChannelVolume() = default;
    /// Throws InvalidArgument on a degenerate shape, DimensionMismatch when
    /// the voxel count is wrong and InvalidValue for intensities outside [0,1].
    ChannelVolume(Shape3 shape, std::vector<float> voxels);

    /// A volume of the given shape filled with `value`.
    static ChannelVolume filled(Shape3 shape, float value = 0.0f);

    const Shape3& shape() const noexcept { return shape_; }
    int width() const noexcept { return shape_.width; }
    int height() const noexcept { return shape_.height; }
    int depth() const noexcept { return shape_.depth; }

    float at(int x, int y, int z) const noexcept { return voxels_[shape_.index(x, y, z)]; }
    std::span<const float> voxels() const noexcept { return voxels_; }
    std::span<const float> slice(int z) const noexcept {
        return std::span<const float>(voxels_).subspan(static_cast<std::size_t>(z) * shape_.slice_size(),
                                                        shape_.slice_size());
    }

    friend bool operator==(const ChannelVolume&, const ChannelVolume&) = default;

private:
    Shape3 shape_{};
    std::vector<float> voxels_;
};

/// Paired nuclei and marker z-stacks of identical shape.
class MultiChannelVolume {
public:
    MultiChannelVolume() = default;
    MultiChannelVolume(ChannelVolume nuclei, ChannelVolume marker);

    const ChannelVolume& nuclei() const noexcept { return nuclei_; }
    const ChannelVolume& marker() const noexcept { return marker_; }
    const Shape3& shape() const noexcept { return nuclei_.shape(); }

    friend bool operator==(const MultiChannelVolume&, const MultiChannelVolume&) = default;

private:
    ChannelVolume nuclei_;
    ChannelVolume marker_;
};

inline constexpr int kNegativeClass = 0;
inline constexpr int kPositiveClass = 1;

struct PointAnnotation {
    int x = 0;
    int y = 0;
    int z = 0;
    int class_id = kNegativeClass;

    friend bool operator==(const PointAnnotation&, const PointAnnotation&) = default;
};

/// Ordered point annotations. The position of a point is its identity: the
/// Voronoi cell owned by point k has id k.
class AnnotationSet {
public:
    AnnotationSet() = default;
    /// Throws DuplicatePoint when two points share (x, y).
    explicit AnnotationSet(std::vector<PointAnnotation> points);

    std::span<const PointAnnotation> points() const noexcept { return points_; }
    const PointAnnotation& operator[](std::size_t i) const noexcept { return points_[i]; }
    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }

    friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;

private:
    std::vector<PointAnnotation> points_;
};

/// Single-channel 2D image with values in [0, 1].
class Image2D {
public:
    Image2D() = default;
    Image2D(int width, int height, std::vector<float> values);
    static Image2D filled(int width, int height, float value = 0.0f);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    float at(int x, int y) const noexcept { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<const float> values() const noexcept { return values_; }

    friend bool operator==(const Image2D&, const Image2D&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

struct ValidatedInput {
    MultiChannelVolume volume;
    AnnotationSet annotations;
};

/// Validation gate for pipeline inputs: channel shapes must agree, every
/// annotation must lie inside the volume and no two may share (x, y).
ValidatedInput validate_volume(ChannelVolume nuclei, ChannelVolume marker, AnnotationSet annotations);

/// Bounds check of annotations against a shape; throws OutOfBounds.
void check_annotations_in_bounds(const AnnotationSet& annotations, const Shape3& shape);

}  // namespace emip
