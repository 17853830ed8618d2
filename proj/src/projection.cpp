#include "emip/projection.hpp"

#include <algorithm>
#include <numeric>

#include "emip/parallel.hpp"

namespace emip {

namespace {

float clamp_weighted(double w, float v) noexcept {
    return static_cast<float>(std::clamp(w * static_cast<double>(v), 0.0, 1.0));
}

void check_weights(double w_nuclei, double w_marker) {
    if (!(w_nuclei >= 0.0 && w_nuclei <= 1.0) || !(w_marker >= 0.0 && w_marker <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "composite weights must lie in [0, 1]");
}

CompositeImage compose_planes(int width, int height, std::span<const float> nuclei, std::span<const float> marker,
                              double w_nuclei, double w_marker) {
    CompositeImage out{width, height, std::vector<float>(3 * nuclei.size(), 0.0f)};
    for (std::size_t i = 0; i < nuclei.size(); ++i) {
        out.rgb[3 * i] = clamp_weighted(w_marker, marker[i]);
        out.rgb[3 * i + 2] = clamp_weighted(w_nuclei, nuclei[i]);
    }
    return out;
}

}  // namespace

Image2D mip(const ChannelVolume& channel) {
    const std::size_t plane = channel.shape().slice_size();
    std::vector<float> out(channel.slice(0).begin(), channel.slice(0).end());
    for (int z = 1; z < channel.depth(); ++z) {
        const auto s = channel.slice(z);
        for (std::size_t i = 0; i < plane; ++i) out[i] = std::max(out[i], s[i]);
    }
    return Image2D(channel.width(), channel.height(), std::move(out));
}

SliceSet slice_set(const BinaryMask3D& mask, const CellMask2D& cell, std::size_t min_pixels) {
    if (cell.width != mask.shape.width || cell.height != mask.shape.height)
        throw Error(ErrorCode::DimensionMismatch, "cell mask and 3D mask differ in xy shape");
    const std::size_t plane = mask.shape.slice_size();
    SliceSet out;
    for (int z = 0; z < mask.shape.depth; ++z) {
        std::size_t count = 0;
        const std::size_t base = static_cast<std::size_t>(z) * plane;
        for (std::size_t i = 0; i < plane; ++i) count += (mask.values[base + i] != 0) && (cell.values[i] != 0);
        if (count >= min_pixels) out.push_back(z);
    }
    return out;
}

EmipResult emip(const MultiChannelVolume& volume, const BinaryMask3D& mask, const VoronoiLabel& vor,
                const EmipOptions& options) {
    const Shape3& shape = volume.shape();
    if (!(mask.shape == shape) || mask.values.size() != shape.voxel_count())
        throw Error(ErrorCode::DimensionMismatch, "binary mask and volume differ in shape");
    if (vor.width() != shape.width || vor.height() != shape.height)
        throw Error(ErrorCode::DimensionMismatch, "voronoi label and volume differ in xy shape");

    const std::size_t plane = shape.slice_size();
    const std::size_t cells = vor.cell_count();
    const auto depth = static_cast<std::size_t>(shape.depth);
    const auto ids = vor.cell_ids();

    // Per-(cell, slice) pixel counts of mask AND cell; each slice fills its own column.
    std::vector<std::size_t> counts(cells * depth, 0);
    parallel_for(
        depth,
        [&](std::size_t z0, std::size_t z1) {
            for (std::size_t z = z0; z < z1; ++z) {
                const std::size_t base = z * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    if (mask.values[base + i]) ++counts[ids[i] * depth + z];
            }
        },
        1);

    EmipResult result;
    result.slice_sets.resize(cells);
    std::vector<SliceSet> effective(cells);
    SliceSet all_slices(depth);
    std::iota(all_slices.begin(), all_slices.end(), 0);
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t z = 0; z < depth; ++z)
            if (counts[c * depth + z] >= options.min_pixels) result.slice_sets[c].push_back(static_cast<int>(z));
        if (result.slice_sets[c].empty()) {
            result.fallback_cells.push_back(c);
            if (options.empty_fallback) effective[c] = all_slices;
        } else {
            effective[c] = result.slice_sets[c];
        }
    }

    std::vector<float> nuc(plane, 0.0f), mark(plane, 0.0f);
    const auto nv = volume.nuclei().voxels();
    const auto mv = volume.marker().voxels();
    parallel_for(plane, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            float n = 0.0f, m = 0.0f;
            for (int z : effective[ids[i]]) {
                const std::size_t v = static_cast<std::size_t>(z) * plane + i;
                n = std::max(n, nv[v]);
                m = std::max(m, mv[v]);
            }
            nuc[i] = n;
            mark[i] = m;
        }
    });
    result.projection = {Image2D(shape.width, shape.height, std::move(nuc)),
                         Image2D(shape.width, shape.height, std::move(mark))};
    return result;
}

CompositeImage compose(const ProjectionPair& pair, double w_nuclei, double w_marker) {
    check_weights(w_nuclei, w_marker);
    if (pair.nuclei.width() != pair.marker.width() || pair.nuclei.height() != pair.marker.height())
        throw Error(ErrorCode::DimensionMismatch, "projection pair images differ in size");
    return compose_planes(pair.nuclei.width(), pair.nuclei.height(), pair.nuclei.values(), pair.marker.values(),
                          w_nuclei, w_marker);
}

std::vector<CompositeImage> per_slice_composites(const MultiChannelVolume& volume, double w_nuclei, double w_marker) {
    check_weights(w_nuclei, w_marker);
    std::vector<CompositeImage> out(static_cast<std::size_t>(volume.shape().depth));
    parallel_for(
        out.size(),
        [&](std::size_t z0, std::size_t z1) {
            for (std::size_t z = z0; z < z1; ++z)
                out[z] = compose_planes(volume.shape().width, volume.shape().height,
                                        volume.nuclei().slice(static_cast<int>(z)),
                                        volume.marker().slice(static_cast<int>(z)), w_nuclei, w_marker);
        },
        1);
    return out;
}

}  // namespace emip
