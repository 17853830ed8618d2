#include "emip/voronoi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "emip/parallel.hpp"

namespace emip {

VoronoiLabel::VoronoiLabel(int width, int height, std::size_t cell_count, std::vector<std::uint32_t> cell_ids)
    : width_(width), height_(height), cell_count_(cell_count), ids_(std::move(cell_ids)) {
    if (width_ <= 0 || height_ <= 0) throw Error(ErrorCode::InvalidArgument, "voronoi dimensions must be positive");
    if (ids_.size() != static_cast<std::size_t>(width_) * height_)
        throw Error(ErrorCode::DimensionMismatch, "voronoi label pixel count mismatch");
    for (auto id : ids_)
        if (id >= cell_count_) throw Error(ErrorCode::InvalidCellId, "cell id exceeds cell count");
}

namespace {

// Uniform bucket grid over the seeds. A pixel searches Chebyshev rings of
// buckets outward and stops once no unvisited bucket can hold a seed at a
// distance <= the best one found (ties must still be examined).
class SeedGrid {
public:
    SeedGrid(const AnnotationSet& seeds, int width, int height) : seeds_(seeds) {
        const double area = static_cast<double>(width) * height;
        cell_ = std::max(1, static_cast<int>(std::ceil(std::sqrt(area / static_cast<double>(seeds.size())))));
        cols_ = (width + cell_ - 1) / cell_;
        rows_ = (height + cell_ - 1) / cell_;
        buckets_.resize(static_cast<std::size_t>(cols_) * rows_);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const auto& p = seeds[i];
            buckets_[static_cast<std::size_t>(p.y / cell_) * cols_ + p.x / cell_].push_back(static_cast<std::uint32_t>(i));
        }
    }

    std::uint32_t nearest(int x, int y) const {
        const int gx = x / cell_;
        const int gy = y / cell_;
        const int max_ring = std::max({gx, cols_ - 1 - gx, gy, rows_ - 1 - gy});
        std::int64_t best_d2 = std::numeric_limits<std::int64_t>::max();
        std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
        for (int r = 0; r <= max_ring; ++r) {
            for (int by = gy - r; by <= gy + r; ++by) {
                if (by < 0 || by >= rows_) continue;
                const bool edge_row = (by == gy - r || by == gy + r);
                const int step = edge_row ? 1 : 2 * r;
                for (int bx = gx - r; bx <= gx + r; bx += std::max(step, 1)) {
                    if (bx < 0 || bx >= cols_) continue;
                    for (std::uint32_t i : buckets_[static_cast<std::size_t>(by) * cols_ + bx]) {
                        const std::int64_t dx = seeds_[i].x - x;
                        const std::int64_t dy = seeds_[i].y - y;
                        const std::int64_t d2 = dx * dx + dy * dy;
                        if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
                            best_d2 = d2;
                            best = i;
                        }
                    }
                }
            }
            // Any seed in ring r+1 or beyond is at least r*cell+1 away on one axis.
            const std::int64_t bound = static_cast<std::int64_t>(r) * cell_ + 1;
            if (best != std::numeric_limits<std::uint32_t>::max() && bound * bound > best_d2) break;
        }
        return best;
    }

private:
    const AnnotationSet& seeds_;
    int cell_ = 1;
    int cols_ = 1;
    int rows_ = 1;
    std::vector<std::vector<std::uint32_t>> buckets_;
};

}  // namespace

VoronoiLabel voronoi_partition(const AnnotationSet& annotations, int width, int height) {
    if (annotations.empty()) throw Error(ErrorCode::EmptyAnnotations, "voronoi partition needs at least one point");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "voronoi dimensions must be positive");
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const auto& p = annotations[i];
        if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height)
            throw Error(ErrorCode::OutOfBounds, "annotation " + std::to_string(i) + " outside the image plane");
    }

    const SeedGrid grid(annotations, width, height);
    std::vector<std::uint32_t> ids(static_cast<std::size_t>(width) * height);
    parallel_for(
        static_cast<std::size_t>(height),
        [&](std::size_t y0, std::size_t y1) {
            for (std::size_t y = y0; y < y1; ++y)
                for (int x = 0; x < width; ++x)
                    ids[y * width + x] = grid.nearest(x, static_cast<int>(y));
        },
        8);
    return VoronoiLabel(width, height, annotations.size(), std::move(ids));
}

CellMask2D cell_mask(const VoronoiLabel& vor, std::size_t cell) {
    if (cell >= vor.cell_count())
        throw Error(ErrorCode::InvalidCellId,
                    "cell " + std::to_string(cell) + " >= cell count " + std::to_string(vor.cell_count()));
    CellMask2D mask{vor.width(), vor.height(), std::vector<std::uint8_t>(vor.cell_ids().size())};
    std::transform(vor.cell_ids().begin(), vor.cell_ids().end(), mask.values.begin(),
                   [cell](std::uint32_t id) { return static_cast<std::uint8_t>(id == cell ? 1 : 0); });
    return mask;
}

}  // namespace emip
