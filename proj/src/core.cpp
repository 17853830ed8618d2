#include "emip/core.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <string>
#include <thread>
#include <utility>

#include "emip/parallel.hpp"

namespace emip {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::DuplicatePoint: return "DuplicatePoint";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::EmptyAnnotations: return "EmptyAnnotations";
        case ErrorCode::TooFewVoxels: return "TooFewVoxels";
        case ErrorCode::InvalidCellId: return "InvalidCellId";
        case ErrorCode::NoLabeledSamples: return "NoLabeledSamples";
        case ErrorCode::NoValidAnchors: return "NoValidAnchors";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::EmptyTrack: return "EmptyTrack";
        case ErrorCode::PlacementFailure: return "PlacementFailure";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, int line)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), line_(line) {}

bool is_validation_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonFiniteGradient:
        case ErrorCode::Io:
            return false;
        default:
            return true;
    }
}

namespace {
std::atomic<int> g_threads{0};
}

int thread_count() noexcept {
    const int n = g_threads.load(std::memory_order_relaxed);
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_thread_count(int n) noexcept { g_threads.store(n > 0 ? n : 0, std::memory_order_relaxed); }

ChannelVolume::ChannelVolume(Shape3 shape, std::vector<float> voxels) : shape_(shape), voxels_(std::move(voxels)) {
    if (!shape_.valid())
        throw Error(ErrorCode::InvalidArgument, "volume dimensions must be positive");
    if (voxels_.size() != shape_.voxel_count())
        throw Error(ErrorCode::DimensionMismatch, "voxel count " + std::to_string(voxels_.size()) +
                                                      " does not match " + std::to_string(shape_.voxel_count()));
    for (float v : voxels_)
        if (!(v >= 0.0f && v <= 1.0f))
            throw Error(ErrorCode::InvalidValue, "intensity outside [0,1]: " + std::to_string(v));
}

ChannelVolume ChannelVolume::filled(Shape3 shape, float value) {
    return ChannelVolume(shape, std::vector<float>(shape.valid() ? shape.voxel_count() : 0, value));
}

MultiChannelVolume::MultiChannelVolume(ChannelVolume nuclei, ChannelVolume marker)
    : nuclei_(std::move(nuclei)), marker_(std::move(marker)) {
    if (!(nuclei_.shape() == marker_.shape()))
        throw Error(ErrorCode::DimensionMismatch, "nuclei and marker channels differ in shape");
}

AnnotationSet::AnnotationSet(std::vector<PointAnnotation> points) : points_(std::move(points)) {
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!seen.emplace(points_[i].x, points_[i].y).second)
            throw Error(ErrorCode::DuplicatePoint, "point " + std::to_string(i) + " repeats (" +
                                                       std::to_string(points_[i].x) + ", " +
                                                       std::to_string(points_[i].y) + ")");
    }
}

Image2D::Image2D(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width_ <= 0 || height_ <= 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(width_) * height_)
        throw Error(ErrorCode::DimensionMismatch, "pixel count does not match image dimensions");
    for (float v : values_)
        if (!(v >= 0.0f && v <= 1.0f)) throw Error(ErrorCode::InvalidValue, "pixel value outside [0,1]");
}

Image2D Image2D::filled(int width, int height, float value) {
    return Image2D(width, height,
                   std::vector<float>(width > 0 && height > 0 ? static_cast<std::size_t>(width) * height : 0, value));
}

void check_annotations_in_bounds(const AnnotationSet& annotations, const Shape3& shape) {
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const auto& p = annotations[i];
        if (!shape.contains(p.x, p.y, p.z))
            throw Error(ErrorCode::OutOfBounds, "annotation " + std::to_string(i) + " at (" + std::to_string(p.x) +
                                                    ", " + std::to_string(p.y) + ", " + std::to_string(p.z) +
                                                    ") lies outside the volume");
    }
}

ValidatedInput validate_volume(ChannelVolume nuclei, ChannelVolume marker, AnnotationSet annotations) {
    MultiChannelVolume volume(std::move(nuclei), std::move(marker));
    check_annotations_in_bounds(annotations, volume.shape());
    return {std::move(volume), std::move(annotations)};
}

}  // namespace emip
