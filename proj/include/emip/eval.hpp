#pragma once

// Point-level detection and classification scoring, plus the test-time rule
// that merges per-slice predictions into one call per nucleus.

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "emip/core.hpp"

namespace emip {

struct Detection {
    int x = 0;
    int y = 0;
    int z = 0;
    int class_id = kNegativeClass;
    double confidence = 1.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct MatchResult {
    /// (detection index, ground-truth index), in the order they were accepted.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ClassCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    Scores scores;
};

struct ClassificationScores {
    Scores detection;
    std::map<int, ClassCounts> per_class;
};

enum class MatchMode {
    /// Accept candidate pairs by ascending distance (ties: detection index,
    /// then ground-truth index).
    Greedy,
    /// Maximum-cardinality one-to-one matching via augmenting paths.
    MaximumCardinality,
};

/// A detection and a ground-truth point may pair iff their xy distance is
/// <= radius. Throws InvalidArgument when radius <= 0.
MatchResult match_points(std::span<const Detection> detections, const AnnotationSet& ground_truth, double radius = 6.0,
                         MatchMode mode = MatchMode::Greedy);

/// Ratio metrics; any 0/0 yields 0.
Scores prf1(std::size_t tp, std::size_t fp, std::size_t fn);
inline Scores prf1(const MatchResult& m) { return prf1(m.tp, m.fp, m.fn); }

/// Per-class counts over the classes present in either input:
///   TP_k: matched pairs with predicted == true == k
///   FP_k: detections predicted k not matched to a true-k point
///   FN_k: true-k points not matched to a predicted-k detection
ClassificationScores classification_scores(const MatchResult& m, std::span<const Detection> detections,
                                           const AnnotationSet& ground_truth);

struct NucleusTrack {
    /// Strictly increasing z.
    std::vector<Detection> members;
    int class_id = kNegativeClass;
};

/// Greedy nearest-neighbour chaining of detections on consecutive slices.
/// `per_slice[z]` holds the detections found on slice z; member z values are
/// overwritten with the slice index. Throws InvalidArgument when
/// link_radius <= 0.
std::vector<NucleusTrack> link_tracks(const std::vector<std::vector<Detection>>& per_slice, double link_radius = 5.0);

struct IntegratedNucleus {
    int class_id = kNegativeClass;
    /// Member with the highest confidence (first one on ties).
    Detection representative;
};

/// Positive iff any member is positive. Throws EmptyTrack.
IntegratedNucleus integrate_slices(const NucleusTrack& track);

}  // namespace emip
