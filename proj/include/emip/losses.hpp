#pragma once

// Training-loss numerics for the classification branch: cross-entropy, Dice,
// supervised contrastive (pixel-to-pixel and pixel-to-region) and entropy
// minimization, with analytic gradients and a central-difference checker.
//
// Every term is normalized to a per-sample mean. Logarithms are taken of
// max(p, kLogFloor).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "emip/error.hpp"

namespace emip::losses {

inline constexpr double kLogFloor = 1e-12;

/// N x K row-major class probabilities.
class PredictionMap {
public:
    PredictionMap() = default;
    /// Throws InvalidArgument on shape mismatch, InvalidValue for negative or
    /// non-finite entries or rows that do not sum to 1 within 1e-6.
    PredictionMap(std::size_t samples, std::size_t classes, std::vector<double> probs);
    /// Skips the row-sum check; used for gradient probing.
    static PredictionMap unchecked(std::size_t samples, std::size_t classes, std::vector<double> probs);

    std::size_t samples() const noexcept { return n_; }
    std::size_t classes() const noexcept { return k_; }
    double operator()(std::size_t i, std::size_t k) const noexcept { return p_[i * k_ + k]; }
    std::span<const double> values() const noexcept { return p_; }

private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::vector<double> p_;
};

enum class SampleRegion : std::uint8_t { Labeled, Unlabeled };

/// Per-sample target class and region. Labeled rows are one-hot at
/// `target[i]`; unlabeled rows carry no target.
class TargetMap {
public:
    TargetMap() = default;
    TargetMap(std::size_t classes, std::vector<int> target, std::vector<SampleRegion> regions);

    std::size_t samples() const noexcept { return target_.size(); }
    std::size_t classes() const noexcept { return k_; }
    bool labeled(std::size_t i) const noexcept { return regions_[i] == SampleRegion::Labeled; }
    int target(std::size_t i) const noexcept { return target_[i]; }
    /// One-hot value X(i, k); 0 for unlabeled rows.
    double operator()(std::size_t i, std::size_t k) const noexcept {
        return labeled(i) && target_[i] == static_cast<int>(k) ? 1.0 : 0.0;
    }
    std::size_t labeled_count() const noexcept;

private:
    std::size_t k_ = 0;
    std::vector<int> target_;
    std::vector<SampleRegion> regions_;
};

/// M anchors x D dims, rows unit length within 1e-5, temperature > 0.
class EmbeddingSet {
public:
    EmbeddingSet() = default;
    EmbeddingSet(std::size_t dims, std::vector<double> rows, std::vector<int> labels, double temperature = 0.1);
    /// L2-normalizes every row before construction.
    static EmbeddingSet normalized(std::size_t dims, std::vector<double> rows, std::vector<int> labels,
                                   double temperature = 0.1);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dims() const noexcept { return d_; }
    double temperature() const noexcept { return tau_; }
    std::span<const double> row(std::size_t i) const noexcept { return std::span<const double>(q_).subspan(i * d_, d_); }
    std::span<const double> values() const noexcept { return q_; }
    std::span<const int> labels() const noexcept { return labels_; }

private:
    std::size_t d_ = 0;
    double tau_ = 0.1;
    std::vector<double> q_;
    std::vector<int> labels_;
};

enum class SclMode { PixelToPixel, PixelToRegion };

struct LossWeights {
    double ce = 1.0;
    double dice = 1.0;
    double scl = 1.0;
    double entropy = 0.5;
};

struct LossBreakdown {
    double ce = 0.0;
    double dice = 0.0;
    double scl = 0.0;
    double entropy = 0.0;
    double total = 0.0;
    /// True when no anchor had both a positive and a negative.
    bool scl_skipped = false;
};

/// Fixed-order pairwise summation.
double pairwise_sum(std::span<const double> xs) noexcept;

/// Mean over labeled samples of -sum_k X log Y. Throws NoLabeledSamples.
double cross_entropy(const PredictionMap& y, const TargetMap& x);

/// 1 - (2 sum XY + eps) / (sum X + sum Y + eps) over the `foreground` column
/// of labeled samples. Throws NoLabeledSamples.
double dice_loss(const PredictionMap& y, const TargetMap& x, double eps = 1e-3, std::size_t foreground = 1);

/// Mean over valid anchors of -1/|P| sum_{p in P} log(e^{s_p} / (e^{s_p} + sum_{n in N} e^{s_n}))
/// with s = q . q' / tau. Pixel-to-pixel contrasts every other embedding;
/// pixel-to-region contrasts re-normalized per-class mean embeddings.
/// Anchors lacking a positive or a negative are skipped; throws NoValidAnchors
/// when all are.
double scl_loss(const EmbeddingSet& emb, SclMode mode = SclMode::PixelToPixel);

/// Mean over unlabeled samples of -sum_k Y log Y; 0 when there are none.
double entropy_loss(const PredictionMap& y, const TargetMap& x);

/// Weighted sum of the four terms. An SCL term without valid anchors
/// contributes 0 and sets scl_skipped.
LossBreakdown combined_loss(const PredictionMap& y, const TargetMap& x, const EmbeddingSet& emb,
                            const LossWeights& w = {}, SclMode mode = SclMode::PixelToPixel);

// Analytic gradients with respect to every entry of Y (N x K, row-major).
std::vector<double> cross_entropy_grad(const PredictionMap& y, const TargetMap& x);
std::vector<double> dice_loss_grad(const PredictionMap& y, const TargetMap& x, double eps = 1e-3,
                                   std::size_t foreground = 1);
std::vector<double> entropy_loss_grad(const PredictionMap& y, const TargetMap& x);

/// Gradient with respect to the embedding rows (M x D) treated as free
/// vectors, i.e. before any projection onto the unit sphere.
std::vector<double> scl_loss_grad(const EmbeddingSet& emb, SclMode mode = SclMode::PixelToPixel);

enum class LossKind { CrossEntropy, Dice, Entropy, SclPixelToPixel, SclPixelToRegion };

std::string_view to_string(LossKind kind);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Compares the analytic gradient of a prediction-space loss with central
/// differences. Relative error per coordinate: |g_a - g_n| / max(1e-8, |g_n|).
/// Throws NonFiniteGradient if any gradient entry is not finite.
GradCheckResult grad_check(LossKind kind, const PredictionMap& y, const TargetMap& x, double h = 1e-5);

/// Same for the contrastive loss. Each row v is perturbed and re-normalized,
/// so the analytic side is the projected gradient (I - q q^T) dL/dq.
GradCheckResult grad_check(LossKind kind, const EmbeddingSet& emb, double h = 1e-5);

/// Random well-conditioned inputs for gradient checks: logits uniform in
/// [-1.5, 1.5] pushed through a softmax (so every probability is interior),
/// roughly a quarter of the samples unlabeled, and embeddings drawn from
/// class-dependent directions with at least two samples per class.
struct LossFixture {
    PredictionMap y;
    TargetMap x;
    EmbeddingSet embeddings;
};

LossFixture random_fixture(std::uint64_t seed, std::size_t samples = 12, std::size_t classes = 3,
                           std::size_t dims = 4, double temperature = 0.1);

}  // namespace emip::losses
