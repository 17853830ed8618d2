#include "emip/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>

namespace emip::losses {

namespace {

double safe_log(double p) noexcept { return std::log(std::max(p, kLogFloor)); }

double softplus(double t) noexcept { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void check_pair(const PredictionMap& y, const TargetMap& x) {
    if (y.samples() != x.samples() || y.classes() != x.classes())
        throw Error(ErrorCode::DimensionMismatch, "prediction and target maps differ in shape");
}

void require_labeled(const TargetMap& x) {
    if (x.labeled_count() == 0) throw Error(ErrorCode::NoLabeledSamples, "loss needs at least one labeled sample");
}

// One softmax-style contrast: a positive logit against negative logits.
// Returns -log(e^pos / (e^pos + sum e^neg)) and fills d(loss)/d(logit).
double contrast_term(double pos, std::span<const double> neg, double& d_pos, std::span<double> d_neg) {
    double m = -std::numeric_limits<double>::infinity();
    for (double s : neg) m = std::max(m, s - pos);
    double acc = 0.0;
    for (double s : neg) acc += std::exp(s - pos - m);
    const double t = m + std::log(acc);  // log sum_n e^{s_n - s_p}
    const double sig_t = 1.0 / (1.0 + std::exp(-t));
    d_pos = -sig_t;  // pi_p - 1
    for (std::size_t i = 0; i < neg.size(); ++i) d_neg[i] = std::exp(neg[i] - pos - t) * sig_t;
    return softplus(t);
}

struct SclEval {
    double loss = 0.0;
    std::vector<double> grad;  // empty unless requested
};

SclEval scl_pixel_to_pixel(const EmbeddingSet& emb, bool want_grad) {
    const std::size_t m = emb.size();
    const std::size_t d = emb.dims();
    const double tau = emb.temperature();
    const auto labels = emb.labels();

    std::vector<double> per_anchor;
    std::vector<std::vector<std::pair<std::size_t, double>>> dlogit(m);  // (other, dL/ds) per anchor, unscaled
    std::vector<std::size_t> pos, neg;
    std::vector<double> neg_logits, d_neg;
    for (std::size_t a = 0; a < m; ++a) {
        pos.clear();
        neg.clear();
        for (std::size_t j = 0; j < m; ++j) {
            if (j == a) continue;
            (labels[j] == labels[a] ? pos : neg).push_back(j);
        }
        if (pos.empty() || neg.empty()) continue;

        neg_logits.resize(neg.size());
        d_neg.resize(neg.size());
        for (std::size_t i = 0; i < neg.size(); ++i) neg_logits[i] = dot(emb.row(a), emb.row(neg[i])) / tau;
        std::vector<double> terms;
        terms.reserve(pos.size());
        std::vector<double> neg_acc(neg.size(), 0.0);
        const double inv_p = 1.0 / static_cast<double>(pos.size());
        for (std::size_t p : pos) {
            double d_pos = 0.0;
            terms.push_back(contrast_term(dot(emb.row(a), emb.row(p)) / tau, neg_logits, d_pos, d_neg));
            if (want_grad) {
                dlogit[a].emplace_back(p, d_pos * inv_p);
                for (std::size_t i = 0; i < neg.size(); ++i) neg_acc[i] += d_neg[i] * inv_p;
            }
        }
        if (want_grad)
            for (std::size_t i = 0; i < neg.size(); ++i) dlogit[a].emplace_back(neg[i], neg_acc[i]);
        per_anchor.push_back(pairwise_sum(terms) * inv_p);
    }
    if (per_anchor.empty()) throw Error(ErrorCode::NoValidAnchors, "no anchor has both a positive and a negative");

    SclEval out;
    const double inv_a = 1.0 / static_cast<double>(per_anchor.size());
    out.loss = pairwise_sum(per_anchor) * inv_a;
    if (want_grad) {
        out.grad.assign(m * d, 0.0);
        for (std::size_t a = 0; a < m; ++a) {
            for (const auto& [b, g] : dlogit[a]) {
                const double c = g * inv_a / tau;
                const auto qa = emb.row(a);
                const auto qb = emb.row(b);
                for (std::size_t k = 0; k < d; ++k) {
                    out.grad[a * d + k] += c * qb[k];
                    out.grad[b * d + k] += c * qa[k];
                }
            }
        }
    }
    return out;
}

SclEval scl_pixel_to_region(const EmbeddingSet& emb, bool want_grad) {
    const std::size_t m = emb.size();
    const std::size_t d = emb.dims();
    const double tau = emb.temperature();
    const auto labels = emb.labels();

    // Per-class mean embeddings, re-normalized. Classes whose mean vanishes
    // have no usable prototype.
    struct Proto {
        std::vector<double> mean;
        std::vector<double> unit;
        double norm = 0.0;
        std::vector<std::size_t> members;
    };
    std::map<int, Proto> protos;
    for (std::size_t i = 0; i < m; ++i) {
        auto& p = protos[labels[i]];
        if (p.mean.empty()) p.mean.assign(d, 0.0);
        p.members.push_back(i);
        const auto q = emb.row(i);
        for (std::size_t k = 0; k < d; ++k) p.mean[k] += q[k];
    }
    std::vector<int> valid_classes;
    for (auto& [c, p] : protos) {
        for (double& v : p.mean) v /= static_cast<double>(p.members.size());
        p.norm = std::sqrt(dot(p.mean, p.mean));
        if (p.norm > 1e-12) {
            p.unit.resize(d);
            for (std::size_t k = 0; k < d; ++k) p.unit[k] = p.mean[k] / p.norm;
            valid_classes.push_back(c);
        }
    }

    std::vector<double> per_anchor;
    std::vector<std::size_t> anchors;
    std::vector<std::vector<double>> anchor_dlogits;  // per valid anchor, over valid_classes
    std::vector<double> neg_logits, d_neg;
    for (std::size_t a = 0; a < m; ++a) {
        const auto own = protos.find(labels[a]);
        if (own->second.unit.empty() || valid_classes.size() < 2) continue;
        neg_logits.clear();
        for (int c : valid_classes)
            if (c != labels[a]) neg_logits.push_back(dot(emb.row(a), protos[c].unit) / tau);
        d_neg.resize(neg_logits.size());
        double d_pos = 0.0;
        per_anchor.push_back(contrast_term(dot(emb.row(a), own->second.unit) / tau, neg_logits, d_pos, d_neg));
        if (want_grad) {
            std::vector<double> g(valid_classes.size());
            std::size_t ni = 0;
            for (std::size_t ci = 0; ci < valid_classes.size(); ++ci)
                g[ci] = valid_classes[ci] == labels[a] ? d_pos : d_neg[ni++];
            anchors.push_back(a);
            anchor_dlogits.push_back(std::move(g));
        }
    }
    if (per_anchor.empty()) throw Error(ErrorCode::NoValidAnchors, "pixel-to-region contrast needs two classes");

    SclEval out;
    const double inv_a = 1.0 / static_cast<double>(per_anchor.size());
    out.loss = pairwise_sum(per_anchor) * inv_a;
    if (!want_grad) return out;

    out.grad.assign(m * d, 0.0);
    std::map<int, std::vector<double>> d_unit;
    for (int c : valid_classes) d_unit[c].assign(d, 0.0);
    for (std::size_t t = 0; t < anchors.size(); ++t) {
        const std::size_t a = anchors[t];
        const auto qa = emb.row(a);
        for (std::size_t ci = 0; ci < valid_classes.size(); ++ci) {
            const double c = anchor_dlogits[t][ci] * inv_a / tau;
            const auto& r = protos[valid_classes[ci]].unit;
            auto& dr = d_unit[valid_classes[ci]];
            for (std::size_t k = 0; k < d; ++k) {
                out.grad[a * d + k] += c * r[k];
                dr[k] += c * qa[k];
            }
        }
    }
    // Back through r = mean/|mean| and mean = average of members.
    for (int c : valid_classes) {
        const auto& p = protos[c];
        const auto& dr = d_unit[c];
        const double rd = dot(p.unit, dr);
        const double scale = 1.0 / (p.norm * static_cast<double>(p.members.size()));
        for (std::size_t j : p.members)
            for (std::size_t k = 0; k < d; ++k) out.grad[j * d + k] += (dr[k] - rd * p.unit[k]) * scale;
    }
    return out;
}

SclEval scl_eval(const EmbeddingSet& emb, SclMode mode, bool want_grad) {
    return mode == SclMode::PixelToPixel ? scl_pixel_to_pixel(emb, want_grad) : scl_pixel_to_region(emb, want_grad);
}

double prediction_loss(LossKind kind, const PredictionMap& y, const TargetMap& x) {
    switch (kind) {
        case LossKind::CrossEntropy: return cross_entropy(y, x);
        case LossKind::Dice: return dice_loss(y, x);
        case LossKind::Entropy: return entropy_loss(y, x);
        default: throw Error(ErrorCode::InvalidArgument, "not a prediction-space loss");
    }
}

std::vector<double> prediction_grad(LossKind kind, const PredictionMap& y, const TargetMap& x) {
    switch (kind) {
        case LossKind::CrossEntropy: return cross_entropy_grad(y, x);
        case LossKind::Dice: return dice_loss_grad(y, x);
        case LossKind::Entropy: return entropy_loss_grad(y, x);
        default: throw Error(ErrorCode::InvalidArgument, "not a prediction-space loss");
    }
}

double rel_error(double analytic, double numeric) {
    if (!std::isfinite(analytic) || !std::isfinite(numeric))
        throw Error(ErrorCode::NonFiniteGradient, "gradient entry is not finite");
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric));
}

}  // namespace

PredictionMap::PredictionMap(std::size_t samples, std::size_t classes, std::vector<double> probs)
    : PredictionMap(unchecked(samples, classes, std::move(probs))) {
    for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < k_; ++k) {
            const double v = p_[i * k_ + k];
            if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidValue, "probability outside [0,1]");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-6)
            throw Error(ErrorCode::InvalidValue, "row " + std::to_string(i) + " does not sum to 1");
    }
}

PredictionMap PredictionMap::unchecked(std::size_t samples, std::size_t classes, std::vector<double> probs) {
    if (classes == 0) throw Error(ErrorCode::InvalidArgument, "prediction map needs at least one class");
    if (probs.size() != samples * classes)
        throw Error(ErrorCode::InvalidArgument, "prediction map entry count != samples x classes");
    PredictionMap y;
    y.n_ = samples;
    y.k_ = classes;
    y.p_ = std::move(probs);
    for (double v : y.p_)
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidValue, "non-finite probability");
    return y;
}

TargetMap::TargetMap(std::size_t classes, std::vector<int> target, std::vector<SampleRegion> regions)
    : k_(classes), target_(std::move(target)), regions_(std::move(regions)) {
    if (target_.size() != regions_.size())
        throw Error(ErrorCode::InvalidArgument, "target and region vectors differ in length");
    for (std::size_t i = 0; i < target_.size(); ++i)
        if (regions_[i] == SampleRegion::Labeled && (target_[i] < 0 || target_[i] >= static_cast<int>(k_)))
            throw Error(ErrorCode::InvalidValue, "target class outside [0, K) at sample " + std::to_string(i));
}

std::size_t TargetMap::labeled_count() const noexcept {
    return static_cast<std::size_t>(std::count(regions_.begin(), regions_.end(), SampleRegion::Labeled));
}

EmbeddingSet::EmbeddingSet(std::size_t dims, std::vector<double> rows, std::vector<int> labels, double temperature)
    : d_(dims), tau_(temperature), q_(std::move(rows)), labels_(std::move(labels)) {
    if (d_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
    if (q_.size() != d_ * labels_.size())
        throw Error(ErrorCode::InvalidArgument, "embedding entry count != anchors x dims");
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw Error(ErrorCode::InvalidArgument, "temperature must be > 0");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const double n = std::sqrt(dot(row(i), row(i)));
        if (!(std::abs(n - 1.0) <= 1e-5))
            throw Error(ErrorCode::InvalidValue, "embedding row " + std::to_string(i) + " is not unit length");
    }
}

EmbeddingSet EmbeddingSet::normalized(std::size_t dims, std::vector<double> rows, std::vector<int> labels,
                                      double temperature) {
    if (dims == 0 || rows.size() % dims != 0)
        throw Error(ErrorCode::InvalidArgument, "embedding entry count is not a multiple of dims");
    for (std::size_t i = 0; i < rows.size(); i += dims) {
        const double n = std::sqrt(dot(std::span<const double>(rows).subspan(i, dims),
                                       std::span<const double>(rows).subspan(i, dims)));
        if (!(n > 0.0)) throw Error(ErrorCode::InvalidValue, "cannot normalize a zero embedding");
        for (std::size_t k = 0; k < dims; ++k) rows[i + k] /= n;
    }
    return EmbeddingSet(dims, std::move(rows), std::move(labels), temperature);
}

double pairwise_sum(std::span<const double> xs) noexcept {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double v : xs) s += v;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double cross_entropy(const PredictionMap& y, const TargetMap& x) {
    check_pair(y, x);
    require_labeled(x);
    std::vector<double> terms;
    terms.reserve(x.labeled_count());
    for (std::size_t i = 0; i < y.samples(); ++i)
        if (x.labeled(i)) terms.push_back(-safe_log(y(i, static_cast<std::size_t>(x.target(i)))));
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

std::vector<double> cross_entropy_grad(const PredictionMap& y, const TargetMap& x) {
    check_pair(y, x);
    require_labeled(x);
    const double n = static_cast<double>(x.labeled_count());
    std::vector<double> g(y.values().size(), 0.0);
    for (std::size_t i = 0; i < y.samples(); ++i) {
        if (!x.labeled(i)) continue;
        const auto k = static_cast<std::size_t>(x.target(i));
        const double p = y(i, k);
        if (p > kLogFloor) g[i * y.classes() + k] = -1.0 / (n * p);
    }
    return g;
}

double dice_loss(const PredictionMap& y, const TargetMap& x, double eps, std::size_t foreground) {
    check_pair(y, x);
    require_labeled(x);
    if (foreground >= y.classes()) throw Error(ErrorCode::InvalidArgument, "foreground class outside [0, K)");
    if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "dice smoothing constant must be > 0");
    std::vector<double> xy, xs, ys;
    for (std::size_t i = 0; i < y.samples(); ++i) {
        if (!x.labeled(i)) continue;
        xy.push_back(x(i, foreground) * y(i, foreground));
        xs.push_back(x(i, foreground));
        ys.push_back(y(i, foreground));
    }
    return 1.0 - (2.0 * pairwise_sum(xy) + eps) / (pairwise_sum(xs) + pairwise_sum(ys) + eps);
}

std::vector<double> dice_loss_grad(const PredictionMap& y, const TargetMap& x, double eps, std::size_t foreground) {
    check_pair(y, x);
    require_labeled(x);
    if (foreground >= y.classes()) throw Error(ErrorCode::InvalidArgument, "foreground class outside [0, K)");
    std::vector<double> xy, xs, ys;
    for (std::size_t i = 0; i < y.samples(); ++i) {
        if (!x.labeled(i)) continue;
        xy.push_back(x(i, foreground) * y(i, foreground));
        xs.push_back(x(i, foreground));
        ys.push_back(y(i, foreground));
    }
    const double num = 2.0 * pairwise_sum(xy) + eps;
    const double den = pairwise_sum(xs) + pairwise_sum(ys) + eps;
    std::vector<double> g(y.values().size(), 0.0);
    for (std::size_t i = 0; i < y.samples(); ++i)
        if (x.labeled(i)) g[i * y.classes() + foreground] = -(2.0 * x(i, foreground) * den - num) / (den * den);
    return g;
}

double entropy_loss(const PredictionMap& y, const TargetMap& x) {
    check_pair(y, x);
    std::vector<double> terms;
    for (std::size_t i = 0; i < y.samples(); ++i) {
        if (x.labeled(i)) continue;
        double h = 0.0;
        for (std::size_t k = 0; k < y.classes(); ++k) h -= y(i, k) * safe_log(y(i, k));
        terms.push_back(h);
    }
    if (terms.empty()) return 0.0;
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

std::vector<double> entropy_loss_grad(const PredictionMap& y, const TargetMap& x) {
    check_pair(y, x);
    std::vector<double> g(y.values().size(), 0.0);
    const std::size_t m = x.samples() - x.labeled_count();
    if (m == 0) return g;
    for (std::size_t i = 0; i < y.samples(); ++i) {
        if (x.labeled(i)) continue;
        for (std::size_t k = 0; k < y.classes(); ++k) {
            const double p = y(i, k);
            g[i * y.classes() + k] = (p > kLogFloor ? -(std::log(p) + 1.0) : -std::log(kLogFloor)) / static_cast<double>(m);
        }
    }
    return g;
}

double scl_loss(const EmbeddingSet& emb, SclMode mode) { return scl_eval(emb, mode, false).loss; }

std::vector<double> scl_loss_grad(const EmbeddingSet& emb, SclMode mode) {
    return scl_eval(emb, mode, true).grad;
}

LossBreakdown combined_loss(const PredictionMap& y, const TargetMap& x, const EmbeddingSet& emb, const LossWeights& w,
                            SclMode mode) {
    if (w.ce < 0.0 || w.dice < 0.0 || w.scl < 0.0 || w.entropy < 0.0)
        throw Error(ErrorCode::InvalidArgument, "loss weights must be >= 0");
    LossBreakdown out;
    out.ce = cross_entropy(y, x);
    out.dice = dice_loss(y, x);
    out.entropy = entropy_loss(y, x);
    try {
        out.scl = scl_loss(emb, mode);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidAnchors) throw;
        out.scl = 0.0;
        out.scl_skipped = true;
    }
    out.total = w.ce * out.ce + w.dice * out.dice + w.scl * out.scl + w.entropy * out.entropy;
    return out;
}

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::CrossEntropy: return "cross_entropy";
        case LossKind::Dice: return "dice";
        case LossKind::Entropy: return "entropy";
        case LossKind::SclPixelToPixel: return "scl_pixel_to_pixel";
        case LossKind::SclPixelToRegion: return "scl_pixel_to_region";
    }
    return "unknown";
}

GradCheckResult grad_check(LossKind kind, const PredictionMap& y, const TargetMap& x, double h) {
    const std::vector<double> analytic = prediction_grad(kind, y, x);
    std::vector<double> probe(y.values().begin(), y.values().end());
    GradCheckResult out;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = prediction_loss(kind, PredictionMap::unchecked(y.samples(), y.classes(), probe), x);
        probe[i] = orig - h;
        const double down = prediction_loss(kind, PredictionMap::unchecked(y.samples(), y.classes(), probe), x);
        probe[i] = orig;
        out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic[i], (up - down) / (2.0 * h)));
        ++out.coordinates;
    }
    return out;
}

GradCheckResult grad_check(LossKind kind, const EmbeddingSet& emb, double h) {
    SclMode mode{};
    if (kind == LossKind::SclPixelToPixel)
        mode = SclMode::PixelToPixel;
    else if (kind == LossKind::SclPixelToRegion)
        mode = SclMode::PixelToRegion;
    else
        throw Error(ErrorCode::InvalidArgument, "not an embedding-space loss");

    const std::size_t d = emb.dims();
    const std::vector<double> g = scl_loss_grad(emb, mode);
    const std::vector<int> labels(emb.labels().begin(), emb.labels().end());
    std::vector<double> probe(emb.values().begin(), emb.values().end());
    const auto eval = [&](const std::vector<double>& rows) {
        return scl_loss(EmbeddingSet::normalized(d, rows, labels, emb.temperature()), mode);
    };

    GradCheckResult out;
    for (std::size_t a = 0; a < emb.size(); ++a) {
        const auto q = emb.row(a);
        const double gq = dot(q, std::span<const double>(g).subspan(a * d, d));
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t i = a * d + k;
            const double analytic = g[i] - gq * q[k];
            const double orig = probe[i];
            probe[i] = orig + h;
            const double up = eval(probe);
            probe[i] = orig - h;
            const double down = eval(probe);
            probe[i] = orig;
            out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic, (up - down) / (2.0 * h)));
            ++out.coordinates;
        }
    }
    return out;
}

LossFixture random_fixture(std::uint64_t seed, std::size_t samples, std::size_t classes, std::size_t dims,
                           double temperature) {
    if (classes < 2 || dims < 1 || samples < 2 * classes)
        throw Error(ErrorCode::InvalidArgument, "fixture needs >= 2 classes, >= 1 dim and >= 2 samples per class");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logit(-1.5, 1.5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> any_class(0, static_cast<int>(classes) - 1);

    std::vector<double> probs(samples * classes);
    for (std::size_t i = 0; i < samples; ++i) {
        double z = 0.0;
        for (std::size_t k = 0; k < classes; ++k) z += probs[i * classes + k] = std::exp(logit(rng));
        for (std::size_t k = 0; k < classes; ++k) probs[i * classes + k] /= z;
    }

    std::vector<int> target(samples);
    std::vector<SampleRegion> regions(samples, SampleRegion::Labeled);
    for (std::size_t i = 0; i < samples; ++i) {
        target[i] = i < 2 * classes ? static_cast<int>(i % classes) : any_class(rng);
        // The first 2K samples stay labeled so every class has a positive pair.
        if (i >= 2 * classes && std::uniform_int_distribution<int>(0, 3)(rng) == 0) regions[i] = SampleRegion::Unlabeled;
    }

    std::vector<double> directions(classes * dims);
    for (double& v : directions) v = gauss(rng);
    std::vector<double> rows(samples * dims);
    for (std::size_t i = 0; i < samples; ++i)
        for (std::size_t k = 0; k < dims; ++k)
            rows[i * dims + k] = directions[static_cast<std::size_t>(target[i]) * dims + k] + 0.8 * gauss(rng);

    return {PredictionMap(samples, classes, std::move(probs)), TargetMap(classes, target, std::move(regions)),
            EmbeddingSet::normalized(dims, std::move(rows), target, temperature)};
}

}  // namespace emip::losses
