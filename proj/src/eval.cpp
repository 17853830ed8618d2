#include "emip/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <tuple>

namespace emip {

namespace {

constexpr int kNoClassMatch = std::numeric_limits<int>::min();

std::int64_t dist2(int ax, int ay, int bx, int by) noexcept {
    const std::int64_t dx = ax - bx;
    const std::int64_t dy = ay - by;
    return dx * dx + dy * dy;
}

bool within(std::int64_t d2, double radius) noexcept { return static_cast<double>(d2) <= radius * radius; }

void finish_counts(MatchResult& m, std::size_t detections, std::size_t gts) {
    m.tp = m.pairs.size();
    m.fp = detections - m.tp;
    m.fn = gts - m.tp;
}

MatchResult greedy_match(std::span<const Detection> dets, const AnnotationSet& gts, double radius) {
    std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> candidates;
    for (std::size_t d = 0; d < dets.size(); ++d)
        for (std::size_t g = 0; g < gts.size(); ++g) {
            const auto d2 = dist2(dets[d].x, dets[d].y, gts[g].x, gts[g].y);
            if (within(d2, radius)) candidates.emplace_back(d2, d, g);
        }
    std::sort(candidates.begin(), candidates.end());
    std::vector<bool> det_used(dets.size(), false), gt_used(gts.size(), false);
    MatchResult m;
    for (const auto& [d2, d, g] : candidates) {
        if (det_used[d] || gt_used[g]) continue;
        det_used[d] = gt_used[g] = true;
        m.pairs.emplace_back(d, g);
    }
    finish_counts(m, dets.size(), gts.size());
    return m;
}

MatchResult max_cardinality_match(std::span<const Detection> dets, const AnnotationSet& gts, double radius) {
    std::vector<std::vector<std::size_t>> adj(dets.size());
    for (std::size_t d = 0; d < dets.size(); ++d)
        for (std::size_t g = 0; g < gts.size(); ++g)
            if (within(dist2(dets[d].x, dets[d].y, gts[g].x, gts[g].y), radius)) adj[d].push_back(g);

    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> gt_owner(gts.size(), kNone);
    std::vector<char> seen;
    const std::function<bool(std::size_t)> augment = [&](std::size_t d) {
        for (std::size_t g : adj[d]) {
            if (seen[g]) continue;
            seen[g] = 1;
            if (gt_owner[g] == kNone || augment(gt_owner[g])) {
                gt_owner[g] = d;
                return true;
            }
        }
        return false;
    };
    for (std::size_t d = 0; d < dets.size(); ++d) {
        seen.assign(gts.size(), 0);
        augment(d);
    }
    MatchResult m;
    for (std::size_t g = 0; g < gts.size(); ++g)
        if (gt_owner[g] != kNone) m.pairs.emplace_back(gt_owner[g], g);
    std::sort(m.pairs.begin(), m.pairs.end());
    finish_counts(m, dets.size(), gts.size());
    return m;
}

}  // namespace

MatchResult match_points(std::span<const Detection> detections, const AnnotationSet& ground_truth, double radius,
                         MatchMode mode) {
    if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "matching radius must be > 0");
    return mode == MatchMode::Greedy ? greedy_match(detections, ground_truth, radius)
                                     : max_cardinality_match(detections, ground_truth, radius);
}

Scores prf1(std::size_t tp, std::size_t fp, std::size_t fn) {
    const auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    const double t = static_cast<double>(tp);
    return {ratio(t, t + static_cast<double>(fp)), ratio(t, t + static_cast<double>(fn)),
            ratio(2.0 * t, 2.0 * t + static_cast<double>(fp) + static_cast<double>(fn))};
}

ClassificationScores classification_scores(const MatchResult& m, std::span<const Detection> detections,
                                           const AnnotationSet& ground_truth) {
    ClassificationScores out;
    out.detection = prf1(m);

    std::set<int> classes;
    for (const auto& d : detections) classes.insert(d.class_id);
    for (const auto& g : ground_truth.points()) classes.insert(g.class_id);

    std::vector<int> det_true_class(detections.size(), kNoClassMatch);
    std::vector<int> gt_pred_class(ground_truth.size(), kNoClassMatch);
    for (const auto& [d, g] : m.pairs) {
        det_true_class[d] = ground_truth[g].class_id;
        gt_pred_class[g] = detections[d].class_id;
    }
    for (int k : classes) {
        ClassCounts c;
        for (std::size_t d = 0; d < detections.size(); ++d) {
            if (detections[d].class_id != k) continue;
            if (det_true_class[d] == k)
                ++c.tp;
            else
                ++c.fp;
        }
        for (std::size_t g = 0; g < ground_truth.size(); ++g)
            if (ground_truth[g].class_id == k && gt_pred_class[g] != k) ++c.fn;
        c.scores = prf1(c.tp, c.fp, c.fn);
        out.per_class.emplace(k, c);
    }
    return out;
}

std::vector<NucleusTrack> link_tracks(const std::vector<std::vector<Detection>>& per_slice, double link_radius) {
    if (!(link_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "link radius must be > 0");
    std::vector<NucleusTrack> tracks;
    std::vector<std::size_t> open;  // tracks whose last member is on the previous slice
    for (std::size_t z = 0; z < per_slice.size(); ++z) {
        const auto& dets = per_slice[z];
        std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> candidates;
        for (std::size_t t = 0; t < open.size(); ++t) {
            const Detection& last = tracks[open[t]].members.back();
            for (std::size_t d = 0; d < dets.size(); ++d) {
                const auto d2 = dist2(last.x, last.y, dets[d].x, dets[d].y);
                if (within(d2, link_radius)) candidates.emplace_back(d2, t, d);
            }
        }
        std::sort(candidates.begin(), candidates.end());
        std::vector<bool> track_used(open.size(), false), det_used(dets.size(), false);
        std::vector<std::size_t> next_open;
        for (const auto& [d2, t, d] : candidates) {
            if (track_used[t] || det_used[d]) continue;
            track_used[t] = det_used[d] = true;
            Detection member = dets[d];
            member.z = static_cast<int>(z);
            tracks[open[t]].members.push_back(member);
            next_open.push_back(open[t]);
        }
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (det_used[d]) continue;
            Detection member = dets[d];
            member.z = static_cast<int>(z);
            tracks.push_back({{member}, kNegativeClass});
            next_open.push_back(tracks.size() - 1);
        }
        std::sort(next_open.begin(), next_open.end());
        open = std::move(next_open);
    }
    for (auto& t : tracks) t.class_id = integrate_slices(t).class_id;
    return tracks;
}

IntegratedNucleus integrate_slices(const NucleusTrack& track) {
    if (track.members.empty()) throw Error(ErrorCode::EmptyTrack, "cannot integrate an empty track");
    IntegratedNucleus out;
    out.representative = track.members.front();
    bool positive = false;
    for (const auto& m : track.members) {
        positive = positive || m.class_id == kPositiveClass;
        if (m.confidence > out.representative.confidence) out.representative = m;
    }
    out.class_id = positive ? kPositiveClass : kNegativeClass;
    return out;
}

}  // namespace emip
