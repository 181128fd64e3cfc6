#include "nucdet/detect_eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nucdet {

void DetectionConfig::validate() const {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("DetectionConfig: threshold must be in [0,1]");
    if (nms_radius < 1)
        throw std::invalid_argument("DetectionConfig: nms_radius must be >= 1");
}

void EvalConfig::validate() const {
    if (golden_radius < 1)
        throw std::invalid_argument("EvalConfig: golden_radius must be >= 1");
}

std::vector<Pixel> detect(const Grid2D& yhat, const DetectionConfig& config) {
    config.validate();
    const int h = yhat.height(), w = yhat.width();
    const int radius = config.nms_radius;

    Grid2D clamped(h, w);
    for (size_t i = 0; i < yhat.size(); ++i)
        clamped[i] = std::clamp(yhat[i], 0.0, 1.0);

    std::vector<Pixel> centers;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double v = clamped(r, c);
            if (v < config.threshold || v == 0.0)
                continue;
            bool is_peak = true;
            for (int dr = -radius; dr <= radius && is_peak; ++dr)
                for (int dc = -radius; dc <= radius; ++dc) {
                    if (dr == 0 && dc == 0)
                        continue;
                    const int nr = r + dr, nc = c + dc;
                    if (!clamped.in_bounds(nr, nc))
                        continue;
                    const double nv = clamped(nr, nc);
                    // Equal-valued plateau: only the row-major-first cell wins.
                    if (nv > v || (nv == v && (nr < r || (nr == r && nc < c)))) {
                        is_peak = false;
                        break;
                    }
                }
            if (is_peak)
                centers.push_back({r, c});
        }
    return centers;
}

MatchCounts match_golden(const std::vector<Pixel>& detections,
                         const std::vector<Pixel>& gt_centers,
                         const EvalConfig& config) {
    config.validate();

    struct Candidate {
        long dist2;
        Pixel det;
        Pixel gt;
        size_t det_idx, gt_idx;
    };
    const long radius2 = static_cast<long>(config.golden_radius) * config.golden_radius;

    std::vector<Candidate> candidates;
    for (size_t d = 0; d < detections.size(); ++d)
        for (size_t g = 0; g < gt_centers.size(); ++g) {
            const long dr = detections[d].row - gt_centers[g].row;
            const long dc = detections[d].col - gt_centers[g].col;
            const long dist2 = dr * dr + dc * dc;
            if (dist2 <= radius2)
                candidates.push_back({dist2, detections[d], gt_centers[g], d, g});
        }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                  if (a.dist2 != b.dist2)
                      return a.dist2 < b.dist2;
                  if (a.det != b.det)
                      return a.det < b.det;
                  return a.gt < b.gt;
              });

    std::vector<bool> det_used(detections.size(), false), gt_used(gt_centers.size(), false);
    MatchCounts counts;
    for (const Candidate& c : candidates)
        if (!det_used[c.det_idx] && !gt_used[c.gt_idx]) {
            det_used[c.det_idx] = true;
            gt_used[c.gt_idx] = true;
            ++counts.tp;
        }
    counts.fp = static_cast<long>(detections.size()) - counts.tp;
    counts.fn = static_cast<long>(gt_centers.size()) - counts.tp;
    return counts;
}

MatchReport prf1(const MatchCounts& counts) {
    if (counts.tp < 0 || counts.fp < 0 || counts.fn < 0)
        throw std::invalid_argument("prf1: counts must be nonnegative");

    MatchReport r;
    r.tp = counts.tp;
    r.fp = counts.fp;
    r.fn = counts.fn;

    const long detections = counts.tp + counts.fp;
    const long gt = counts.tp + counts.fn;
    if (detections == 0 && gt == 0) {
        r.precision = r.recall = r.f1 = 1.0;
        return r;
    }
    r.precision = detections > 0 ? static_cast<double>(counts.tp) / detections : 0.0;
    r.recall = gt > 0 ? static_cast<double>(counts.tp) / gt : 0.0;
    const double pr = r.precision + r.recall;
    r.f1 = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
    return r;
}

std::vector<PrPoint> pr_curve(const std::vector<Grid2D>& yhats,
                              const std::vector<std::vector<Pixel>>& gt_sets,
                              const EvalConfig& config,
                              const std::vector<double>& thresholds,
                              int nms_radius) {
    config.validate();
    if (yhats.empty())
        throw std::invalid_argument("pr_curve: empty test set");
    if (yhats.size() != gt_sets.size())
        throw std::invalid_argument("pr_curve: map/annotation count mismatch");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw std::invalid_argument("pr_curve: thresholds must be sorted ascending");

    DetectionConfig det_cfg;
    det_cfg.nms_radius = nms_radius < 0 ? config.golden_radius : nms_radius;

    std::vector<PrPoint> curve;
    curve.reserve(thresholds.size());
    for (double t : thresholds) {
        det_cfg.threshold = t;
        MatchCounts pooled;
        for (size_t i = 0; i < yhats.size(); ++i) {
            const MatchCounts c = match_golden(detect(yhats[i], det_cfg), gt_sets[i], config);
            pooled.tp += c.tp;
            pooled.fp += c.fp;
            pooled.fn += c.fn;
        }
        const MatchReport rep = prf1(pooled);
        curve.push_back({t, rep.precision, rep.recall, rep.f1});
    }
    return curve;
}

PrPoint best_f1(const std::vector<PrPoint>& curve) {
    if (curve.empty())
        throw std::invalid_argument("best_f1: empty curve");
    const auto it = std::max_element(curve.begin(), curve.end(),
                                     [](const PrPoint& a, const PrPoint& b) {
                                         return a.f1 < b.f1;
                                     });
    return *it;
}

}  // namespace nucdet
