#ifndef NUCDET_DETECT_EVAL_HPP
#define NUCDET_DETECT_EVAL_HPP

#include <vector>

#include "nucdet/grid.hpp"

namespace nucdet {

struct DetectionConfig {
    double threshold = 0.5;  // T, applied to the clamped output
    int nms_radius = 6;      // local-maximum neighborhood radius

    void validate() const;
};

struct EvalConfig {
    int golden_radius = 6;  // tolerance disk around each ground-truth center

    void validate() const;
};

struct MatchCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

struct MatchReport {
    long tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct PrPoint {
    double threshold;
    double precision, recall, f1;
};

/// Thresholds the clamped map at T and reports local maxima over the
/// (2*nms_radius+1)^2 neighborhood. On plateaus, only the row-major-first
/// cell of each tie wins.
std::vector<Pixel> detect(const Grid2D& yhat, const DetectionConfig& config);

/// One-to-one greedy matching by ascending Euclidean distance. A detection
/// within golden_radius (inclusive) of a still-unmatched center is a true
/// positive and consumes that center. Distance ties break by row-major
/// detection then center coordinate, making the result independent of input
/// order.
MatchCounts match_golden(const std::vector<Pixel>& detections,
                         const std::vector<Pixel>& gt_centers,
                         const EvalConfig& config);

/// Precision/recall/F1 with the degenerate conventions: both sets empty ->
/// all 1; either ratio undefined with the other side nonempty -> 0; F1 = 0
/// when P+R = 0.
MatchReport prf1(const MatchCounts& counts);

/// Threshold sweep over a test set: per threshold, detects on every map,
/// matches, pools the counts over images and reports aggregate P/R/F1.
/// Thresholds must be sorted ascending. nms_radius < 0 uses golden_radius.
std::vector<PrPoint> pr_curve(const std::vector<Grid2D>& yhats,
                              const std::vector<std::vector<Pixel>>& gt_sets,
                              const EvalConfig& config,
                              const std::vector<double>& thresholds,
                              int nms_radius = -1);

/// The sweep row with maximum F1 (first such threshold on ties).
PrPoint best_f1(const std::vector<PrPoint>& curve);

}  // namespace nucdet

#endif
