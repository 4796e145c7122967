#pragma once

#include <vector>

#include <opencv2/core.hpp>

#include "segtrack/geometry.hpp"

namespace segtrack {

// Masks are binary: any nonzero pixel is foreground.

// |A n B| / |A u B|; two empty masks agree perfectly and score 1.
double jaccard(const cv::Mat1b& a, const cv::Mat1b& b);

// Foreground pixels with at least one 4-neighbour that is background or lies
// outside the image.
cv::Mat1b mask_boundary(const cv::Mat1b& mask);

// Boundary F-measure: precision is the share of A-boundary pixels within
// `tolerance` (Euclidean, pixels) of a B-boundary pixel, recall the converse.
// Identical boundaries (including both empty) score 1; F = 0 when P + R = 0.
double contour_f(const cv::Mat1b& a, const cv::Mat1b& b, double tolerance);

double box_iou(const BoundingBox& a, const BoundingBox& b);

// Area under the success curve over thresholds {0.01, 0.02, ..., 1.00}, where
// success(t) is the share of overlaps >= t. Equals floor-quantised mean overlap.
double success_auc(const std::vector<double>& overlaps);

struct FailureRule {
  double threshold = 0.1;
  int consecutive_frames = 10;
};

struct AccuracyRobustness {
  double accuracy = 0.0;    // mean overlap over frames before the first failure run
  double robustness = 1.0;  // (first failure frame + 1) / N, or 1 without failure
  std::vector<int> failures;  // frame index completing each failure run
};

// A failure is declared on the frame that completes `consecutive_frames`
// overlaps below `threshold`; counting restarts after each declared failure.
AccuracyRobustness accuracy_robustness(const std::vector<double>& overlaps, FailureRule rule = {});

}  // namespace segtrack
