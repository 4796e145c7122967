#include "segtrack/eval.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "segtrack/error.hpp"

namespace segtrack {

namespace {

void require_same_shape(const cv::Mat& a, const cv::Mat& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeMismatch, "mask sizes differ: " + std::to_string(a.cols) + "x" +
                                               std::to_string(a.rows) + " vs " + std::to_string(b.cols) +
                                               "x" + std::to_string(b.rows));
  }
}

// Share of `from` boundary pixels lying within tolerance of the `to` boundary.
double boundary_match(const cv::Mat1b& from, const cv::Mat1b& to, double tolerance, int from_count) {
  // distanceTransform measures distance to the nearest zero pixel.
  cv::Mat1b inverted = to == 0;
  cv::Mat1f dist;
  cv::distanceTransform(inverted, dist, cv::DIST_L2, cv::DIST_MASK_PRECISE);
  int matched = 0;
  for (int r = 0; r < from.rows; ++r) {
    for (int c = 0; c < from.cols; ++c) {
      if (from(r, c) && dist(r, c) <= tolerance + 1e-4) ++matched;
    }
  }
  return static_cast<double>(matched) / from_count;
}

}  // namespace

double jaccard(const cv::Mat1b& a, const cv::Mat1b& b) {
  require_same_shape(a, b);
  int64_t inter = 0, uni = 0;
  for (int r = 0; r < a.rows; ++r) {
    const uchar* pa = a[r];
    const uchar* pb = b[r];
    for (int c = 0; c < a.cols; ++c) {
      const bool fa = pa[c] != 0;
      const bool fb = pb[c] != 0;
      inter += fa && fb;
      uni += fa || fb;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

cv::Mat1b mask_boundary(const cv::Mat1b& mask) {
  cv::Mat1b out(mask.size(), uchar{0});
  auto bg = [&](int r, int c) {
    return r < 0 || c < 0 || r >= mask.rows || c >= mask.cols || mask(r, c) == 0;
  };
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) {
      if (mask(r, c) && (bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1))) out(r, c) = 255;
    }
  }
  return out;
}

double contour_f(const cv::Mat1b& a, const cv::Mat1b& b, double tolerance) {
  require_same_shape(a, b);
  const cv::Mat1b ba = mask_boundary(a);
  const cv::Mat1b bb = mask_boundary(b);
  const int na = cv::countNonZero(ba);
  const int nb = cv::countNonZero(bb);
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  const double precision = boundary_match(ba, bb, tolerance, na);
  const double recall = boundary_match(bb, ba, tolerance, nb);
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

double success_auc(const std::vector<double>& overlaps) {
  if (overlaps.empty()) return 0.0;
  constexpr int kSteps = 100;
  double total = 0.0;
  for (int k = 1; k <= kSteps; ++k) {
    const double t = k / static_cast<double>(kSteps);
    const auto hits = std::count_if(overlaps.begin(), overlaps.end(), [t](double o) { return o >= t - 1e-12; });
    total += static_cast<double>(hits) / overlaps.size();
  }
  return total / kSteps;
}

AccuracyRobustness accuracy_robustness(const std::vector<double>& overlaps, FailureRule rule) {
  AccuracyRobustness out;
  if (overlaps.empty()) return out;
  int run = 0;
  for (int i = 0; i < static_cast<int>(overlaps.size()); ++i) {
    run = overlaps[i] < rule.threshold ? run + 1 : 0;
    if (run == rule.consecutive_frames) {
      out.failures.push_back(i);
      run = 0;
    }
  }
  const int n = static_cast<int>(overlaps.size());
  int successful = n;
  if (!out.failures.empty()) {
    out.robustness = static_cast<double>(out.failures.front() + 1) / n;
    successful = out.failures.front() + 1 - rule.consecutive_frames;
  }
  double sum = 0.0;
  for (int i = 0; i < successful; ++i) sum += overlaps[i];
  out.accuracy = successful > 0 ? sum / successful : 0.0;
  return out;
}

}  // namespace segtrack
