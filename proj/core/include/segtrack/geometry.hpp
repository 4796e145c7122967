#pragma once

#include <opencv2/core.hpp>

namespace segtrack {

// Pixel coordinates are continuous and corner based: pixel (col, row) covers
// [col, col + 1) x [row, row + 1), so its centre is (col + 0.5, row + 0.5).

enum class BoxRole { kVisible, kInherent };

struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  BoxRole role = BoxRole::kVisible;

  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }
  cv::Point2d center() const { return {center_x(), center_y()}; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  static BoundingBox from_center(cv::Point2d center, double w, double h, BoxRole role) {
    return {center.x - 0.5 * w, center.y - 0.5 * h, w, h, role};
  }
};

enum class CoordinateSpace { kPatch, kImage };

struct SegmentationMask {
  cv::Mat1f probabilities;
  int frame_id = -1;
  CoordinateSpace space = CoordinateSpace::kPatch;

  int rows() const { return probabilities.rows; }
  int cols() const { return probabilities.cols; }
  bool empty() const { return probabilities.empty(); }
  cv::Mat1b binarize(double threshold = 0.5) const;
};

struct GridPoint {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Affine, axis-aligned map from patch coordinates to frame coordinates:
// frame = offset + scale * patch (per axis).
struct CoordinateMapping {
  double scale_x = 1.0;
  double scale_y = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  cv::Point2d to_frame(cv::Point2d patch) const {
    return {offset_x + scale_x * patch.x, offset_y + scale_y * patch.y};
  }
  cv::Point2d to_patch(cv::Point2d frame) const {
    return {(frame.x - offset_x) / scale_x, (frame.y - offset_y) / scale_y};
  }
  BoundingBox to_frame(const BoundingBox& box) const {
    const cv::Point2d tl = to_frame(cv::Point2d{box.x, box.y});
    return {tl.x, tl.y, box.w * scale_x, box.h * scale_y, box.role};
  }
  BoundingBox to_patch(const BoundingBox& box) const {
    const cv::Point2d tl = to_patch(cv::Point2d{box.x, box.y});
    return {tl.x, tl.y, box.w / scale_x, box.h / scale_y, box.role};
  }
  // Matrix taking frame pixel indices to patch pixel indices (cv::remap style).
  cv::Matx23d frame_to_patch_indices() const;
  // Matrix taking patch pixel indices to frame pixel indices.
  cv::Matx23d patch_to_frame_indices() const;

  static CoordinateMapping identity() { return {}; }
};

struct LocationChannel {
  cv::Mat1f values;
  GridPoint peak;
};

struct Region {
  cv::Mat patch;
  CoordinateMapping mapping;
};

inline constexpr double kDefaultMaskThreshold = 0.5;

// Minimal axis-aligned box covering every pixel with probability >= threshold.
// Throws Error(kNoForeground) when no pixel qualifies.
BoundingBox fit_axis_aligned_box(const SegmentationMask& mask,
                                 double threshold = kDefaultMaskThreshold);
BoundingBox fit_axis_aligned_box(const cv::Mat1b& binary);

// Euclidean distance from `peak` to every cell, divided by the grid diagonal
// sqrt(rows^2 + cols^2) when `normalize` is set.
LocationChannel euclidean_location_channel(GridPoint peak, int rows, int cols,
                                           bool normalize = true);

// Square crop of side `region_side` centred at `center`, resampled bilinearly to
// out_resolution^2. Out-of-frame pixels replicate the nearest edge.
Region extract_region(const cv::Mat& frame, cv::Point2d center, double region_side,
                      int out_resolution);

// Frame-space mask (any depth; nonzero 8-bit values count as 1) resampled into
// the patch described by `mapping`; outside the frame is background.
cv::Mat1f mask_to_patch(const cv::Mat& frame_mask, const CoordinateMapping& mapping, int out_resolution);

// Resamples a patch-space mask into a frame of `frame_size`; pixels outside the
// patch footprint are 0.
SegmentationMask map_mask_to_frame(const SegmentationMask& mask, const CoordinateMapping& mapping,
                                   cv::Size frame_size);

}  // namespace segtrack
