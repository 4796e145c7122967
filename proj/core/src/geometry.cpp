#include "segtrack/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "segtrack/error.hpp"

namespace segtrack {

cv::Mat1b SegmentationMask::binarize(double threshold) const {
  cv::Mat1b out(probabilities.size(), uchar{0});
  for (int r = 0; r < probabilities.rows; ++r) {
    const float* src = probabilities[r];
    uchar* dst = out[r];
    for (int c = 0; c < probabilities.cols; ++c) dst[c] = src[c] >= threshold ? 1 : 0;
  }
  return out;
}

cv::Matx23d CoordinateMapping::patch_to_frame_indices() const {
  return {scale_x, 0.0, offset_x + 0.5 * scale_x - 0.5,
          0.0, scale_y, offset_y + 0.5 * scale_y - 0.5};
}

cv::Matx23d CoordinateMapping::frame_to_patch_indices() const {
  return {1.0 / scale_x, 0.0, (0.5 - offset_x) / scale_x - 0.5,
          0.0, 1.0 / scale_y, (0.5 - offset_y) / scale_y - 0.5};
}

BoundingBox fit_axis_aligned_box(const cv::Mat1b& binary) {
  int min_r = binary.rows, max_r = -1, min_c = binary.cols, max_c = -1;
  for (int r = 0; r < binary.rows; ++r) {
    const uchar* row = binary[r];
    for (int c = 0; c < binary.cols; ++c) {
      if (!row[c]) continue;
      min_r = std::min(min_r, r);
      max_r = std::max(max_r, r);
      min_c = std::min(min_c, c);
      max_c = std::max(max_c, c);
    }
  }
  if (max_r < 0) throw Error(ErrorCode::kNoForeground, "mask has no foreground pixel");
  return {static_cast<double>(min_c), static_cast<double>(min_r),
          static_cast<double>(max_c - min_c + 1), static_cast<double>(max_r - min_r + 1),
          BoxRole::kVisible};
}

BoundingBox fit_axis_aligned_box(const SegmentationMask& mask, double threshold) {
  if (mask.empty()) throw Error(ErrorCode::kNoForeground, "empty mask grid");
  return fit_axis_aligned_box(mask.binarize(threshold));
}

LocationChannel euclidean_location_channel(GridPoint peak, int rows, int cols, bool normalize) {
  if (rows <= 0 || cols <= 0 || peak.row < 0 || peak.col < 0 || peak.row >= rows ||
      peak.col >= cols) {
    throw Error(ErrorCode::kPeakOutOfBounds, "peak (" + std::to_string(peak.row) + "," +
                                                 std::to_string(peak.col) + ") outside " +
                                                 std::to_string(rows) + "x" + std::to_string(cols));
  }
  const double norm = normalize ? std::sqrt(double(rows) * rows + double(cols) * cols) : 1.0;
  LocationChannel out{cv::Mat1f(rows, cols), peak};
  for (int r = 0; r < rows; ++r) {
    float* row = out.values[r];
    const double dr = r - peak.row;
    for (int c = 0; c < cols; ++c) {
      const double dc = c - peak.col;
      row[c] = static_cast<float>(std::sqrt(dr * dr + dc * dc) / norm);
    }
  }
  return out;
}

Region extract_region(const cv::Mat& frame, cv::Point2d center, double region_side,
                      int out_resolution) {
  if (!(region_side > 0.0) || out_resolution <= 0) {
    throw Error(ErrorCode::kDegenerateRegion,
                "region side " + std::to_string(region_side) + " / resolution " +
                    std::to_string(out_resolution));
  }
  const double scale = region_side / out_resolution;
  Region region;
  region.mapping = {scale, scale, center.x - 0.5 * region_side, center.y - 0.5 * region_side};
  cv::warpAffine(frame, region.patch, cv::Mat(region.mapping.patch_to_frame_indices()),
                 cv::Size(out_resolution, out_resolution), cv::INTER_LINEAR | cv::WARP_INVERSE_MAP,
                 cv::BORDER_REPLICATE);
  return region;
}

cv::Mat1f mask_to_patch(const cv::Mat& frame_mask, const CoordinateMapping& mapping, int out_resolution) {
  cv::Mat1f src;
  if (frame_mask.depth() == CV_8U) {
    cv::Mat1b binary = frame_mask != 0;
    binary.convertTo(src, CV_32F, 1.0 / 255.0);
  } else {
    frame_mask.convertTo(src, CV_32F);
  }
  cv::Mat1f out;
  cv::warpAffine(src, out, cv::Mat(mapping.patch_to_frame_indices()), cv::Size(out_resolution, out_resolution),
                 cv::INTER_LINEAR | cv::WARP_INVERSE_MAP, cv::BORDER_CONSTANT, cv::Scalar(0));
  return out;
}

SegmentationMask map_mask_to_frame(const SegmentationMask& mask, const CoordinateMapping& mapping,
                                   cv::Size frame_size) {
  SegmentationMask out;
  out.frame_id = mask.frame_id;
  out.space = CoordinateSpace::kImage;
  cv::warpAffine(mask.probabilities, out.probabilities,
                 cv::Mat(mapping.frame_to_patch_indices()), frame_size,
                 cv::INTER_LINEAR | cv::WARP_INVERSE_MAP, cv::BORDER_CONSTANT, cv::Scalar(0));
  // Bilinear weights are convex, but clamp float rounding at the ends.
  cv::min(out.probabilities, 1.0f, out.probabilities);
  cv::max(out.probabilities, 0.0f, out.probabilities);
  return out;
}

}  // namespace segtrack
