#pragma once

#include <cstdint>
#include <vector>

#include <opencv2/core.hpp>

#include "segtrack/geometry.hpp"

namespace segtrack {

struct SyntheticParams {
  int frame_size = 256;
  int length = 60;
  // Base radius of the target in pixels and its x/y stretch.
  double radius = 18.0;
  double aspect = 1.2;
  // Relative amplitude of the contour harmonics and of the size oscillation.
  double deformation = 0.12;
  double scale_oscillation = 0.15;
  // Peak displacement of the Lissajous path around the frame centre.
  double motion_amplitude = 60.0;
  double motion_speed = 1.0;
  bool distractor = false;
  bool occlusion = false;
  int occlusion_start = 20;
  int occlusion_length = 30;
  // Largest fraction of the target width hidden by the occluder.
  double occlusion_cover = 0.5;
  uint64_t texture_seed = 1;
};

struct SyntheticSequence {
  std::vector<cv::Mat3b> frames;
  std::vector<cv::Mat1b> masks;          // visible target, 0/255
  std::vector<BoundingBox> visible_boxes;
  std::vector<BoundingBox> inherent_boxes;  // full (unoccluded) target extent
  std::vector<cv::Mat1b> all_objects;    // target and distractor, diagnostic
  std::vector<double> occluded_fraction;  // hidden share of the target area
  SyntheticParams params;
  uint64_t seed = 0;

  int size() const { return static_cast<int>(frames.size()); }
};

// Textured deformable blob (optionally a twin distractor and a scripted
// occluder) over a textured background. Masks are exact by construction and the
// result depends only on (params, seed).
SyntheticSequence generate_sequence(const SyntheticParams& params, uint64_t seed);

}  // namespace segtrack
