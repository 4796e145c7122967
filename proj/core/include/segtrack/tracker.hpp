#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "segtrack/gem.hpp"
#include "segtrack/geometry.hpp"
#include "segtrack/gim.hpp"
#include "segtrack/pipeline.hpp"
#include "segtrack/sem.hpp"

namespace segtrack {

struct TrackerConfig {
  // Search region side as a multiple of the larger inherent box side.
  double search_factor = 4.0;
  double min_search_side = 24.0;
  double mask_threshold = kDefaultMaskThreshold;
  // SEM scale is accepted only above this target confidence and within
  // [min_ratio, max_ratio] of the previous inherent size.
  double sem_min_confidence = 0.5;
  double sem_min_ratio = 0.5;
  double sem_max_ratio = 2.0;
  int proxy_iterations = 1;
  GemConfig gem;
};

// Ground truth for the first frame: a binary mask (nonzero = target) or a box.
using InitTarget = std::variant<cv::Mat1b, BoundingBox>;

struct FrameResult {
  int frame_index = 0;
  SegmentationMask mask;  // image coordinates
  BoundingBox visible_box;
  BoundingBox inherent_box;
  cv::Point2d search_center;
  double search_side = 0.0;
  // Inherent box the search side was derived from (previous frame's).
  BoundingBox search_basis;
  std::vector<std::string> flags;
  std::optional<ScaleEstimate> scale;
  double milliseconds = 0.0;

  bool has_flag(const std::string& f) const;
};

struct TrackerState {
  BoundingBox inherent_box{0, 0, 0, 0, BoxRole::kInherent};
  BoundingBox visible_box{0, 0, 0, 0, BoxRole::kVisible};
  GimModel gim_model;
  std::optional<DcfFilter> dcf;
  torch::Tensor template_features;  // [1, C, h, w] stride-16 features of the init target
  SegmentationMask last_mask;
  cv::Point2d position;
  int frame_index = -1;
  int proxy_iterations_run = 0;
  bool initialized = false;
};

// Online loop around the single-shot network: one TrackerState per sequence,
// strictly single threaded.
class Tracker {
 public:
  Tracker(NetworkBundle& networks, TrackerConfig config, AblationFlags flags = {});

  // Throws Error(kEmptyTarget) for an empty or out-of-frame target.
  FrameResult initialize(const cv::Mat& frame, const InitTarget& target);
  // Never throws on tracking failures; fallbacks are reported in flags.
  FrameResult step(const cv::Mat& frame);

  const TrackerState& state() const { return state_; }
  const TrackerConfig& config() const { return config_; }
  const AblationFlags& flags() const { return flags_; }

 private:
  double search_side_for(const BoundingBox& inherent) const;
  torch::Tensor mask_features(const torch::Tensor& mask_patch, int64_t rows, int64_t cols);

  NetworkBundle& nets_;
  TrackerConfig config_;
  AblationFlags flags_;
  TrackerState state_;
};

std::vector<FrameResult> run_sequence(NetworkBundle& networks, const std::vector<cv::Mat>& frames,
                                      const InitTarget& init_target, const AblationFlags& flags,
                                      const TrackerConfig& config);

}  // namespace segtrack
