#include "segtrack/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "segtrack/backbone.hpp"
#include "segtrack/error.hpp"

namespace segtrack {

namespace {

constexpr int kStride = 16;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

cv::Mat1f tensor_to_mat(const torch::Tensor& t) {
  auto c = t.detach().reshape({t.size(-2), t.size(-1)}).to(torch::kFloat32).contiguous();
  cv::Mat1f out(static_cast<int>(c.size(0)), static_cast<int>(c.size(1)));
  std::memcpy(out.data, c.data_ptr<float>(), sizeof(float) * c.numel());
  return out;
}

// Cells whose centre lies in the box (patch pixels); at least the centre cell.
cv::Mat1b box_cells(const BoundingBox& box_patch, int rows, int cols) {
  cv::Mat1b cells = cells_inside_box(rows, cols, box_patch.x / kStride, box_patch.y / kStride,
                                     box_patch.w / kStride, box_patch.h / kStride);
  if (cv::countNonZero(cells) == 0) {
    const int r = std::clamp(static_cast<int>(box_patch.center_y() / kStride), 0, rows - 1);
    const int c = std::clamp(static_cast<int>(box_patch.center_x() / kStride), 0, cols - 1);
    cells(r, c) = 1;
  }
  return cells;
}

GridPoint clamp_cell(cv::Point2d cells, int rows, int cols) {
  return {std::clamp(static_cast<int>(std::floor(cells.y)), 0, rows - 1),
          std::clamp(static_cast<int>(std::floor(cells.x)), 0, cols - 1)};
}

}  // namespace

bool FrameResult::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

Tracker::Tracker(NetworkBundle& networks, TrackerConfig config, AblationFlags flags)
    : nets_(networks), config_(config), flags_(flags) {}

double Tracker::search_side_for(const BoundingBox& inherent) const {
  return std::max(config_.min_search_side, config_.search_factor * std::max(inherent.w, inherent.h));
}

torch::Tensor Tracker::mask_features(const torch::Tensor& mask_patch, int64_t rows, int64_t cols) {
  if (flags_.no_mask) return torch::zeros({1, nets_.sem->config().mask_channels, rows, cols});
  if (flags_.no_mam) return nets_.sem->resample_mask(mask_patch, rows, cols);
  return nets_.sem->adjust_mask(mask_patch);
}

FrameResult Tracker::initialize(const cv::Mat& frame, const InitTarget& target) {
  torch::NoGradGuard no_grad;
  const auto start = Clock::now();
  const int patch_size = static_cast<int>(nets_.config().patch_size);
  const cv::Rect frame_rect(0, 0, frame.cols, frame.rows);

  FrameResult result;
  result.frame_index = 0;
  state_ = TrackerState{};

  BoundingBox box;
  const cv::Mat1b* init_mask = std::get_if<cv::Mat1b>(&target);
  if (init_mask != nullptr) {
    if (init_mask->size() != frame.size()) throw Error(ErrorCode::kEmptyTarget, "initial mask size differs from frame");
    if (cv::countNonZero(*init_mask) == 0) throw Error(ErrorCode::kEmptyTarget, "initial mask is empty");
    box = fit_axis_aligned_box(cv::Mat1b(*init_mask != 0));
  } else {
    box = std::get<BoundingBox>(target);
    const cv::Rect2d r(box.x, box.y, box.w, box.h);
    if (!box.valid() || (r & cv::Rect2d(frame_rect)).area() <= 0.0) {
      throw Error(ErrorCode::kEmptyTarget, "initial box is empty or outside the frame");
    }
  }

  const double side = search_side_for(box);
  Region region = extract_region(frame, box.center(), side, patch_size);
  FeaturePyramid pyramid = nets_.encoder->forward(image_to_tensor(region.patch));
  ++nets_.encode_calls;
  const auto& deepest = pyramid.stride16;
  const int rows = static_cast<int>(deepest.size(2));
  const int cols = static_cast<int>(deepest.size(3));
  auto seg_features = nets_.gim->reduce(deepest);
  const BoundingBox box_patch = region.mapping.to_patch(box);

  cv::Mat1b fg_cells;
  SegmentationMask image_mask;
  image_mask.frame_id = 0;
  image_mask.space = CoordinateSpace::kImage;
  if (init_mask != nullptr) {
    fg_cells = mask_to_cells(mask_to_patch(*init_mask, region.mapping, patch_size), rows, cols);
    if (cv::countNonZero(fg_cells) == 0) fg_cells = box_cells(box_patch, rows, cols);
    cv::Mat1b binary = *init_mask != 0;
    binary.convertTo(image_mask.probabilities, CV_32F, 1.0 / 255.0);
  } else {
    fg_cells = box_cells(box_patch, rows, cols);
    cv::Mat1f box_mask(frame.size(), 0.0f);
    box_mask(cv::Rect(cv::Rect2d(box.x, box.y, box.w, box.h)) & frame_rect).setTo(1.0f);
    image_mask.probabilities = box_mask;
  }

  const double neighborhood = nets_.gim->config().neighborhood_factor;
  state_.gim_model = build_gim_model(seg_features, fg_cells, neighborhood);

  if (init_mask == nullptr && !flags_.no_gim) {
    // Box initialisation: infer a proxy mask with the box-based model, then
    // rebuild the prototypes from it.
    const GridPoint centre = clamp_cell({box_patch.center_x() / kStride, box_patch.center_y() / kStride}, rows, cols);
    for (int it = 0; it < config_.proxy_iterations; ++it) {
      ForwardOutput proxy = forward_with_peak(nets_, pyramid, state_.gim_model, centre, flags_);
      ++state_.proxy_iterations_run;
      const cv::Mat1f proxy_patch = tensor_to_mat(proxy.mask);
      cv::Mat1b proxy_cells = mask_to_cells(cv::Mat1f(proxy_patch >= config_.mask_threshold) / 255.0f, rows, cols);
      proxy_cells &= box_cells(box_patch, rows, cols);  // never grow beyond the given box
      if (cv::countNonZero(proxy_cells) == 0) {
        result.flags.emplace_back("proxy_empty");
        break;
      }
      try {
        state_.gim_model = build_gim_model(seg_features, proxy_cells, neighborhood);
        fg_cells = proxy_cells;
        SegmentationMask patch_mask{proxy_patch, 0, CoordinateSpace::kPatch};
        image_mask = map_mask_to_frame(patch_mask, region.mapping, frame.size());
        if (cv::countNonZero(image_mask.binarize(config_.mask_threshold)) == 0) {
          throw Error(ErrorCode::kInitDiverged, "proxy mask vanished in frame coordinates");
        }
      } catch (const Error& e) {
        result.flags.emplace_back(e.code() == ErrorCode::kInitDiverged ? "proxy_empty" : "proxy_failed");
        state_.gim_model = build_gim_model(seg_features, box_cells(box_patch, rows, cols), neighborhood);
        cv::Mat1f box_mask(frame.size(), 0.0f);
        box_mask(cv::Rect(cv::Rect2d(box.x, box.y, box.w, box.h)) & frame_rect).setTo(1.0f);
        image_mask.probabilities = box_mask;
        break;
      }
    }
  }

  if (!flags_.no_gem) {
    const cv::Point2d centre_cells(box_patch.center_x() / kStride, box_patch.center_y() / kStride);
    const cv::Size2d size_cells(box_patch.w / kStride, box_patch.h / kStride);
    state_.dcf = train_filter(deepest, centre_cells, size_cells, config_.gem.init_steps, config_.gem);
  }
  state_.template_features = crop_to_cells(deepest, fg_cells).detach().clone();

  state_.inherent_box = box;
  state_.inherent_box.role = BoxRole::kInherent;
  state_.visible_box = box;
  state_.visible_box.role = BoxRole::kVisible;
  state_.position = box.center();
  state_.last_mask = image_mask;
  state_.frame_index = 0;
  state_.initialized = true;

  result.mask = image_mask;
  result.visible_box = state_.visible_box;
  result.inherent_box = state_.inherent_box;
  result.search_center = box.center();
  result.search_side = side;
  result.search_basis = state_.inherent_box;
  result.milliseconds = elapsed_ms(start);
  return result;
}

FrameResult Tracker::step(const cv::Mat& frame) {
  if (!state_.initialized) throw Error(ErrorCode::kEmptyTarget, "tracker used before initialisation");
  torch::NoGradGuard no_grad;
  const auto start = Clock::now();
  const int patch_size = static_cast<int>(nets_.config().patch_size);

  FrameResult result;
  result.frame_index = ++state_.frame_index;
  result.search_basis = state_.inherent_box;
  result.search_center = state_.position;
  result.search_side = search_side_for(state_.inherent_box);

  Region region = extract_region(frame, result.search_center, result.search_side, patch_size);
  const DcfFilter* dcf = state_.dcf ? &*state_.dcf : nullptr;
  ForwardOutput out = forward(nets_, image_to_tensor(region.patch), state_.gim_model, dcf, flags_);
  const auto& deepest = out.pyramid.stride16;
  const int64_t rows = deepest.size(2);
  const int64_t cols = deepest.size(3);

  SegmentationMask patch_mask{tensor_to_mat(out.mask), result.frame_index, CoordinateSpace::kPatch};
  result.mask = map_mask_to_frame(patch_mask, region.mapping, frame.size());

  const cv::Point2d peak_frame = region.mapping.to_frame(
      cv::Point2d{(out.peak.col + 0.5) * kStride, (out.peak.row + 0.5) * kStride});
  bool mask_ok = true;
  try {
    result.visible_box = fit_axis_aligned_box(result.mask, config_.mask_threshold);
  } catch (const Error&) {
    mask_ok = false;
    result.flags.emplace_back("mask_empty");
    const cv::Point2d centre = flags_.no_gem ? state_.visible_box.center() : peak_frame;
    result.visible_box = BoundingBox::from_center(centre, state_.visible_box.w, state_.visible_box.h, BoxRole::kVisible);
  }
  result.visible_box.role = BoxRole::kVisible;

  BoundingBox inherent = BoundingBox::from_center(result.visible_box.center(), state_.inherent_box.w,
                                                  state_.inherent_box.h, BoxRole::kInherent);
  if (flags_.no_sem) {
    inherent = result.visible_box;
    inherent.role = BoxRole::kInherent;
  } else if (mask_ok) {
    SemOutput sem = nets_.sem->predict(state_.template_features, deepest, mask_features(out.mask, rows, cols));
    try {
      ScaleEstimate est = decode_scale(sem.cls, sem.region, region.mapping);
      result.scale = est;
      const double rw = est.width / state_.inherent_box.w;
      const double rh = est.height / state_.inherent_box.h;
      const bool within = rw >= config_.sem_min_ratio && rw <= config_.sem_max_ratio &&
                          rh >= config_.sem_min_ratio && rh <= config_.sem_max_ratio;
      if (est.confidence >= config_.sem_min_confidence && within) {
        inherent = BoundingBox::from_center(result.visible_box.center(), est.width, est.height, BoxRole::kInherent);
      } else {
        result.flags.emplace_back("sem_rejected");
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonPositiveScale) throw;
      result.flags.emplace_back("sem_nonpositive");
    }
  } else {
    result.flags.emplace_back("sem_skipped");
  }
  result.inherent_box = inherent;

  if (state_.dcf && mask_ok) {
    const BoundingBox inherent_patch = region.mapping.to_patch(inherent);
    const cv::Point2d centre_cells(inherent_patch.center_x() / kStride, inherent_patch.center_y() / kStride);
    const cv::Size2d size_cells(inherent_patch.w / kStride, inherent_patch.h / kStride);
    try {
      state_.dcf = update_filter(*state_.dcf, deepest, centre_cells, size_cells, config_.gem.update_steps, config_.gem);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFiniteLoss) throw;
      result.flags.emplace_back("dcf_update_failed");
    }
  } else if (state_.dcf) {
    result.flags.emplace_back("dcf_update_skipped");
  }

  cv::Point2d next = result.visible_box.center();
  next.x = std::clamp(next.x, 0.0, static_cast<double>(frame.cols));
  next.y = std::clamp(next.y, 0.0, static_cast<double>(frame.rows));
  state_.position = next;
  state_.visible_box = result.visible_box;
  state_.inherent_box = inherent;
  state_.last_mask = result.mask;
  result.milliseconds = elapsed_ms(start);
  return result;
}

std::vector<FrameResult> run_sequence(NetworkBundle& networks, const std::vector<cv::Mat>& frames,
                                      const InitTarget& init_target, const AblationFlags& flags,
                                      const TrackerConfig& config) {
  if (frames.empty()) throw Error(ErrorCode::kEmptyTarget, "sequence has no frames");
  Tracker tracker(networks, config, flags);
  std::vector<FrameResult> results;
  results.reserve(frames.size());
  results.push_back(tracker.initialize(frames.front(), init_target));
  for (size_t i = 1; i < frames.size(); ++i) results.push_back(tracker.step(frames[i]));
  return results;
}

}  // namespace segtrack
