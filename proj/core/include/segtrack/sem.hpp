#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "segtrack/geometry.hpp"

namespace segtrack {

struct SemConfig {
  int64_t reduced_channels = 256;
  int64_t head_channels = 256;
  int64_t mask_channels = 64;
  // Radius in cells of the positive disk around the inherent box centre in the
  // classification label; the nearest cell is always positive.
  double positive_radius_cells = 1.0;
};

struct SemOutput {
  torch::Tensor cls;     // [B, 2, H, W], channel 0 = target
  torch::Tensor region;  // [B, 4, H, W] in patch pixels: d_T, d_B, d_R, d_L
};

// Signed edge offsets of one pixel position, patch pixels.
enum RegionChannel : int64_t { kTop = 0, kBottom = 1, kRight = 2, kLeft = 3 };

struct ScaleEstimate {
  GridPoint position;     // p~ on the stride-16 grid
  cv::Point2d center;     // p~ cell centre in patch pixels
  double width = 0.0;     // frame pixels
  double height = 0.0;    // frame pixels
  double confidence = 0.0;
};

// Three stride-2 3x3 conv + ReLU blocks and a final stride-2 3x3 conv.
class MaskAdjustImpl : public torch::nn::Module {
 public:
  explicit MaskAdjustImpl(int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& mask);

  torch::nn::Sequential layers{nullptr};
};
TORCH_MODULE(MaskAdjust);

// Two 3x3 conv + ReLU blocks and a 1x1 output conv.
class SemHeadImpl : public torch::nn::Module {
 public:
  SemHeadImpl(int64_t in_channels, int64_t width, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential layers{nullptr};
};
TORCH_MODULE(SemHead);

class SemNetImpl : public torch::nn::Module {
 public:
  SemNetImpl(int64_t backbone_channels, int64_t patch_size, SemConfig config = {});

  // mask: [B, 1, S, S] foreground probability.
  torch::Tensor adjust_mask(const torch::Tensor& mask);
  // Bilinear downsampling stand-in for the adjustment module, broadcast to the
  // same channel count.
  torch::Tensor resample_mask(const torch::Tensor& mask, int64_t rows, int64_t cols) const;

  // template_features: [B, C, h, w] deepest features cropped to the template
  // target; search_features: [B, C, H, W]; mask_features: [B, M, H, W].
  SemOutput predict(const torch::Tensor& template_features, const torch::Tensor& search_features,
                    const torch::Tensor& mask_features);
  // Reduced and average-pooled template, [B, reduced, 1, 1]. Pooling commutes
  // with the linear reduction, so templates of different sizes can be batched.
  torch::Tensor template_vector(const torch::Tensor& template_features);
  SemOutput predict_pooled(const torch::Tensor& template_vector, const torch::Tensor& search_features,
                           const torch::Tensor& mask_features);

  const SemConfig& config() const { return config_; }
  int64_t patch_size() const { return patch_size_; }

  torch::nn::Conv2d template_reduce{nullptr};
  torch::nn::Conv2d search_reduce{nullptr};
  MaskAdjust mask_adjust{nullptr};
  SemHead cls_head{nullptr};
  SemHead region_head{nullptr};

 private:
  SemConfig config_;
  int64_t patch_size_;
};
TORCH_MODULE(SemNet);

// p~ = argmax of the target softmax (ties row-major first); w~ = d_R - d_L and
// h~ = d_T - d_B at p~, converted to frame pixels by the mapping scale.
// cls: [2, H, W] or [1, 2, H, W]; region likewise with 4 channels.
// Throws Error(kNonPositiveScale) when either extent is <= 0.
ScaleEstimate decode_scale(const torch::Tensor& cls, const torch::Tensor& region,
                           const CoordinateMapping& mapping, int64_t stride = 16);

// Training targets on an H x W stride-16 grid for an inherent box given in
// patch pixels.
struct SemTargets {
  torch::Tensor cls_label;    // [H, W] long, 0 = target, 1 = background
  torch::Tensor region;       // [4, H, W] signed offsets, patch pixels
  torch::Tensor inside;       // [H, W] float, 1 where the cell centre is inside the box
};
SemTargets make_sem_targets(int64_t rows, int64_t cols, int64_t stride, const BoundingBox& box_patch,
                            double positive_radius_cells);

// Mean L1 over cells with inside == 1, offsets divided by `normalizer`.
torch::Tensor region_l1_loss(const torch::Tensor& predicted, const torch::Tensor& target,
                             const torch::Tensor& inside, double normalizer);

}  // namespace segtrack
