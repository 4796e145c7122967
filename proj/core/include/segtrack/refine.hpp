#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

#include "segtrack/backbone.hpp"

namespace segtrack {

struct RefineConfig {
  int64_t fused_channels = 64;
  // Output widths of the two skip-connected stages (strides 8 and 4).
  std::array<int64_t, 2> stage_channels{32, 16};
  double attention_bias_init = 4.0;
};

// out[c] = in[c] * sigmoid(weight[c] * mean(in[c]) + bias[c]).
class ChannelAttentionImpl : public torch::nn::Module {
 public:
  ChannelAttentionImpl(int64_t channels, double bias_init);
  torch::Tensor forward(const torch::Tensor& x);
  // Spatial average per channel, [B, C, 1, 1].
  static torch::Tensor pooled(const torch::Tensor& x);
  torch::Tensor gate(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;
};
TORCH_MODULE(ChannelAttention);

// x2 nearest upsampling, two 3x3 conv + ReLU, plus the adjusted (1x1 conv +
// ReLU) and attention-weighted backbone skip.
class UpscaleStageImpl : public torch::nn::Module {
 public:
  UpscaleStageImpl(int64_t in_channels, int64_t out_channels, int64_t skip_channels, double attention_bias);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& skip, bool use_attention = true);
  torch::Tensor upsampled_path(const torch::Tensor& x);
  torch::Tensor adjusted_skip(const torch::Tensor& skip);

  torch::nn::Conv2d conv_a{nullptr};
  torch::nn::Conv2d conv_b{nullptr};
  torch::nn::Conv2d skip_adjust{nullptr};
  ChannelAttention attention{nullptr};
};
TORCH_MODULE(UpscaleStage);

class RefineNetImpl : public torch::nn::Module {
 public:
  RefineNetImpl(const EncoderConfig& encoder, RefineConfig config = {});

  // Concatenates (L, F, P_fg) in that order -> [B, fused, H, W].
  torch::Tensor fuse(const torch::Tensor& location, const torch::Tensor& foreground,
                     const torch::Tensor& posterior_fg);
  // Two-class logits at patch resolution, channel 0 = foreground.
  torch::Tensor logits(const torch::Tensor& location, const torch::Tensor& foreground,
                       const torch::Tensor& posterior_fg, const FeaturePyramid& pyramid,
                       bool use_attention = true);
  // Softmax over the two classes, [B, 2, S, S].
  torch::Tensor segment(const torch::Tensor& location, const torch::Tensor& foreground,
                        const torch::Tensor& posterior_fg, const FeaturePyramid& pyramid,
                        bool use_attention = true);

  torch::nn::Conv2d fuse_conv{nullptr};
  UpscaleStage stage8{nullptr};
  UpscaleStage stage4{nullptr};
  torch::nn::Conv2d final_conv{nullptr};

 private:
  RefineConfig config_;
};
TORCH_MODULE(RefineNet);

}  // namespace segtrack
