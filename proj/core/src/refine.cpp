#include "segtrack/refine.hpp"

#include "segtrack/error.hpp"

namespace segtrack {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv3x3(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::Tensor double_nearest(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kNearest));
}

void require_same_hw(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.size(-1) != b.size(-1) || a.size(-2) != b.size(-2)) throw Error(ErrorCode::kShapeMismatch, what);
}

}  // namespace

ChannelAttentionImpl::ChannelAttentionImpl(int64_t channels, double bias_init) {
  weight = register_parameter("weight", torch::zeros({channels}));
  bias = register_parameter("bias", torch::full({channels}, bias_init));
}

torch::Tensor ChannelAttentionImpl::pooled(const torch::Tensor& x) { return x.mean({2, 3}, /*keepdim=*/true); }

torch::Tensor ChannelAttentionImpl::gate(const torch::Tensor& x) {
  return torch::sigmoid(pooled(x) * weight.view({1, -1, 1, 1}) + bias.view({1, -1, 1, 1}));
}

torch::Tensor ChannelAttentionImpl::forward(const torch::Tensor& x) { return x * gate(x); }

UpscaleStageImpl::UpscaleStageImpl(int64_t in_channels, int64_t out_channels, int64_t skip_channels,
                                   double attention_bias) {
  conv_a = register_module("conv_a", conv3x3(in_channels, out_channels));
  conv_b = register_module("conv_b", conv3x3(out_channels, out_channels));
  skip_adjust = register_module(
      "skip_adjust", torch::nn::Conv2d(torch::nn::Conv2dOptions(skip_channels, out_channels, 1).bias(false)));
  attention = register_module("attention", ChannelAttention(out_channels, attention_bias));
}

torch::Tensor UpscaleStageImpl::upsampled_path(const torch::Tensor& x) {
  return torch::relu(conv_b->forward(torch::relu(conv_a->forward(double_nearest(x)))));
}

torch::Tensor UpscaleStageImpl::adjusted_skip(const torch::Tensor& skip) {
  return torch::relu(skip_adjust->forward(skip));
}

torch::Tensor UpscaleStageImpl::forward(const torch::Tensor& x, const torch::Tensor& skip, bool use_attention) {
  if (skip.size(-1) != 2 * x.size(-1) || skip.size(-2) != 2 * x.size(-2)) {
    throw Error(ErrorCode::kShapeMismatch, "skip features must be twice the input resolution");
  }
  auto adjusted = adjusted_skip(skip);
  if (use_attention) adjusted = attention->forward(adjusted);
  return upsampled_path(x) + adjusted;
}

RefineNetImpl::RefineNetImpl(const EncoderConfig& encoder, RefineConfig config) : config_(config) {
  fuse_conv = register_module("fuse", conv3x3(3, config_.fused_channels));
  stage8 = register_module("stage8", UpscaleStage(config_.fused_channels, config_.stage_channels[0],
                                                  encoder.widths[1], config_.attention_bias_init));
  stage4 = register_module("stage4", UpscaleStage(config_.stage_channels[0], config_.stage_channels[1],
                                                  encoder.widths[0], config_.attention_bias_init));
  final_conv = register_module("final", conv3x3(config_.stage_channels[1], 2));
}

torch::Tensor RefineNetImpl::fuse(const torch::Tensor& location, const torch::Tensor& foreground,
                                  const torch::Tensor& posterior_fg) {
  require_same_hw(location, foreground, "L and F sizes differ");
  require_same_hw(location, posterior_fg, "L and P sizes differ");
  return torch::relu(fuse_conv->forward(torch::cat({location, foreground, posterior_fg}, 1)));
}

torch::Tensor RefineNetImpl::logits(const torch::Tensor& location, const torch::Tensor& foreground,
                                    const torch::Tensor& posterior_fg, const FeaturePyramid& pyramid,
                                    bool use_attention) {
  auto x = fuse(location, foreground, posterior_fg);
  x = stage8->forward(x, pyramid.stride8, use_attention);
  x = stage4->forward(x, pyramid.stride4, use_attention);
  // Final stage: doubling and a single conv, no skip.
  x = final_conv->forward(double_nearest(x));
  const auto side = pyramid.source_resolution;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{side, side})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor RefineNetImpl::segment(const torch::Tensor& location, const torch::Tensor& foreground,
                                     const torch::Tensor& posterior_fg, const FeaturePyramid& pyramid,
                                     bool use_attention) {
  return torch::softmax(logits(location, foreground, posterior_fg, pyramid, use_attention), 1);
}

}  // namespace segtrack
