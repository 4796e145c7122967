#include "segtrack/backbone.hpp"

#include <opencv2/imgproc.hpp>

#include "segtrack/error.hpp"

namespace segtrack {

namespace {

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

torch::nn::Sequential down_block(int64_t in, int64_t out) {
  return torch::nn::Sequential(conv3x3(in, out, 2), torch::nn::ReLU(), conv3x3(out, out, 1),
                               torch::nn::ReLU());
}

}  // namespace

const torch::Tensor& FeaturePyramid::level(int stride) const {
  switch (stride) {
    case 4: return stride4;
    case 8: return stride8;
    case 16: return stride16;
    default: throw Error(ErrorCode::kBadResolution, "no pyramid level at stride " + std::to_string(stride));
  }
}

EncoderImpl::EncoderImpl(EncoderConfig config) : config_(config) {
  for (auto w : config_.widths) {
    if (w <= 0) throw Error(ErrorCode::kInvalidConfig, "encoder widths must be positive");
  }
  stem_ = register_module("stem", torch::nn::Sequential(conv3x3(3, config_.stem_width, 2),
                                                        torch::nn::ReLU()));
  block4_ = register_module("block4", down_block(config_.stem_width, config_.widths[0]));
  block8_ = register_module("block8", down_block(config_.widths[0], config_.widths[1]));
  block16_ = register_module("block16", down_block(config_.widths[1], config_.widths[2]));
}

FeaturePyramid EncoderImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw Error(ErrorCode::kBadResolution, "encoder expects [B,3,S,S] input");
  }
  const int64_t h = images.size(2);
  const int64_t w = images.size(3);
  if (h != w || h % 16 != 0 || h == 0) {
    throw Error(ErrorCode::kBadResolution,
                "input " + std::to_string(h) + "x" + std::to_string(w) + " not square multiple of 16");
  }
  FeaturePyramid out;
  out.source_resolution = h;
  out.stride4 = block4_->forward(stem_->forward(images));
  out.stride8 = block8_->forward(out.stride4);
  out.stride16 = block16_->forward(out.stride8);
  return out;
}

torch::Tensor image_to_tensor(const cv::Mat& bgr) {
  cv::Mat rgb;
  if (bgr.channels() == 1) {
    cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
  } else {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  }
  cv::Mat3f f;
  rgb.convertTo(f, CV_32FC3, 1.0 / 255.0, -0.5);
  auto t = torch::from_blob(f.data, {f.rows, f.cols, 3}, torch::kFloat32).clone();
  return t.permute({2, 0, 1}).unsqueeze(0).contiguous();
}

}  // namespace segtrack
