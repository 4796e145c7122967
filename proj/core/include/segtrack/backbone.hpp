#pragma once

#include <array>
#include <cstdint>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace segtrack {

struct EncoderConfig {
  // Channel widths at strides 4, 8 and 16.
  std::array<int64_t, 3> widths{32, 64, 128};
  int64_t stem_width = 16;
};

struct FeaturePyramid {
  torch::Tensor stride4;
  torch::Tensor stride8;
  torch::Tensor stride16;
  int64_t source_resolution = 0;

  const torch::Tensor& level(int stride) const;
};

// Small strided conv stack standing in for a pre-trained classification
// backbone. Every level keeps an exact source/stride spatial size.
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(EncoderConfig config = {});

  // images: [B, 3, S, S] with S divisible by 16.
  FeaturePyramid forward(const torch::Tensor& images);

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  torch::nn::Sequential stem_{nullptr};
  torch::nn::Sequential block4_{nullptr};
  torch::nn::Sequential block8_{nullptr};
  torch::nn::Sequential block16_{nullptr};
};
TORCH_MODULE(Encoder);

// BGR 8-bit image -> [1, 3, H, W] float in roughly [-0.5, 0.5], RGB order.
torch::Tensor image_to_tensor(const cv::Mat& bgr);

}  // namespace segtrack
