#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "segtrack/geometry.hpp"

namespace segtrack {

struct GemConfig {
  int64_t channels = 256;
  int64_t kernel_size = 4;
  // Gaussian label sigma per axis, as a fraction of the inherent target size.
  double sigma_factor = 0.25;
  double weight_decay = 1e-4;
  int init_steps = 30;
  int update_steps = 2;
  double initial_step_size = 1.0;
  uint64_t seed = 1;
};

struct ResponseMap {
  torch::Tensor values;  // [H, W]
  GridPoint peak;
};

// Parametric ELU: (a / b) x for x >= 0, a (exp(x / b) - 1) otherwise.
torch::Tensor pelu(const torch::Tensor& x, const torch::Tensor& a, const torch::Tensor& b);

// Argmax with ties resolved to the smallest row, then the smallest column.
GridPoint localize(const torch::Tensor& response);

// Gaussian over cell centres (col + 0.5, row + 0.5); sigma = factor * size per axis.
torch::Tensor gaussian_label(int64_t rows, int64_t cols, cv::Point2d center_cells,
                             cv::Size2d size_cells, double sigma_factor);

// Zero-padded "same" cross-correlation with an even or odd square kernel:
// out[r, c] = sum_{i,j} x[r + i - k/2, c + j - k/2] * kernel[i, j], summed over channels.
// x: [1, D, H, W], kernel: [1, D, k, k] -> [1, 1, H, W].
torch::Tensor same_correlation(const torch::Tensor& x, const torch::Tensor& kernel);

// Online discriminative correlation filter. Input features are centred per
// channel and scaled to unit RMS, then pass through a bias-free 1x1 reduction, a
// D-channel spatial kernel and a PeLU output non-linearity, all fitted by
// backtracking gradient descent on the frames seen during tracking.
class DcfFilter {
 public:
  struct Sample {
    torch::Tensor features;  // [1, C, H, W]
    torch::Tensor label;     // [H, W]
  };

  torch::Tensor reduction;  // [D, C, 1, 1]
  torch::Tensor kernel;     // [1, D, k, k]
  torch::Tensor pelu_a;     // scalar
  torch::Tensor pelu_b;     // scalar
  torch::Tensor bias;       // scalar added to the correlation before the PeLU

  int64_t step_count = 0;
  double step_size = 1.0;
  std::vector<double> loss_trace;

  std::optional<Sample> anchor;
  std::optional<Sample> latest;

  int64_t in_channels() const { return reduction.size(1); }
  torch::Tensor reduce(const torch::Tensor& features) const;
  torch::Tensor respond(const torch::Tensor& features) const;  // [H, W]
  ResponseMap correlate(const torch::Tensor& features) const;

  // Objective over the stored samples.
  double loss(double weight_decay) const;
  DcfFilter clone() const;
};

DcfFilter init_filter(int64_t in_channels, const GemConfig& config);

// Fits a new filter to one frame. center/size are in feature-cell units.
DcfFilter train_filter(const torch::Tensor& features, cv::Point2d target_center,
                       cv::Size2d target_size, int steps, const GemConfig& config);

// Replaces the latest sample and runs `steps` more iterations. The label width
// follows `inherent_size`, never the visible extent.
DcfFilter update_filter(const DcfFilter& filter, const torch::Tensor& features,
                        cv::Point2d center, cv::Size2d inherent_size, int steps,
                        const GemConfig& config);

// Standardisation and 1x1 reduction only, exposed for the module contract.
torch::Tensor gem_reduce_features(const DcfFilter& filter, const torch::Tensor& deepest);

}  // namespace segtrack
