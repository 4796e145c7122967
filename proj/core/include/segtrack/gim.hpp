#pragma once

#include <cstdint>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace segtrack {

struct GimConfig {
  int64_t feature_channels = 64;
  // Length of the sorted similarity list fed to the decoder.
  int64_t top_n = 3;
  int64_t decoder_hidden = 16;
  // Background neighbourhood side, as a multiple of the target box side.
  double neighborhood_factor = 4.0;
};

// 1x1 conv + ReLU followed by 3x3 conv + ReLU.
class FeatureReducerImpl : public torch::nn::Module {
 public:
  FeatureReducerImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d project{nullptr};
  torch::nn::Conv2d mix{nullptr};
};
TORCH_MODULE(FeatureReducer);

// Two-layer MLP mapping the sorted similarity list at one pixel to a score.
// Initialised close to the mean of the list.
class SimilarityDecoderImpl : public torch::nn::Module {
 public:
  SimilarityDecoderImpl(int64_t inputs, int64_t hidden);
  // sorted: [..., inputs] -> [..., 1]
  torch::Tensor forward(const torch::Tensor& sorted);

  int64_t inputs() const { return inputs_; }

  torch::nn::Linear hidden{nullptr};
  torch::nn::Linear output{nullptr};

 private:
  int64_t inputs_;
};
TORCH_MODULE(SimilarityDecoder);

// Unordered foreground/background prototype sets, rows are feature vectors.
struct GimModel {
  torch::Tensor foreground;  // [N_F, C]
  torch::Tensor background;  // [N_B, C]

  int64_t foreground_count() const { return foreground.defined() ? foreground.size(0) : 0; }
  int64_t background_count() const { return background.defined() ? background.size(0) : 0; }
};

struct ChannelTriplet {
  torch::Tensor foreground;  // F: [B, 1, H, W]
  torch::Tensor background;  // B: [B, 1, H, W]
  torch::Tensor posterior;   // P: [B, 2, H, W], channel 0 = foreground
};

// Gathers prototypes from seg_features ([C,H,W] or [1,C,H,W]). Foreground cells
// are the nonzero cells of `foreground_cells`; background cells are the
// remaining cells inside a neighbourhood of `neighborhood_factor` times the
// foreground bounding box (per axis). Falls back to every non-foreground cell
// when the neighbourhood holds none.
GimModel build_gim_model(const torch::Tensor& seg_features, const cv::Mat1b& foreground_cells,
                         double neighborhood_factor = 4.0);

// Cells of a grid covered by a box given in cell units (cell centre inside box).
cv::Mat1b cells_inside_box(int rows, int cols, double x, double y, double w, double h);

// Area-averaged mask at grid resolution, thresholded at 0.5; when no cell reaches
// the threshold the cells holding the maximum (nonzero) coverage are used.
cv::Mat1b mask_to_cells(const cv::Mat1f& mask, int rows, int cols);

// Features [1, C, H, W] narrowed to the bounding rectangle of the nonzero cells.
torch::Tensor crop_to_cells(const torch::Tensor& features, const cv::Mat1b& cells);

// Cosine similarity of every pixel feature with every prototype.
// features: [B, C, H, W], prototypes: [N, C] -> [B, H*W, N].
torch::Tensor raw_similarities(const torch::Tensor& features, const torch::Tensor& prototypes);

// Descending sort, truncated or padded with -1 to exactly n entries.
torch::Tensor sorted_top_n(const torch::Tensor& similarities, int64_t n);

// F or B channel: decoder(sorted top-n similarities) per pixel -> [B, 1, H, W].
torch::Tensor similarity_channel(const torch::Tensor& features, const torch::Tensor& prototypes,
                                 SimilarityDecoder& decoder, int64_t n);

// Two-way softmax of F and B; channel 0 is the foreground posterior.
torch::Tensor posterior(const torch::Tensor& f, const torch::Tensor& b);

class GimNetImpl : public torch::nn::Module {
 public:
  GimNetImpl(int64_t backbone_channels, GimConfig config = {});

  torch::Tensor reduce(const torch::Tensor& deepest) { return reducer->forward(deepest); }
  // seg_features: [1, C, H, W] reduced features of the search region.
  ChannelTriplet match(const torch::Tensor& seg_features, const GimModel& model);

  const GimConfig& config() const { return config_; }

  FeatureReducer reducer{nullptr};
  SimilarityDecoder foreground_decoder{nullptr};
  SimilarityDecoder background_decoder{nullptr};

 private:
  GimConfig config_;
};
TORCH_MODULE(GimNet);

}  // namespace segtrack
