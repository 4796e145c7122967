#include "segtrack/gim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "segtrack/error.hpp"

namespace segtrack {

namespace {

constexpr double kNormEps = 1e-8;
constexpr double kSimilaritySlack = 1e-5;

torch::Tensor l2_normalize(const torch::Tensor& x, int64_t dim) {
  return x / (x.norm(2, dim, /*keepdim=*/true) + kNormEps);
}

torch::Tensor gather_cells(const torch::Tensor& features, const std::vector<int64_t>& indices) {
  // features: [C, H*W] -> [N, C]
  auto idx = torch::tensor(indices, torch::kLong);
  return features.index_select(1, idx).t().contiguous();
}

}  // namespace

FeatureReducerImpl::FeatureReducerImpl(int64_t in_channels, int64_t out_channels) {
  project = register_module("project", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1)));
  mix = register_module("mix", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
}

torch::Tensor FeatureReducerImpl::forward(const torch::Tensor& x) {
  return torch::relu(mix->forward(torch::relu(project->forward(x))));
}

SimilarityDecoderImpl::SimilarityDecoderImpl(int64_t inputs, int64_t hidden_width) : inputs_(inputs) {
  hidden = register_module("hidden", torch::nn::Linear(inputs, hidden_width));
  output = register_module("output", torch::nn::Linear(hidden_width, 1));
  // Start near the average-top-N rule, mean(s) = relu(mean(s)) - relu(-mean(s)),
  // with a small random part to break the symmetry between hidden units.
  torch::NoGradGuard no_grad;
  const int64_t half = hidden_width / 2;
  if (half > 0) {
    hidden->weight.mul_(0.1);
    hidden->bias.mul_(0.1);
    output->weight.mul_(0.1);
    output->bias.zero_();
    hidden->weight.narrow(0, 0, half).add_(1.0 / inputs);
    hidden->weight.narrow(0, half, half).sub_(1.0 / inputs);
    output->weight.narrow(1, 0, half).add_(1.0 / half);
    output->weight.narrow(1, half, half).sub_(1.0 / half);
  }
}

torch::Tensor SimilarityDecoderImpl::forward(const torch::Tensor& sorted) {
  return output->forward(torch::relu(hidden->forward(sorted)));
}

cv::Mat1b cells_inside_box(int rows, int cols, double x, double y, double w, double h) {
  cv::Mat1b cells(rows, cols, uchar{0});
  for (int r = 0; r < rows; ++r) {
    const double cy = r + 0.5;
    if (cy < y || cy > y + h) continue;
    for (int c = 0; c < cols; ++c) {
      const double cx = c + 0.5;
      if (cx >= x && cx <= x + w) cells(r, c) = 1;
    }
  }
  return cells;
}

cv::Mat1b mask_to_cells(const cv::Mat1f& mask, int rows, int cols) {
  cv::Mat1f coverage;
  cv::resize(mask, coverage, cv::Size(cols, rows), 0, 0, cv::INTER_AREA);
  cv::Mat1b cells = coverage >= 0.5f;
  cells /= 255;
  if (cv::countNonZero(cells) == 0) {
    double max_val = 0.0;
    cv::minMaxLoc(coverage, nullptr, &max_val);
    if (max_val > 0.0) {
      cells = coverage >= static_cast<float>(max_val);
      cells /= 255;
    }
  }
  return cells;
}

GimModel build_gim_model(const torch::Tensor& seg_features, const cv::Mat1b& foreground_cells,
                         double neighborhood_factor) {
  torch::Tensor feats = seg_features.dim() == 4 ? seg_features.squeeze(0) : seg_features;
  if (feats.dim() != 3 || feats.size(1) != foreground_cells.rows ||
      feats.size(2) != foreground_cells.cols) {
    throw Error(ErrorCode::kShapeMismatch, "foreground cell grid does not match feature map");
  }
  const int rows = foreground_cells.rows;
  const int cols = foreground_cells.cols;

  std::vector<int64_t> fg;
  int r0 = rows, r1 = -1, c0 = cols, c1 = -1;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!foreground_cells(r, c)) continue;
      fg.push_back(int64_t{r} * cols + c);
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (fg.empty()) throw Error(ErrorCode::kEmptyForeground, "no foreground cell for GIM");

  const double cy = 0.5 * (r0 + r1 + 1);
  const double cx = 0.5 * (c0 + c1 + 1);
  const double half_h = 0.5 * neighborhood_factor * (r1 - r0 + 1);
  const double half_w = 0.5 * neighborhood_factor * (c1 - c0 + 1);
  const cv::Mat1b neighborhood = cells_inside_box(rows, cols, cx - half_w, cy - half_h, 2 * half_w, 2 * half_h);

  std::vector<int64_t> bg;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (neighborhood(r, c) && !foreground_cells(r, c)) bg.push_back(int64_t{r} * cols + c);
    }
  }
  if (bg.empty()) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (!foreground_cells(r, c)) bg.push_back(int64_t{r} * cols + c);
      }
    }
  }
  if (bg.empty()) throw Error(ErrorCode::kEmptyBackground, "foreground covers the whole grid");

  auto flat = feats.reshape({feats.size(0), int64_t{rows} * cols});
  return {gather_cells(flat, fg), gather_cells(flat, bg)};
}

torch::Tensor raw_similarities(const torch::Tensor& features, const torch::Tensor& prototypes) {
  const auto b = features.size(0);
  const auto c = features.size(1);
  if (prototypes.dim() != 2 || prototypes.size(1) != c) {
    throw Error(ErrorCode::kChannelMismatch, "prototype width differs from feature channels");
  }
  auto pixels = l2_normalize(features.reshape({b, c, -1}), 1);  // [B, C, HW]
  auto protos = l2_normalize(prototypes, 1);                     // [N, C]
  return torch::matmul(pixels.transpose(1, 2), protos.t());      // [B, HW, N]
}

torch::Tensor sorted_top_n(const torch::Tensor& similarities, int64_t n) {
  auto sorted = std::get<0>(similarities.sort(-1, /*descending=*/true));
  const auto available = sorted.size(-1);
  if (available >= n) return sorted.narrow(-1, 0, n);
  auto sizes = sorted.sizes().vec();
  sizes.back() = n - available;
  return torch::cat({sorted, torch::full(sizes, -1.0, sorted.options())}, -1);
}

torch::Tensor similarity_channel(const torch::Tensor& features, const torch::Tensor& prototypes,
                                 SimilarityDecoder& decoder, int64_t n) {
  if (prototypes.size(0) < 1) throw Error(ErrorCode::kEmptyForeground, "empty prototype set");
  auto sims = raw_similarities(features, prototypes);
  {
    torch::NoGradGuard no_grad;
    const double lo = sims.min().item<double>();
    const double hi = sims.max().item<double>();
    if (lo < -1.0 - kSimilaritySlack || hi > 1.0 + kSimilaritySlack || !std::isfinite(lo) ||
        !std::isfinite(hi)) {
      throw std::logic_error("cosine similarity outside [-1, 1]");
    }
  }
  auto decoded = decoder->forward(sorted_top_n(sims, n));  // [B, HW, 1]
  return decoded.transpose(1, 2).reshape({features.size(0), 1, features.size(2), features.size(3)});
}

torch::Tensor posterior(const torch::Tensor& f, const torch::Tensor& b) {
  if (f.sizes() != b.sizes()) throw Error(ErrorCode::kShapeMismatch, "F and B shapes differ");
  return torch::softmax(torch::cat({f, b}, 1), 1);
}

GimNetImpl::GimNetImpl(int64_t backbone_channels, GimConfig config) : config_(config) {
  reducer = register_module("reducer", FeatureReducer(backbone_channels, config_.feature_channels));
  foreground_decoder = register_module("foreground_decoder", SimilarityDecoder(config_.top_n, config_.decoder_hidden));
  background_decoder = register_module("background_decoder", SimilarityDecoder(config_.top_n, config_.decoder_hidden));
}

ChannelTriplet GimNetImpl::match(const torch::Tensor& seg_features, const GimModel& model) {
  ChannelTriplet out;
  out.foreground = similarity_channel(seg_features, model.foreground, foreground_decoder, config_.top_n);
  out.background = similarity_channel(seg_features, model.background, background_decoder, config_.top_n);
  out.posterior = posterior(out.foreground, out.background);
  return out;
}

torch::Tensor crop_to_cells(const torch::Tensor& features, const cv::Mat1b& cells) {
  int r0 = cells.rows, r1 = -1, c0 = cells.cols, c1 = -1;
  for (int r = 0; r < cells.rows; ++r) {
    for (int c = 0; c < cells.cols; ++c) {
      if (!cells(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (r1 < 0) throw Error(ErrorCode::kEmptyForeground, "no cell to crop");
  return features.narrow(2, r0, r1 - r0 + 1).narrow(3, c0, c1 - c0 + 1);
}

}  // namespace segtrack
