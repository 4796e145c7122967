#include "segtrack/sem.hpp"

#include <cmath>

#include "segtrack/error.hpp"

namespace segtrack {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t k, int64_t stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2));
}

}  // namespace

MaskAdjustImpl::MaskAdjustImpl(int64_t out_channels) {
  layers = register_module("layers", torch::nn::Sequential(
                                         conv(1, 16, 3, 2), torch::nn::ReLU(),
                                         conv(16, 32, 3, 2), torch::nn::ReLU(),
                                         conv(32, out_channels, 3, 2), torch::nn::ReLU(),
                                         conv(out_channels, out_channels, 3, 2)));
}

torch::Tensor MaskAdjustImpl::forward(const torch::Tensor& mask) { return layers->forward(mask); }

SemHeadImpl::SemHeadImpl(int64_t in_channels, int64_t width, int64_t out_channels) {
  layers = register_module("layers", torch::nn::Sequential(
                                         conv(in_channels, width, 3), torch::nn::ReLU(),
                                         conv(width, width, 3), torch::nn::ReLU(),
                                         conv(width, out_channels, 1)));
}

torch::Tensor SemHeadImpl::forward(const torch::Tensor& x) { return layers->forward(x); }

SemNetImpl::SemNetImpl(int64_t backbone_channels, int64_t patch_size, SemConfig config)
    : config_(config), patch_size_(patch_size) {
  template_reduce = register_module("template_reduce", conv(backbone_channels, config_.reduced_channels, 1));
  search_reduce = register_module("search_reduce", conv(backbone_channels, config_.reduced_channels, 1));
  mask_adjust = register_module("mask_adjust", MaskAdjust(config_.mask_channels));
  const int64_t head_in = config_.reduced_channels + config_.mask_channels;
  cls_head = register_module("cls_head", SemHead(head_in, config_.head_channels, 2));
  region_head = register_module("region_head", SemHead(head_in, config_.head_channels, 4));
}

torch::Tensor SemNetImpl::adjust_mask(const torch::Tensor& mask) { return mask_adjust->forward(mask); }

torch::Tensor SemNetImpl::resample_mask(const torch::Tensor& mask, int64_t rows, int64_t cols) const {
  auto small = F::interpolate(mask, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{rows, cols})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
  return small.expand({mask.size(0), config_.mask_channels, rows, cols}).contiguous();
}

SemOutput SemNetImpl::predict(const torch::Tensor& template_features, const torch::Tensor& search_features,
                              const torch::Tensor& mask_features) {
  if (template_features.size(0) != search_features.size(0)) {
    throw Error(ErrorCode::kShapeMismatch, "template and search batch sizes differ");
  }
  return predict_pooled(template_vector(template_features), search_features, mask_features);
}

torch::Tensor SemNetImpl::template_vector(const torch::Tensor& template_features) {
  return template_reduce->forward(template_features).mean({2, 3}, /*keepdim=*/true);
}

SemOutput SemNetImpl::predict_pooled(const torch::Tensor& template_vector, const torch::Tensor& search_features,
                                     const torch::Tensor& mask_features) {
  if (search_features.size(-1) != mask_features.size(-1) || search_features.size(-2) != mask_features.size(-2)) {
    throw Error(ErrorCode::kShapeMismatch, "mask features not aligned with search features");
  }
  if (template_vector.size(0) != search_features.size(0)) {
    throw Error(ErrorCode::kShapeMismatch, "template and search batch sizes differ");
  }
  auto search = search_reduce->forward(search_features);
  auto x = torch::cat({search * template_vector, mask_features}, 1);
  SemOutput out;
  out.cls = cls_head->forward(x);
  out.region = region_head->forward(x) * static_cast<double>(patch_size_);
  return out;
}

ScaleEstimate decode_scale(const torch::Tensor& cls, const torch::Tensor& region,
                           const CoordinateMapping& mapping, int64_t stride) {
  auto c = (cls.dim() == 4 ? cls.squeeze(0) : cls).detach().to(torch::kDouble);
  auto r = (region.dim() == 4 ? region.squeeze(0) : region).detach().to(torch::kDouble);
  if (c.size(0) != 2 || r.size(0) != 4 || c.size(1) != r.size(1) || c.size(2) != r.size(2)) {
    throw Error(ErrorCode::kShapeMismatch, "cls/region channels not aligned");
  }
  // The target softmax is monotone in (cls_fg - cls_bg); comparing differences
  // keeps the argmax exactly invariant to a shared constant shift.
  auto diff = (c[0] - c[1]).contiguous();
  const int64_t rows = diff.size(0);
  const int64_t cols = diff.size(1);
  const double* d = diff.data_ptr<double>();
  int64_t best = 0;
  for (int64_t i = 1; i < rows * cols; ++i) {
    if (d[i] > d[best]) best = i;
  }
  ScaleEstimate est;
  est.position = {static_cast<int>(best / cols), static_cast<int>(best % cols)};
  est.center = {(est.position.col + 0.5) * stride, (est.position.row + 0.5) * stride};
  est.confidence = 1.0 / (1.0 + std::exp(-d[best]));
  auto at = [&](int64_t ch) { return r[ch][est.position.row][est.position.col].item<double>(); };
  const double w = at(kRight) - at(kLeft);
  const double h = at(kTop) - at(kBottom);
  if (!(w > 0.0) || !(h > 0.0)) {
    throw Error(ErrorCode::kNonPositiveScale,
                "decoded size " + std::to_string(w) + "x" + std::to_string(h) + " is not positive");
  }
  est.width = w * mapping.scale_x;
  est.height = h * mapping.scale_y;
  return est;
}

SemTargets make_sem_targets(int64_t rows, int64_t cols, int64_t stride, const BoundingBox& box,
                            double positive_radius_cells) {
  SemTargets t;
  t.cls_label = torch::ones({rows, cols}, torch::kLong);
  t.region = torch::zeros({4, rows, cols});
  t.inside = torch::zeros({rows, cols});
  auto label = t.cls_label.accessor<int64_t, 2>();
  auto reg = t.region.accessor<float, 3>();
  auto inside = t.inside.accessor<float, 2>();
  const double cx_cells = box.center_x() / stride;
  const double cy_cells = box.center_y() / stride;
  double nearest = 1e300;
  int64_t nearest_r = 0, nearest_c = 0;
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      const double dist = std::hypot(c + 0.5 - cx_cells, r + 0.5 - cy_cells);
      if (dist <= positive_radius_cells) label[r][c] = 0;
      if (dist < nearest) {
        nearest = dist;
        nearest_r = r;
        nearest_c = c;
      }
      const double px = (c + 0.5) * stride;
      const double py = (r + 0.5) * stride;
      reg[kTop][r][c] = static_cast<float>(box.y + box.h - py);
      reg[kBottom][r][c] = static_cast<float>(box.y - py);
      reg[kRight][r][c] = static_cast<float>(box.x + box.w - px);
      reg[kLeft][r][c] = static_cast<float>(box.x - px);
      const bool in = px >= box.x && px <= box.x + box.w && py >= box.y && py <= box.y + box.h;
      inside[r][c] = in ? 1.0f : 0.0f;
    }
  }
  label[nearest_r][nearest_c] = 0;
  inside[nearest_r][nearest_c] = 1.0f;
  return t;
}

torch::Tensor region_l1_loss(const torch::Tensor& predicted, const torch::Tensor& target,
                             const torch::Tensor& inside, double normalizer) {
  // predicted/target: [B, 4, H, W]; inside: [B, 1, H, W]
  auto per_cell = (predicted - target).abs() * inside;
  return per_cell.sum() / (4.0 * inside.sum().clamp_min(1.0) * normalizer);
}

}  // namespace segtrack
