#include "segtrack/gem.hpp"

#include <algorithm>
#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "segtrack/error.hpp"

namespace segtrack {

namespace {

constexpr double kMinPeluB = 0.05;
constexpr int kMaxBacktracks = 20;
constexpr double kStepGrowth = 1.5;
constexpr double kMaxStepSize = 64.0;

struct Params {
  torch::Tensor reduction, kernel, a, b, bias;

  std::vector<torch::Tensor> list() const { return {reduction, kernel, a, b, bias}; }
};

Params params_of(const DcfFilter& f) { return {f.reduction, f.kernel, f.pelu_a, f.pelu_b, f.bias}; }

void assign(DcfFilter& f, const Params& p) {
  f.reduction = p.reduction;
  f.kernel = p.kernel;
  f.pelu_a = p.a;
  f.pelu_b = p.b;
  f.bias = p.bias;
}

// Removes the per-channel spatial mean and the overall scale, so the filter
// sees contrast rather than the absolute feature level.
torch::Tensor standardize(const torch::Tensor& features) {
  auto centred = features - features.mean({2, 3}, true);
  return centred / (centred.pow(2).mean().sqrt() + 1e-6);
}

torch::Tensor response_of(const Params& p, const torch::Tensor& features) {
  auto reduced = torch::conv2d(standardize(features), p.reduction);
  auto corr = same_correlation(reduced, p.kernel) + p.bias;
  return pelu(corr, p.a, p.b).squeeze(0).squeeze(0);
}

torch::Tensor objective(const Params& p, const DcfFilter& f, double weight_decay) {
  std::vector<torch::Tensor> terms;
  for (const auto* s : {&f.anchor, &f.latest}) {
    if (!s->has_value()) continue;
    terms.push_back((response_of(p, (*s)->features) - (*s)->label).pow(2).mean());
  }
  auto data = torch::stack(terms).mean();
  return data + weight_decay * (p.reduction.pow(2).sum() + p.kernel.pow(2).sum());
}

// Plain gradient descent; a step is accepted only if it does not raise the
// objective, otherwise the step size is halved and the step retried.
void run_steps(DcfFilter& f, int steps, double weight_decay) {
  Params p = params_of(f);
  for (auto& t : p.list()) t.requires_grad_(false);
  double current;
  {
    torch::NoGradGuard ng;
    current = objective(p, f, weight_decay).item<double>();
  }
  if (!std::isfinite(current)) throw Error(ErrorCode::kNonFiniteLoss, "initial DCF loss is not finite");
  f.loss_trace.push_back(current);

  for (int step = 0; step < steps; ++step) {
    std::vector<torch::Tensor> grads;
    {
      torch::AutoGradMode enable_grad(true);
      Params leaf{p.reduction.detach().requires_grad_(), p.kernel.detach().requires_grad_(),
                  p.a.detach().requires_grad_(), p.b.detach().requires_grad_(),
                  p.bias.detach().requires_grad_()};
      auto loss = objective(leaf, f, weight_decay);
      grads = torch::autograd::grad({loss}, leaf.list());
    }
    for (const auto& g : grads) {
      if (!torch::isfinite(g).all().item<bool>()) {
        throw Error(ErrorCode::kNonFiniteLoss, "DCF gradient is not finite at step " + std::to_string(f.step_count));
      }
    }

    torch::NoGradGuard ng;
    bool accepted = false;
    double alpha = f.step_size;
    for (int attempt = 0; attempt <= kMaxBacktracks; ++attempt) {
      Params trial{p.reduction - alpha * grads[0], p.kernel - alpha * grads[1], p.a - alpha * grads[2],
                   (p.b - alpha * grads[3]).clamp_min(kMinPeluB), p.bias - alpha * grads[4]};
      const double trial_loss = objective(trial, f, weight_decay).item<double>();
      if (std::isfinite(trial_loss) && trial_loss <= current) {
        p = trial;
        current = trial_loss;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    f.step_size = accepted ? std::min(alpha * kStepGrowth, kMaxStepSize) : alpha;
    ++f.step_count;
    f.loss_trace.push_back(current);
  }
  assign(f, p);
}

}  // namespace

torch::Tensor pelu(const torch::Tensor& x, const torch::Tensor& a, const torch::Tensor& b) {
  return torch::where(x >= 0, (a / b) * x, a * (torch::exp(x / b) - 1.0));
}

GridPoint localize(const torch::Tensor& response) {
  auto flat = response.reshape({-1}).to(torch::kDouble).contiguous();
  const auto cols = response.size(-1);
  const double* data = flat.data_ptr<double>();
  int64_t best = 0;
  for (int64_t i = 1; i < flat.numel(); ++i) {
    if (data[i] > data[best]) best = i;
  }
  return {static_cast<int>(best / cols), static_cast<int>(best % cols)};
}

torch::Tensor gaussian_label(int64_t rows, int64_t cols, cv::Point2d center_cells,
                             cv::Size2d size_cells, double sigma_factor) {
  const double sx = std::max(sigma_factor * size_cells.width, 1e-6);
  const double sy = std::max(sigma_factor * size_cells.height, 1e-6);
  auto label = torch::empty({rows, cols}, torch::kFloat32);
  auto acc = label.accessor<float, 2>();
  for (int64_t r = 0; r < rows; ++r) {
    const double dy = (r + 0.5 - center_cells.y) / sy;
    for (int64_t c = 0; c < cols; ++c) {
      const double dx = (c + 0.5 - center_cells.x) / sx;
      acc[r][c] = static_cast<float>(std::exp(-0.5 * (dx * dx + dy * dy)));
    }
  }
  return label;
}

torch::Tensor same_correlation(const torch::Tensor& x, const torch::Tensor& kernel) {
  const int64_t k = kernel.size(-1);
  if (x.size(1) != kernel.size(1)) {
    throw Error(ErrorCode::kChannelMismatch, "kernel has " + std::to_string(kernel.size(1)) +
                                                 " channels, features " + std::to_string(x.size(1)));
  }
  const int64_t before = k / 2;
  const int64_t after = k - 1 - before;
  auto padded = torch::constant_pad_nd(x, {before, after, before, after}, 0.0);
  return torch::conv2d(padded, kernel);
}

torch::Tensor DcfFilter::reduce(const torch::Tensor& features) const {
  if (features.size(1) != in_channels()) {
    throw Error(ErrorCode::kChannelMismatch, "filter expects " + std::to_string(in_channels()) +
                                                 " input channels, got " + std::to_string(features.size(1)));
  }
  return torch::conv2d(standardize(features), reduction);
}

torch::Tensor DcfFilter::respond(const torch::Tensor& features) const {
  if (features.size(1) != in_channels()) {
    throw Error(ErrorCode::kChannelMismatch, "filter expects " + std::to_string(in_channels()) +
                                                 " input channels, got " + std::to_string(features.size(1)));
  }
  return response_of(params_of(*this), features);
}

ResponseMap DcfFilter::correlate(const torch::Tensor& features) const {
  torch::NoGradGuard ng;
  ResponseMap out;
  out.values = respond(features);
  out.peak = localize(out.values);
  return out;
}

double DcfFilter::loss(double weight_decay) const {
  torch::NoGradGuard ng;
  return objective(params_of(*this), *this, weight_decay).item<double>();
}

DcfFilter DcfFilter::clone() const {
  DcfFilter out = *this;
  out.reduction = reduction.clone();
  out.kernel = kernel.clone();
  out.pelu_a = pelu_a.clone();
  out.pelu_b = pelu_b.clone();
  out.bias = bias.clone();
  return out;
}

DcfFilter init_filter(int64_t in_channels, const GemConfig& config) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(config.seed);
  DcfFilter f;
  f.reduction = torch::randn({config.channels, in_channels, 1, 1}, gen, torch::kFloat32) /
                std::sqrt(static_cast<double>(in_channels));
  f.kernel = torch::zeros({1, config.channels, config.kernel_size, config.kernel_size});
  f.pelu_a = torch::ones({});
  f.pelu_b = torch::ones({});
  f.bias = torch::zeros({});
  f.step_size = config.initial_step_size;
  return f;
}

DcfFilter train_filter(const torch::Tensor& features, cv::Point2d target_center,
                       cv::Size2d target_size, int steps, const GemConfig& config) {
  torch::NoGradGuard ng;
  const int64_t rows = features.size(2);
  const int64_t cols = features.size(3);
  if (target_center.x < 0 || target_center.y < 0 || target_center.x >= cols || target_center.y >= rows) {
    throw Error(ErrorCode::kPeakOutOfBounds, "DCF target centre outside the feature grid");
  }
  DcfFilter f = init_filter(features.size(1), config);
  auto feats = features.detach();

  // Start from the reduced template around the target so the first response
  // already peaks there; gradient descent then makes it discriminative.
  const int64_t k = config.kernel_size;
  const int64_t before = k / 2;
  auto padded = torch::constant_pad_nd(f.reduce(feats), {before, k - 1 - before, before, k - 1 - before}, 0.0);
  const auto pr = static_cast<int64_t>(std::floor(target_center.y));
  const auto pc = static_cast<int64_t>(std::floor(target_center.x));
  auto window = padded.narrow(2, pr, k).narrow(3, pc, k).clone();
  const double energy = window.pow(2).sum().item<double>();
  if (energy > 0.0) f.kernel = window / energy;

  f.anchor = DcfFilter::Sample{feats, gaussian_label(rows, cols, target_center, target_size, config.sigma_factor)};
  run_steps(f, steps, config.weight_decay);
  return f;
}

DcfFilter update_filter(const DcfFilter& filter, const torch::Tensor& features, cv::Point2d center,
                        cv::Size2d inherent_size, int steps, const GemConfig& config) {
  DcfFilter f = filter.clone();
  if (steps <= 0) return f;
  torch::NoGradGuard ng;
  f.latest = DcfFilter::Sample{features.detach(),
                               gaussian_label(features.size(2), features.size(3), center, inherent_size,
                                              config.sigma_factor)};
  run_steps(f, steps, config.weight_decay);
  return f;
}

torch::Tensor gem_reduce_features(const DcfFilter& filter, const torch::Tensor& deepest) {
  return filter.reduce(deepest);
}

}  // namespace segtrack
