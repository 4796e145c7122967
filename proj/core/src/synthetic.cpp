#include "segtrack/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <opencv2/imgproc.hpp>

namespace segtrack {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

cv::Vec3d random_color(Rng& rng) { return {uniform(rng, 20, 235), uniform(rng, 20, 235), uniform(rng, 20, 235)}; }

uchar saturate(double v) { return cv::saturate_cast<uchar>(v); }

cv::Mat3b make_background(int size, Rng& rng) {
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::array<Wave, 5>, 3> waves;
  std::array<double, 3> base;
  for (int ch = 0; ch < 3; ++ch) {
    base[ch] = uniform(rng, 70, 180);
    for (auto& w : waves[ch]) {
      const double freq = uniform(rng, 0.01, 0.08);
      const double angle = uniform(rng, 0, kTwoPi);
      w = {freq * std::cos(angle), freq * std::sin(angle), uniform(rng, 0, kTwoPi), uniform(rng, 5, 18)};
    }
  }
  std::normal_distribution<double> noise(0.0, 6.0);
  cv::Mat3b bg(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      cv::Vec3b& px = bg(y, x);
      for (int ch = 0; ch < 3; ++ch) {
        double v = base[ch];
        for (const auto& w : waves[ch]) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
        px[ch] = saturate(v + noise(rng));
      }
    }
  }
  // Clutter: soft-coloured ellipses.
  const int blobs = 10;
  for (int i = 0; i < blobs; ++i) {
    const cv::Point c(static_cast<int>(uniform(rng, 0, size)), static_cast<int>(uniform(rng, 0, size)));
    const cv::Size axes(static_cast<int>(uniform(rng, 6, 28)), static_cast<int>(uniform(rng, 6, 28)));
    const cv::Vec3d col = random_color(rng);
    cv::Mat3b overlay = bg.clone();
    cv::ellipse(overlay, c, axes, uniform(rng, 0, 180), 0, 360, cv::Scalar(col[0], col[1], col[2]), cv::FILLED);
    cv::addWeighted(overlay, 0.5, bg, 0.5, 0.0, bg);
  }
  return bg;
}

struct Appearance {
  cv::Vec3d color_a, color_b;
  double stripe_angle, stripe_period;
  std::array<double, 3> harmonic_amp, harmonic_phase, harmonic_rate;
};

Appearance make_appearance(Rng& rng, double deformation) {
  Appearance a;
  a.color_a = random_color(rng);
  a.color_b = random_color(rng);
  a.stripe_angle = uniform(rng, 0, std::numbers::pi);
  a.stripe_period = uniform(rng, 6, 11);
  for (int k = 0; k < 3; ++k) {
    a.harmonic_amp[k] = deformation * uniform(rng, 0.4, 1.0);
    a.harmonic_phase[k] = uniform(rng, 0, kTwoPi);
    a.harmonic_rate[k] = uniform(rng, 0.03, 0.09);
  }
  return a;
}

// Radial contour factor of the deformable blob at polar angle phi and time t.
double contour(const Appearance& a, double phi, int t) {
  double r = 1.0;
  for (int k = 0; k < 3; ++k) r += a.harmonic_amp[k] * std::sin((k + 2) * phi + a.harmonic_phase[k] + a.harmonic_rate[k] * t);
  return r;
}

// Draws the object and writes its exact support into `support` (0/255).
void draw_object(cv::Mat3b& frame, cv::Mat1b& support, const Appearance& a, cv::Point2d center, double rx,
                 double ry, int t, const cv::Mat1d& texture_noise) {
  const double max_r = std::max(rx, ry) * 1.5;
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - max_r)));
  const int x1 = std::min(frame.cols - 1, static_cast<int>(std::ceil(center.x + max_r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - max_r)));
  const int y1 = std::min(frame.rows - 1, static_cast<int>(std::ceil(center.y + max_r)));
  const double ca = std::cos(a.stripe_angle);
  const double sa = std::sin(a.stripe_angle);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - center.x;
      const double dy = y + 0.5 - center.y;
      const double ux = dx / rx;
      const double uy = dy / ry;
      const double rho = std::hypot(ux, uy);
      if (rho >= contour(a, std::atan2(uy, ux), t)) continue;
      const double stripe = 0.5 + 0.5 * std::sin(kTwoPi * (dx * ca + dy * sa) / a.stripe_period);
      const int ny = std::clamp(static_cast<int>(dy + texture_noise.rows / 2), 0, texture_noise.rows - 1);
      const int nx = std::clamp(static_cast<int>(dx + texture_noise.cols / 2), 0, texture_noise.cols - 1);
      const double n = texture_noise(ny, nx);
      cv::Vec3b& px = frame(y, x);
      for (int ch = 0; ch < 3; ++ch) px[ch] = saturate(stripe * a.color_a[ch] + (1.0 - stripe) * a.color_b[ch] + n);
      support(y, x) = 255;
    }
  }
}

double occlusion_ramp(const SyntheticParams& p, int t) {
  if (!p.occlusion || t < p.occlusion_start || t >= p.occlusion_start + p.occlusion_length) return 0.0;
  const int ramp = std::max(1, std::min(5, p.occlusion_length / 3));
  const int into = t - p.occlusion_start;
  const int left = p.occlusion_start + p.occlusion_length - 1 - t;
  return p.occlusion_cover * std::min({1.0, (into + 1.0) / ramp, (left + 1.0) / ramp});
}

}  // namespace

SyntheticSequence generate_sequence(const SyntheticParams& params, uint64_t seed) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + params.texture_seed);
  SyntheticSequence seq;
  seq.params = params;
  seq.seed = seed;

  const int size = params.frame_size;
  const cv::Mat3b background = make_background(size, rng);
  const Appearance target = make_appearance(rng, params.deformation);
  cv::Mat1d texture_noise(129, 129);
  std::normal_distribution<double> noise(0.0, 8.0);
  for (auto& v : texture_noise) v = noise(rng);

  const double rx0 = params.radius * params.aspect;
  const double ry0 = params.radius;
  const double phase_x = uniform(rng, 0, kTwoPi);
  const double phase_y = uniform(rng, 0, kTwoPi);
  const double phase_s = uniform(rng, 0, kTwoPi);
  const double period_x = uniform(rng, 70, 110) / params.motion_speed;
  const double period_y = uniform(rng, 50, 90) / params.motion_speed;
  const double distractor_angle = uniform(rng, 0, kTwoPi);
  const double max_extent = std::max(rx0, ry0) * (1.0 + params.scale_oscillation) * (1.0 + 3.0 * params.deformation);
  const double distractor_distance = 2.2 * max_extent + 10.0;

  const cv::Vec3d occluder_color = random_color(rng);

  for (int t = 0; t < params.length; ++t) {
    const double scale = 1.0 + params.scale_oscillation * std::sin(kTwoPi * t / 80.0 + phase_s);
    const double rx = rx0 * scale;
    const double ry = ry0 * scale;
    const cv::Point2d center(0.5 * size + params.motion_amplitude * std::sin(kTwoPi * t / period_x + phase_x),
                             0.5 * size + params.motion_amplitude * std::sin(kTwoPi * t / period_y + phase_y));

    cv::Mat3b frame = background.clone();
    cv::Mat1b all(size, size, uchar{0});
    if (params.distractor) {
      const double psi = distractor_angle + kTwoPi * t / 300.0;
      const cv::Point2d dc = center + distractor_distance * cv::Point2d(std::cos(psi), std::sin(psi));
      draw_object(frame, all, target, dc, rx, ry, t, texture_noise);
    }
    cv::Mat1b full(size, size, uchar{0});
    draw_object(frame, full, target, center, rx, ry, t, texture_noise);
    all |= full;

    const BoundingBox inherent = [&] {
      BoundingBox b = fit_axis_aligned_box(cv::Mat1b(full / 255));
      b.role = BoxRole::kInherent;
      return b;
    }();

    cv::Mat1b visible = full.clone();
    const double cover = occlusion_ramp(params, t);
    if (cover > 0.0) {
      const int ox0 = std::max(0, static_cast<int>(inherent.x) - 12);
      const int ox1 = std::min(size, static_cast<int>(std::lround(inherent.x + cover * inherent.w)));
      const int oy0 = std::max(0, static_cast<int>(inherent.y) - 12);
      const int oy1 = std::min(size, static_cast<int>(inherent.y + inherent.h) + 12);
      const cv::Rect rect(ox0, oy0, std::max(0, ox1 - ox0), std::max(0, oy1 - oy0));
      if (rect.area() > 0) {
        cv::Mat3b roi = frame(rect);
        for (int y = 0; y < roi.rows; ++y) {
          for (int x = 0; x < roi.cols; ++x) {
            const double n = texture_noise((y * 7) % texture_noise.rows, (x * 5) % texture_noise.cols);
            for (int ch = 0; ch < 3; ++ch) roi(y, x)[ch] = saturate(occluder_color[ch] + n);
          }
        }
        visible(rect).setTo(0);
      }
    }

    const double full_area = cv::countNonZero(full);
    const double visible_area = cv::countNonZero(visible);
    BoundingBox visible_box = fit_axis_aligned_box(cv::Mat1b(visible / 255));
    visible_box.role = BoxRole::kVisible;

    seq.frames.push_back(frame);
    seq.masks.push_back(visible);
    seq.visible_boxes.push_back(visible_box);
    seq.inherent_boxes.push_back(inherent);
    seq.all_objects.push_back(all);
    seq.occluded_fraction.push_back(1.0 - visible_area / full_area);
  }
  return seq;
}

}  // namespace segtrack
