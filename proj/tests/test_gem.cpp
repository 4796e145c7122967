#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "segtrack/error.hpp"
#include "segtrack/gem.hpp"

using namespace segtrack;

namespace {

// Naive zero-padded correlation, anchor at k/2.
torch::Tensor oracle_correlation(const torch::Tensor& x, const torch::Tensor& kernel) {
  const int64_t d = x.size(1), h = x.size(2), w = x.size(3), k = kernel.size(-1);
  auto xa = x.to(torch::kDouble).contiguous();
  auto ka = kernel.to(torch::kDouble).contiguous();
  auto X = xa.accessor<double, 4>();
  auto K = ka.accessor<double, 4>();
  auto out = torch::zeros({h, w}, torch::kDouble);
  auto O = out.accessor<double, 2>();
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (int64_t ch = 0; ch < d; ++ch) {
        for (int64_t i = 0; i < k; ++i) {
          for (int64_t j = 0; j < k; ++j) {
            const int64_t rr = r + i - k / 2, cc = c + j - k / 2;
            if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
            s += X[0][ch][rr][cc] * K[0][ch][i][j];
          }
        }
      }
      O[r][c] = s;
    }
  }
  return out;
}

GemConfig small_config() {
  GemConfig c;
  c.channels = 8;
  return c;
}

}  // namespace

TEST(SameCorrelation, MatchesBruteForce) {
  torch::manual_seed(0);
  for (int t = 0; t < 60; ++t) {
    const int64_t k = 2 + t % 4, d = 1 + t % 3;
    auto x = torch::randn({1, d, 8, 8});
    auto kern = torch::randn({1, d, k, k});
    auto got = same_correlation(x, kern).squeeze(0).squeeze(0).to(torch::kDouble);
    EXPECT_LE((got - oracle_correlation(x, kern)).abs().max().item<double>(), 1e-5) << "k=" << k;
  }
}

TEST(SameCorrelation, DeltaKernelFindsImpulse) {
  auto x = torch::zeros({1, 1, 8, 8});
  x[0][0][3][5] = 1.0;
  auto kern = torch::zeros({1, 1, 4, 4});
  kern[0][0][2][2] = 1.0;
  const auto out = same_correlation(x, kern).squeeze(0).squeeze(0);
  EXPECT_EQ(localize(out), (GridPoint{3, 5}));
}

TEST(SameCorrelation, ChannelMismatchThrows) {
  try {
    same_correlation(torch::zeros({1, 2, 4, 4}), torch::zeros({1, 3, 2, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChannelMismatch);
  }
}

TEST(Localize, Examples) {
  auto r = torch::zeros({8, 8});
  r[3][5] = 2.0;
  EXPECT_EQ(localize(r), (GridPoint{3, 5}));
  EXPECT_EQ(localize(torch::ones({4, 6})), (GridPoint{0, 0}));
  auto tie = torch::zeros({8, 8});
  tie[4][1] = 1.0;
  tie[2][7] = 1.0;
  EXPECT_EQ(localize(tie), (GridPoint{2, 7}));
}

TEST(Localize, InvariantUnderMonotoneTransforms) {
  torch::manual_seed(1);
  for (int t = 0; t < 50; ++t) {
    auto r = torch::randn({7, 9}, torch::kDouble);
    const auto p = localize(r);
    EXPECT_EQ(localize(r * 3.0 + 1.0), p);
    EXPECT_EQ(localize(torch::exp(r)), p);
    EXPECT_EQ(localize(r.pow(3)), p);
    EXPECT_EQ(localize(torch::atan(r)), p);
  }
}

TEST(Pelu, Formula) {
  auto x = torch::tensor({-2.0, -0.5, 0.0, 0.5, 3.0}, torch::kDouble);
  auto a = torch::tensor(1.5, torch::kDouble), b = torch::tensor(0.5, torch::kDouble);
  auto y = pelu(x, a, b);
  const double xs[] = {-2.0, -0.5, 0.0, 0.5, 3.0};
  for (int i = 0; i < 5; ++i) {
    const double e = xs[i] >= 0 ? (1.5 / 0.5) * xs[i] : 1.5 * (std::exp(xs[i] / 0.5) - 1.0);
    EXPECT_NEAR(y[i].item<double>(), e, 1e-12);
  }
}

TEST(GaussianLabel, SigmaFollowsSize) {
  const auto small = gaussian_label(16, 16, {8.0, 8.0}, {2.0, 3.0}, 0.25);
  const auto big = gaussian_label(16, 16, {8.0, 8.0}, {4.0, 6.0}, 0.25);
  auto S = small.accessor<float, 2>();
  auto B = big.accessor<float, 2>();
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      const double dx = c + 0.5 - 8.0, dy = r + 0.5 - 8.0;
      const auto expect = [&](double sx, double sy) {
        return static_cast<float>(std::exp(-0.5 * ((dx / sx) * (dx / sx) + (dy / sy) * (dy / sy))));
      };
      EXPECT_EQ(S[r][c], expect(0.5, 0.75));
      EXPECT_EQ(B[r][c], expect(1.0, 1.5));
    }
  }
}

TEST(DcfFilter, ReductionShape) {
  const auto f = init_filter(128, GemConfig{});
  const auto reduced = gem_reduce_features(f, torch::randn({1, 128, 24, 24}));
  EXPECT_EQ(reduced.sizes(), (std::vector<int64_t>{1, 256, 24, 24}));
  const auto again = gem_reduce_features(f, torch::ones({1, 128, 24, 24}));
  EXPECT_TRUE(torch::equal(again, gem_reduce_features(f, torch::ones({1, 128, 24, 24}))));
}

TEST(DcfFilter, ResponseIgnoresFeatureOffsetAndScale) {
  torch::manual_seed(4);
  const auto x = torch::randn({1, 16, 8, 8});
  const auto f = train_filter(x, {4.0, 4.0}, {2.0, 2.0}, 3, small_config());
  const auto moved = 3.0 * x + torch::randn({1, 16, 1, 1});
  EXPECT_LT((f.respond(moved) - f.respond(x)).abs().max().item<double>(), 1e-4);
}

TEST(DcfFilter, ZeroFeaturesGiveConstantResponse) {
  const auto f = train_filter(torch::randn({1, 16, 8, 8}), {4.0, 4.0}, {2.0, 2.0}, 3, small_config());
  const auto resp = f.respond(torch::zeros({1, 16, 8, 8}));
  EXPECT_EQ((resp - resp[0][0]).abs().max().item<double>(), 0.0);
}

TEST(DcfFilter, TrainingLocalisesTargetAndIsMonotone) {
  torch::manual_seed(2);
  for (int t = 0; t < 5; ++t) {
    auto feats = torch::relu(torch::randn({1, 16, 12, 12}));
    const cv::Point2d centre(2.5 + 2 * t, 7.5 - t);
    const auto f = train_filter(feats, centre, {2.0, 2.0}, 30, small_config());
    ASSERT_EQ(f.loss_trace.size(), 31u);
    for (size_t k = 1; k < f.loss_trace.size(); ++k) EXPECT_LE(f.loss_trace[k], f.loss_trace[k - 1] + 1e-6);
    const auto peak = f.correlate(feats).peak;
    EXPECT_LE(std::abs(peak.col - static_cast<int>(centre.x)), 1);
    EXPECT_LE(std::abs(peak.row - static_cast<int>(centre.y)), 1);
  }
}

TEST(DcfFilter, ZeroStepsKeepInitialisation) {
  auto feats = torch::randn({1, 16, 8, 8});
  const auto f = train_filter(feats, {4.0, 4.0}, {2.0, 2.0}, 0, small_config());
  EXPECT_EQ(f.loss_trace.size(), 1u);
  EXPECT_EQ(f.step_count, 0);
  const auto g = update_filter(f, feats, {4.0, 4.0}, {2.0, 2.0}, 0, small_config());
  EXPECT_TRUE(torch::equal(g.kernel, f.kernel));
  EXPECT_TRUE(torch::equal(g.reduction, f.reduction));
  EXPECT_EQ(g.loss_trace, f.loss_trace);
}

TEST(DcfFilter, RepeatedUpdateStartsNoHigherThanPreviousEnd) {
  auto feats = torch::randn({1, 16, 10, 10});
  const auto f = train_filter(feats, {5.0, 5.0}, {2.0, 2.0}, 10, small_config());
  auto next = torch::randn({1, 16, 10, 10});
  const auto u1 = update_filter(f, next, {4.0, 6.0}, {2.0, 2.0}, 2, small_config());
  const auto u2 = update_filter(u1, next, {4.0, 6.0}, {2.0, 2.0}, 2, small_config());
  const size_t start2 = u1.loss_trace.size();
  EXPECT_LE(u2.loss_trace[start2], u1.loss_trace.back() + 1e-6);
}

TEST(DcfFilter, CentreOutsideGridThrows) {
  try {
    train_filter(torch::randn({1, 4, 6, 6}), {6.5, 2.0}, {1.0, 1.0}, 1, small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPeakOutOfBounds);
  }
}
