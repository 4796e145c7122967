#include <gtest/gtest.h>

#include "segtrack/error.hpp"
#include "segtrack/refine.hpp"

using namespace segtrack;

namespace {

FeaturePyramid pyramid_for(int64_t side) {
  return {torch::randn({1, 32, side / 4, side / 4}), torch::randn({1, 64, side / 8, side / 8}),
          torch::randn({1, 128, side / 16, side / 16}), side};
}

}  // namespace

TEST(RefineNet, FuseShapeAndOrderMatters) {
  torch::manual_seed(0);
  RefineNet net(EncoderConfig{});
  torch::NoGradGuard ng;
  auto l = torch::randn({1, 1, 24, 24}), f = torch::randn({1, 1, 24, 24}), p = torch::rand({1, 1, 24, 24});
  auto fused = net->fuse(l, f, p);
  EXPECT_EQ(fused.sizes(), (std::vector<int64_t>{1, 64, 24, 24}));
  EXPECT_FALSE(torch::equal(fused, net->fuse(f, l, p)));
  EXPECT_TRUE(torch::equal(fused, net->fuse(l, f, p)));
}

TEST(RefineNet, MaskShapeAndNormalisation) {
  torch::manual_seed(1);
  RefineNet net(EncoderConfig{});
  torch::NoGradGuard ng;
  for (int64_t side : {128, 384}) {
    const auto pyr = pyramid_for(side);
    const int64_t g = side / 16;
    auto out = net->segment(torch::randn({1, 1, g, g}), torch::randn({1, 1, g, g}), torch::rand({1, 1, g, g}), pyr);
    EXPECT_EQ(out.sizes(), (std::vector<int64_t>{1, 2, side, side}));
    EXPECT_GE(out.min().item<double>(), 0.0);
    EXPECT_LE(out.max().item<double>(), 1.0);
    EXPECT_LE((out.sum(1) - 1.0).abs().max().item<double>(), 1e-6);
  }
}

TEST(ChannelAttention, ZeroChannelAndLinearPooling) {
  ChannelAttention att(3, 4.0);
  torch::NoGradGuard ng;
  auto x = torch::randn({1, 3, 5, 5});
  x[0][1].zero_();
  auto y = att->forward(x);
  EXPECT_EQ(y[0][1].abs().max().item<double>(), 0.0);
  EXPECT_EQ(y.sizes(), x.sizes());
  auto x2 = x.clone();
  x2[0][0] *= 2.0;
  const auto p1 = ChannelAttentionImpl::pooled(x), p2 = ChannelAttentionImpl::pooled(x2);
  EXPECT_EQ(p2[0][0][0][0].item<float>(), 2.0f * p1[0][0][0][0].item<float>());
}

TEST(UpscaleStage, ShapesZeroSkipAndAttentionToggle) {
  torch::manual_seed(2);
  UpscaleStage stage(64, 32, 64, 4.0);
  torch::NoGradGuard ng;
  auto x = torch::randn({1, 64, 24, 24});
  auto skip = torch::randn({1, 64, 48, 48});
  auto out = stage->forward(x, skip);
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{1, 32, 48, 48}));
  EXPECT_TRUE(torch::equal(stage->forward(x, torch::zeros_like(skip)), stage->upsampled_path(x)));
  auto plain = stage->forward(x, skip, false);
  EXPECT_TRUE(torch::equal(plain, stage->upsampled_path(x) + stage->adjusted_skip(skip)));
  EXPECT_TRUE(torch::equal(out, stage->upsampled_path(x) + stage->attention->forward(stage->adjusted_skip(skip))));
  EXPECT_THROW(stage->forward(x, torch::randn({1, 64, 40, 40})), Error);
}
