#include <benchmark/benchmark.h>

#include <opencv2/imgproc.hpp>

#include "segtrack/eval.hpp"
#include "segtrack/gem.hpp"
#include "segtrack/synthetic.hpp"
#include "segtrack/tracker.hpp"

using namespace segtrack;

namespace {

void BM_SameCorrelation(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto x = torch::randn({1, 64, 8, 8});
  const auto k = torch::randn({1, 64, 4, 4});
  for (auto _ : state) benchmark::DoNotOptimize(same_correlation(x, k));
}
BENCHMARK(BM_SameCorrelation);

void BM_EncoderForward(benchmark::State& state) {
  torch::set_num_threads(1);
  torch::NoGradGuard ng;
  Encoder encoder;
  const auto patch = torch::rand({1, 3, state.range(0), state.range(0)});
  for (auto _ : state) benchmark::DoNotOptimize(encoder->forward(patch).stride16);
}
BENCHMARK(BM_EncoderForward)->Arg(128)->Arg(384)->Unit(benchmark::kMillisecond);

void BM_ContourF(benchmark::State& state) {
  cv::Mat1b a(256, 256, uchar(0)), b(256, 256, uchar(0));
  cv::circle(a, {128, 128}, 50, 255, -1);
  cv::circle(b, {131, 126}, 48, 255, -1);
  for (auto _ : state) benchmark::DoNotOptimize(contour_f(a, b, 2.0));
}
BENCHMARK(BM_ContourF)->Unit(benchmark::kMicrosecond);

void BM_GemInit(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto features = torch::randn({1, 128, 8, 8});
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_filter(features, {4.0, 4.0}, {2.0, 2.0}, 30, GemConfig{}).loss_trace);
  }
}
BENCHMARK(BM_GemInit)->Unit(benchmark::kMillisecond);

void BM_TrackerStep(benchmark::State& state) {
  torch::set_num_threads(1);
  NetworkBundle nets(NetworkConfig{}, 1);
  SyntheticParams p;
  p.length = 2;
  const auto seq = generate_sequence(p, 1);
  Tracker tracker(nets, TrackerConfig{});
  tracker.initialize(seq.frames[0], seq.masks[0]);
  for (auto _ : state) benchmark::DoNotOptimize(tracker.step(seq.frames[1]).visible_box);
}
BENCHMARK(BM_TrackerStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
