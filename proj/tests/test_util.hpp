#pragma once

#include <random>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace segtrack::test {

inline cv::Mat1b random_mask(int rows, int cols, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution on(density);
  cv::Mat1b m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = on(rng) ? 1 : 0;
  }
  return m;
}

// Tensor element as double, any rank.
inline double at(const torch::Tensor& t, std::vector<int64_t> idx) {
  auto v = t;
  for (auto i : idx) v = v[i];
  return v.item<double>();
}

}  // namespace segtrack::test
