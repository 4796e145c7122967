#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "segtrack/geometry.hpp"
#include "segtrack/pipeline.hpp"
#include "segtrack/synthetic.hpp"

namespace segtrack {

struct TrainConfig {
  int batch_size = 8;
  int segmentation_iterations = 2000;
  int sem_iterations = 2000;
  double learning_rate = 1e-3;
  double decay_factor = 0.2;
  int decay_interval_epochs = 15;
  int iterations_per_epoch = 50;
  int max_gap = 50;
  // Location perturbation: each axis shifted by U[-f * sigma, f * sigma].
  double perturbation_fraction = 0.125;
  // Share of pairs built from a single frame with two different crops.
  double static_fraction = 0.2;
  // Search crop jitter of the training frame: centre shift as a fraction of
  // the target size, and log-uniform side scaling in [-scale, scale].
  double center_jitter = 0.2;
  double scale_jitter = 0.2;
  double search_factor = 4.0;
  int checkpoint_interval = 100;
  uint64_t seed = 1;

  // Throws Error(kInvalidConfig) naming the offending field.
  void validate() const;
};

using Rng = std::mt19937_64;

// Ordered pair (reference, train) with i != j and |i - j| <= max_gap, uniform
// over all such pairs.
std::pair<int, int> sample_pair(int length, int max_gap, Rng& rng);

// Each coordinate shifted by U[-fraction * sigma, fraction * sigma].
cv::Point2d perturb_location(cv::Point2d center, double sigma, double fraction, Rng& rng);

// One training pair cropped to patch resolution.
struct TrainingSample {
  cv::Mat3b reference_patch;
  cv::Mat1f reference_mask;  // [0, 1]
  cv::Mat3b train_patch;
  cv::Mat1f train_mask;
  BoundingBox train_inherent;  // patch pixels
  cv::Point2d location;        // perturbed target centre, patch pixels
};

TrainingSample make_sample(const std::vector<SyntheticSequence>& data, const TrainConfig& config,
                           int patch_size, Rng& rng);

using SampleSource = std::function<std::vector<TrainingSample>(Rng& rng)>;

// Draws config.batch_size samples per call from the sequences.
SampleSource sequence_source(const std::vector<SyntheticSequence>& data, const TrainConfig& config,
                             int patch_size);

// Mean two-class crossentropy of the predicted mask; prototypes come from the
// reference patch of each sample.
torch::Tensor segmentation_loss(NetworkBundle& nets, const std::vector<TrainingSample>& batch);

// Classification crossentropy plus region L1 (inside the box, offsets divided
// by the patch size). Encoder and segmentation nets run without gradients.
torch::Tensor sem_loss(NetworkBundle& nets, const std::vector<TrainingSample>& batch);

struct LossRecord {
  int iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

// lr * decay^(floor(epoch / interval)), epoch = iteration / iterations_per_epoch.
double scheduled_lr(const TrainConfig& config, int iteration);

enum class TrainStage { kSegmentation, kSem };

struct TrainOptions {
  // Checkpoint written every config.checkpoint_interval iterations and at the
  // end; empty disables persistence.
  std::filesystem::path checkpoint_path;
  // Resume from this checkpoint when it exists.
  std::filesystem::path resume_from;
  std::function<void(const LossRecord&)> on_iteration;
};

// Adam over the stage parameters. Returns the loss history of this call. On a
// non-finite loss the weights of the last good snapshot are restored and
// Error(kNonFiniteLoss) is thrown.
std::vector<LossRecord> train_stage(NetworkBundle& nets, TrainStage stage, const SampleSource& source,
                                    int iterations, const TrainConfig& config, const TrainOptions& options = {});

std::vector<LossRecord> train_segmentation(NetworkBundle& nets, const std::vector<SyntheticSequence>& data,
                                           const TrainConfig& config, const TrainOptions& options = {});
std::vector<LossRecord> train_sem(NetworkBundle& nets, const std::vector<SyntheticSequence>& data,
                                  const TrainConfig& config, const TrainOptions& options = {});

void write_loss_history(const std::filesystem::path& path, const std::vector<LossRecord>& history);
std::vector<LossRecord> read_loss_history(const std::filesystem::path& path);

// Toy training corpus: `count` sequences with varied shape, motion and texture.
std::vector<SyntheticSequence> training_corpus(int count, int length, uint64_t seed);

}  // namespace segtrack
