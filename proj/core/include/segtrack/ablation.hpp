#pragma once

#include <string>
#include <vector>

#include "segtrack/eval.hpp"
#include "segtrack/pipeline.hpp"
#include "segtrack/synthetic.hpp"
#include "segtrack/tracker.hpp"
#include "segtrack/training.hpp"

namespace segtrack {

// 200-frame scene with one distractor and one occlusion window.
SyntheticParams benchmark_params();
constexpr uint64_t kBenchmarkSeed = 7;

// Networks scored on the benchmark are trained on this many generated
// sequences so that they meet appearances they were not trained on.
constexpr int kBenchmarkTrainSequences = 128;
std::vector<SyntheticSequence> benchmark_training_corpus();

// Mask Jaccard of frames 1..N-1 (the initialisation frame is excluded).
std::vector<double> mask_overlaps(const std::vector<FrameResult>& results, const SyntheticSequence& sequence,
                                  double threshold = kDefaultMaskThreshold);

struct AblationRow {
  std::string variant;  // "full" or the comma-joined flag names
  AblationFlags flags;
  double accuracy = 0.0;
  double robustness = 0.0;
  double mean_jaccard = 0.0;
  std::vector<FrameResult> results;

  double score() const { return accuracy * robustness; }
};

// Tracks every sequence once per variant, initialised from the first ground
// truth mask. Rows are averaged over sequences, in variant order.
std::vector<AblationRow> ablation_report(NetworkBundle& networks, const std::vector<AblationFlags>& variants,
                                         const std::vector<SyntheticSequence>& sequences,
                                         const TrackerConfig& config = {});

}  // namespace segtrack
