#include "segtrack/ablation.hpp"

#include <numeric>

#include "segtrack/error.hpp"

namespace segtrack {

SyntheticParams benchmark_params() {
  SyntheticParams p;
  p.length = 200;
  p.distractor = true;
  p.occlusion = true;
  p.occlusion_start = 90;
  p.occlusion_length = 40;
  return p;
}

std::vector<SyntheticSequence> benchmark_training_corpus() { return training_corpus(kBenchmarkTrainSequences, 60, 1); }

std::vector<double> mask_overlaps(const std::vector<FrameResult>& results, const SyntheticSequence& sequence,
                                  double threshold) {
  if (results.size() != sequence.masks.size()) {
    throw Error(ErrorCode::kShapeMismatch, "result and ground truth frame counts differ");
  }
  std::vector<double> out;
  for (size_t i = 1; i < results.size(); ++i) {
    out.push_back(jaccard(results[i].mask.binarize(threshold), sequence.masks[i]));
  }
  return out;
}

std::vector<AblationRow> ablation_report(NetworkBundle& networks, const std::vector<AblationFlags>& variants,
                                         const std::vector<SyntheticSequence>& sequences,
                                         const TrackerConfig& config) {
  if (sequences.empty()) throw Error(ErrorCode::kInvalidConfig, "ablation report needs at least one sequence");
  std::vector<AblationRow> rows;
  for (const auto& flags : variants) {
    AblationRow row;
    row.flags = flags;
    const auto names = flags.names();
    row.variant = names.empty() ? "full" : std::accumulate(std::next(names.begin()), names.end(), names.front(),
                                                           [](std::string a, const std::string& b) {
                                                             return a + "," + b;
                                                           });
    for (const auto& seq : sequences) {
      if (seq.size() < 2) throw Error(ErrorCode::kInvalidConfig, "ablation sequences need at least two frames");
      const std::vector<cv::Mat> frames(seq.frames.begin(), seq.frames.end());
      auto results = run_sequence(networks, frames, InitTarget{seq.masks.front()}, flags, config);
      const auto overlaps = mask_overlaps(results, seq, config.mask_threshold);
      const auto ar = accuracy_robustness(overlaps);
      row.accuracy += ar.accuracy / sequences.size();
      row.robustness += ar.robustness / sequences.size();
      row.mean_jaccard +=
          std::accumulate(overlaps.begin(), overlaps.end(), 0.0) / overlaps.size() / sequences.size();
      if (row.results.empty()) row.results = std::move(results);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace segtrack
