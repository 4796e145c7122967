#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "segtrack/pipeline.hpp"
#include "segtrack/tracker.hpp"
#include "segtrack/training.hpp"

namespace segtrack {

// Every tunable of a run. Missing keys keep these defaults; unknown keys are
// rejected.
struct RunConfig {
  uint64_t seed = 1;
  NetworkConfig network;
  TrackerConfig tracker;
  TrainConfig training;
  // Toy corpus used by the train command.
  int train_sequences = 4;
  int train_sequence_length = 60;
  AblationFlags ablation;
  // Weights loaded by the track command; empty means untrained networks.
  std::string checkpoint;
  int threads = 1;
};

// Parses a JSON document. Throws Error(kInvalidConfig) naming the offending key
// (dotted path) for unknown keys or wrong types.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies SEGTRACK_SEED when set; the seed also drives training and GEM.
void apply_environment(RunConfig& config);

// Fully resolved config as JSON text (round-trips through parse_run_config).
std::string to_json(const RunConfig& config, int indent = 2);

}  // namespace segtrack
