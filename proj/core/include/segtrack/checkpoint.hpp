#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "segtrack/pipeline.hpp"

namespace segtrack {

// Training position stored next to the weights so a run can resume exactly.
struct TrainingProgress {
  std::string stage;
  int iteration = 0;
  std::string rng_state;  // textual std::mt19937_64 state
};

// Named-parameter archive of every network in the bundle, optionally with the
// optimizer state and training progress.
void save_checkpoint(const std::filesystem::path& path, const NetworkBundle& nets,
                     const torch::optim::Optimizer* optimizer = nullptr,
                     const TrainingProgress* progress = nullptr);

// Loads weights into `nets`. Throws Error(kIo) for unreadable files and
// Error(kShapeMismatch) naming the parameter for missing or misshapen entries.
// The optimizer state is restored only when both it and the archive hold one.
std::optional<TrainingProgress> load_checkpoint(const std::filesystem::path& path, NetworkBundle& nets,
                                                torch::optim::Optimizer* optimizer = nullptr);

}  // namespace segtrack
