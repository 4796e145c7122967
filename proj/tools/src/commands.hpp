#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace segtrack::cli {

struct TrackArgs {
  std::filesystem::path config;
  std::filesystem::path sequence;
  std::filesystem::path output;
  std::string ablate;
  std::filesystem::path checkpoint;  // overrides the config entry when set
};

struct EvalArgs {
  std::filesystem::path predictions;
  std::filesystem::path ground_truth;
  std::vector<std::string> metrics{"jaccard", "contour_f", "iou", "auc", "ar"};
  // Overlaps fed to auc and ar: "box" (box IoU) or "mask" (Jaccard).
  std::string overlap = "box";
  double tolerance = 2.0;
  std::filesystem::path output;  // defaults to the predictions directory
};

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path output;
  bool resume = false;
};

struct RenderArgs {
  std::filesystem::path sequence;
  std::filesystem::path results;
  std::filesystem::path output;
};

// Each command throws segtrack::Error on failure.
void run_track(const TrackArgs& args);
void run_eval(const EvalArgs& args);
void run_train(const TrainArgs& args);
void run_render(const RenderArgs& args);

// Parses argv and dispatches. Errors are reported on stderr as one line
// "error: <Code>: <message>"; returns the process exit code.
int main_entry(int argc, char** argv);

}  // namespace segtrack::cli
