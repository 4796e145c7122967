#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "segtrack/geometry.hpp"
#include "segtrack/synthetic.hpp"
#include "segtrack/tracker.hpp"

namespace segtrack {

// Layout: <dir>/frames/*.png (lexicographic = temporal order) and ground truth
// as <dir>/masks/*.png (0/255, one per frame) and/or <dir>/groundtruth.txt
// ("x,y,w,h" per line).
struct SequenceOnDisk {
  std::vector<std::filesystem::path> frame_paths;
  std::vector<cv::Mat3b> frames;
  std::vector<cv::Mat1b> masks;     // empty when absent; nonzero = target
  std::vector<BoundingBox> boxes;   // empty when absent

  int size() const { return static_cast<int>(frames.size()); }
};

// Image files of a directory sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Throws Error(kIo) when the frames directory is missing or empty.
SequenceOnDisk read_sequence(const std::filesystem::path& dir);

// First-frame target: mask when present, otherwise box. Throws
// Error(kEmptyTarget, "missing initialization target") when neither exists.
InitTarget initialization_target(const SequenceOnDisk& sequence);

// "x,y,w,h" with the shortest round-trip decimal form and '.' separator.
std::string format_box(const BoundingBox& box);
BoundingBox parse_box(const std::string& line);
void write_box_file(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes);
std::vector<BoundingBox> read_box_file(const std::filesystem::path& path);

cv::Mat1b read_mask(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const cv::Mat& image);

// Writes frames/, masks/ and groundtruth.txt (visible boxes) of a synthetic sequence.
void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& sequence);

// Zero-padded frame file name, e.g. 00012.png.
std::string frame_name(int index);

}  // namespace segtrack
