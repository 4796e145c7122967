#include "segtrack/sequence_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "segtrack/error.hpp"

namespace segtrack {

namespace fs = std::filesystem;

namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text, const std::string& line) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\r')) --end;
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) throw Error(ErrorCode::kIo, "malformed box line '" + line + "'");
  return v;
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

SequenceOnDisk read_sequence(const fs::path& dir) {
  SequenceOnDisk seq;
  seq.frame_paths = list_images(dir / "frames");
  if (seq.frame_paths.empty()) throw Error(ErrorCode::kIo, "no frames in " + (dir / "frames").string());
  for (const auto& p : seq.frame_paths) {
    cv::Mat3b img = cv::imread(p.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw Error(ErrorCode::kIo, "cannot read frame " + p.string());
    seq.frames.push_back(img);
  }
  for (const auto& p : list_images(dir / "masks")) seq.masks.push_back(read_mask(p));
  if (fs::exists(dir / "groundtruth.txt")) seq.boxes = read_box_file(dir / "groundtruth.txt");
  return seq;
}

InitTarget initialization_target(const SequenceOnDisk& sequence) {
  if (!sequence.masks.empty() && cv::countNonZero(sequence.masks.front()) > 0) return sequence.masks.front();
  if (!sequence.boxes.empty() && sequence.boxes.front().valid()) return sequence.boxes.front();
  throw Error(ErrorCode::kEmptyTarget, "missing initialization target");
}

std::string format_box(const BoundingBox& box) {
  return shortest(box.x) + "," + shortest(box.y) + "," + shortest(box.w) + "," + shortest(box.h);
}

BoundingBox parse_box(const std::string& line) {
  std::vector<std::string> parts;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 4) throw Error(ErrorCode::kIo, "malformed box line '" + line + "'");
  return {parse_number(parts[0], line), parse_number(parts[1], line), parse_number(parts[2], line),
          parse_number(parts[3], line), BoxRole::kVisible};
}

void write_box_file(const fs::path& path, const std::vector<BoundingBox>& boxes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& b : boxes) out << format_box(b) << '\n';
}

std::vector<BoundingBox> read_box_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<BoundingBox> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_box(line));
  }
  return out;
}

cv::Mat1b read_mask(const fs::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw Error(ErrorCode::kIo, "cannot read mask " + path.string());
  return img;
}

void write_png(const fs::path& path, const cv::Mat& image) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), image)) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void write_sequence(const fs::path& dir, const SyntheticSequence& sequence) {
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "masks");
  for (int i = 0; i < sequence.size(); ++i) {
    write_png(dir / "frames" / frame_name(i), sequence.frames[i]);
    write_png(dir / "masks" / frame_name(i), sequence.masks[i]);
  }
  write_box_file(dir / "groundtruth.txt", sequence.visible_boxes);
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d.png", index);
  return buf;
}

}  // namespace segtrack
