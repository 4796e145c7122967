#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "segtrack/checkpoint.hpp"
#include "segtrack/config.hpp"
#include "segtrack/error.hpp"
#include "segtrack/eval.hpp"
#include "segtrack/sequence_io.hpp"
#include "segtrack/tracker.hpp"
#include "segtrack/training.hpp"

namespace segtrack::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig resolve_config(const fs::path& path) {
  RunConfig config = load_run_config(path);
  apply_environment(config);
  if (!config.checkpoint.empty() && fs::path(config.checkpoint).is_relative()) {
    config.checkpoint = (path.parent_path() / config.checkpoint).lexically_normal().string();
  }
  torch::set_num_threads(config.threads);
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, "malformed JSON in " + path.string());
  }
}

cv::Mat1b quantize(const cv::Mat1f& probabilities) {
  cv::Mat1b out;
  probabilities.convertTo(out, CV_8U, 255.0);  // saturating round
  return out;
}

// Predicted masks binarised with the threshold recorded by track (0.5 when
// no summary exists).
double recorded_threshold(const fs::path& predictions) {
  const fs::path summary = predictions / "summary.json";
  if (!fs::exists(summary)) return kDefaultMaskThreshold;
  return read_json(summary).value("mask_threshold", kDefaultMaskThreshold);
}

std::vector<BoundingBox> boxes_of(const fs::path& dir, const std::vector<cv::Mat1b>& masks, const char* file) {
  if (fs::exists(dir / file)) return read_box_file(dir / file);
  std::vector<BoundingBox> out;
  for (const auto& m : masks) {
    out.push_back(cv::countNonZero(m) > 0 ? fit_axis_aligned_box(cv::Mat1b(m != 0)) : BoundingBox{});
  }
  return out;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void draw_dashed_rect(cv::Mat& img, const cv::Rect& r, const cv::Scalar& color) {
  constexpr int kDash = 4;
  auto line = [&](cv::Point a, cv::Point b) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    for (double t = 0.0; t < len; t += 2 * kDash) {
      const double t1 = std::min(len, t + kDash);
      const cv::Point p0(a.x + static_cast<int>(std::lround((b.x - a.x) * t / len)),
                         a.y + static_cast<int>(std::lround((b.y - a.y) * t / len)));
      const cv::Point p1(a.x + static_cast<int>(std::lround((b.x - a.x) * t1 / len)),
                         a.y + static_cast<int>(std::lround((b.y - a.y) * t1 / len)));
      cv::line(img, p0, p1, color, 1, cv::LINE_8);
    }
  };
  const cv::Point tl = r.tl(), br(r.x + r.width - 1, r.y + r.height - 1);
  line(tl, {br.x, tl.y});
  line({br.x, tl.y}, br);
  line(br, {tl.x, br.y});
  line({tl.x, br.y}, tl);
}

cv::Rect pixel_rect(const BoundingBox& b) {
  const int x0 = static_cast<int>(std::lround(b.x));
  const int y0 = static_cast<int>(std::lround(b.y));
  const int x1 = static_cast<int>(std::lround(b.x + b.w));
  const int y1 = static_cast<int>(std::lround(b.y + b.h));
  return {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

}  // namespace

void run_track(const TrackArgs& args) {
  RunConfig config = resolve_config(args.config);
  if (!args.checkpoint.empty()) config.checkpoint = args.checkpoint.string();
  const AblationFlags requested = AblationFlags::parse(args.ablate);
  for (const auto& name : requested.names()) {
    auto merged = config.ablation.names();
    merged.push_back(name);
    config.ablation = AblationFlags::from_names(merged);
  }

  const SequenceOnDisk sequence = read_sequence(args.sequence);
  const InitTarget target = initialization_target(sequence);

  NetworkBundle nets(config.network, config.seed);
  if (!config.checkpoint.empty()) load_checkpoint(config.checkpoint, nets);
  nets.train(false);

  fs::create_directories(args.output / "masks");
  fs::create_directories(args.output / "probabilities");
  Tracker tracker(nets, config.tracker, config.ablation);
  std::vector<BoundingBox> visible, inherent;
  std::ofstream frames_log(args.output / "frames.jsonl", std::ios::binary);
  if (!frames_log) throw Error(ErrorCode::kIo, "cannot write " + (args.output / "frames.jsonl").string());
  for (int i = 0; i < sequence.size(); ++i) {
    FrameResult r = i == 0 ? tracker.initialize(sequence.frames[0], target) : tracker.step(sequence.frames[i]);
    cv::Mat1b binary = r.mask.binarize(config.tracker.mask_threshold) * 255;
    write_png(args.output / "masks" / frame_name(i), binary);
    write_png(args.output / "probabilities" / frame_name(i), quantize(r.mask.probabilities));
    visible.push_back(r.visible_box);
    inherent.push_back(r.inherent_box);
    json rec = {{"frame", i},
                {"flags", r.flags},
                {"milliseconds", r.milliseconds},
                {"search_side", r.search_side},
                {"search_center", {r.search_center.x, r.search_center.y}}};
    if (r.scale) rec["sem_confidence"] = r.scale->confidence;
    frames_log << rec.dump() << '\n';
  }
  write_box_file(args.output / "boxes.txt", visible);
  write_box_file(args.output / "inherent_boxes.txt", inherent);

  json summary = {{"command", "track"},
                  {"sequence", args.sequence.string()},
                  {"frames", sequence.size()},
                  {"seed", config.seed},
                  {"ablate", args.ablate},
                  {"ablation_flags", config.ablation.names()},
                  {"mask_threshold", config.tracker.mask_threshold},
                  {"init_target", std::holds_alternative<cv::Mat1b>(target) ? "mask" : "box"},
                  {"encode_calls", nets.encode_calls.load()},
                  {"refine_calls", nets.refine_calls.load()},
                  {"config", json::parse(to_json(config))}};
  write_text(args.output / "summary.json", summary.dump(2) + "\n");
}

void run_eval(const EvalArgs& args) {
  const fs::path out_dir = args.output.empty() ? args.predictions : args.output;
  const double threshold = recorded_threshold(args.predictions);
  const auto pred_mask_paths = list_images(args.predictions / "masks");
  const auto gt_mask_paths = list_images(args.ground_truth / "masks");
  std::vector<cv::Mat1b> pred_masks, gt_masks;
  for (const auto& p : pred_mask_paths) pred_masks.push_back(read_mask(p) >= threshold * 255.0);
  for (const auto& p : gt_mask_paths) gt_masks.push_back(read_mask(p) != 0);

  auto wants = [&](const std::string& m) {
    return std::find(args.metrics.begin(), args.metrics.end(), m) != args.metrics.end();
  };
  for (const auto& m : args.metrics) {
    if (m != "jaccard" && m != "contour_f" && m != "iou" && m != "auc" && m != "ar") {
      throw Error(ErrorCode::kInvalidConfig, "unknown metric '" + m + "'");
    }
  }
  if (args.overlap != "box" && args.overlap != "mask") {
    throw Error(ErrorCode::kInvalidConfig, "unknown overlap kind '" + args.overlap + "'");
  }

  const bool need_masks = wants("jaccard") || wants("contour_f") ||
                          (args.overlap == "mask" && (wants("auc") || wants("ar")));
  const bool need_boxes = wants("iou") || (args.overlap == "box" && (wants("auc") || wants("ar")));

  std::vector<double> jac, cf, ious;
  if (need_masks) {
    if (pred_masks.empty() || gt_masks.empty()) throw Error(ErrorCode::kIo, "mask metrics need masks/ in both directories");
    if (pred_masks.size() != gt_masks.size()) {
      throw Error(ErrorCode::kShapeMismatch, "frame count differs: " + std::to_string(pred_masks.size()) + " vs " +
                                                 std::to_string(gt_masks.size()));
    }
    for (size_t i = 0; i < pred_masks.size(); ++i) {
      if (pred_masks[i].size() != gt_masks[i].size()) {
        throw Error(ErrorCode::kShapeMismatch, "frame " + pred_mask_paths[i].filename().string() +
                                                   ": mask sizes differ");
      }
      jac.push_back(jaccard(pred_masks[i], gt_masks[i]));
      if (wants("contour_f")) cf.push_back(contour_f(pred_masks[i], gt_masks[i], args.tolerance));
    }
  }
  if (need_boxes) {
    const auto pred_boxes = boxes_of(args.predictions, pred_masks, "boxes.txt");
    const auto gt_boxes = boxes_of(args.ground_truth, gt_masks, "groundtruth.txt");
    if (pred_boxes.empty() || pred_boxes.size() != gt_boxes.size()) {
      throw Error(ErrorCode::kShapeMismatch, "box count differs: " + std::to_string(pred_boxes.size()) + " vs " +
                                                 std::to_string(gt_boxes.size()));
    }
    for (size_t i = 0; i < pred_boxes.size(); ++i) ious.push_back(box_iou(pred_boxes[i], gt_boxes[i]));
  }
  const std::vector<double>& overlaps = args.overlap == "mask" ? jac : ious;

  json report = json::object();
  std::string table = "metric value\n";
  auto put = [&](const std::string& name, double v) {
    report[name] = v;
    table += name + " " + json(v).dump() + "\n";
  };
  if (wants("jaccard")) put("jaccard", mean(jac));
  if (wants("contour_f")) put("contour_f", mean(cf));
  if (wants("iou")) put("iou", mean(ious));
  if (wants("auc")) put("auc", success_auc(overlaps));
  if (wants("ar")) {
    const auto ar = accuracy_robustness(overlaps);
    put("accuracy", ar.accuracy);
    put("robustness", ar.robustness);
    report["failures"] = ar.failures;
  }
  report["overlap"] = args.overlap;
  report["mask_threshold"] = threshold;
  report["contour_tolerance"] = args.tolerance;

  fs::create_directories(out_dir);
  write_text(out_dir / "metrics.json", report.dump(2) + "\n");
  write_text(out_dir / "metrics.txt", table);
  std::ofstream per_frame(out_dir / "metrics_per_frame.jsonl", std::ios::binary);
  const size_t n = std::max({jac.size(), cf.size(), ious.size()});
  for (size_t i = 0; i < n; ++i) {
    json rec = {{"frame", i}};
    if (i < jac.size()) rec["jaccard"] = jac[i];
    if (i < cf.size()) rec["contour_f"] = cf[i];
    if (i < ious.size()) rec["iou"] = ious[i];
    per_frame << rec.dump() << '\n';
  }
  std::cout << table;
}

void run_train(const TrainArgs& args) {
  const RunConfig config = resolve_config(args.config);
  fs::create_directories(args.output);
  const auto corpus = training_corpus(config.train_sequences, config.train_sequence_length, config.seed);
  NetworkBundle nets(config.network, config.seed);

  auto stage = [&](const char* name, auto&& fn) {
    TrainOptions options;
    options.checkpoint_path = args.output / (std::string(name) + ".ckpt");
    if (args.resume) options.resume_from = options.checkpoint_path;
    const fs::path history_path = args.output / ("loss_" + std::string(name) + ".jsonl");
    std::vector<LossRecord> prior;
    if (args.resume && fs::exists(history_path)) prior = read_loss_history(history_path);
    auto history = fn(options);
    const int first = history.empty() ? std::numeric_limits<int>::max() : history.front().iteration;
    std::vector<LossRecord> merged;
    for (const auto& r : prior) {
      if (r.iteration < first) merged.push_back(r);
    }
    merged.insert(merged.end(), history.begin(), history.end());
    write_loss_history(history_path, merged);
  };
  stage("segmentation",
        [&](const TrainOptions& o) { return train_segmentation(nets, corpus, config.training, o); });
  stage("sem", [&](const TrainOptions& o) { return train_sem(nets, corpus, config.training, o); });
  save_checkpoint(args.output / "model.pt", nets);

  json summary = {{"command", "train"},
                  {"seed", config.seed},
                  {"checkpoint", "model.pt"},
                  {"config", json::parse(to_json(config))}};
  write_text(args.output / "summary.json", summary.dump(2) + "\n");
}

void run_render(const RenderArgs& args) {
  const SequenceOnDisk sequence = read_sequence(args.sequence);
  const auto mask_paths = list_images(args.results / "masks");
  const auto visible = read_box_file(args.results / "boxes.txt");
  std::vector<BoundingBox> inherent;
  if (fs::exists(args.results / "inherent_boxes.txt")) inherent = read_box_file(args.results / "inherent_boxes.txt");
  const auto n = static_cast<size_t>(sequence.size());
  if (mask_paths.size() != n || visible.size() != n || (!inherent.empty() && inherent.size() != n)) {
    throw Error(ErrorCode::kShapeMismatch, "results do not cover every frame of the sequence");
  }
  fs::create_directories(args.output);
  const cv::Vec3b mask_color(0, 0, 255);
  for (size_t i = 0; i < n; ++i) {
    cv::Mat3b img = sequence.frames[i].clone();
    const cv::Mat1b mask = read_mask(mask_paths[i]);
    if (mask.size() != img.size()) {
      throw Error(ErrorCode::kShapeMismatch, "frame " + mask_paths[i].filename().string() + ": mask size differs");
    }
    for (int r = 0; r < img.rows; ++r) {
      for (int c = 0; c < img.cols; ++c) {
        if (!mask(r, c)) continue;
        cv::Vec3b& px = img(r, c);
        for (int ch = 0; ch < 3; ++ch) px[ch] = static_cast<uchar>((px[ch] + mask_color[ch] + 1) / 2);
      }
    }
    if (visible[i].valid()) cv::rectangle(img, pixel_rect(visible[i]), cv::Scalar(0, 255, 0), 1, cv::LINE_8);
    if (!inherent.empty() && inherent[i].valid()) draw_dashed_rect(img, pixel_rect(inherent[i]), cv::Scalar(255, 128, 0));
    write_png(args.output / frame_name(static_cast<int>(i)), img);
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Single-shot segmentation tracker"};
  app.require_subcommand(1);

  TrackArgs track;
  auto* track_cmd = app.add_subcommand("track", "Track a sequence from its first-frame target");
  track_cmd->add_option("config", track.config, "JSON run config")->required();
  track_cmd->add_option("sequence", track.sequence, "Sequence directory")->required();
  track_cmd->add_option("output", track.output, "Output directory")->required();
  track_cmd->add_option("--ablate", track.ablate, "Comma-separated ablation flags");
  track_cmd->add_option("--checkpoint", track.checkpoint, "Weights, overriding the config entry");

  EvalArgs eval;
  std::string metrics = "jaccard,contour_f,iou,auc,ar";
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("predictions", eval.predictions, "Directory written by track")->required();
  eval_cmd->add_option("ground_truth", eval.ground_truth, "Sequence directory with ground truth")->required();
  eval_cmd->add_option("--metrics", metrics, "Comma-separated subset of jaccard,contour_f,iou,auc,ar");
  eval_cmd->add_option("--overlap", eval.overlap, "Overlap used by auc and ar: box or mask");
  eval_cmd->add_option("--tolerance", eval.tolerance, "Contour tolerance in pixels");
  eval_cmd->add_option("--out", eval.output, "Report directory (defaults to predictions)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the networks on the synthetic corpus");
  train_cmd->add_option("config", train.config, "JSON run config")->required();
  train_cmd->add_option("output", train.output, "Output directory")->required();
  train_cmd->add_flag("--resume", train.resume, "Continue from checkpoints in the output directory");

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Draw masks and boxes over the frames");
  render_cmd->add_option("sequence", render.sequence, "Sequence directory")->required();
  render_cmd->add_option("results", render.results, "Directory written by track")->required();
  render_cmd->add_option("output", render.output, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: Usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (track_cmd->parsed()) {
      run_track(track);
    } else if (eval_cmd->parsed()) {
      eval.metrics.clear();
      std::stringstream ss(metrics);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) eval.metrics.push_back(item);
      }
      run_eval(eval);
    } else if (train_cmd->parsed()) {
      run_train(train);
    } else if (render_cmd->parsed()) {
      run_render(render);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace segtrack::cli
