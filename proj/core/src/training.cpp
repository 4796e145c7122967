#include "segtrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segtrack/backbone.hpp"
#include "segtrack/checkpoint.hpp"
#include "segtrack/error.hpp"
#include "segtrack/gim.hpp"
#include "segtrack/sem.hpp"

namespace segtrack {

namespace {

constexpr int kStride = 16;

double uniform(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

torch::Tensor patches_to_tensor(const std::vector<const cv::Mat3b*>& patches) {
  std::vector<torch::Tensor> items;
  items.reserve(patches.size());
  for (const auto* p : patches) items.push_back(image_to_tensor(*p));
  return torch::cat(items, 0);
}

torch::Tensor masks_to_tensor(const std::vector<const cv::Mat1f*>& masks) {
  std::vector<torch::Tensor> items;
  for (const auto* m : masks) {
    cv::Mat1f copy = m->clone();
    items.push_back(torch::from_blob(copy.data, {1, 1, copy.rows, copy.cols}, torch::kFloat32).clone());
  }
  return torch::cat(items, 0);
}

FeaturePyramid slice(const FeaturePyramid& p, int64_t start, int64_t length) {
  return {p.stride4.narrow(0, start, length), p.stride8.narrow(0, start, length),
          p.stride16.narrow(0, start, length), p.source_resolution};
}

GridPoint location_cell(cv::Point2d patch_point, int rows, int cols) {
  return {std::clamp(static_cast<int>(std::floor(patch_point.y / kStride)), 0, rows - 1),
          std::clamp(static_cast<int>(std::floor(patch_point.x / kStride)), 0, cols - 1)};
}

// Everything the losses need from one encode of reference and train patches.
struct EncodedBatch {
  FeaturePyramid reference;
  FeaturePyramid train;
  std::vector<cv::Mat1b> reference_cells;
};

EncodedBatch encode_batch(NetworkBundle& nets, const std::vector<TrainingSample>& batch) {
  std::vector<const cv::Mat3b*> patches;
  for (const auto& s : batch) patches.push_back(&s.reference_patch);
  for (const auto& s : batch) patches.push_back(&s.train_patch);
  const auto n = static_cast<int64_t>(batch.size());
  FeaturePyramid all = nets.encoder->forward(patches_to_tensor(patches));
  EncodedBatch out{slice(all, 0, n), slice(all, n, n), {}};
  const int rows = static_cast<int>(all.stride16.size(2));
  const int cols = static_cast<int>(all.stride16.size(3));
  for (const auto& s : batch) out.reference_cells.push_back(mask_to_cells(s.reference_mask, rows, cols));
  return out;
}

// Foreground logits/probabilities of the segmentation path for a batch.
torch::Tensor segmentation_logits(NetworkBundle& nets, const std::vector<TrainingSample>& batch,
                                  const EncodedBatch& enc) {
  const int rows = static_cast<int>(enc.train.stride16.size(2));
  const int cols = static_cast<int>(enc.train.stride16.size(3));
  auto ref_reduced = nets.gim->reduce(enc.reference.stride16);
  auto train_reduced = nets.gim->reduce(enc.train.stride16);
  std::vector<torch::Tensor> loc, fg, post;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto i = static_cast<int64_t>(b);
    GimModel model = build_gim_model(ref_reduced[i], enc.reference_cells[b], nets.gim->config().neighborhood_factor);
    auto triplet = nets.gim->match(train_reduced.narrow(0, i, 1), model);
    fg.push_back(triplet.foreground);
    post.push_back(triplet.posterior.narrow(1, 0, 1));
    loc.push_back(location_tensor(euclidean_location_channel(location_cell(batch[b].location, rows, cols), rows, cols)));
  }
  return nets.refine->logits(torch::cat(loc, 0), torch::cat(fg, 0), torch::cat(post, 0), enc.train);
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore(const std::vector<torch::Tensor>& params, const std::vector<torch::Tensor>& snapshot) {
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < params.size(); ++i) params[i].copy_(snapshot[i]);
}

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

const char* stage_name(TrainStage stage) { return stage == TrainStage::kSegmentation ? "segmentation" : "sem"; }

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw Error(ErrorCode::kInvalidConfig, std::string("invalid training value '") + field + "'");
  };
  require(batch_size > 0, "batch_size");
  require(segmentation_iterations >= 0, "segmentation_iterations");
  require(sem_iterations >= 0, "sem_iterations");
  require(learning_rate > 0.0, "learning_rate");
  require(decay_factor > 0.0, "decay_factor");
  require(decay_interval_epochs > 0, "decay_interval_epochs");
  require(iterations_per_epoch > 0, "iterations_per_epoch");
  require(max_gap > 0, "max_gap");
  require(perturbation_fraction >= 0.0 && perturbation_fraction < 0.5, "perturbation_fraction");
  require(static_fraction >= 0.0 && static_fraction <= 1.0, "static_fraction");
  require(center_jitter >= 0.0, "center_jitter");
  require(scale_jitter >= 0.0, "scale_jitter");
  require(search_factor > 0.0, "search_factor");
  require(checkpoint_interval > 0, "checkpoint_interval");
}

std::pair<int, int> sample_pair(int length, int max_gap, Rng& rng) {
  if (length < 2 || max_gap < 1) throw Error(ErrorCode::kInvalidConfig, "pair sampling needs two frames and gap >= 1");
  std::uniform_int_distribution<int> frame(0, length - 1);
  for (;;) {
    const int i = frame(rng);
    const int j = frame(rng);
    if (i != j && std::abs(i - j) <= max_gap) return {i, j};
  }
}

cv::Point2d perturb_location(cv::Point2d center, double sigma, double fraction, Rng& rng) {
  const double r = fraction * sigma;
  return {center.x + uniform(rng, -r, r), center.y + uniform(rng, -r, r)};
}

TrainingSample make_sample(const std::vector<SyntheticSequence>& data, const TrainConfig& config, int patch_size,
                           Rng& rng) {
  if (data.empty()) throw Error(ErrorCode::kInvalidConfig, "training data is empty");
  const auto& seq = data[std::uniform_int_distribution<size_t>(0, data.size() - 1)(rng)];
  int ref = 0, train = 0;
  if (seq.size() < 2 || uniform(rng, 0.0, 1.0) < config.static_fraction) {
    ref = train = std::uniform_int_distribution<int>(0, seq.size() - 1)(rng);
  } else {
    std::tie(ref, train) = sample_pair(seq.size(), config.max_gap, rng);
  }

  TrainingSample s;
  const BoundingBox ref_box = seq.visible_boxes[ref];
  const double ref_side = config.search_factor * std::max(seq.inherent_boxes[ref].w, seq.inherent_boxes[ref].h);
  Region ref_region = extract_region(seq.frames[ref], ref_box.center(), ref_side, patch_size);
  s.reference_patch = ref_region.patch;
  s.reference_mask = mask_to_patch(seq.masks[ref], ref_region.mapping, patch_size);

  const BoundingBox& visible = seq.visible_boxes[train];
  const BoundingBox& inherent = seq.inherent_boxes[train];
  const double size = std::max(inherent.w, inherent.h);
  const cv::Point2d shift(uniform(rng, -config.center_jitter, config.center_jitter) * size,
                          uniform(rng, -config.center_jitter, config.center_jitter) * size);
  const double side = config.search_factor * size * std::exp(uniform(rng, -config.scale_jitter, config.scale_jitter));
  Region region = extract_region(seq.frames[train], visible.center() + shift, side, patch_size);
  s.train_patch = region.patch;
  s.train_mask = mask_to_patch(seq.masks[train], region.mapping, patch_size);
  s.train_inherent = region.mapping.to_patch(inherent);
  const BoundingBox visible_patch = region.mapping.to_patch(visible);
  s.location = perturb_location(visible_patch.center(), std::max(s.train_inherent.w, s.train_inherent.h),
                                config.perturbation_fraction, rng);
  return s;
}

SampleSource sequence_source(const std::vector<SyntheticSequence>& data, const TrainConfig& config, int patch_size) {
  return [&data, config, patch_size](Rng& rng) {
    std::vector<TrainingSample> batch;
    batch.reserve(config.batch_size);
    for (int i = 0; i < config.batch_size; ++i) batch.push_back(make_sample(data, config, patch_size, rng));
    return batch;
  };
}

torch::Tensor segmentation_loss(NetworkBundle& nets, const std::vector<TrainingSample>& batch) {
  EncodedBatch enc = encode_batch(nets, batch);
  auto logits = segmentation_logits(nets, batch, enc);
  std::vector<const cv::Mat1f*> masks;
  for (const auto& s : batch) masks.push_back(&s.train_mask);
  // Class 0 is the foreground.
  auto label = (masks_to_tensor(masks).squeeze(1) < 0.5).to(torch::kLong);
  return torch::nn::functional::cross_entropy(logits, label);
}

torch::Tensor sem_loss(NetworkBundle& nets, const std::vector<TrainingSample>& batch) {
  EncodedBatch enc;
  torch::Tensor mask;
  {
    torch::NoGradGuard no_grad;
    enc = encode_batch(nets, batch);
    mask = torch::softmax(segmentation_logits(nets, batch, enc), 1).narrow(1, 0, 1);
  }
  const int64_t rows = enc.train.stride16.size(2);
  const int64_t cols = enc.train.stride16.size(3);
  auto mask_features = nets.sem->adjust_mask(mask);
  std::vector<torch::Tensor> templates, cls_label, region_target, inside;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto i = static_cast<int64_t>(b);
    templates.push_back(
        nets.sem->template_vector(crop_to_cells(enc.reference.stride16.narrow(0, i, 1), enc.reference_cells[b])));
    SemTargets t = make_sem_targets(rows, cols, kStride, batch[b].train_inherent, nets.sem->config().positive_radius_cells);
    cls_label.push_back(t.cls_label.unsqueeze(0));
    region_target.push_back(t.region.unsqueeze(0));
    inside.push_back(t.inside.unsqueeze(0).unsqueeze(0));
  }
  SemOutput out = nets.sem->predict_pooled(torch::cat(templates, 0), enc.train.stride16, mask_features);
  auto cls_loss = torch::nn::functional::cross_entropy(out.cls, torch::cat(cls_label, 0));
  auto reg_loss = region_l1_loss(out.region, torch::cat(region_target, 0), torch::cat(inside, 0),
                                 static_cast<double>(nets.sem->patch_size()));
  return cls_loss + reg_loss;
}

double scheduled_lr(const TrainConfig& config, int iteration) {
  const int epoch = iteration / config.iterations_per_epoch;
  return config.learning_rate * std::pow(config.decay_factor, epoch / config.decay_interval_epochs);
}

std::vector<LossRecord> train_stage(NetworkBundle& nets, TrainStage stage, const SampleSource& source, int iterations,
                                    const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  const std::vector<torch::Tensor> params =
      stage == TrainStage::kSegmentation ? nets.segmentation_parameters() : nets.sem_parameters();
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(config.learning_rate));
  Rng rng(config.seed * 0x9E3779B97F4A7C15ULL + (stage == TrainStage::kSegmentation ? 1 : 2));

  int start = 0;
  if (!options.resume_from.empty() && std::filesystem::exists(options.resume_from)) {
    auto progress = load_checkpoint(options.resume_from, nets, &optimizer);
    if (progress && progress->stage == stage_name(stage)) {
      start = progress->iteration;
      std::istringstream is(progress->rng_state);
      is >> rng;
    }
  }

  auto persist = [&](int done) {
    if (options.checkpoint_path.empty()) return;
    TrainingProgress progress{stage_name(stage), done, rng_state(rng)};
    save_checkpoint(options.checkpoint_path, nets, &optimizer, &progress);
  };

  nets.train(stage == TrainStage::kSegmentation);
  if (stage == TrainStage::kSem) nets.sem->train(true);
  std::vector<torch::Tensor> good = snapshot(params);
  std::vector<LossRecord> history;
  for (int it = start; it < iterations; ++it) {
    const double lr = scheduled_lr(config, it);
    for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    const auto batch = source(rng);
    optimizer.zero_grad();
    auto loss = stage == TrainStage::kSegmentation ? segmentation_loss(nets, batch) : sem_loss(nets, batch);
    const double value = loss.item<double>();
    if (!std::isfinite(value)) {
      restore(params, good);
      nets.train(false);
      throw Error(ErrorCode::kNonFiniteLoss, std::string(stage_name(stage)) + " loss is not finite at iteration " +
                                                 std::to_string(it));
    }
    loss.backward();
    optimizer.step();
    LossRecord record{it, value, lr};
    history.push_back(record);
    if (options.on_iteration) options.on_iteration(record);
    if ((it + 1) % config.checkpoint_interval == 0) {
      good = snapshot(params);
      persist(it + 1);
    }
  }
  persist(iterations);
  nets.train(false);
  return history;
}

std::vector<LossRecord> train_segmentation(NetworkBundle& nets, const std::vector<SyntheticSequence>& data,
                                           const TrainConfig& config, const TrainOptions& options) {
  const int patch = static_cast<int>(nets.config().patch_size);
  return train_stage(nets, TrainStage::kSegmentation, sequence_source(data, config, patch),
                     config.segmentation_iterations, config, options);
}

std::vector<LossRecord> train_sem(NetworkBundle& nets, const std::vector<SyntheticSequence>& data,
                                  const TrainConfig& config, const TrainOptions& options) {
  const int patch = static_cast<int>(nets.config().patch_size);
  return train_stage(nets, TrainStage::kSem, sequence_source(data, config, patch), config.sem_iterations, config,
                     options);
}

void write_loss_history(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& r : history) {
    out << nlohmann::json{{"iteration", r.iteration}, {"loss", r.loss}, {"lr", r.lr}}.dump() << '\n';
  }
}

std::vector<LossRecord> read_loss_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<LossRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("iteration").get<int>(), j.at("loss").get<double>(), j.at("lr").get<double>()});
  }
  return out;
}

std::vector<SyntheticSequence> training_corpus(int count, int length, uint64_t seed) {
  std::vector<SyntheticSequence> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    SyntheticParams p;
    p.length = length;
    p.radius = uniform(rng, 13.0, 22.0);
    p.aspect = uniform(rng, 0.75, 1.4);
    p.motion_speed = uniform(rng, 0.8, 1.6);
    p.distractor = i % 2 == 1;
    p.occlusion = i % 4 >= 2;
    p.occlusion_start = length / 4;
    p.occlusion_length = length / 3;
    p.texture_seed = seed + static_cast<uint64_t>(i);
    out.push_back(generate_sequence(p, seed * 1000 + static_cast<uint64_t>(i)));
  }
  return out;
}

}  // namespace segtrack
