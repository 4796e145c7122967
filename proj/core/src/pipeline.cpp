#include "segtrack/pipeline.hpp"

#include <sstream>

#include "segtrack/error.hpp"

namespace segtrack {

namespace {

void append(std::vector<torch::Tensor>& out, const std::vector<torch::Tensor>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

AblationFlags AblationFlags::from_names(const std::vector<std::string>& names) {
  AblationFlags flags;
  for (const auto& name : names) {
    if (name == "no_gim") flags.no_gim = true;
    else if (name == "no_gem") flags.no_gem = true;
    else if (name == "no_sem") flags.no_sem = true;
    else if (name == "no_attention") flags.no_attention = true;
    else if (name == "no_mask") flags.no_mask = true;
    else if (name == "no_mam") flags.no_mam = true;
    else if (!name.empty()) throw Error(ErrorCode::kInvalidConfig, "unknown ablation flag '" + name + "'");
  }
  return flags;
}

AblationFlags AblationFlags::parse(const std::string& list) {
  std::vector<std::string> names;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) names.push_back(item);
  return from_names(names);
}

std::vector<std::string> AblationFlags::names() const {
  std::vector<std::string> out;
  if (no_gim) out.emplace_back("no_gim");
  if (no_gem) out.emplace_back("no_gem");
  if (no_sem) out.emplace_back("no_sem");
  if (no_attention) out.emplace_back("no_attention");
  if (no_mask) out.emplace_back("no_mask");
  if (no_mam) out.emplace_back("no_mam");
  return out;
}

NetworkBundle::NetworkBundle(const NetworkConfig& config, uint64_t seed) : config_(config) {
  if (config.patch_size <= 0 || config.patch_size % 16 != 0) {
    throw Error(ErrorCode::kBadResolution, "patch size must be a positive multiple of 16");
  }
  torch::manual_seed(seed);
  encoder = Encoder(config.encoder);
  gim = GimNet(config.encoder.widths[2], config.gim);
  refine = RefineNet(config.encoder, config.refine);
  sem = SemNet(config.encoder.widths[2], config.patch_size, config.sem);
}

std::vector<torch::Tensor> NetworkBundle::segmentation_parameters() const {
  std::vector<torch::Tensor> out;
  append(out, encoder->parameters());
  append(out, gim->parameters());
  append(out, refine->parameters());
  return out;
}

std::vector<torch::Tensor> NetworkBundle::sem_parameters() const { return sem->parameters(); }

void NetworkBundle::train(bool on) {
  encoder->train(on);
  gim->train(on);
  refine->train(on);
  sem->train(on);
}

std::vector<std::pair<std::string, torch::Tensor>> NetworkBundle::named_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto add = [&](const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& item : m.named_parameters()) out.emplace_back(prefix + "." + item.key(), item.value());
  };
  add("encoder", *encoder);
  add("gim", *gim);
  add("refine", *refine);
  add("sem", *sem);
  return out;
}

torch::Tensor centered_location_channel(int64_t rows, int64_t cols) {
  return location_tensor(
      euclidean_location_channel({static_cast<int>(rows / 2), static_cast<int>(cols / 2)}, rows, cols));
}

torch::Tensor location_tensor(const LocationChannel& channel) {
  cv::Mat1f values = channel.values.clone();
  return torch::from_blob(values.data, {1, 1, values.rows, values.cols}, torch::kFloat32).clone();
}

ForwardOutput forward_with_peak(NetworkBundle& bundle, const FeaturePyramid& pyramid,
                                const GimModel& gim_model, GridPoint peak, const AblationFlags& flags) {
  const auto& deepest = pyramid.stride16;
  const int64_t rows = deepest.size(2);
  const int64_t cols = deepest.size(3);
  ForwardOutput out;
  out.pyramid = pyramid;
  out.peak = peak;
  out.location = flags.no_gem ? centered_location_channel(rows, cols)
                              : location_tensor(euclidean_location_channel(peak, rows, cols));
  if (flags.no_gim) {
    out.foreground = torch::full({1, 1, rows, cols}, 0.5);
    out.posterior = torch::full({1, 2, rows, cols}, 0.5);
  } else {
    auto triplet = bundle.gim->match(bundle.gim->reduce(deepest), gim_model);
    out.foreground = triplet.foreground;
    out.posterior = triplet.posterior;
  }
  ++bundle.refine_calls;
  auto probs = bundle.refine->segment(out.location, out.foreground, out.posterior.narrow(1, 0, 1), pyramid,
                                      !flags.no_attention);
  out.mask = probs.narrow(1, 0, 1);
  return out;
}

ForwardOutput forward(NetworkBundle& bundle, const torch::Tensor& patch, const GimModel& gim_model,
                      const DcfFilter* dcf, const AblationFlags& flags) {
  ++bundle.encode_calls;
  FeaturePyramid pyramid = bundle.encoder->forward(patch);
  const auto& deepest = pyramid.stride16;
  GridPoint peak{static_cast<int>(deepest.size(2) / 2), static_cast<int>(deepest.size(3) / 2)};
  torch::Tensor response;
  if (!flags.no_gem) {
    if (dcf == nullptr) throw Error(ErrorCode::kChannelMismatch, "GEM enabled but no filter supplied");
    ResponseMap map = dcf->correlate(deepest);
    response = map.values;
    peak = map.peak;
  }
  ForwardOutput out = forward_with_peak(bundle, pyramid, gim_model, peak, flags);
  out.response = response;
  return out;
}

}  // namespace segtrack
