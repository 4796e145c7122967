#include "segtrack/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segtrack/error.hpp"

namespace segtrack {

namespace {

using nlohmann::json;

// Reads known keys of one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw Error(ErrorCode::kInvalidConfig, "config key '" + label() + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& value) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      value = it->get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::kInvalidConfig, "config key '" + child(key) + "' has the wrong type");
    }
  }

  Section section(const char* key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return Section(it == node_.end() ? empty() : *it, child(key));
  }

  bool has(const char* key) const { return node_.contains(key); }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + child(item.key()) + "'");
    }
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

json network_json(const NetworkConfig& n) {
  return {{"patch_size", n.patch_size},
          {"encoder", {{"widths", n.encoder.widths}, {"stem_width", n.encoder.stem_width}}},
          {"gim",
           {{"feature_channels", n.gim.feature_channels},
            {"top_n", n.gim.top_n},
            {"decoder_hidden", n.gim.decoder_hidden},
            {"neighborhood_factor", n.gim.neighborhood_factor}}},
          {"refine",
           {{"fused_channels", n.refine.fused_channels},
            {"stage_channels", n.refine.stage_channels},
            {"attention_bias_init", n.refine.attention_bias_init}}},
          {"sem",
           {{"reduced_channels", n.sem.reduced_channels},
            {"head_channels", n.sem.head_channels},
            {"mask_channels", n.sem.mask_channels},
            {"positive_radius_cells", n.sem.positive_radius_cells}}}};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");
  top.read("seed", c.seed);
  top.read("train_sequences", c.train_sequences);
  top.read("train_sequence_length", c.train_sequence_length);
  top.read("checkpoint", c.checkpoint);
  top.read("threads", c.threads);
  std::vector<std::string> ablate;
  top.read("ablate", ablate);
  c.ablation = AblationFlags::from_names(ablate);

  {
    auto n = top.section("network");
    n.read("patch_size", c.network.patch_size);
    auto enc = n.section("encoder");
    enc.read("widths", c.network.encoder.widths);
    enc.read("stem_width", c.network.encoder.stem_width);
    enc.finish();
    auto gim = n.section("gim");
    gim.read("feature_channels", c.network.gim.feature_channels);
    gim.read("top_n", c.network.gim.top_n);
    gim.read("decoder_hidden", c.network.gim.decoder_hidden);
    gim.read("neighborhood_factor", c.network.gim.neighborhood_factor);
    gim.finish();
    auto refine = n.section("refine");
    refine.read("fused_channels", c.network.refine.fused_channels);
    refine.read("stage_channels", c.network.refine.stage_channels);
    refine.read("attention_bias_init", c.network.refine.attention_bias_init);
    refine.finish();
    auto sem = n.section("sem");
    sem.read("reduced_channels", c.network.sem.reduced_channels);
    sem.read("head_channels", c.network.sem.head_channels);
    sem.read("mask_channels", c.network.sem.mask_channels);
    sem.read("positive_radius_cells", c.network.sem.positive_radius_cells);
    sem.finish();
    n.finish();
  }
  {
    auto t = top.section("tracker");
    t.read("search_factor", c.tracker.search_factor);
    t.read("min_search_side", c.tracker.min_search_side);
    t.read("mask_threshold", c.tracker.mask_threshold);
    t.read("sem_min_confidence", c.tracker.sem_min_confidence);
    t.read("sem_min_ratio", c.tracker.sem_min_ratio);
    t.read("sem_max_ratio", c.tracker.sem_max_ratio);
    t.read("proxy_iterations", c.tracker.proxy_iterations);
    t.finish();
  }
  {
    auto g = top.section("gem");
    g.read("channels", c.tracker.gem.channels);
    g.read("kernel_size", c.tracker.gem.kernel_size);
    g.read("sigma_factor", c.tracker.gem.sigma_factor);
    g.read("weight_decay", c.tracker.gem.weight_decay);
    g.read("init_steps", c.tracker.gem.init_steps);
    g.read("update_steps", c.tracker.gem.update_steps);
    g.read("initial_step_size", c.tracker.gem.initial_step_size);
    g.finish();
  }
  {
    auto t = top.section("training");
    auto& tc = c.training;
    t.read("batch_size", tc.batch_size);
    t.read("segmentation_iterations", tc.segmentation_iterations);
    t.read("sem_iterations", tc.sem_iterations);
    t.read("learning_rate", tc.learning_rate);
    t.read("decay_factor", tc.decay_factor);
    t.read("decay_interval_epochs", tc.decay_interval_epochs);
    t.read("iterations_per_epoch", tc.iterations_per_epoch);
    t.read("max_gap", tc.max_gap);
    t.read("perturbation_fraction", tc.perturbation_fraction);
    t.read("static_fraction", tc.static_fraction);
    t.read("center_jitter", tc.center_jitter);
    t.read("scale_jitter", tc.scale_jitter);
    t.read("search_factor", tc.search_factor);
    t.read("checkpoint_interval", tc.checkpoint_interval);
    t.finish();
  }
  top.finish();

  c.training.seed = c.seed;
  c.tracker.gem.seed = c.seed;
  c.training.validate();
  if (c.network.patch_size <= 0 || c.network.patch_size % 16 != 0) {
    throw Error(ErrorCode::kInvalidConfig, "config key 'network.patch_size' must be a positive multiple of 16");
  }
  if (c.threads < 1) throw Error(ErrorCode::kInvalidConfig, "config key 'threads' must be >= 1");
  if (c.train_sequences < 1) throw Error(ErrorCode::kInvalidConfig, "config key 'train_sequences' must be >= 1");
  if (c.train_sequence_length < 2) {
    throw Error(ErrorCode::kInvalidConfig, "config key 'train_sequence_length' must be >= 2");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void apply_environment(RunConfig& config) {
  const char* env = std::getenv("SEGTRACK_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long seed = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw Error(ErrorCode::kInvalidConfig, "SEGTRACK_SEED is not an unsigned integer");
  config.seed = seed;
  config.training.seed = seed;
  config.tracker.gem.seed = seed;
}

std::string to_json(const RunConfig& c, int indent) {
  const auto& tc = c.training;
  const auto& g = c.tracker.gem;
  json j = {
      {"seed", c.seed},
      {"train_sequences", c.train_sequences},
      {"train_sequence_length", c.train_sequence_length},
      {"checkpoint", c.checkpoint},
      {"threads", c.threads},
      {"ablate", c.ablation.names()},
      {"network", network_json(c.network)},
      {"tracker",
       {{"search_factor", c.tracker.search_factor},
        {"min_search_side", c.tracker.min_search_side},
        {"mask_threshold", c.tracker.mask_threshold},
        {"sem_min_confidence", c.tracker.sem_min_confidence},
        {"sem_min_ratio", c.tracker.sem_min_ratio},
        {"sem_max_ratio", c.tracker.sem_max_ratio},
        {"proxy_iterations", c.tracker.proxy_iterations}}},
      {"gem",
       {{"channels", g.channels},
        {"kernel_size", g.kernel_size},
        {"sigma_factor", g.sigma_factor},
        {"weight_decay", g.weight_decay},
        {"init_steps", g.init_steps},
        {"update_steps", g.update_steps},
        {"initial_step_size", g.initial_step_size}}},
      {"training",
       {{"batch_size", tc.batch_size},
        {"segmentation_iterations", tc.segmentation_iterations},
        {"sem_iterations", tc.sem_iterations},
        {"learning_rate", tc.learning_rate},
        {"decay_factor", tc.decay_factor},
        {"decay_interval_epochs", tc.decay_interval_epochs},
        {"iterations_per_epoch", tc.iterations_per_epoch},
        {"max_gap", tc.max_gap},
        {"perturbation_fraction", tc.perturbation_fraction},
        {"static_fraction", tc.static_fraction},
        {"center_jitter", tc.center_jitter},
        {"scale_jitter", tc.scale_jitter},
        {"search_factor", tc.search_factor},
        {"checkpoint_interval", tc.checkpoint_interval}}}};
  return j.dump(indent);
}

}  // namespace segtrack
