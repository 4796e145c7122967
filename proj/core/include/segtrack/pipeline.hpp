#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "segtrack/backbone.hpp"
#include "segtrack/gem.hpp"
#include "segtrack/geometry.hpp"
#include "segtrack/gim.hpp"
#include "segtrack/refine.hpp"
#include "segtrack/sem.hpp"

namespace segtrack {

struct AblationFlags {
  bool no_gim = false;        // F and P replaced by constant 0.5 channels
  bool no_gem = false;        // L replaced by a centre-peaked distance channel
  bool no_sem = false;        // inherent box follows the visible box
  bool no_attention = false;  // plain skip summation in the refinement stages
  bool no_mask = false;       // SEM mask features replaced by zeros
  bool no_mam = false;        // SEM mask adjustment replaced by bilinear resampling

  // Comma-separated names as accepted by --ablate; throws on unknown names.
  static AblationFlags parse(const std::string& list);
  static AblationFlags from_names(const std::vector<std::string>& names);
  std::vector<std::string> names() const;
  bool any() const { return !names().empty(); }
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct NetworkConfig {
  EncoderConfig encoder;
  GimConfig gim;
  RefineConfig refine;
  SemConfig sem;
  int64_t patch_size = 128;
};

// All trainable networks of the tracker. GEM is not part of it: its filter is
// fitted online per sequence.
class NetworkBundle {
 public:
  explicit NetworkBundle(const NetworkConfig& config, uint64_t seed = 0);

  Encoder encoder{nullptr};
  GimNet gim{nullptr};
  RefineNet refine{nullptr};
  SemNet sem{nullptr};

  const NetworkConfig& config() const { return config_; }
  std::vector<torch::Tensor> segmentation_parameters() const;
  std::vector<torch::Tensor> sem_parameters() const;
  void train(bool on);
  // Named parameters of all networks, prefixed by network name.
  std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;

  mutable std::atomic<int64_t> encode_calls{0};
  mutable std::atomic<int64_t> refine_calls{0};

 private:
  NetworkConfig config_;
};

struct ForwardOutput {
  torch::Tensor mask;        // [1, 1, S, S] foreground probability
  torch::Tensor location;    // L: [1, 1, H, W]
  torch::Tensor foreground;  // F: [1, 1, H, W]
  torch::Tensor posterior;   // P: [1, 2, H, W]
  torch::Tensor response;    // GEM response [H, W]; undefined under no_gem
  GridPoint peak;            // peak used for L
  FeaturePyramid pyramid;
};

// Constant-prior channels used when a model is ablated.
torch::Tensor centered_location_channel(int64_t rows, int64_t cols);
torch::Tensor location_tensor(const LocationChannel& channel);

// One encode and one refine pass over a patch tensor [1, 3, S, S]. With no_gem
// set `dcf` may be null.
ForwardOutput forward(NetworkBundle& bundle, const torch::Tensor& patch, const GimModel& gim_model,
                      const DcfFilter* dcf, const AblationFlags& flags);

// Same pass with a precomputed pyramid and an explicit location peak (training
// and proxy-mask initialisation supply the peak instead of a DCF).
ForwardOutput forward_with_peak(NetworkBundle& bundle, const FeaturePyramid& pyramid,
                                const GimModel& gim_model, GridPoint peak, const AblationFlags& flags);

}  // namespace segtrack
