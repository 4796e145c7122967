#include "segtrack/checkpoint.hpp"

#include "segtrack/error.hpp"

namespace segtrack {

void save_checkpoint(const std::filesystem::path& path, const NetworkBundle& nets,
                     const torch::optim::Optimizer* optimizer, const TrainingProgress* progress) {
  torch::serialize::OutputArchive archive;
  torch::serialize::OutputArchive weights;
  for (const auto& [name, tensor] : nets.named_parameters()) weights.write(name, tensor.detach());
  archive.write("weights", weights);
  if (optimizer != nullptr) {
    torch::serialize::OutputArchive state;
    optimizer->save(state);
    archive.write("optimizer", state);
  }
  if (progress != nullptr) {
    archive.write("stage", c10::IValue(progress->stage));
    archive.write("iteration", c10::IValue(static_cast<int64_t>(progress->iteration)));
    archive.write("rng", c10::IValue(progress->rng_state));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  }
}

std::optional<TrainingProgress> load_checkpoint(const std::filesystem::path& path, NetworkBundle& nets,
                                                torch::optim::Optimizer* optimizer) {
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error&) {
    throw Error(ErrorCode::kIo, "cannot read checkpoint " + path.string());
  }
  torch::serialize::InputArchive weights;
  if (!archive.try_read("weights", weights)) throw Error(ErrorCode::kIo, "checkpoint has no weights");
  torch::NoGradGuard no_grad;
  for (auto& [name, param] : nets.named_parameters()) {
    torch::Tensor stored;
    if (!weights.try_read(name, stored)) throw Error(ErrorCode::kShapeMismatch, "checkpoint lacks " + name);
    if (stored.sizes() != param.sizes()) throw Error(ErrorCode::kShapeMismatch, "checkpoint shape differs for " + name);
    param.copy_(stored);
  }
  if (optimizer != nullptr) {
    torch::serialize::InputArchive state;
    if (archive.try_read("optimizer", state)) optimizer->load(state);
  }
  c10::IValue stage, iteration, rng;
  if (!archive.try_read("stage", stage) || !archive.try_read("iteration", iteration) || !archive.try_read("rng", rng)) {
    return std::nullopt;
  }
  return TrainingProgress{stage.toStringRef(), static_cast<int>(iteration.toInt()), rng.toStringRef()};
}

}  // namespace segtrack
