#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exitnet/model.hpp"
#include "exitnet/optim.hpp"
#include "exitnet/training.hpp"

namespace exitnet {

// Container layout:
//   8 bytes   magic "EXNCKPT\0"
//   8 bytes   header length L, little-endian uint64
//   L bytes   UTF-8 JSON header {format, version, config, arrays:[{name, shape}], extras}
//   payload   every array's values as little-endian IEEE-754 doubles, in header order
inline constexpr int kCheckpointVersion = 1;

struct CheckpointExtras {
  std::optional<AdamWState> optimizer;
  std::map<std::string, std::string> rng_states;
  std::uint64_t step = 0;
  // Free-form metadata; extra named arrays are stored bit-exactly in the payload.
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> arrays;
};

struct LoadedCheckpoint {
  MultiExitModel model;
  CheckpointExtras extras;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path, const MultiExitModel& model, const CheckpointExtras& extras = {});
// Throws CheckpointError on a bad magic, version mismatch or truncation; no
// partially built model is ever returned.
LoadedCheckpoint load_checkpoint(const std::string& path);

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

// Trainer snapshot <-> checkpoint extras.
CheckpointExtras extras_from_trainer(const TrainerState& state);
TrainerState trainer_state_from_extras(const CheckpointExtras& extras);

}  // namespace exitnet
