#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "policygnn/dataset.hpp"
#include "policygnn/nn/model.hpp"

namespace policygnn {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// A trained model plus everything needed to feed it: the scaler and the
/// feature layout version it was trained against.
struct Checkpoint {
  nn::GnnModel model;
  Scaler scaler;
  std::string id;              // content hash of the weight blob
  nlohmann::json metadata;     // free-form (epochs, metrics, ...)
};

/// Writes `<dir>/manifest.json` and `<dir>/weights.bin`.
///
/// weights.bin: "GNNW", u32 version, u32 tensor count, then per tensor
/// {u32 name length, name bytes, u32 rows, u32 cols}, then every tensor's
/// values row-major as little-endian float32 in table order.
///
/// Returns the checkpoint id.
std::string save_checkpoint(const std::filesystem::path& dir, const nn::GnnModel& model, const Scaler& scaler,
                            const nlohmann::json& metadata = nlohmann::json::object());

/// Loads and validates a checkpoint. Parameters come back rounded to float32.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Rounds every parameter to float32, as a save/load cycle would.
void round_to_float(nn::GnnModel& model);

}  // namespace policygnn
