#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "adnfm/data.hpp"
#include "adnfm/features.hpp"
#include "adnfm/model.hpp"
#include "json.hpp"

namespace adnfm {

// Binary layout:
//   8 bytes   magic "ADNFM001"
//   8 bytes   metadata length N, big-endian
//   N bytes   UTF-8 JSON metadata (schema, hyperparameters, kind, task,
//             config fingerprint, metric summary, parameter group table)
//   rest      little-endian float64 values of every parameter group, in
//             ModelParams declaration order
inline constexpr std::string_view kCheckpointMagic = "ADNFM001";

struct Checkpoint {
  ModelParams params;
  std::shared_ptr<const FeatureSchema> schema;
  Task task = Task::kCtr;
  std::string config_fingerprint;
  nlohmann::json metrics = nlohmann::json::object();
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws DataError on bad magic, truncation, or trailing bytes, before any
// parameter value is decoded.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adnfm
