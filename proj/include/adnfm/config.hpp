#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "adnfm/data.hpp"
#include "adnfm/train.hpp"
#include "json.hpp"

namespace adnfm {

// tsv: label + one categorical column per field (synthetic export layout).
// criteo: label + 13 integer + 26 categorical columns.
// movielens: GroupLens ratings.csv (path) and movies.csv (movies_path).
enum class DataFormat { kTsv, kCriteo, kMovielens };

std::string_view to_string(DataFormat format);
DataFormat data_format_from_string(std::string_view name);

inline constexpr std::size_t kCriteoDefaultMaxRows = 500000;

struct DataConfig {
  DataFormat format = DataFormat::kTsv;
  std::string path;
  std::string movies_path;
  std::optional<std::size_t> max_rows;  // criteo defaults to 500000
  std::uint32_t min_count = 1;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
  std::uint64_t split_seed = 1;
};

struct RunConfig {
  DataConfig data;
  Task task = Task::kCtr;
  TrainConfig train;
  std::string output_dir = "out";

  // Canonical document with every default filled in.
  nlohmann::json to_json() const;
  // FNV-1a 64 of the canonical document without output_dir, as 16 hex digits.
  std::string fingerprint() const;
};

// Missing keys take defaults; unknown keys and wrongly typed values throw
// ConfigError naming the offending key.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// Loads the dataset a config points at. The tsv format infers its field
// count from the first row.
Dataset load_dataset(const DataConfig& data, Task task);

}  // namespace adnfm
