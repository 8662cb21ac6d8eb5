#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adnfm/features.hpp"
#include "adnfm/numerics.hpp"

namespace adnfm {

enum class Task { kCtr, kRegression };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

struct LoadStats {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
};

struct Dataset {
  std::vector<EncodedSample> samples;
  std::shared_ptr<const FeatureSchema> schema;
  Task task = Task::kCtr;
  LoadStats stats;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct LoadOptions {
  std::optional<std::size_t> max_rows;
  std::uint32_t min_count = 1;
  // Reuse an existing schema instead of building one from the file.
  std::shared_ptr<const FeatureSchema> schema;
  // Loading fails when more than this fraction of rows is malformed.
  double max_malformed_fraction = 0.1;
};

inline constexpr std::size_t kCriteoIntegerFields = 13;
inline constexpr std::size_t kCriteoCategoricalFields = 26;

std::vector<FieldDescriptor> criteo_descriptors();
std::vector<FieldDescriptor> movielens_descriptors();

// Tab-separated rows: label followed by one raw column per descriptor.
// Builds a schema on a first pass unless options.schema is set.
Dataset load_table(const std::filesystem::path& path, const std::vector<FieldDescriptor>& descriptors,
                   Task task, const LoadOptions& options);

// Criteo display-ads layout: label, 13 integer columns, 26 hashed categoricals.
Dataset load_criteo(const std::filesystem::path& path, const LoadOptions& options);

// GroupLens ratings.csv + movies.csv; fields userId, movieId, genres.
Dataset load_movielens(const std::filesystem::path& ratings_path, const std::filesystem::path& movies_path,
                       const LoadOptions& options);

// Tab-separated rows laid out per an existing schema (label + one column per field).
Dataset load_with_schema(const std::filesystem::path& path, std::shared_ptr<const FeatureSchema> schema,
                         Task task, std::optional<std::size_t> max_rows = std::nullopt);

// Splits one line on a delimiter without copying.
std::vector<std::string_view> split_line(std::string_view line, char delimiter);

struct SplitParts {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Seeded shuffle, then contiguous cuts at floor(r0 * n) and floor((r0 + r1) * n).
SplitParts split(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed);
// Exposes the permutation used by split() for identity checks.
std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed);

// Fixed-shape mini-batch. Every sample row holds slots_per_sample entries;
// field f occupies slots [field_begin[f], field_begin[f + 1]) of a row, sized
// to the widest occurrence of that field in the batch. Padding entries point
// at the field's OOV index with weight exactly 0.
struct Batch {
  std::size_t size = 0;
  std::vector<std::uint32_t> field_begin;
  std::vector<FeatureEntry> entries;
  std::vector<double> labels;

  std::size_t slots_per_sample() const { return field_begin.empty() ? 0 : field_begin.back(); }
  SampleView row(std::size_t b) const {
    const std::size_t s = slots_per_sample();
    return {std::span<const FeatureEntry>(entries).subspan(b * s, s), field_begin};
  }
};

Batch make_batch(const Dataset& ds, std::span<const std::size_t> sample_ids);

// Sample order for one pass: identity without a seed, a seeded permutation with one.
std::vector<std::size_t> batch_order(std::size_t n, std::optional<std::uint64_t> shuffle_seed);

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size,
                           std::optional<std::uint64_t> shuffle_seed = std::nullopt);

struct SynthOptions {
  std::size_t n = 50000;
  std::size_t fields = 6;
  std::uint32_t vocab = 100;
  std::size_t k_true = 4;
  std::uint64_t seed = 1;
};

// Hidden factors behind a synthetic dataset.
struct SynthGroundTruth {
  std::vector<Matrix> embeddings;  // per field: vocab x k_true
  double logit_mean = 0.0;         // subtracted from every raw pairwise logit

  double raw_logit(std::span<const std::uint32_t> values) const;
};

struct SynthData {
  Dataset dataset;
  SynthGroundTruth truth;
  std::vector<std::vector<std::uint32_t>> values;  // n x F value ids
  std::vector<double> true_logits;                 // centered
};

// Pure pairwise-interaction click data: no linear term, zero bias.
// Throws ConfigError when fields < 2 or any size is zero.
SynthData synth_interactions(const SynthOptions& options);

std::string synth_token(std::uint32_t value);

// Writes <dir>/synth.tsv (label + F columns) and <dir>/ground_truth.tsv.
void write_synth(const SynthData& data, const std::filesystem::path& dir);

}  // namespace adnfm
