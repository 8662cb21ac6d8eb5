#include "adnfm/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "adnfm/errors.hpp"
#include "adnfm/rng.hpp"

namespace adnfm {

namespace {

// Distinct PCG streams so that split, batching and synthesis never share draws.
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kBatchStream = 0x6261746368ULL;
constexpr std::uint64_t kSynthStream = 0x73796e7468ULL;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<double> parse_label(std::string_view text, Task task) {
  const auto value = parse_double(text);
  if (!value) return std::nullopt;
  if (task == Task::kCtr && *value != 0.0 && *value != 1.0) return std::nullopt;
  return value;
}

void check_malformed(const LoadStats& stats, double max_fraction, const std::filesystem::path& path) {
  if (stats.rows_read > 0 &&
      static_cast<double>(stats.rows_skipped) > max_fraction * static_cast<double>(stats.rows_read)) {
    throw DataError("'" + path.string() + "': " + std::to_string(stats.rows_skipped) + " of " +
                    std::to_string(stats.rows_read) + " rows are malformed");
  }
}

std::vector<FieldDescriptor> descriptors_of(const FeatureSchema& schema) {
  std::vector<FieldDescriptor> out;
  for (const auto& spec : schema.fields()) out.push_back({spec.name, spec.kind});
  return out;
}

// Splits a CSV line honoring double-quoted fields with "" escapes.
std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back().push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Task task) { return task == Task::kCtr ? "ctr" : "regression"; }

Task task_from_string(std::string_view name) {
  if (name == "ctr") return Task::kCtr;
  if (name == "regression") return Task::kRegression;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected ctr or regression)");
}

std::vector<std::string_view> split_line(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t end = line.find(delimiter, start);
    if (end == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

std::vector<FieldDescriptor> criteo_descriptors() {
  std::vector<FieldDescriptor> out;
  for (std::size_t i = 1; i <= kCriteoIntegerFields; ++i) out.push_back({"I" + std::to_string(i), FieldKind::kNumeric});
  for (std::size_t i = 1; i <= kCriteoCategoricalFields; ++i) {
    out.push_back({"C" + std::to_string(i), FieldKind::kCategorical});
  }
  return out;
}

std::vector<FieldDescriptor> movielens_descriptors() {
  return {{"userId", FieldKind::kCategorical},
          {"movieId", FieldKind::kCategorical},
          {"genres", FieldKind::kMultiCategorical}};
}

Dataset load_table(const std::filesystem::path& path, const std::vector<FieldDescriptor>& descriptors,
                   Task task, const LoadOptions& options) {
  const std::size_t columns = descriptors.size() + 1;
  const std::size_t limit = options.max_rows.value_or(std::numeric_limits<std::size_t>::max());
  std::string line;

  std::shared_ptr<const FeatureSchema> schema = options.schema;
  if (!schema) {
    VocabularyBuilder builder(descriptors);
    std::ifstream in = open_input(path);
    for (std::size_t row = 0; row < limit && read_line(in, line); ++row) {
      const auto cols = split_line(line, '\t');
      if (cols.size() != columns || !parse_label(cols[0], task)) continue;
      builder.add(std::span(cols).subspan(1));
    }
    schema = std::make_shared<const FeatureSchema>(builder.build(options.min_count));
  } else if (schema->num_fields() != descriptors.size()) {
    throw SchemaMismatch("schema has " + std::to_string(schema->num_fields()) + " fields, table layout has " +
                         std::to_string(descriptors.size()));
  }

  Dataset ds;
  ds.schema = schema;
  ds.task = task;
  std::ifstream in = open_input(path);
  for (std::size_t row = 0; row < limit && read_line(in, line); ++row) {
    ++ds.stats.rows_read;
    const auto cols = split_line(line, '\t');
    const auto label = cols.size() == columns ? parse_label(cols[0], task) : std::nullopt;
    if (!label) {
      ++ds.stats.rows_skipped;
      continue;
    }
    try {
      EncodedSample sample = encode(std::span(cols).subspan(1), *schema);
      sample.label = *label;
      ds.samples.push_back(std::move(sample));
    } catch (const DataError&) {
      ++ds.stats.rows_skipped;
    }
  }
  check_malformed(ds.stats, options.max_malformed_fraction, path);
  return ds;
}

Dataset load_criteo(const std::filesystem::path& path, const LoadOptions& options) {
  return load_table(path, criteo_descriptors(), Task::kCtr, options);
}

Dataset load_with_schema(const std::filesystem::path& path, std::shared_ptr<const FeatureSchema> schema,
                         Task task, std::optional<std::size_t> max_rows) {
  {
    std::ifstream in(path);
    std::string first;
    if (in && std::getline(in, first)) {
      if (!first.empty() && first.back() == '\r') first.pop_back();
      const std::size_t columns = split_line(first, '\t').size();
      if (columns != schema->num_fields() + 1) {
        throw SchemaMismatch("'" + path.string() + "' has " + std::to_string(columns - 1) + " fields per row, schema " +
                             schema->fingerprint());
      }
    }
  }
  LoadOptions options;
  options.max_rows = max_rows;
  options.schema = schema;
  return load_table(path, descriptors_of(*schema), task, options);
}

Dataset load_movielens(const std::filesystem::path& ratings_path, const std::filesystem::path& movies_path,
                       const LoadOptions& options) {
  std::unordered_map<std::string, std::string> genres;
  {
    std::ifstream in = open_input(movies_path);
    std::string line;
    if (!read_line(in, line) || line.rfind("movieId", 0) != 0) {
      throw DataError("'" + movies_path.string() + "': expected header movieId,title,genres");
    }
    while (read_line(in, line)) {
      auto cols = parse_csv_line(line);
      if (cols.size() != 3) continue;
      genres[cols[0]] = std::move(cols[2]);
    }
  }

  LoadStats stats;
  std::vector<std::vector<std::string>> records;
  std::vector<double> labels;
  {
    std::ifstream in = open_input(ratings_path);
    std::string line;
    if (!read_line(in, line) || line.rfind("userId", 0) != 0) {
      throw DataError("'" + ratings_path.string() + "': expected header userId,movieId,rating,timestamp");
    }
    const std::size_t limit = options.max_rows.value_or(std::numeric_limits<std::size_t>::max());
    while (records.size() + stats.rows_skipped < limit && read_line(in, line)) {
      ++stats.rows_read;
      const auto cols = split_line(line, ',');
      const auto rating = cols.size() == 4 ? parse_double(cols[2]) : std::nullopt;
      if (!rating || *rating < 0.0 || *rating > 5.0 || cols[0].empty() || cols[1].empty()) {
        ++stats.rows_skipped;
        continue;
      }
      const auto it = genres.find(std::string(cols[1]));
      records.push_back({std::string(cols[0]), std::string(cols[1]), it == genres.end() ? "" : it->second});
      labels.push_back(*rating);
    }
  }
  check_malformed(stats, options.max_malformed_fraction, ratings_path);

  Dataset ds;
  ds.task = Task::kRegression;
  ds.stats = stats;
  ds.schema = options.schema ? options.schema
                             : std::make_shared<const FeatureSchema>(
                                   build_schema(movielens_descriptors(), records, options.min_count));
  std::vector<std::string_view> views;
  ds.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    views.assign(records[i].begin(), records[i].end());
    EncodedSample sample = encode(views, *ds.schema);
    sample.label = labels[i];
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

std::vector<std::size_t> split_order(std::size_t n, std::uint64_t seed) {
  return Pcg32(seed, kSplitStream).permutation(n);
}

SplitParts split(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const std::size_t n = ds.size();
  if (n < 10) throw DataError("cannot split " + std::to_string(n) + " samples (need at least 10)");

  // The epsilon keeps exact products such as 0.9 * 100 from landing below the integer.
  const auto cut = [n](double r) { return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9)); };
  const std::size_t first = cut(ratios[0]);
  const std::size_t second = cut(ratios[0] + ratios[1]);

  const auto order = split_order(n, seed);
  SplitParts parts;
  for (Dataset* part : {&parts.train, &parts.validation, &parts.test}) {
    part->schema = ds.schema;
    part->task = ds.task;
  }
  parts.train.samples.reserve(first);
  for (std::size_t i = 0; i < n; ++i) {
    Dataset& dst = i < first ? parts.train : (i < second ? parts.validation : parts.test);
    dst.samples.push_back(ds.samples[order[i]]);
  }
  return parts;
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> sample_ids) {
  const FeatureSchema& schema = *ds.schema;
  const std::size_t F = schema.num_fields();
  Batch batch;
  batch.size = sample_ids.size();
  batch.field_begin.assign(F + 1, 0);
  std::vector<std::uint32_t> width(F, 0);
  for (std::size_t id : sample_ids) {
    const EncodedSample& s = ds.samples[id];
    for (std::size_t f = 0; f < F; ++f) width[f] = std::max(width[f], s.field_begin[f + 1] - s.field_begin[f]);
  }
  for (std::size_t f = 0; f < F; ++f) batch.field_begin[f + 1] = batch.field_begin[f] + width[f];

  const std::size_t slots = batch.slots_per_sample();
  batch.entries.resize(slots * batch.size);
  batch.labels.reserve(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const EncodedSample& s = ds.samples[sample_ids[b]];
    FeatureEntry* row = batch.entries.data() + b * slots;
    for (std::size_t f = 0; f < F; ++f) {
      const auto src = s.view().field(f);
      for (std::uint32_t k = 0; k < width[f]; ++k) {
        row[batch.field_begin[f] + k] = k < src.size() ? src[k] : FeatureEntry{schema.field(f).offset, 0.0};
      }
    }
    batch.labels.push_back(s.label);
  }
  return batch;
}

std::vector<std::size_t> batch_order(std::size_t n, std::optional<std::uint64_t> shuffle_seed) {
  if (shuffle_seed) return Pcg32(*shuffle_seed, kBatchStream).permutation(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const auto order = batch_order(ds.size(), shuffle_seed);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    out.push_back(make_batch(ds, std::span(order).subspan(start, len)));
  }
  return out;
}

double SynthGroundTruth::raw_logit(std::span<const std::uint32_t> values) const {
  double logit = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto ui = embeddings[i].row(values[i]);
    for (std::size_t j = i + 1; j < values.size(); ++j) {
      const auto uj = embeddings[j].row(values[j]);
      for (std::size_t k = 0; k < ui.size(); ++k) logit += ui[k] * uj[k];
    }
  }
  return logit;
}

std::string synth_token(std::uint32_t value) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", value);
  return buf;
}

SynthData synth_interactions(const SynthOptions& options) {
  if (options.fields < 2) throw ConfigError("synthetic data needs at least 2 fields");
  if (options.n == 0 || options.vocab == 0 || options.k_true == 0) {
    throw ConfigError("synthetic n, vocab and k_true must be positive");
  }
  Pcg32 rng(options.seed, kSynthStream);
  SynthData out;
  for (std::size_t f = 0; f < options.fields; ++f) {
    Matrix u(options.vocab, options.k_true);
    for (double& v : u.values()) v = rng.normal();
    out.truth.embeddings.push_back(std::move(u));
  }
  out.values.assign(options.n, std::vector<std::uint32_t>(options.fields));
  for (auto& row : out.values) {
    for (auto& v : row) v = rng.below(options.vocab);
  }
  out.true_logits.resize(options.n);
  double sum = 0.0;
  for (std::size_t i = 0; i < options.n; ++i) {
    out.true_logits[i] = out.truth.raw_logit(out.values[i]);
    sum += out.true_logits[i];
  }
  out.truth.logit_mean = sum / static_cast<double>(options.n);
  for (double& logit : out.true_logits) logit -= out.truth.logit_mean;

  std::vector<FieldDescriptor> descriptors;
  for (std::size_t f = 0; f < options.fields; ++f) {
    descriptors.push_back({"c" + std::to_string(f + 1), FieldKind::kCategorical});
  }
  std::vector<std::vector<std::string>> records(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    for (std::uint32_t v : out.values[i]) records[i].push_back(synth_token(v));
  }
  out.dataset.task = Task::kCtr;
  out.dataset.schema = std::make_shared<const FeatureSchema>(build_schema(descriptors, records, 1));
  out.dataset.stats.rows_read = options.n;
  out.dataset.samples.reserve(options.n);
  std::vector<std::string_view> views;
  for (std::size_t i = 0; i < options.n; ++i) {
    views.assign(records[i].begin(), records[i].end());
    EncodedSample sample = encode(views, *out.dataset.schema);
    sample.label = rng.uniform() < sigmoid(out.true_logits[i]) ? 1.0 : 0.0;
    out.dataset.samples.push_back(std::move(sample));
  }
  return out;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "synth.tsv", std::ios::binary);
    if (!out) throw DataError("cannot write '" + (dir / "synth.tsv").string() + "'");
    for (std::size_t i = 0; i < data.values.size(); ++i) {
      out << (data.dataset.samples[i].label == 1.0 ? '1' : '0');
      for (std::uint32_t v : data.values[i]) out << '\t' << synth_token(v);
      out << '\n';
    }
  }
  std::ofstream out(dir / "ground_truth.tsv", std::ios::binary);
  if (!out) throw DataError("cannot write '" + (dir / "ground_truth.tsv").string() + "'");
  out << "# logit_mean\t" << format_double(data.truth.logit_mean) << '\n';
  out << "field\tvalue";
  const std::size_t k = data.truth.embeddings.front().cols();
  for (std::size_t j = 1; j <= k; ++j) out << "\tu_" << j;
  out << '\n';
  for (std::size_t f = 0; f < data.truth.embeddings.size(); ++f) {
    const Matrix& u = data.truth.embeddings[f];
    for (std::uint32_t v = 0; v < u.rows(); ++v) {
      out << "c" << f + 1 << '\t' << synth_token(v);
      for (double x : u.row(v)) out << '\t' << format_double(x);
      out << '\n';
    }
  }
}

}  // namespace adnfm
