#include "adnfm/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "adnfm/errors.hpp"

namespace adnfm {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.count(item.key())) {
      throw ConfigError("config: unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + (where.empty() ? "" : where + ".") + key + "' has the wrong type");
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(DataFormat format) {
  switch (format) {
    case DataFormat::kTsv:
      return "tsv";
    case DataFormat::kCriteo:
      return "criteo";
    case DataFormat::kMovielens:
      return "movielens";
  }
  return "unknown";
}

DataFormat data_format_from_string(std::string_view name) {
  if (name == "tsv") return DataFormat::kTsv;
  if (name == "criteo") return DataFormat::kCriteo;
  if (name == "movielens") return DataFormat::kMovielens;
  throw ConfigError("config: unknown data format '" + std::string(name) + "'");
}

json RunConfig::to_json() const {
  const TrainConfig& t = train;
  return {{"data",
           {{"format", to_string(data.format)},
            {"path", data.path},
            {"movies_path", data.movies_path},
            {"max_rows", data.max_rows ? json(*data.max_rows) : json(nullptr)},
            {"min_count", data.min_count},
            {"split", data.split},
            {"split_seed", data.split_seed}}},
          {"task", to_string(task)},
          {"model",
           {{"kind", to_string(t.kind)},
            {"embedding_dim", t.hyper.embedding_dim},
            {"hidden_width", t.hyper.hidden_width},
            {"depth", t.hyper.depth},
            {"attention_dim", t.hyper.attention_dim}}},
          {"train",
           {{"epochs_max", t.epochs_max},
            {"batch_size", t.batch_size},
            {"learning_rate", t.adam.learning_rate},
            {"beta1", t.adam.beta1},
            {"beta2", t.adam.beta2},
            {"epsilon", t.adam.epsilon},
            {"patience", t.patience},
            {"seed", t.seed},
            {"eval_metric", to_string(t.eval_metric)},
            {"probe_size", t.probe_size}}},
          {"output_dir", output_dir}};
}

std::string RunConfig::fingerprint() const {
  char buf[17];
  // The output location does not influence the trained model.
  nlohmann::json doc = to_json();
  doc.erase("output_dir");
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(doc.dump())));
  return buf;
}

RunConfig parse_run_config(const json& doc) {
  reject_unknown(doc, "", {"data", "task", "model", "train", "output_dir"});
  RunConfig cfg;
  std::string text;

  if (doc.contains("data")) {
    const json& d = doc.at("data");
    reject_unknown(d, "data", {"format", "path", "movies_path", "max_rows", "min_count", "split", "split_seed"});
    text = std::string(to_string(cfg.data.format));
    read(d, "format", "data", text);
    cfg.data.format = data_format_from_string(text);
    read(d, "path", "data", cfg.data.path);
    read(d, "movies_path", "data", cfg.data.movies_path);
    if (d.contains("max_rows") && !d.at("max_rows").is_null()) {
      std::size_t rows = 0;
      read(d, "max_rows", "data", rows);
      cfg.data.max_rows = rows;
    }
    read(d, "min_count", "data", cfg.data.min_count);
    read(d, "split", "data", cfg.data.split);
    read(d, "split_seed", "data", cfg.data.split_seed);
  }
  if (cfg.data.format == DataFormat::kCriteo && !cfg.data.max_rows) cfg.data.max_rows = kCriteoDefaultMaxRows;

  text = std::string(to_string(cfg.task));
  read(doc, "task", "", text);
  cfg.task = task_from_string(text);
  cfg.train.eval_metric = cfg.task == Task::kCtr ? EvalMetric::kLogLoss : EvalMetric::kRmse;

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    reject_unknown(m, "model", {"kind", "embedding_dim", "hidden_width", "depth", "attention_dim"});
    text = std::string(to_string(cfg.train.kind));
    read(m, "kind", "model", text);
    cfg.train.kind = model_kind_from_string(text);
    read(m, "embedding_dim", "model", cfg.train.hyper.embedding_dim);
    read(m, "hidden_width", "model", cfg.train.hyper.hidden_width);
    read(m, "depth", "model", cfg.train.hyper.depth);
    read(m, "attention_dim", "model", cfg.train.hyper.attention_dim);
  }
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    reject_unknown(t, "train", {"epochs_max", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "patience",
                                "seed", "eval_metric", "probe_size"});
    read(t, "epochs_max", "train", cfg.train.epochs_max);
    read(t, "batch_size", "train", cfg.train.batch_size);
    read(t, "learning_rate", "train", cfg.train.adam.learning_rate);
    read(t, "beta1", "train", cfg.train.adam.beta1);
    read(t, "beta2", "train", cfg.train.adam.beta2);
    read(t, "epsilon", "train", cfg.train.adam.epsilon);
    read(t, "patience", "train", cfg.train.patience);
    read(t, "seed", "train", cfg.train.seed);
    read(t, "probe_size", "train", cfg.train.probe_size);
    text = std::string(to_string(cfg.train.eval_metric));
    read(t, "eval_metric", "train", text);
    cfg.train.eval_metric = eval_metric_from_string(text);
  }
  read(doc, "output_dir", "", cfg.output_dir);

  if (cfg.data.format == DataFormat::kMovielens && cfg.task != Task::kRegression) {
    throw ConfigError("config: movielens data requires task regression");
  }
  if (cfg.data.format == DataFormat::kCriteo && cfg.task != Task::kCtr) {
    throw ConfigError("config: criteo data requires task ctr");
  }
  if (cfg.data.min_count < 1) throw ConfigError("config: data.min_count must be >= 1");
  if ((cfg.task == Task::kRegression) != (cfg.train.eval_metric == EvalMetric::kRmse)) {
    throw ConfigError("config: eval_metric " + std::string(to_string(cfg.train.eval_metric)) + " does not fit task " +
                      std::string(to_string(cfg.task)));
  }
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

Dataset load_dataset(const DataConfig& data, Task task) {
  LoadOptions options;
  options.max_rows = data.max_rows;
  options.min_count = data.min_count;
  switch (data.format) {
    case DataFormat::kCriteo:
      return load_criteo(data.path, options);
    case DataFormat::kMovielens:
      return load_movielens(data.path, data.movies_path, options);
    case DataFormat::kTsv: {
      std::ifstream in(data.path);
      std::string first;
      if (!in || !std::getline(in, first)) throw DataError("cannot read '" + data.path + "'");
      if (!first.empty() && first.back() == '\r') first.pop_back();
      const std::size_t fields = split_line(first, '\t').size() - 1;
      if (fields < 1) throw DataError("'" + data.path + "': rows need a label and at least one field");
      std::vector<FieldDescriptor> descriptors;
      for (std::size_t f = 0; f < fields; ++f) descriptors.push_back({"c" + std::to_string(f + 1), FieldKind::kCategorical});
      return load_table(data.path, descriptors, task, options);
    }
  }
  throw ConfigError("unknown data format");
}

}  // namespace adnfm
