#include "adnfm/commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "adnfm/checkpoint.hpp"
#include "adnfm/config.hpp"
#include "adnfm/errors.hpp"
#include "adnfm/metrics.hpp"

namespace adnfm {

namespace {

int run_guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const SchemaMismatch& e) {
    err << "schema mismatch: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

nlohmann::json report_json(const MetricsReport& report) {
  nlohmann::json doc = report.values;
  doc["n_samples"] = report.n_samples;
  if (report.auc_undefined) doc["auc_undefined"] = true;
  return doc;
}

}  // namespace

void write_history(const TrainHistory& history, std::size_t alpha_columns, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "epoch\ttrain_loss\tval_metric";
  for (std::size_t k = 1; k <= alpha_columns; ++k) out << "\talpha_" << k;
  out << "\twall_ms\n";
  for (const EpochRecord& r : history.epochs) {
    out << r.epoch << '\t' << format_double(r.train_loss) << '\t' << format_double(r.val_metric);
    for (double a : r.mean_alpha) out << '\t' << format_double(a);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", r.wall_ms);
    out << '\t' << buf << '\n';
  }
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    RunConfig cfg = load_run_config(args.config);
    if (args.data_override) cfg.data.path = args.data_override->string();
    if (args.out_dir) cfg.output_dir = args.out_dir->string();
    if (args.seed) cfg.train.seed = *args.seed;

    const Dataset all = load_dataset(cfg.data, cfg.task);
    if (all.stats.rows_skipped > 0) {
      err << "skipped " << all.stats.rows_skipped << " of " << all.stats.rows_read << " rows\n";
    }
    const SplitParts parts = split(all, cfg.data.split, cfg.data.split_seed);
    const TrainResult result = train(cfg.train, parts.train, parts.validation, &out);
    const MetricsReport test = evaluate(result.best, parts.test);

    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    Checkpoint ckpt{result.best, all.schema, cfg.task, cfg.fingerprint(), report_json(test)};
    ckpt.metrics["best_epoch"] = result.history.best_epoch;
    save_checkpoint(ckpt, dir / "model.ckpt");
    write_history(result.history, uses_attention(cfg.train.kind) ? cfg.train.hyper.depth : 0, dir / "history.tsv");
    {
      std::ofstream metrics(dir / "metrics.txt", std::ios::binary | std::ios::trunc);
      if (!metrics) throw DataError("cannot write '" + (dir / "metrics.txt").string() + "'");
      metrics << test.summary() << "\tn=" << test.n_samples << '\n';
    }
    out << "test\t" << test.summary() << '\n';
    return int{kExitOk};
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const Task task = task_from_string(args.task);
    const Checkpoint ckpt = load_checkpoint(args.model);
    if (task != ckpt.task) {
      throw SchemaMismatch("checkpoint task is " + std::string(to_string(ckpt.task)) + ", requested " +
                           std::string(to_string(task)) + " (checkpoint " + ckpt.schema->fingerprint() + ")");
    }
    Dataset ds;
    if (args.movies) {
      LoadOptions options;
      options.schema = ckpt.schema;
      ds = load_movielens(args.data, *args.movies, options);
      if (ds.schema->num_fields() != ckpt.schema->num_fields()) throw SchemaMismatch("field count differs");
    } else {
      std::ifstream in(args.data);
      std::string first;
      if (!in) throw DataError("cannot open '" + args.data.string() + "'");
      if (std::getline(in, first)) {
        if (!first.empty() && first.back() == '\r') first.pop_back();
        const std::size_t fields = split_line(first, '\t').size() - 1;
        if (fields != ckpt.schema->num_fields()) {
          throw SchemaMismatch("checkpoint " + ckpt.schema->fingerprint() + "; data fields=" + std::to_string(fields));
        }
      }
      ds = load_with_schema(args.data, ckpt.schema, task);
    }
    out << evaluate(ckpt.params, ds).summary() << '\n';
    return int{kExitOk};
  });
}

int cmd_predict(const PredictArgs& args, std::ostream&, std::ostream& err) {
  return run_guarded(err, [&] {
    const Checkpoint ckpt = load_checkpoint(args.model);
    std::ifstream in(args.input, std::ios::binary);
    if (!in) throw DataError("cannot open '" + args.input.string() + "'");
    std::ofstream out(args.output, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + args.output.string() + "'");

    const std::size_t F = ckpt.schema->num_fields();
    std::string line;
    std::size_t row = 0;
    ForwardTrace trace;
    while (std::getline(in, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      auto cols = split_line(line, '\t');
      std::span<const std::string_view> fields(cols);
      // A leading label column is accepted and ignored.
      if (cols.size() == F + 1) fields = fields.subspan(1);
      out << row << ',';
      try {
        const EncodedSample sample = encode(fields, *ckpt.schema);
        out << format_double(forward(ckpt.params, sample.view(), ckpt.task, trace)) << '\n';
      } catch (const DataError&) {
        out << "ERROR\n";
      }
    }
    return int{kExitOk};
  });
}

int cmd_trace_attention(const TraceArgs& args, std::ostream&, std::ostream& err) {
  return run_guarded(err, [&] {
    std::ifstream in(args.history);
    if (!in) throw DataError("cannot open '" + args.history.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("history file is empty");
    const auto header = split_line(line, '\t');
    std::vector<std::size_t> alpha_cols;
    std::size_t epoch_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "epoch") epoch_col = i;
      if (header[i].rfind("alpha_", 0) == 0) alpha_cols.push_back(i);
    }
    if (alpha_cols.empty()) throw ConfigError("history has no alpha_k columns");
    if (epoch_col == header.size()) throw ConfigError("history has no epoch column");

    std::ostringstream csv;
    csv << "epoch";
    for (std::size_t k = 1; k <= alpha_cols.size(); ++k) csv << ",alpha_" << k;
    csv << '\n';
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      const auto cols = split_line(line, '\t');
      if (cols.size() != header.size()) throw ConfigError("history row " + std::to_string(row) + " has the wrong column count");
      csv << cols[epoch_col];
      double total = 0.0;
      for (std::size_t c : alpha_cols) {
        double a = 0.0;
        const auto [ptr, ec] = std::from_chars(cols[c].data(), cols[c].data() + cols[c].size(), a);
        if (ec != std::errc() || ptr != cols[c].data() + cols[c].size()) {
          throw ConfigError("history row " + std::to_string(row) + " has a non-numeric alpha");
        }
        total += a;
        csv << ',' << fixed6(a);
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("history row " + std::to_string(row) + " alphas sum to " + format_double(total));
      }
      csv << '\n';
    }
    std::ofstream out(args.out, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + args.out.string() + "'");
    out << csv.str();
    return int{kExitOk};
  });
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const SynthData data = synth_interactions(args.options);
    write_synth(data, args.out_dir);
    std::vector<double> labels;
    labels.reserve(data.dataset.size());
    std::size_t positives = 0;
    for (const auto& s : data.dataset.samples) {
      labels.push_back(s.label);
      positives += s.label > 0.5 ? 1 : 0;
    }
    const auto bayes = auc(data.true_logits, labels);
    out << "n=" << data.dataset.size() << "\tpositives=" << positives << "\tbayes_auc="
        << (bayes ? fixed6(*bayes) : std::string("undefined")) << '\n';
    return int{kExitOk};
  });
}

}  // namespace adnfm
