#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "adnfm/data.hpp"
#include "adnfm/train.hpp"

namespace adnfm {

// Command implementations behind the adnfm executable. Each returns a
// process exit code (see ExitCode) and never throws; diagnostics go to err.

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> data_override;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
};
// Writes model.ckpt, history.tsv and metrics.txt into the output directory.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
  std::filesystem::path model;
  std::filesystem::path data;
  std::string task;
  // When set, data is a MovieLens ratings.csv and this is movies.csv.
  std::optional<std::filesystem::path> movies;
};
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

struct PredictArgs {
  std::filesystem::path model;
  std::filesystem::path input;
  std::filesystem::path output;
};
// One "row_index,prediction" line per input row (1-based); rows that do not
// encode produce "row_index,ERROR".
int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err);

struct TraceArgs {
  std::filesystem::path history;
  std::filesystem::path out;
};
int cmd_trace_attention(const TraceArgs& args, std::ostream& out, std::ostream& err);

struct SynthArgs {
  SynthOptions options;
  std::filesystem::path out_dir;
};
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

// history.tsv writer/reader shared by train and trace-attention.
// alpha_columns is 0 for kinds without attention.
void write_history(const TrainHistory& history, std::size_t alpha_columns, const std::filesystem::path& path);

}  // namespace adnfm
