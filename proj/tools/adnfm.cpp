// adnfm: train, evaluate and inspect FM-family click-through-rate models.
//
// Exit codes: 0 ok, 2 config, 3 data, 4 numerical, 5 schema mismatch.

#include <iostream>

#include "CLI11.hpp"
#include "adnfm/commands.hpp"
#include "adnfm/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"AdnFM click-through-rate models"};
  app.require_subcommand(1);

  adnfm::TrainArgs train;
  std::string data_override, out_dir;
  std::uint64_t seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON run config");
  train_cmd->add_option("--config", train.config, "Run config (JSON)")->required();
  auto* data_opt = train_cmd->add_option("--data-override", data_override, "Replace data.path");
  auto* out_opt = train_cmd->add_option("--out", out_dir, "Replace output_dir");
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Replace train.seed");

  adnfm::EvalArgs eval;
  std::string movies;
  auto* eval_cmd = app.add_subcommand("eval", "Print test metrics of a checkpoint");
  eval_cmd->add_option("--model", eval.model, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "Data (label + one column per field, or ratings.csv)")->required();
  eval_cmd->add_option("--task", eval.task, "ctr or regression")->required();
  auto* movies_opt = eval_cmd->add_option("--movies", movies, "movies.csv when --data is MovieLens ratings.csv");

  adnfm::PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Score raw rows");
  predict_cmd->add_option("--model", predict.model, "Checkpoint")->required();
  predict_cmd->add_option("--input", predict.input, "TSV rows")->required();
  predict_cmd->add_option("--output", predict.output, "CSV of row_index,prediction")->required();

  adnfm::TraceArgs trace;
  auto* trace_cmd = app.add_subcommand("trace-attention", "Export per-epoch mean attention weights");
  trace_cmd->add_option("--history", trace.history, "history.tsv from train")->required();
  trace_cmd->add_option("--out", trace.out, "Output CSV")->required();

  adnfm::SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate pairwise-interaction click data");
  synth_cmd->add_option("--n", synth.options.n, "Samples")->capture_default_str();
  synth_cmd->add_option("--fields", synth.options.fields, "Fields (>= 2)")->capture_default_str();
  synth_cmd->add_option("--vocab", synth.options.vocab, "Values per field")->capture_default_str();
  synth_cmd->add_option("--k-true", synth.options.k_true, "Hidden factor rank")->capture_default_str();
  synth_cmd->add_option("--seed", synth.options.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : adnfm::kExitConfig;
  }

  if (*train_cmd) {
    if (*data_opt) train.data_override = data_override;
    if (*out_opt) train.out_dir = out_dir;
    if (*seed_opt) train.seed = seed;
    return adnfm::cmd_train(train, std::cout, std::cerr);
  }
  if (*eval_cmd) {
    if (*movies_opt) eval.movies = movies;
    return adnfm::cmd_eval(eval, std::cout, std::cerr);
  }
  if (*predict_cmd) return adnfm::cmd_predict(predict, std::cout, std::cerr);
  if (*trace_cmd) return adnfm::cmd_trace_attention(trace, std::cout, std::cerr);
  return adnfm::cmd_synth(synth, std::cout, std::cerr);
}
