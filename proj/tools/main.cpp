#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "earkd/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace earkd::cli;

  CLI::App app{"earkd: scalp-to-ear EEG sleep staging with feature distillation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "earkd 0.1.0");

  Invocation inv;
  for (int i = 1; i < argc; ++i) inv.arguments.emplace_back(argv[i]);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic paired scalp/ear cohort");
  synth_cmd->add_option("--config", synth.config, "synthetic cohort config (JSON)");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "root seed (EARKD_SEED overrides)");

  PreprocessOptions prep;
  auto* prep_cmd = app.add_subcommand("preprocess", "filter, reject ear channels, derive 3-channel montages");
  prep_cmd->add_option("--in", prep.in, "raw subject directory")->required();
  prep_cmd->add_option("--out", prep.out, "output directory")->required();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train one leave-one-subject-out fold");
  train_cmd->add_option("--strategy", train.strategy,
                        "supervised-scalp | supervised-ear | transfer | kd-offline | kd-online")
      ->required();
  train_cmd->add_option("--arch", train.arch, "cnn | transformer (overrides the config)");
  train_cmd->add_option("--data", train.data, "preprocessed data directory")->required();
  train_cmd->add_option("--fold", train.fold, "fold index; fold k holds out the k-th subject")->required();
  train_cmd->add_option("--config", train.config, "experiment config (JSON)");
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--teacher", train.teacher, "frozen teacher checkpoint (kd-offline)");
  train_cmd->add_option("--seed", train.seed, "root seed (EARKD_SEED overrides)");

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on the held-out subject of a fold");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "preprocessed data directory")->required();
  eval_cmd->add_option("--fold", eval.fold, "fold index")->required();
  eval_cmd->add_option("--out", eval.out, "output directory")->required();
  eval_cmd->add_option("--config", eval.config, "experiment config the checkpoint must match");
  eval_cmd->add_option("--teacher", eval.teacher, "scalp teacher checkpoint; exports a feature embedding");
  eval_cmd->add_option("--embed", eval.embed, "embedding method: pca | sne");
  eval_cmd->add_option("--seed", eval.seed, "embedding seed (EARKD_SEED overrides)");

  LosoOptions loso;
  auto* loso_cmd = app.add_subcommand("loso", "run every fold of one strategy and pool the results");
  loso_cmd->add_option("--strategy", loso.strategy, "training strategy")->required();
  loso_cmd->add_option("--arch", loso.arch, "cnn | transformer (overrides the config)");
  loso_cmd->add_option("--data", loso.data, "preprocessed data directory")->required();
  loso_cmd->add_option("--config", loso.config, "experiment config (JSON)");
  loso_cmd->add_option("--out", loso.out, "output directory")->required();
  loso_cmd->add_option("--threads", loso.threads, "folds trained in parallel");
  loso_cmd->add_option("--seed", loso.seed, "root seed (EARKD_SEED overrides)");

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "aggregate evaluated runs into a results table");
  report_cmd->add_option("--runs", report.runs, "run directories holding metrics.json")->expected(0, -1);
  report_cmd->add_option("--out", report.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) run_synth(synth, inv);
    if (*prep_cmd) run_preprocess(prep, inv);
    if (*train_cmd) run_train(train, inv);
    if (*eval_cmd) run_evaluate(eval, inv);
    if (*loso_cmd) run_loso(loso, inv);
    if (*report_cmd) run_report(report, inv);
  } catch (const earkd::Error& e) {
    std::cerr << "earkd: " << e.what() << '\n';
    return e.kind() == earkd::ErrorKind::UsageError ? kExitUsage : kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "earkd: IOError: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "earkd: error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
