// pcdgan: train, evaluate, plot and compare runs on the 2-D benchmarks.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fmt/format.h>
#include <string>
#include <vector>

#include "pcdgan/config.hpp"
#include "pcdgan/error.hpp"
#include "pcdgan/report.hpp"
#include "pcdgan/train.hpp"

namespace fs = std::filesystem;
using namespace pcdgan;

int main(int argc, char** argv) {
  CLI::App cli{"Performance-conditioned diverse GAN on 2-D benchmarks"};
  cli.require_subcommand(1);

  // train
  auto* train_cmd = cli.add_subcommand("train", "train one run");
  int example = 0;
  std::string model, config_path, out_dir;
  long long seed = -1, steps = -1;
  std::vector<std::string> overrides;
  bool quiet = false, eval_after = false;
  train_cmd->add_option("--example", example, "benchmark (1 or 2)")->check(CLI::IsMember({1, 2}));
  train_cmd->add_option("--model", model, "pcdgan or ccgan")->check(CLI::IsMember({"pcdgan", "ccgan"}));
  train_cmd->add_option("--seed", seed, "training seed")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--steps", steps, "override the step count")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--set", overrides, "extra key=value settings (repeatable)");
  train_cmd->add_option("--out", out_dir, "run directory (default: $PCDGAN_OUTPUT_ROOT/ex<E>_<model>_s<seed>)");
  train_cmd->add_flag("--eval", eval_after, "evaluate final.ckpt after training");
  train_cmd->add_flag("--quiet", quiet, "no progress output");

  // eval
  auto* eval_cmd = cli.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint, eval_out;
  bool full = false;
  std::size_t threads = 1;
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_flag("--full-protocol", full, "100 conditions x 10 repeats");
  eval_cmd->add_option("--out", eval_out, "output directory (default: checkpoint directory)");
  eval_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  // plot
  auto* plot_cmd = cli.add_subcommand("plot", "SVG figures from evaluated runs");
  std::vector<std::string> plot_runs;
  std::string plot_out;
  plot_cmd->add_option("--runs", plot_runs, "run directories")->required();
  plot_cmd->add_option("--out", plot_out, "output directory (default: $PCDGAN_OUTPUT_ROOT/plots)");

  // compare
  auto* compare_cmd = cli.add_subcommand("compare", "table of evaluated runs");
  std::vector<std::string> compare_runs;
  std::string compare_out;
  compare_cmd->add_option("--runs", compare_runs, "run directories")->required();
  compare_cmd->add_option("--out", compare_out, "CSV path")->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*train_cmd) {
      app::TrainConfig cfg;
      if (!config_path.empty()) cfg = app::load_config(config_path);
      if (example != 0) cfg.example_id = example;
      if (!model.empty()) cfg.model = app::parse_model(model);
      if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
      if (steps >= 0) cfg.steps = static_cast<long>(steps);
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || !app::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1))) {
          throw ContractViolation("--set expects a known key=value, got '" + kv + "'");
        }
      }
      cfg.finalize();
      if (out_dir.empty()) out_dir = app::default_run_dir(cfg);
      app::TrainOptions opts;
      opts.verbose = !quiet;
      const app::TrainResult result = app::train(cfg, out_dir, opts);
      if (result.failed) {
        std::fprintf(stderr, "training failed: %s (see %s/failure.txt)\n", result.failure.c_str(),
                     out_dir.c_str());
        return 3;
      }
      std::printf("%s\n", result.final_checkpoint.c_str());
      if (eval_after) {
        const auto out = app::evaluate_run(result.final_checkpoint, cfg.protocol);
        std::printf("%s\n%s\n", out.eval_csv.c_str(), out.summary_json.c_str());
      }
    } else if (*eval_cmd) {
      const app::LoadedRun run = app::load_run(checkpoint);
      eval::ProtocolConfig protocol = run.cfg.protocol;
      if (full) {
        const auto f = eval::ProtocolConfig::full();
        protocol.n_conditions = f.n_conditions;
        protocol.repeats = f.repeats;
      }
      protocol.threads = threads;
      const auto out = app::evaluate_run(checkpoint, protocol, full, eval_out);
      std::printf("%s\n%s\n", out.eval_csv.c_str(), out.summary_json.c_str());
      std::printf("label_error %.6g +- %.6g\nlikelihood %.6g +- %.6g\ndiversity %.6g +- %.6g\n"
                  "modes covered at %.1f: %zu/6\n",
                  out.report.label_error.mean, out.report.label_error.std,
                  out.report.likelihood.mean, out.report.likelihood.std,
                  out.report.diversity.mean, out.report.diversity.std, app::kScatterCondition,
                  out.occupancy.covered);
      if (out.report.failed) {
        std::fprintf(stderr, "evaluation had failing cells:\n%s", out.report.diagnostics.c_str());
        return 4;
      }
    } else if (*plot_cmd) {
      if (plot_out.empty()) plot_out = (fs::path(app::output_root()) / "plots").string();
      for (const auto& path : app::emit_plots(plot_runs, plot_out)) std::printf("%s\n", path.c_str());
    } else if (*compare_cmd) {
      for (const auto& g : app::compare(compare_runs, compare_out)) {
        std::printf("example %d %-6s runs %zu  label_error %.4f  likelihood %.3f  diversity %.3f\n",
                    g.example_id, g.model.c_str(), g.runs, g.label_error.mean, g.likelihood.mean,
                    g.diversity.mean);
      }
      std::printf("%s\n", compare_out.c_str());
    }
  } catch (const LoadError& e) {
    std::fprintf(stderr, "load error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
