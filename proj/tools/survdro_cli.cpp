#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "survdro/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string method;
  std::string model;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

survdro::ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  survdro::ExperimentConfig cfg = survdro::load_experiment_config(flags.config_path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.method.empty()) cfg.method = survdro::parse_method(flags.method);
  if (!flags.model.empty()) cfg.model = survdro::parse_model(flags.model);
  if (flags.has_seed) cfg.seed = flags.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* config = cmd->add_option("--config", flags.config_path, "experiment config (JSON)");
  if (config_required) config->required();
  cmd->add_option("--out", flags.out_dir, "output directory (overrides the config)");
  cmd->add_option("--method", flags.method, "training method (overrides the config)");
  cmd->add_option("--model", flags.model, "model family (overrides the config)");
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&flags](const std::uint64_t& value) {
        flags.seed = value;
        flags.has_seed = true;
      },
      "base seed (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survival model training and evaluation with distributionally robust optimization"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  double run_alpha = -1.0;
  auto* run_cmd = app.add_subcommand("run", "train, tune, and evaluate one configuration");
  add_common(run_cmd, run_flags);
  run_cmd->add_option("--alpha", run_alpha, "pin the DRO subpopulation probability");

  CommonFlags sweep_flags;
  std::vector<double> sweep_alphas;
  auto* sweep_cmd = app.add_subcommand("sweep-alpha", "accuracy/fairness tradeoff across alphas");
  add_common(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--alpha", sweep_alphas, "alpha values to sweep (defaults to the grid)");

  CommonFlags eval_flags;
  std::string predictions_path;
  std::string eval_style = "cox";
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "metrics-only pass over a predictions CSV");
  add_common(eval_cmd, eval_flags);
  eval_cmd->add_option("--predictions", predictions_path, "predictions CSV (risk,surv_<t>,...)")
      ->required();
  eval_cmd->add_option("--style", eval_style, "risk-score style: cox | discrete");
  eval_cmd->add_option("--report", eval_out, "write the one-row metrics CSV here (default stdout)");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "run the finite-difference suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run_cmd->parsed()) {
      survdro::ExperimentConfig cfg = load_with_overrides(run_flags);
      if (run_alpha > 0.0) {
        cfg.dro.alpha = run_alpha;
        cfg.alpha_grid = {run_alpha};
      }
      survdro::RunOutput output = survdro::run_experiment(cfg);
      std::cout << "wrote " << cfg.out_dir << "/runs.csv (" << output.repeats.size()
                << " repeats, " << output.failures << " failures)\n";
      return output.failures > 0 ? kExitTraining : kExitOk;
    }
    if (sweep_cmd->parsed()) {
      survdro::ExperimentConfig cfg = load_with_overrides(sweep_flags);
      std::vector<double> alphas = sweep_alphas.empty() ? cfg.effective_alpha_grid() : sweep_alphas;
      survdro::sweep_alpha(cfg, alphas);
      std::cout << "wrote " << cfg.out_dir << "/sweep.csv (" << alphas.size() << " rows)\n";
      return kExitOk;
    }
    if (eval_cmd->parsed()) {
      survdro::ExperimentConfig cfg = load_with_overrides(eval_flags);
      survdro::PredictionStyle style;
      if (eval_style == "cox")
        style = survdro::PredictionStyle::PartialHazard;
      else if (eval_style == "discrete")
        style = survdro::PredictionStyle::SurvivalCurve;
      else
        throw survdro::ConfigError("unknown style '" + eval_style + "'");
      survdro::MetricsReport report = survdro::evaluate_predictions(cfg, predictions_path, style);
      if (eval_out.empty()) {
        std::cout << survdro::MetricsReport::csv_header() << "\n" << report.csv_row() << "\n";
      } else {
        std::ofstream out(eval_out);
        out << survdro::MetricsReport::csv_header() << "\n" << report.csv_row() << "\n";
        std::cout << "wrote " << eval_out << "\n";
      }
      return kExitOk;
    }
    if (gradcheck_cmd->parsed()) {
      return survdro::run_gradient_checks(std::cout) ? kExitOk : 1;
    }
  } catch (const survdro::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const survdro::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const survdro::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const survdro::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
