#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "survdro/dro.hpp"
#include "survdro/metrics.hpp"

namespace survdro {

enum class ModelChoice { CoxLinear, CoxMlp, DeepHit };
enum class MethodChoice { Erm, RegFi, RegFg, RegFci, RegFcg, Dro, DroSplit, DroExactCox };
enum class TuningMetric { ConcordanceImparity, CensoringGroup };

ModelChoice parse_model(const std::string& name);
MethodChoice parse_method(const std::string& name);
std::string model_name(ModelChoice model);
std::string method_name(MethodChoice method);

struct ExperimentConfig {
  std::string dataset_path;
  CsvSchema schema;
  ModelChoice model = ModelChoice::CoxLinear;
  MethodChoice method = MethodChoice::Erm;
  DroConfig dro;
  TrainConfig train;
  TuningMetric tuning_metric = TuningMetric::ConcordanceImparity;
  std::vector<double> lr_grid{0.01, 0.001, 0.0001};
  std::vector<double> alpha_grid;   // defaults depend on the model family
  std::vector<double> lambda_grid{1.0, 0.7, 0.4};
  std::vector<std::string> eval_groups;
  int repeats = 10;
  std::uint64_t seed = 1;
  std::string out_dir = "results";
  // discrete-time model knobs
  double deephit_beta = 0.5;
  double deephit_sigma = 0.1;
  int deephit_grid_steps = 0;  // 0 = event-time grid, else uniform with this many steps
  std::vector<double> deephit_event_weights;  // competing-risks ranking weights
  int cox_hidden = 24;
  int deephit_hidden = 32;

  std::vector<double> effective_alpha_grid() const;
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);

enum class PredictionStyle { PartialHazard, SurvivalCurve };

// Proportional-hazards predictions: Breslow baseline on the training set, log
// partial hazards as risk scores.
SurvivalPrediction predict_proportional_hazards(const SurvivalDataset& train,
                                                const SurvivalDataset& test, const ModelSpec& spec,
                                                const ModelParams& params);

// Discrete-time predictions from the simplex head on the model's grid; the
// risk column is 1 - S(median observed time).
SurvivalPrediction predict_discrete(const SurvivalDataset& test, const ModelSpec& spec,
                                    const ModelParams& params, const TimeGrid& grid,
                                    int delta_max);

// Full accuracy + fairness report for one model on one dataset.
MetricsReport compute_metrics(const SurvivalDataset& test, const SurvivalPrediction& pred,
                              PredictionStyle style, const GroupColumn* eval_group,
                              std::span<const GroupColumn> partitions, double gamma);

// Worst per-group mean of the per-point losses (adjacency within `ds`).
double worst_group_mean_loss(const SurvivalDataset& ds, const GroupColumn& partition,
                             const ModelSpec& spec, const ModelParams& params,
                             const LossSpec& loss);

struct RepeatOutcome {
  int repeat = 0;
  bool failed = false;
  std::string error;
  std::string hyperparams;
  bool tuning_rule_satisfied = true;
  MetricsReport metrics;
  double worst_group_loss = std::numeric_limits<double>::quiet_NaN();
};

struct RunOutput {
  std::vector<RepeatOutcome> repeats;
  MetricsReport mean;
  MetricsReport stddev;
  double mean_worst_group_loss = std::numeric_limits<double>::quiet_NaN();
  double stddev_worst_group_loss = std::numeric_limits<double>::quiet_NaN();
  int failures = 0;
};

// The repeated-experiment protocol: a fixed seeded 80/20 train/test split, per
// repeat a fresh validation holdout, hyperparameter selection under the
// 5%-degradation rule, and test-set metrics. Writes runs.csv, summary.csv and
// tuning.csv plus per-repeat parameter files under cfg.out_dir.
RunOutput run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double alpha = 0.0;
  MetricsReport metrics;
  double worst_group_loss = std::numeric_limits<double>::quiet_NaN();
};

// One run per alpha with the alpha grid pinned; writes sweep.csv.
std::vector<SweepRow> sweep_alpha(const ExperimentConfig& cfg, std::span<const double> alphas);

// Metrics-only entry point on an externally produced predictions file.
MetricsReport evaluate_predictions(const ExperimentConfig& cfg, const std::string& predictions_csv,
                                   PredictionStyle style);

// Finite-difference verification of every gradient path; prints one line per
// suite and returns overall success.
bool run_gradient_checks(std::ostream& out);

// Round to 6 significant digits through the serialized form, so summary
// statistics recompute exactly from the written rows.
double round_sig6(double value);

}  // namespace survdro
