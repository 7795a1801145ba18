#include "survdro/training.hpp"

#include <cmath>
#include <fstream>

namespace survdro {

namespace {


void check_finite(double objective, int iteration) {
  if (!std::isfinite(objective))
    throw TrainingError("objective became non-finite at iteration " + std::to_string(iteration));
}

TrainResult descend(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                    const TrainConfig& cfg, const GroupColumn* partition) {
  cfg.validate();
  ds.validate();
  TrainResult result;
  result.params = init_params(spec, cfg.seed);
  Optimizer optimizer(cfg.optimizer, cfg.learning_rate, result.params.theta.size());

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    leaves.reserve(static_cast<std::size_t>(result.params.theta.size()));
    for (Eigen::Index i = 0; i < result.params.theta.size(); ++i)
      leaves.push_back(tape.leaf(result.params.theta[i]));
    ad::Var objective = regularized_objective_t<ad::Var>(ds, spec, loss, cfg, partition, leaves);
    check_finite(objective.value(), iter);
    std::vector<double> adjoint = tape.backward(objective);
    Eigen::VectorXd grad(result.params.theta.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i)
      grad[i] = adjoint[static_cast<std::size_t>(leaves[static_cast<std::size_t>(i)].index)];
    optimizer.step(result.params.theta, grad);
    result.history.push_back({iter, objective.value()});
  }
  return result;
}

TrainResult descend_minibatch(const SurvivalDataset& ds, const ModelSpec& spec,
                              const LossSpec& loss, const TrainConfig& cfg) {
  TrainResult result;
  result.params = init_params(spec, cfg.seed);
  Optimizer optimizer(cfg.optimizer, cfg.learning_rate, result.params.theta.size());
  Rng rng(cfg.seed + 0x9e3779b97f4a7c15ull);
  std::vector<int> order = all_rows(ds);

  for (int epoch = 0; epoch < cfg.max_iterations; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
      ad::Tape tape;
      std::vector<ad::Var> leaves;
      for (Eigen::Index i = 0; i < result.params.theta.size(); ++i)
        leaves.push_back(tape.leaf(result.params.theta[i]));
      std::vector<ad::Var> losses =
          pointwise_losses<ad::Var>(ds, batch, batch, true, spec, leaves, {}, loss);
      ad::Var mean = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i) mean = mean + losses[i];
      mean = mean / static_cast<double>(losses.size());
      check_finite(mean.value(), epoch);
      std::vector<double> adjoint = tape.backward(mean);
      Eigen::VectorXd grad(result.params.theta.size());
      for (Eigen::Index i = 0; i < grad.size(); ++i)
        grad[i] = adjoint[static_cast<std::size_t>(leaves[static_cast<std::size_t>(i)].index)];
      optimizer.step(result.params.theta, grad);
      epoch_loss += mean.value();
      ++batches;
    }
    result.history.push_back({epoch, epoch_loss / std::max(1, batches)});
  }
  return result;
}

}  // namespace

TrainResult train_erm(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                      const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  TrainConfig plain = cfg;
  plain.lambda = 0.0;
  plain.regularizer = RegularizerKind::None;
  if (cfg.batch_size > 0) return descend_minibatch(ds, spec, loss, plain);
  return descend(ds, spec, loss, plain, nullptr);
}

TrainResult train_regularized(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                              const TrainConfig& cfg, const GroupColumn* partition) {
  return descend(ds, spec, loss, cfg, partition);
}

TuneSelection tune(std::span<const TuneCandidate> candidates, double reference_ctd) {
  if (candidates.empty()) throw ConfigError("tune() requires at least one candidate");
  const double floor = 0.95 * reference_ctd;
  TuneSelection selection;
  double best_fairness = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].val_ctd >= floor && candidates[i].val_fairness < best_fairness) {
      best_fairness = candidates[i].val_fairness;
      selection.index = static_cast<int>(i);
      selection.rule_satisfied = true;
    }
  }
  if (selection.rule_satisfied) return selection;
  double best_ctd = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].val_ctd > best_ctd) {
      best_ctd = candidates[i].val_ctd;
      selection.index = static_cast<int>(i);
    }
  }
  return selection;
}

void write_history_csv(const std::string& path, std::span<const TrainStep> history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "iteration,objective,eta,eta_prime\n";
  out.precision(10);
  for (const auto& step : history)
    out << step.iteration << "," << step.objective << "," << step.eta << "," << step.eta_prime
        << "\n";
}

}  // namespace survdro
