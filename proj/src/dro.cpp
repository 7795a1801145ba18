#include "survdro/dro.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace survdro {

double c_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  double r = 1.0 / alpha - 1.0;
  return std::sqrt(2.0 * r * r + 1.0);
}

double dro_objective(std::span<const double> losses, double eta, double c_alpha) {
  double mean_sq = 0.0;
  for (double u : losses) {
    double r = u - eta;
    if (r > 0.0) mean_sq += r * r;
  }
  mean_sq /= static_cast<double>(losses.size());
  return c_alpha * std::sqrt(mean_sq) + eta;
}

namespace {

// Subgradient of the dual objective: 1 - C * mean(r) / sqrt(mean(r^2)), with
// r = [u - eta]_+; equals 1 once every loss sits at or below eta.
double eta_subgradient(std::span<const double> losses, double eta, double c) {
  double sum = 0.0, sum_sq = 0.0;
  for (double u : losses) {
    double r = u - eta;
    if (r > 0.0) {
      sum += r;
      sum_sq += r * r;
    }
  }
  if (sum_sq == 0.0) return 1.0;
  double n = static_cast<double>(losses.size());
  return 1.0 - c * (sum / n) / std::sqrt(sum_sq / n);
}

}  // namespace

EtaSolution solve_eta(std::span<const double> losses, double c_alpha, double tol,
                      int max_bracket_expansions) {
  if (losses.empty()) throw ValidationError("solve_eta needs at least one loss value");
  if (!(tol > 0.0)) throw ConfigError("eta tolerance must be positive");
  double max_loss = *std::max_element(losses.begin(), losses.end());

  if (c_alpha == 1.0) {
    double mean = 0.0;
    for (double u : losses) mean += u;
    mean /= static_cast<double>(losses.size());
    return {*std::min_element(losses.begin(), losses.end()), mean};
  }
  if (c_alpha < 1.0) throw ConfigError("c_alpha must be >= 1");

  double lo = -max_loss / (c_alpha - 1.0) - 1.0;
  double hi = max_loss + 1.0;
  for (int i = 0; i < max_bracket_expansions && eta_subgradient(losses, lo, c_alpha) > 0.0; ++i)
    lo -= (hi - lo);
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (eta_subgradient(losses, mid, c_alpha) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }

  // The minimizer can sit exactly at the largest loss (where the objective has
  // a kink); evaluating both candidates keeps constant-loss inputs exact.
  // Ties go to the larger eta.
  EtaSolution best{0.5 * (lo + hi), dro_objective(losses, 0.5 * (lo + hi), c_alpha)};
  double at_max = dro_objective(losses, max_loss, c_alpha);
  if (at_max < best.value || (at_max == best.value && max_loss > best.eta))
    best = {max_loss, at_max};
  return best;
}

namespace {

struct LossGraph {
  ad::Tape tape;
  std::vector<ad::Var> leaves;  // theta then baseline block
  std::span<const ad::Var> theta() const {
    return {leaves.data(), leaves.size() - baseline_size};
  }
  std::span<const ad::Var> baseline() const {
    return {leaves.data() + leaves.size() - baseline_size, baseline_size};
  }
  std::size_t baseline_size = 0;
};

void build_leaves(LossGraph& graph, const ModelParams& params) {
  graph.leaves.reserve(static_cast<std::size_t>(params.theta.size() + params.log_hazard.size()));
  for (Eigen::Index i = 0; i < params.theta.size(); ++i)
    graph.leaves.push_back(graph.tape.leaf(params.theta[i]));
  for (Eigen::Index i = 0; i < params.log_hazard.size(); ++i)
    graph.leaves.push_back(graph.tape.leaf(params.log_hazard[i]));
  graph.baseline_size = static_cast<std::size_t>(params.log_hazard.size());
}

std::vector<ad::Var> graph_losses(LossGraph& graph, const SurvivalDataset& ds,
                                  std::span<const int> query, std::span<const int> reference,
                                  bool contains, const ModelSpec& spec, const LossSpec& loss) {
  return pointwise_losses<ad::Var>(ds, query, reference, contains, spec, graph.theta(),
                                   graph.baseline(), loss);
}

std::vector<double> values_of(std::span<const ad::Var> vars) {
  std::vector<double> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.value());
  return out;
}

// Dual head at fixed eta. At c == 1 the objective degenerates to the sample
// mean, whose gradient is the plain average; otherwise C * sqrt(mean r^2) + eta.
// Returns an empty optional when every loss sits at or below eta (zero step).
std::optional<ad::Var> dro_head(ad::Tape& tape, std::span<const ad::Var> losses, double eta,
                                double c) {
  if (c == 1.0) {
    ad::Var mean = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i) mean = mean + losses[i];
    return mean / static_cast<double>(losses.size());
  }
  ad::Var sum_sq = tape.constant(0.0);
  bool any = false;
  for (const auto& u : losses) {
    if (u.value() <= eta) continue;  // relu would zero these terms anyway
    ad::Var r = u - eta;
    sum_sq = sum_sq + r * r;
    any = true;
  }
  if (!any) return std::nullopt;
  return c * sqrt(sum_sq / static_cast<double>(losses.size())) + eta;
}

Eigen::VectorXd gradient_of(LossGraph& graph, ad::Var root) {
  std::vector<double> adjoint = graph.tape.backward(root);
  Eigen::VectorXd grad(static_cast<Eigen::Index>(graph.leaves.size()));
  for (std::size_t i = 0; i < graph.leaves.size(); ++i)
    grad[static_cast<Eigen::Index>(i)] = adjoint[static_cast<std::size_t>(graph.leaves[i].index)];
  return grad;
}

void apply_params(ModelParams& params, const Eigen::VectorXd& flat) {
  params.theta = flat.head(params.theta.size());
  if (params.log_hazard.size() > 0) params.log_hazard = flat.tail(params.log_hazard.size());
}

Eigen::VectorXd flatten(const ModelParams& params) {
  Eigen::VectorXd flat(params.theta.size() + params.log_hazard.size());
  flat.head(params.theta.size()) = params.theta;
  if (params.log_hazard.size() > 0) flat.tail(params.log_hazard.size()) = params.log_hazard;
  return flat;
}

void check_finite(double value, int iteration) {
  if (!std::isfinite(value))
    throw TrainingError("DRO objective became non-finite at iteration " + std::to_string(iteration));
}

}  // namespace

std::vector<double> pointwise_loss_values(const SurvivalDataset& ds, std::span<const int> query,
                                          std::span<const int> reference,
                                          bool reference_contains_query, const ModelSpec& spec,
                                          const ModelParams& params, const LossSpec& loss) {
  std::vector<double> theta(params.theta.data(), params.theta.data() + params.theta.size());
  std::vector<double> baseline(params.log_hazard.data(),
                               params.log_hazard.data() + params.log_hazard.size());
  return pointwise_losses<double>(ds, query, reference, reference_contains_query, spec, theta,
                                  baseline, loss);
}

Eigen::VectorXd dro_grad_theta(const SurvivalDataset& ds, std::span<const int> query,
                               std::span<const int> reference, bool reference_contains_query,
                               const ModelSpec& spec, const ModelParams& params,
                               const LossSpec& loss, double eta, double c_alpha) {
  LossGraph graph;
  build_leaves(graph, params);
  std::vector<ad::Var> losses =
      graph_losses(graph, ds, query, reference, reference_contains_query, spec, loss);
  std::optional<ad::Var> head = dro_head(graph.tape, losses, eta, c_alpha);
  if (!head) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(graph.leaves.size()));
  return gradient_of(graph, *head);
}

double split_dro_objective(const SurvivalDataset& ds, std::span<const int> train_half,
                           std::span<const int> fixed_half, const ModelSpec& spec,
                           const ModelParams& params, const LossSpec& loss, double eta,
                           double c_alpha) {
  if (train_half.empty()) throw ValidationError("split objective needs a nonempty training half");
  std::vector<double> losses =
      pointwise_loss_values(ds, train_half, fixed_half, false, spec, params, loss);
  return dro_objective(losses, eta, c_alpha);
}

namespace {

TrainResult run_dro_loop(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                         const DroConfig& dro, const TrainConfig& cfg,
                         const std::vector<std::vector<int>>& folds,  // empty = heuristic mode
                         ModelParams initial) {
  dro.validate();
  cfg.validate();
  const double c = dro.c();
  TrainResult result;
  result.params = std::move(initial);
  Optimizer optimizer(cfg.optimizer, cfg.learning_rate,
                      result.params.theta.size() + result.params.log_hazard.size());
  std::vector<int> rows = all_rows(ds);
  std::vector<std::vector<int>> complements;
  for (const auto& fold : folds) {
    std::vector<int> rest;
    std::vector<char> member(static_cast<std::size_t>(ds.size()), 0);
    for (int i : fold) member[static_cast<std::size_t>(i)] = 1;
    for (int i = 0; i < ds.size(); ++i)
      if (!member[static_cast<std::size_t>(i)]) rest.push_back(i);
    complements.push_back(std::move(rest));
  }

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    LossGraph graph;
    build_leaves(graph, result.params);
    TrainStep step{iter, 0.0};
    std::optional<ad::Var> total;

    if (folds.empty()) {
      std::vector<ad::Var> losses = graph_losses(graph, ds, rows, rows, true, spec, loss);
      EtaSolution eta = solve_eta(values_of(losses), c, dro.eta_tolerance,
                                  dro.max_bracket_expansions);
      step.eta = eta.eta;
      step.objective = eta.value;
      total = dro_head(graph.tape, losses, eta.eta, c);
    } else {
      double objective = 0.0;
      for (std::size_t k = 0; k < folds.size(); ++k) {
        std::vector<ad::Var> losses =
            graph_losses(graph, ds, folds[k], complements[k], false, spec, loss);
        EtaSolution eta = solve_eta(values_of(losses), c, dro.eta_tolerance,
                                    dro.max_bracket_expansions);
        if (k == 0) step.eta = eta.eta;
        if (k == 1) step.eta_prime = eta.eta;
        objective += eta.value;
        std::optional<ad::Var> head = dro_head(graph.tape, losses, eta.eta, c);
        if (head) total = total ? *total + *head : *head;
      }
      step.objective = objective / static_cast<double>(folds.size());
      if (total) total = *total / static_cast<double>(folds.size());
    }

    check_finite(step.objective, iter);
    result.history.push_back(step);
    if (!total) continue;  // every loss at or below eta: zero gradient
    Eigen::VectorXd grad = gradient_of(graph, *total);
    Eigen::VectorXd flat = flatten(result.params);
    optimizer.step(flat, grad);
    apply_params(result.params, flat);
  }
  return result;
}

}  // namespace

TrainResult train_dro(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                      const DroConfig& dro, const TrainConfig& cfg) {
  ds.validate();
  return run_dro_loop(ds, spec, loss, dro, cfg, {}, init_params(spec, cfg.seed));
}

TrainResult train_split_dro(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                            const DroConfig& dro, const TrainConfig& cfg) {
  ds.validate();
  dro.validate();
  std::vector<std::vector<int>> folds;
  if (dro.folds == 2) {
    SplitAssignment split = stratified_split(ds, 0.5, dro.seed);
    folds = {split.d1, split.d2};
  } else {
    folds = stratified_kfold(ds, dro.folds, dro.seed);
  }
  return run_dro_loop(ds, spec, loss, dro, cfg, folds, init_params(spec, cfg.seed));
}

TrainResult train_exact_dro_cox(const SurvivalDataset& ds, const ModelSpec& spec,
                                const DroConfig& dro, const TrainConfig& cfg) {
  ds.validate();
  TimeGrid grid = event_time_grid(ds);
  SurvivalDataset snapped = snap_censored_times(ds, grid);
  LossSpec loss = LossSpec::cox_full(grid);

  ModelParams initial = init_params(spec, cfg.seed);
  std::vector<double> scores(static_cast<std::size_t>(snapped.size()));
  for (int i = 0; i < snapped.size(); ++i)
    scores[static_cast<std::size_t>(i)] =
        forward_scalar(spec, initial.theta, snapped.features.row(i).transpose());
  std::vector<double> y(snapped.times.data(), snapped.times.data() + snapped.size());
  std::vector<int> ev(snapped.events.data(), snapped.events.data() + snapped.size());
  initial.log_hazard = optimal_log_hazard(y, ev, scores, grid);

  return run_dro_loop(snapped, spec, loss, dro, cfg, {}, std::move(initial));
}

}  // namespace survdro
