#pragma once

#include <span>
#include <vector>

#include "survdro/training.hpp"

namespace survdro {

// Radius coefficient of the chi-square ambiguity ball for minimum
// subpopulation probability alpha: sqrt(2 (1/alpha - 1)^2 + 1).
double c_alpha(double alpha);

struct DroConfig {
  double alpha = 0.5;
  double eta_tolerance = 1e-8;
  int max_bracket_expansions = 60;
  int folds = 2;  // sample-splitting fold count; 2 = two-fold cross-fitting
  std::uint64_t seed = 0;

  double c() const { return c_alpha(alpha); }
  void validate() const {
    (void)c_alpha(alpha);
    if (!(eta_tolerance > 0.0)) throw ConfigError("eta tolerance must be positive");
    if (folds < 2) throw ConfigError("split DRO needs at least two folds");
  }
};

// C * sqrt(mean([u_i - eta]_+^2)) + eta.
double dro_objective(std::span<const double> losses, double eta, double c_alpha);

struct EtaSolution {
  double eta = 0.0;
  double value = 0.0;
};

// Minimizes the dual objective over eta. For c_alpha > 1 this bisects the
// subgradient over the bracket [-M/(C-1) - 1, M + 1] with M = max(losses);
// at c_alpha == 1 (alpha = 1) the infimum equals the sample mean and is
// returned analytically with eta = min(losses).
EtaSolution solve_eta(std::span<const double> losses, double c_alpha, double tol = 1e-8,
                      int max_bracket_expansions = 60);

// Per-point losses of `query` rows (adjacency from `reference`) as plain values.
std::vector<double> pointwise_loss_values(const SurvivalDataset& ds, std::span<const int> query,
                                          std::span<const int> reference,
                                          bool reference_contains_query, const ModelSpec& spec,
                                          const ModelParams& params, const LossSpec& loss);

// Gradient of the fixed-eta objective w.r.t. the flat parameters (theta
// followed by the baseline block when the loss carries one). Zero when every
// loss sits at or below eta.
Eigen::VectorXd dro_grad_theta(const SurvivalDataset& ds, std::span<const int> query,
                               std::span<const int> reference, bool reference_contains_query,
                               const ModelSpec& spec, const ModelParams& params,
                               const LossSpec& loss, double eta, double c_alpha);

// One-sided sample-splitting objective: per-point losses of `train_half` with
// adjacency restricted to `fixed_half`, plugged into the dual at `eta`.
double split_dro_objective(const SurvivalDataset& ds, std::span<const int> train_half,
                           std::span<const int> fixed_half, const ModelSpec& spec,
                           const ModelParams& params, const LossSpec& loss, double eta,
                           double c_alpha);

// Alternating minimization on the full sample: refresh per-point losses,
// re-solve eta by bisection, take one gradient step on theta.
TrainResult train_dro(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                      const DroConfig& dro, const TrainConfig& cfg);

// Cross-fitted sample-splitting variant: one dual variable per fold, and the
// theta step averages the per-fold gradients.
TrainResult train_split_dro(const SurvivalDataset& ds, const ModelSpec& spec, const LossSpec& loss,
                            const DroConfig& dro, const TrainConfig& cfg);

// Cox with the lifted piecewise-constant baseline: censored times are snapped
// to the event grid, the baseline block starts at its closed-form optimum,
// and (theta, baseline) take joint gradient steps.
TrainResult train_exact_dro_cox(const SurvivalDataset& ds, const ModelSpec& spec,
                                const DroConfig& dro, const TrainConfig& cfg);

}  // namespace survdro
