#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "survdro/common.hpp"
#include "survdro/dataset.hpp"

namespace testutil {

inline survdro::SurvivalDataset make_dataset(const std::vector<std::vector<double>>& rows,
                                             const std::vector<double>& times,
                                             const std::vector<int>& events,
                                             int delta_max = 1) {
  survdro::SurvivalDataset ds;
  int n = static_cast<int>(times.size());
  int d = rows.empty() ? 1 : static_cast<int>(rows[0].size());
  ds.features = Eigen::MatrixXd::Zero(n, d);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    for (int c = 0; c < d; ++c) ds.features(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  ds.times = Eigen::Map<const Eigen::VectorXd>(times.data(), n);
  ds.events.resize(n);
  for (int i = 0; i < n; ++i) ds.events[i] = events[static_cast<std::size_t>(i)];
  ds.delta_max = delta_max;
  return ds;
}

// Random right-censored data; event times drawn from a unit-rate exponential
// scaled by exp(effect . x), censoring uniform.
inline survdro::SurvivalDataset random_dataset(int n, int d, std::uint64_t seed,
                                               double censor_scale = 2.0) {
  survdro::Rng rng(seed);
  survdro::SurvivalDataset ds;
  ds.features.resize(n, d);
  ds.times.resize(n);
  ds.events.resize(n);
  Eigen::VectorXd effect(d);
  for (int c = 0; c < d; ++c) effect[c] = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) ds.features(i, c) = rng.normal();
    double rate = std::exp(ds.features.row(i).dot(effect));
    double t = -std::log(1.0 - rng.uniform()) / rate;
    double c = censor_scale * rng.uniform();
    ds.times[i] = std::min(t, c);
    ds.events[i] = t <= c ? 1 : 0;
  }
  // guarantee at least one event and one censored row
  ds.events[0] = 1;
  if (n > 1) ds.events[1] = 0;
  return ds;
}

// Two-group mixture: an 80/20 majority/minority split where the minority's
// linear effect on the hazard points the opposite way.
inline survdro::SurvivalDataset two_group_dataset(int n, std::uint64_t seed, double effect = 1.2,
                                                  double minority_prob = 0.2,
                                                  double censor_rate = 0.3) {
  survdro::Rng rng(seed);
  survdro::SurvivalDataset ds;
  const int d = 2;
  ds.features.resize(n, d);
  ds.times.resize(n);
  ds.events.resize(n);
  survdro::GroupColumn group;
  group.name = "group";
  group.levels = {"majority", "minority"};
  Eigen::Vector2d direction(effect, 0.6 * effect);
  for (int i = 0; i < n; ++i) {
    // rows 0/1 pin one member per group so small draws never lose a group
    bool minority = i == 0 ? false : (i == 1 ? true : rng.uniform() < minority_prob);
    group.ids.push_back(minority ? 1 : 0);
    for (int c = 0; c < d; ++c) ds.features(i, c) = rng.normal();
    double sign = minority ? -1.0 : 1.0;
    double rate = std::exp(sign * ds.features.row(i).dot(direction));
    double t = -std::log(1.0 - rng.uniform()) / rate;
    double c = -std::log(1.0 - rng.uniform()) / censor_rate;
    ds.times[i] = std::min(t, c);
    ds.events[i] = t <= c ? 1 : 0;
  }
  ds.events[0] = 1;
  if (n > 2) ds.events[2] = 0;
  ds.groups.push_back(std::move(group));
  return ds;
}

inline double max_rel_err(std::span<const double> got, std::span<const double> want,
                          double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    double scale = std::max(std::fabs(want[i]), floor);
    worst = std::max(worst, std::fabs(got[i] - want[i]) / scale);
  }
  return worst;
}

}  // namespace testutil
