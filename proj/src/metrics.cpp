#include "survdro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace survdro {

double SurvivalPrediction::survival_at(int subject, double t) const {
  if (grid.points.empty() || t < grid.points.front()) return 1.0;
  auto it = std::upper_bound(grid.points.begin(), grid.points.end(), t);
  auto col = static_cast<Eigen::Index>(it - grid.points.begin()) - 1;
  return survival(subject, col);
}

BreslowBaseline breslow_baseline(const SurvivalDataset& ds, std::span<const double> scores) {
  BreslowBaseline base;
  base.grid = event_time_grid(ds);
  const int m = base.grid.size();
  base.hazard.resize(static_cast<std::size_t>(m));
  double pivot = *std::max_element(scores.begin(), scores.end());
  for (int l = 1; l <= m; ++l) {
    double t = base.grid.point(l);
    int deaths = 0;
    double risk = 0.0;
    for (int i = 0; i < ds.size(); ++i) {
      if (ds.events[i] != 0 && ds.times[i] == t) ++deaths;
      if (ds.times[i] >= t) risk += std::exp(scores[static_cast<std::size_t>(i)] - pivot);
    }
    base.hazard[static_cast<std::size_t>(l - 1)] =
        static_cast<double>(deaths) * std::exp(-pivot) / risk;
  }
  return base;
}

std::vector<double> survival_curve(const BreslowBaseline& baseline, double score) {
  std::vector<double> surv(baseline.hazard.size());
  double cumulative = 0.0;
  double partial_hazard = std::exp(score);
  for (std::size_t l = 0; l < baseline.hazard.size(); ++l) {
    cumulative += baseline.hazard[l];
    surv[l] = std::exp(-cumulative * partial_hazard);
  }
  return surv;
}

std::vector<double> observed_time_percentiles(const SurvivalDataset& ds) {
  std::vector<double> sorted(ds.times.data(), ds.times.data() + ds.times.size());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  return {quantile(0.25), quantile(0.5), quantile(0.75)};
}

namespace {

std::vector<int> vec_int(const Eigen::VectorXi& v) { return {v.data(), v.data() + v.size()}; }
std::vector<double> vec_dbl(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Kaplan-Meier estimate of the censoring survival function G.
struct CensoringSurvival {
  std::vector<double> times;   // distinct observed times, ascending
  std::vector<double> values;  // G evaluated at each time (right-continuous)
  bool clamped = false;

  double at(double t) const {  // G(t)
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }
  double left(double t) const {  // G(t^-)
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

CensoringSurvival censoring_survival(const SurvivalDataset& ds) {
  std::map<double, std::pair<int, int>> at_time;  // time -> (censored count, total count)
  for (int i = 0; i < ds.size(); ++i) {
    auto& entry = at_time[ds.times[i]];
    if (ds.events[i] == 0) ++entry.first;
    ++entry.second;
  }
  CensoringSurvival g;
  int at_risk = ds.size();
  double value = 1.0;
  for (const auto& [time, counts] : at_time) {
    value *= 1.0 - static_cast<double>(counts.first) / static_cast<double>(at_risk);
    at_risk -= counts.second;
    g.times.push_back(time);
    g.values.push_back(value);
  }
  return g;
}

double clamp_weight(double g, bool& warned) {
  if (g >= 1e-8) return g;
  if (!warned) {
    std::fprintf(stderr, "survdro: censoring survival fell below 1e-8; weights clamped\n");
    warned = true;
  }
  return 1e-8;
}

}  // namespace

double concordance_td(const SurvivalDataset& ds, const SurvivalPrediction& pred) {
  std::vector<int> ones(static_cast<std::size_t>(ds.size()), 0);
  auto y = vec_dbl(ds.times);
  auto ev = vec_int(ds.events);
  ConcordanceCounts counts = concordance_counts(
      y, ev, ones, 1, [&](int i, double t) { return -pred.survival_at(i, t); });
  if (counts.denominator[0] == 0.0)
    throw ValidationError("no comparable pairs for the concordance index");
  return counts.numerator[0] / counts.denominator[0];
}

double ibs(const SurvivalDataset& ds, const SurvivalPrediction& pred) {
  const int m = pred.grid.size();
  const int n = ds.size();
  CensoringSurvival g = censoring_survival(ds);
  bool warned = false;

  std::vector<double> brier(static_cast<std::size_t>(m), 0.0);
  for (int l = 0; l < m; ++l) {
    double t = pred.grid.point(l + 1);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = pred.survival(i, l);
      if (ds.times[i] <= t && ds.events[i] != 0) {
        total += s * s / clamp_weight(g.left(ds.times[i]), warned);
      } else if (ds.times[i] > t) {
        total += (1.0 - s) * (1.0 - s) / clamp_weight(g.at(t), warned);
      }
    }
    brier[static_cast<std::size_t>(l)] = total / static_cast<double>(n);
  }
  if (m == 1) return brier[0];
  double integral = 0.0;
  for (int l = 0; l + 1 < m; ++l)
    integral += 0.5 * (brier[static_cast<std::size_t>(l)] + brier[static_cast<std::size_t>(l + 1)]) *
                (pred.grid.point(l + 2) - pred.grid.point(l + 1));
  return integral / (pred.grid.point(m) - pred.grid.point(1));
}

namespace {

double imparity_from_counts(const ConcordanceCounts& counts, const GroupColumn& partition) {
  const int k = partition.group_count();
  std::vector<double> fraction(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) {
    if (counts.denominator[static_cast<std::size_t>(a)] == 0.0)
      throw ValidationError("group '" + partition.levels[static_cast<std::size_t>(a)] +
                            "' has no valid pair for concordance imparity");
    fraction[static_cast<std::size_t>(a)] =
        counts.numerator[static_cast<std::size_t>(a)] / counts.denominator[static_cast<std::size_t>(a)];
  }
  double worst = 0.0;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (a != b)
        worst = std::max(worst, std::fabs(fraction[static_cast<std::size_t>(a)] -
                                          fraction[static_cast<std::size_t>(b)]));
  return worst * 100.0;
}

}  // namespace

double concordance_imparity(const SurvivalDataset& ds, std::span<const double> risk,
                            const GroupColumn& partition) {
  auto y = vec_dbl(ds.times);
  auto ev = vec_int(ds.events);
  ConcordanceCounts counts =
      concordance_counts(y, ev, partition.ids, partition.group_count(),
                         [&](int i, double) { return risk[static_cast<std::size_t>(i)]; });
  return imparity_from_counts(counts, partition);
}

double concordance_imparity_survival(const SurvivalDataset& ds, const SurvivalPrediction& pred,
                                     const GroupColumn& partition, std::span<const double> times) {
  double total = 0.0;
  for (double t : times) {
    std::vector<double> risk(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i)
      risk[static_cast<std::size_t>(i)] = 1.0 - pred.survival_at(i, t);
    total += concordance_imparity(ds, risk, partition);
  }
  return total / static_cast<double>(times.size());
}

double fairness_individual(std::span<const double> outcome, const Eigen::MatrixXd& features,
                           double gamma) {
  return individual_unfairness<double>(outcome, features, gamma);
}

double fairness_individual_survival(const SurvivalPrediction& pred, const Eigen::MatrixXd& features,
                                    double gamma, std::span<const double> times) {
  double total = 0.0;
  for (double t : times) {
    std::vector<double> outcome(static_cast<std::size_t>(pred.size()));
    for (int i = 0; i < pred.size(); ++i) outcome[static_cast<std::size_t>(i)] = pred.survival_at(i, t);
    total += individual_unfairness<double>(outcome, features, gamma);
  }
  return total / static_cast<double>(times.size());
}

double fairness_group(std::span<const double> outcome, const GroupColumn& partition) {
  return group_unfairness<double>(outcome, partition.ids, partition.group_count());
}

double fairness_group_survival(const SurvivalPrediction& pred, const GroupColumn& partition,
                               std::span<const double> times) {
  double total = 0.0;
  for (double t : times) {
    std::vector<double> outcome(static_cast<std::size_t>(pred.size()));
    for (int i = 0; i < pred.size(); ++i) outcome[static_cast<std::size_t>(i)] = pred.survival_at(i, t);
    total += group_unfairness<double>(outcome, partition.ids, partition.group_count());
  }
  return total / static_cast<double>(times.size());
}

double fairness_intersectional(std::span<const double> outcome,
                               std::span<const GroupColumn> partitions) {
  if (partitions.empty()) throw ValidationError("intersectional fairness needs at least one partition");
  const int n = static_cast<int>(outcome.size());
  // cell id = mixed-radix code over the partitions
  int cell_count = 1;
  for (const auto& p : partitions) cell_count *= p.group_count();
  std::vector<double> sum(static_cast<std::size_t>(cell_count), 0.0);
  std::vector<int> count(static_cast<std::size_t>(cell_count), 0);
  for (int i = 0; i < n; ++i) {
    int code = 0;
    for (const auto& p : partitions) code = code * p.group_count() + p.ids[static_cast<std::size_t>(i)];
    sum[static_cast<std::size_t>(code)] += outcome[static_cast<std::size_t>(i)];
    ++count[static_cast<std::size_t>(code)];
  }
  std::vector<double> means;
  bool skipped = false;
  for (int c = 0; c < cell_count; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0) {
      skipped = true;
      continue;
    }
    double mean = sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)];
    if (!(mean > 0.0))
      throw NumericError("intersectional fairness requires positive mean outcomes");
    means.push_back(mean);
  }
  if (skipped) std::fprintf(stderr, "survdro: empty intersectional cells skipped\n");
  double worst = 0.0;
  for (double a : means)
    for (double b : means) worst = std::max(worst, std::fabs(std::log(a / b)));
  return worst;
}

double fairness_intersectional_survival(const SurvivalPrediction& pred,
                                        std::span<const GroupColumn> partitions,
                                        std::span<const double> times) {
  double total = 0.0;
  for (double t : times) {
    std::vector<double> outcome(static_cast<std::size_t>(pred.size()));
    for (int i = 0; i < pred.size(); ++i) outcome[static_cast<std::size_t>(i)] = pred.survival_at(i, t);
    total += fairness_intersectional(outcome, partitions);
  }
  return total / static_cast<double>(times.size());
}

namespace {

double censoring_fairness_over_times(const SurvivalDataset& ds, const SurvivalPrediction& pred,
                                     double gamma, std::span<const double> times,
                                     std::span<const int> group_ids, bool within_group) {
  auto y = vec_dbl(ds.times);
  auto ev = vec_int(ds.events);
  double total = 0.0;
  for (double t : times) {
    std::vector<double> outcome(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) outcome[static_cast<std::size_t>(i)] = pred.survival_at(i, t);
    total += censoring_unfairness<double>(y, ev, outcome, ds.features, gamma, group_ids, within_group);
  }
  return total / static_cast<double>(times.size());
}

}  // namespace

double fairness_censoring_individual(const SurvivalDataset& ds, const SurvivalPrediction& pred,
                                     double gamma, std::span<const double> times) {
  std::vector<int> ones(static_cast<std::size_t>(ds.size()), 0);
  return censoring_fairness_over_times(ds, pred, gamma, times, ones, false);
}

double fairness_censoring_group(const SurvivalDataset& ds, const SurvivalPrediction& pred,
                                const GroupColumn& partition, double gamma,
                                std::span<const double> times) {
  return censoring_fairness_over_times(ds, pred, gamma, times, partition.ids, true);
}

std::string MetricsReport::csv_header() { return "ctd,ibs,ci_pct,f_i,f_g,f_cap,f_ci,f_cg"; }

std::string MetricsReport::csv_row() const {
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer), "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g", ctd, ibs, ci_pct,
                f_i, f_g, f_cap, f_ci, f_cg);
  return buffer;
}

}  // namespace survdro
