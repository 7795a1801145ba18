#pragma once

// Independent oracles used by the unit and acceptance suites. These are
// deliberately written from the defining formulas rather than reusing the
// library's code paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "survdro/dataset.hpp"
#include "survdro/metrics.hpp"

namespace oracle {

// Iterated grid scan for the dual threshold: repeated 10^4-point sweeps, each
// zooming into a +-2h window around the incumbent, so the reported minimum is
// accurate far beyond the first sweep's spacing.
inline double eta_grid_minimum(std::span<const double> losses, double c, int points = 10000,
                               int rounds = 3) {
  auto objective = [&](double eta) {
    double mean_sq = 0.0;
    for (double u : losses) {
      double r = u - eta;
      if (r > 0.0) mean_sq += r * r;
    }
    return c * std::sqrt(mean_sq / static_cast<double>(losses.size())) + eta;
  };
  double m = *std::max_element(losses.begin(), losses.end());
  double lo = c > 1.0 ? -m / (c - 1.0) - 1.0 : -std::fabs(m) - 50.0;
  double hi = m + 1.0;
  double best_eta = lo, best_value = objective(lo);
  for (int round = 0; round < rounds; ++round) {
    double h = (hi - lo) / static_cast<double>(points - 1);
    for (int k = 0; k < points; ++k) {
      double eta = lo + h * k;
      double value = objective(eta);
      if (value < best_value) {
        best_value = value;
        best_eta = eta;
      }
    }
    lo = best_eta - 2.0 * h;
    hi = best_eta + 2.0 * h;
  }
  return best_value;
}

// Time-dependent concordance by unordered pair enumeration: pairs with
// Y_i < Y_j need an event at i and compare survival at the earlier time;
// tied times follow the discrete tie ladder.
inline double ctd_enumeration(const survdro::SurvivalDataset& ds,
                              const survdro::SurvivalPrediction& pred) {
  double num = 0.0, den = 0.0;
  for (int a = 0; a < ds.size(); ++a) {
    for (int b = a + 1; b < ds.size(); ++b) {
      int i = a, j = b;
      if (ds.times[j] < ds.times[i]) std::swap(i, j);
      bool ev_i = ds.events[i] != 0, ev_j = ds.events[j] != 0;
      if (ds.times[i] < ds.times[j]) {
        if (!ev_i) continue;
        den += 1.0;
        double si = pred.survival_at(i, ds.times[i]);
        double sj = pred.survival_at(j, ds.times[i]);
        if (si < sj)
          num += 1.0;
        else if (si == sj)
          num += 0.5;
      } else {  // tied observed times
        if (!ev_i && !ev_j) continue;
        den += 1.0;
        double si = pred.survival_at(i, ds.times[i]);
        double sj = pred.survival_at(j, ds.times[j]);
        if (ev_i && ev_j)
          num += (si == sj) ? 1.0 : 0.5;
        else {
          // exactly one event; concordant when the event subject looks riskier
          int event_subject = ev_i ? i : j;
          double se = event_subject == i ? si : sj;
          double sc = event_subject == i ? sj : si;
          num += (se < sc) ? 1.0 : 0.5;
        }
      }
    }
  }
  if (den == 0.0) throw survdro::ValidationError("oracle: no comparable pairs");
  return num / den;
}

// Literal transliteration of the discrete concordance-imparity pseudocode
// (ordered pairs, both-events / one-censored tie branches spelled out).
inline std::vector<double> concordance_fractions(const survdro::SurvivalDataset& ds,
                                                 std::span<const double> risk,
                                                 const survdro::GroupColumn& partition) {
  int k = partition.group_count();
  std::vector<double> num(static_cast<std::size_t>(k), 0.0);
  std::vector<double> den(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.size(); ++j) {
      if (i == j) continue;
      double yi = ds.times[i], yj = ds.times[j];
      int di = ds.events[i] != 0 ? 1 : 0, dj = ds.events[j] != 0 ? 1 : 0;
      if ((yi < yj && di == 0) || (yj < yi && dj == 0) || (yi == yj && di == 0 && dj == 0))
        continue;
      auto g = static_cast<std::size_t>(partition.ids[static_cast<std::size_t>(i)]);
      den[g] += 1.0;
      double fi = risk[static_cast<std::size_t>(i)], fj = risk[static_cast<std::size_t>(j)];
      if (yi < yj) {
        if (fi > fj)
          num[g] += 1.0;
        else if (fi == fj)
          num[g] += 0.5;
      } else if (yi > yj) {
        if (fi < fj)
          num[g] += 1.0;
        else if (fi == fj)
          num[g] += 0.5;
      } else {
        if (di == 1 && dj == 1) {
          if (fi == fj)
            num[g] += 1.0;
          else
            num[g] += 0.5;
        } else if (di == 0 && dj == 1 && fi < fj) {
          num[g] += 1.0;
        } else if (di == 1 && dj == 0 && fi > fj) {
          num[g] += 1.0;
        } else {
          num[g] += 0.5;
        }
      }
    }
  }
  std::vector<double> fractions(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) {
    if (den[static_cast<std::size_t>(a)] == 0.0)
      throw survdro::ValidationError("oracle: group without valid pairs");
    fractions[static_cast<std::size_t>(a)] =
        num[static_cast<std::size_t>(a)] / den[static_cast<std::size_t>(a)];
  }
  return fractions;
}

inline double ci_enumeration(const survdro::SurvivalDataset& ds, std::span<const double> risk,
                             const survdro::GroupColumn& partition) {
  std::vector<double> cf = concordance_fractions(ds, risk, partition);
  double worst = 0.0;
  for (double a : cf)
    for (double b : cf) worst = std::max(worst, std::fabs(a - b));
  return worst * 100.0;
}

// Direct-summation IPCW Brier score with its own Kaplan-Meier estimate of the
// censoring distribution.
inline double ibs_direct(const survdro::SurvivalDataset& ds,
                         const survdro::SurvivalPrediction& pred) {
  std::vector<double> distinct;
  for (int i = 0; i < ds.size(); ++i) distinct.push_back(ds.times[i]);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  auto km_censoring = [&](double t, bool left_limit) {
    double value = 1.0;
    for (double u : distinct) {
      if (left_limit ? (u >= t) : (u > t)) break;
      int censored = 0, at_risk = 0;
      for (int i = 0; i < ds.size(); ++i) {
        if (ds.times[i] >= u) ++at_risk;
        if (ds.times[i] == u && ds.events[i] == 0) ++censored;
      }
      value *= 1.0 - static_cast<double>(censored) / static_cast<double>(at_risk);
    }
    return std::max(value, 1e-8);
  };

  const int m = pred.grid.size();
  std::vector<double> brier(static_cast<std::size_t>(m), 0.0);
  for (int l = 0; l < m; ++l) {
    double t = pred.grid.point(l + 1);
    double total = 0.0;
    for (int i = 0; i < ds.size(); ++i) {
      double s = pred.survival(i, l);
      if (ds.times[i] <= t && ds.events[i] != 0)
        total += s * s / km_censoring(ds.times[i], true);
      else if (ds.times[i] > t)
        total += (1.0 - s) * (1.0 - s) / km_censoring(t, false);
    }
    brier[static_cast<std::size_t>(l)] = total / static_cast<double>(ds.size());
  }
  if (m == 1) return brier[0];
  double integral = 0.0;
  for (int l = 0; l + 1 < m; ++l)
    integral += 0.5 * (brier[static_cast<std::size_t>(l)] + brier[static_cast<std::size_t>(l + 1)]) *
                (pred.grid.point(l + 2) - pred.grid.point(l + 1));
  return integral / (pred.grid.point(m) - pred.grid.point(1));
}

}  // namespace oracle
