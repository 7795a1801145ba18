#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "survdro/losses.hpp"
#include "survdro/models.hpp"

namespace survdro {

enum class LossFamily { Cox, DeepHit, CoxFull };

// Binds a model to a per-point loss: which family, how adjacency is formed,
// and the family-specific configuration. CoxFull expects snapped censored
// times and carries the event-time grid the baseline parameters live on.
struct LossSpec {
  LossFamily family = LossFamily::Cox;
  AdjacencyKind adjacency = AdjacencyKind::Cox;
  DeepHitConfig deephit;
  TimeGrid full_cox_grid;
  int delta_max = 1;

  static LossSpec cox() { return LossSpec{}; }
  static LossSpec cox_full(TimeGrid grid) {
    LossSpec spec;
    spec.family = LossFamily::CoxFull;
    spec.adjacency = AdjacencyKind::None;
    spec.full_cox_grid = std::move(grid);
    return spec;
  }
  static LossSpec deep_hit(DeepHitConfig cfg, int delta_max = 1) {
    LossSpec spec;
    spec.family = LossFamily::DeepHit;
    spec.adjacency = AdjacencyKind::DeepHit;
    spec.deephit = std::move(cfg);
    spec.delta_max = delta_max;
    return spec;
  }
};

namespace detail {

template <class S>
struct ThetaSpanAt {
  std::span<const S> v;
  S operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

}  // namespace detail

// Per-point losses of `query` rows; adjacency sets are formed from `reference`
// rows. In the un-split losses, query == reference and a point's own term is
// part of the shared risk-set sums; pass reference_contains_query = true for
// that mode. For CoxFull the reference is ignored (no coupling) and
// `log_hazard` must have grid-size entries.
template <class S>
std::vector<S> pointwise_losses(const SurvivalDataset& ds, std::span<const int> query,
                                std::span<const int> reference, bool reference_contains_query,
                                const ModelSpec& spec, std::span<const S> theta,
                                std::span<const S> log_hazard, const LossSpec& loss) {
  detail::ThetaSpanAt<S> theta_at{theta};
  const std::size_t nq = query.size();

  if (loss.family == LossFamily::CoxFull) {
    if (static_cast<int>(log_hazard.size()) != loss.full_cox_grid.size())
      throw ValidationError("baseline parameter count must match the event grid");
    std::vector<S> prefix = integral_prefix_from_log_hazard<S>(log_hazard, loss.full_cox_grid);
    std::vector<S> losses;
    losses.reserve(nq);
    for (int row : query) {
      S f = forward_scalar_t<S>(spec, theta_at, ds.features.row(row).transpose());
      losses.push_back(cox_full_individual_loss_prepared<S>(ds.times[row], ds.events[row], f,
                                                            log_hazard, prefix, loss.full_cox_grid));
    }
    return losses;
  }

  if (loss.family == LossFamily::Cox) {
    std::vector<double> y_query(nq);
    std::vector<int> ev_query(nq);
    std::vector<S> f_query;
    f_query.reserve(nq);
    std::unordered_map<int, std::size_t> ref_slot;
    std::vector<double> y_ref(reference.size());
    std::vector<S> f_ref;
    f_ref.reserve(reference.size());
    for (std::size_t k = 0; k < reference.size(); ++k) {
      int row = reference[k];
      y_ref[k] = ds.times[row];
      f_ref.push_back(forward_scalar_t<S>(spec, theta_at, ds.features.row(row).transpose()));
      ref_slot.emplace(row, k);
    }
    for (std::size_t k = 0; k < nq; ++k) {
      int row = query[k];
      y_query[k] = ds.times[row];
      ev_query[k] = ds.events[row];
      auto hit = ref_slot.find(row);
      if (hit != ref_slot.end())
        f_query.push_back(f_ref[hit->second]);
      else
        f_query.push_back(forward_scalar_t<S>(spec, theta_at, ds.features.row(row).transpose()));
    }
    if (loss.adjacency == AdjacencyKind::None) {
      // self-only risk sets: every per-point loss collapses to zero
      std::vector<double> empty_y;
      std::vector<S> empty_f;
      return cox_pointwise_losses<S>(y_query, ev_query, f_query, empty_y, empty_f, false);
    }
    return cox_pointwise_losses<S>(y_query, ev_query, f_query, y_ref, f_ref,
                                   reference_contains_query);
  }

  // DeepHit family
  const DeepHitConfig& cfg = loss.deephit;
  const TimeGrid& grid = cfg.grid;
  const int m = grid.size();
  const bool competing = loss.delta_max > 1;
  const bool need_ranking = cfg.beta < 1.0 && loss.adjacency != AdjacencyKind::None;

  // pmf per query row (model outputs enter the likelihood term)
  std::unordered_map<int, std::vector<S>> pmf_by_row;
  auto pmf_of = [&](int row) -> const std::vector<S>& {
    auto it = pmf_by_row.find(row);
    if (it != pmf_by_row.end()) return it->second;
    auto inserted = pmf_by_row.emplace(
        row, forward_simplex_t<S>(spec, theta_at, ds.features.row(row).transpose()));
    return inserted.first->second;
  };

  // survival (or per-event cumulative incidence) for reference rows, used by
  // the ranking term
  std::unordered_map<int, std::vector<S>> ref_curves;
  if (need_ranking) {
    for (int row : reference) {
      const std::vector<S>& pmf = pmf_of(row);
      if (!competing) {
        ref_curves.emplace(row, survival_from_pmf<S>(pmf));
      } else {
        std::vector<S> cif;  // event-major cumulative sums, delta_max * m
        cif.reserve(pmf.size());
        for (int delta = 0; delta < loss.delta_max; ++delta)
          for (int l = 0; l < m; ++l) {
            S cell = pmf[static_cast<std::size_t>(delta * m + l)];
            cif.push_back(l == 0 ? cell : cif.back() + cell);
          }
        ref_curves.emplace(row, std::move(cif));
      }
    }
  }

  std::vector<S> losses;
  losses.reserve(nq);
  for (int row : query) {
    const std::vector<S>& pmf = pmf_of(row);
    int kappa = grid.quantize_clamped(ds.times[row]);
    std::vector<S> adjacent;
    if (need_ranking && ds.events[row] != 0) {
      for (int ref_row : reference) {
        if (ref_row == row) continue;
        if (grid.quantize_clamped(ds.times[ref_row]) <= kappa) continue;
        const std::vector<S>& curve = ref_curves.at(ref_row);
        if (!competing)
          adjacent.push_back(curve[static_cast<std::size_t>(kappa - 1)]);
        else
          adjacent.push_back(curve[static_cast<std::size_t>((ds.events[row] - 1) * m + (kappa - 1))]);
      }
    }
    if (!competing)
      losses.push_back(deephit_individual_loss<S>(ds.times[row], ds.events[row], pmf, adjacent, cfg));
    else
      losses.push_back(competing_individual_loss<S>(ds.times[row], ds.events[row], pmf,
                                                    loss.delta_max, adjacent, cfg));
  }
  return losses;
}

std::vector<int> all_rows(const SurvivalDataset& ds);

}  // namespace survdro
