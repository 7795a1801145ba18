#include "survdro/losses.hpp"

#include "survdro/loss_graph.hpp"

namespace survdro {

std::vector<int> all_rows(const SurvivalDataset& ds) {
  std::vector<int> rows(static_cast<std::size_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

std::vector<int> adjacency_indices(double y, int event, std::span<const double> candidate_y,
                                   AdjacencyKind kind, const TimeGrid* grid) {
  std::vector<int> out;
  if (event == 0 || kind == AdjacencyKind::None) return out;
  if (kind == AdjacencyKind::Cox) {
    for (std::size_t j = 0; j < candidate_y.size(); ++j)
      if (candidate_y[j] >= y) out.push_back(static_cast<int>(j));
    return out;
  }
  if (grid == nullptr) throw ValidationError("DeepHit adjacency requires a time grid");
  int own = grid->quantize_clamped(y);
  for (std::size_t j = 0; j < candidate_y.size(); ++j)
    if (grid->quantize_clamped(candidate_y[j]) > own) out.push_back(static_cast<int>(j));
  return out;
}

Eigen::VectorXd optimal_log_hazard(std::span<const double> y, std::span<const int> ev,
                                   std::span<const double> scores, const TimeGrid& grid) {
  const int m = grid.size();
  const std::size_t n = y.size();
  double pivot = detail::max_value(scores);

  Eigen::VectorXd psi(m);
  for (int l = 1; l <= m; ++l) {
    double t = grid.point(l);
    double width = t - grid.origin_or_point(l - 1);
    int deaths = 0;
    double risk = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (ev[i] != 0 && y[i] == t) ++deaths;
      if (y[i] >= t) risk += std::exp(scores[i] - pivot);
    }
    if (deaths == 0 || risk <= 0.0)
      throw ValidationError("empty risk set or no events at a grid point; snap censored times first");
    psi[l - 1] = std::log(static_cast<double>(deaths)) - std::log(width) - (std::log(risk) + pivot);
  }
  return psi;
}

}  // namespace survdro
