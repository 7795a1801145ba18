#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survdro/common.hpp"

namespace survdro {

// Named categorical labels for one sensitive attribute. `ids[i]` indexes into
// `levels`; levels are ordered by first appearance in the source file.
struct GroupColumn {
  std::string name;
  std::vector<int> ids;
  std::vector<std::string> levels;

  int group_count() const { return static_cast<int>(levels.size()); }
};

// Right-censored survival data: features, observed durations, event
// indicators in {0,...,delta_max} (0 = censored), optional group labels.
struct SurvivalDataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd times;     // n, nonnegative
  Eigen::VectorXi events;    // n, 0..delta_max
  int delta_max = 1;
  std::vector<GroupColumn> groups;

  int size() const { return static_cast<int>(times.size()); }
  int dim() const { return static_cast<int>(features.cols()); }

  double censoring_rate() const;
  const GroupColumn* find_group(const std::string& name) const;
  SurvivalDataset subset(const std::vector<int>& rows) const;
  void validate() const;
};

// Strictly increasing event-time grid t_1 < ... < t_m with origin t_0 = 0.
struct TimeGrid {
  std::vector<double> points;

  int size() const { return static_cast<int>(points.size()); }
  double point(int index_1based) const { return points[static_cast<std::size_t>(index_1based - 1)]; }
  double origin_or_point(int index) const { return index == 0 ? 0.0 : point(index); }

  // Index in [1, m]: exact match if t is a grid point, otherwise the largest
  // index with t_l < t. Throws below t_1.
  int quantize(double t) const;

  // Total version used on the discrete-time model path: times below t_1 map
  // to index 1.
  int quantize_clamped(double t) const;

  // Index in {0,...,m}. Events must land exactly on a grid point; censored
  // times map to the largest index with t_l < y (0 when y <= t_1).
  int quantize_observed(double y, bool event_observed) const;
};

TimeGrid event_time_grid(const SurvivalDataset& ds);
TimeGrid uniform_time_grid(const SurvivalDataset& ds, int steps);

// Replaces each censored time by the grid point t_{quantize_observed(y, false)}
// (0 when the censoring happened before the first event time). Idempotent.
SurvivalDataset snap_censored_times(const SurvivalDataset& ds, const TimeGrid& grid);

struct SplitAssignment {
  std::vector<int> d1;
  std::vector<int> d2;
  std::uint64_t seed = 0;
};

// Seeded split in which censored and uncensored rows are shuffled and
// partitioned separately, so the halves' censoring rates match up to rounding.
// `fraction` is the share assigned to d1.
SplitAssignment stratified_split(const SurvivalDataset& ds, double fraction, std::uint64_t seed);

// K roughly equal folds, censoring-stratified, seeded.
std::vector<std::vector<int>> stratified_kfold(const SurvivalDataset& ds, int k, std::uint64_t seed);

struct CsvSchema {
  std::string time_column;
  std::string event_column;
  std::vector<std::string> feature_columns;
  std::vector<std::string> group_columns;
  bool standardize = false;
  int delta_max = 1;
};

// UTF-8, comma-separated, '.' decimal, mandatory header. Optionally
// z-standardizes features with the population standard deviation
// (zero-variance columns map to 0).
SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema);

// Standardize columns in place: (x - mean) / population_std, constant columns -> 0.
void standardize_features(Eigen::MatrixXd& features);

}  // namespace survdro
