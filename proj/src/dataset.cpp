#include "survdro/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace survdro {

double SurvivalDataset::censoring_rate() const {
  int n = size();
  if (n == 0) return 0.0;
  int censored = 0;
  for (int i = 0; i < n; ++i)
    if (events[i] == 0) ++censored;
  return static_cast<double>(censored) / n;
}

const GroupColumn* SurvivalDataset::find_group(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return &g;
  return nullptr;
}

SurvivalDataset SurvivalDataset::subset(const std::vector<int>& rows) const {
  SurvivalDataset out;
  int k = static_cast<int>(rows.size());
  out.features.resize(k, features.cols());
  out.times.resize(k);
  out.events.resize(k);
  out.delta_max = delta_max;
  for (int i = 0; i < k; ++i) {
    out.features.row(i) = features.row(rows[static_cast<std::size_t>(i)]);
    out.times[i] = times[rows[static_cast<std::size_t>(i)]];
    out.events[i] = events[rows[static_cast<std::size_t>(i)]];
  }
  for (const auto& g : groups) {
    GroupColumn gc;
    gc.name = g.name;
    gc.levels = g.levels;
    gc.ids.reserve(rows.size());
    for (int r : rows) gc.ids.push_back(g.ids[static_cast<std::size_t>(r)]);
    out.groups.push_back(std::move(gc));
  }
  return out;
}

void SurvivalDataset::validate() const {
  int n = size();
  if (n < 1) throw ValidationError("dataset must contain at least one row");
  if (features.rows() != n) throw ValidationError("feature matrix row count does not match times");
  if (events.size() != n) throw ValidationError("event vector length does not match times");
  if (delta_max < 1) throw ValidationError("delta_max must be >= 1");
  for (int i = 0; i < n; ++i) {
    if (!(times[i] >= 0.0))
      throw ValidationError("negative or non-finite time at row " + std::to_string(i + 1));
    if (events[i] < 0 || events[i] > delta_max)
      throw ValidationError("event value " + std::to_string(events[i]) + " at row " +
                            std::to_string(i + 1) + " outside {0,...," +
                            std::to_string(delta_max) + "}");
  }
  for (const auto& g : groups)
    if (static_cast<int>(g.ids.size()) != n)
      throw ValidationError("group column '" + g.name + "' length does not match dataset");
}

int TimeGrid::quantize(double t) const {
  if (points.empty()) throw ValidationError("empty time grid");
  auto it = std::lower_bound(points.begin(), points.end(), t);
  if (it != points.end() && *it == t)
    return static_cast<int>(it - points.begin()) + 1;
  if (it == points.begin())
    throw ValidationError("time below the first grid point");
  return static_cast<int>(it - points.begin());  // largest l with t_l < t
}

int TimeGrid::quantize_clamped(double t) const {
  if (points.empty()) throw ValidationError("empty time grid");
  if (t < points.front()) return 1;
  return quantize(t);
}

int TimeGrid::quantize_observed(double y, bool event_observed) const {
  if (points.empty()) throw ValidationError("empty time grid");
  if (event_observed) {
    auto it = std::lower_bound(points.begin(), points.end(), y);
    if (it == points.end() || *it != y)
      throw ValidationError("event time is not a grid point");
    return static_cast<int>(it - points.begin()) + 1;
  }
  // Censored times already sitting on a grid point stay there (at-risk through
  // t_l); anything else maps to the previous event time. This keeps snapping
  // idempotent and the full/partial loss offset constant.
  auto it = std::upper_bound(points.begin(), points.end(), y);
  return static_cast<int>(it - points.begin());  // count of t_l <= y, 0 allowed
}

TimeGrid event_time_grid(const SurvivalDataset& ds) {
  std::set<double> distinct;
  for (int i = 0; i < ds.size(); ++i)
    if (ds.events[i] != 0) distinct.insert(ds.times[i]);
  if (distinct.empty())
    throw ValidationError("cannot build an event-time grid: every row is censored");
  TimeGrid grid;
  grid.points.assign(distinct.begin(), distinct.end());
  if (grid.points.front() <= 0.0)
    throw ValidationError("event-time grid requires strictly positive event times");
  return grid;
}

TimeGrid uniform_time_grid(const SurvivalDataset& ds, int steps) {
  if (steps < 1) throw ValidationError("uniform grid needs at least one step");
  double lo = ds.times.minCoeff();
  double hi = ds.times.maxCoeff();
  if (!(hi > 0.0)) throw ValidationError("uniform grid requires a positive maximum time");
  TimeGrid grid;
  grid.points.reserve(static_cast<std::size_t>(steps));
  for (int i = 1; i <= steps; ++i)
    grid.points.push_back(lo + (hi - lo) * static_cast<double>(i) / steps);
  if (grid.points.front() <= 0.0) grid.points.front() = hi / steps;  // keep t_1 > 0 when min time is 0
  grid.points.erase(std::unique(grid.points.begin(), grid.points.end()), grid.points.end());
  return grid;
}

SurvivalDataset snap_censored_times(const SurvivalDataset& ds, const TimeGrid& grid) {
  SurvivalDataset out = ds;
  for (int i = 0; i < out.size(); ++i) {
    if (out.events[i] != 0) continue;
    int idx = grid.quantize_observed(out.times[i], false);
    out.times[i] = grid.origin_or_point(idx);
  }
  return out;
}

namespace {

std::vector<int> take_fraction(std::vector<int>& pool, double fraction, Rng& rng) {
  rng.shuffle(pool);
  auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cut)};
}

}  // namespace

SplitAssignment stratified_split(const SurvivalDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ValidationError("split fraction must lie strictly inside (0, 1)");
  std::vector<int> censored, uncensored;
  for (int i = 0; i < ds.size(); ++i)
    (ds.events[i] == 0 ? censored : uncensored).push_back(i);

  Rng rng(seed);
  std::vector<int> d1 = take_fraction(censored, fraction, rng);
  std::vector<int> d1u = take_fraction(uncensored, fraction, rng);
  d1.insert(d1.end(), d1u.begin(), d1u.end());

  std::vector<char> in_d1(static_cast<std::size_t>(ds.size()), 0);
  for (int i : d1) in_d1[static_cast<std::size_t>(i)] = 1;
  SplitAssignment split;
  split.seed = seed;
  for (int i = 0; i < ds.size(); ++i)
    (in_d1[static_cast<std::size_t>(i)] ? split.d1 : split.d2).push_back(i);
  if (split.d1.empty() || split.d2.empty())
    throw ValidationError("split produced an empty side; adjust the fraction");
  return split;
}

std::vector<std::vector<int>> stratified_kfold(const SurvivalDataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold partition needs k >= 2");
  if (k > ds.size()) throw ValidationError("more folds than data points");
  std::vector<int> censored, uncensored;
  for (int i = 0; i < ds.size(); ++i)
    (ds.events[i] == 0 ? censored : uncensored).push_back(i);
  Rng rng(seed);
  rng.shuffle(censored);
  rng.shuffle(uncensored);

  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  int slot = 0;
  for (int i : censored) folds[static_cast<std::size_t>(slot++ % k)].push_back(i);
  for (int i : uncensored) folds[static_cast<std::size_t>(slot++ % k)].push_back(i);
  for (auto& f : folds) {
    if (f.empty()) throw ValidationError("k-fold partition produced an empty fold");
    std::sort(f.begin(), f.end());
  }
  return folds;
}

void standardize_features(Eigen::MatrixXd& features) {
  const double n = static_cast<double>(features.rows());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    double mean = features.col(c).mean();
    double var = (features.col(c).array() - mean).square().sum() / n;
    if (var > 0.0) {
      features.col(c) = (features.col(c).array() - mean) / std::sqrt(var);
    } else {
      features.col(c).setZero();
    }
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_number(const std::string& cell, int row, const std::string& column) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last)
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + cell + "' as a number");
  return value;
}

}  // namespace

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' is empty; a header row is required");

  std::vector<std::string> header = split_line(line);
  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError("column '" + name + "' not found in '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  std::size_t time_col = column_index(schema.time_column);
  std::size_t event_col = column_index(schema.event_column);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.feature_columns) feature_cols.push_back(column_index(f));
  std::vector<std::size_t> group_cols;
  for (const auto& g : schema.group_columns) group_cols.push_back(column_index(g));

  std::vector<double> times;
  std::vector<int> events;
  std::vector<double> flat_features;
  std::vector<GroupColumn> groups(group_cols.size());
  for (std::size_t g = 0; g < group_cols.size(); ++g) groups[g].name = schema.group_columns[g];

  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    ++row;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));

    double t = parse_number(cells[time_col], row, schema.time_column);
    if (t < 0.0)
      throw ValidationError("row " + std::to_string(row) + ": negative time " + cells[time_col]);
    double ev_raw = parse_number(cells[event_col], row, schema.event_column);
    int ev = static_cast<int>(std::llround(ev_raw));
    if (ev_raw != static_cast<double>(ev) || ev < 0 || ev > schema.delta_max)
      throw ValidationError("row " + std::to_string(row) + ": event value '" +
                            cells[event_col] + "' outside {0,...," +
                            std::to_string(schema.delta_max) + "}");
    times.push_back(t);
    events.push_back(ev);
    for (std::size_t c = 0; c < feature_cols.size(); ++c)
      flat_features.push_back(parse_number(cells[feature_cols[c]], row, schema.feature_columns[c]));
    for (std::size_t g = 0; g < group_cols.size(); ++g) {
      const std::string& label = cells[group_cols[g]];
      auto& col = groups[g];
      auto it = std::find(col.levels.begin(), col.levels.end(), label);
      if (it == col.levels.end()) {
        col.levels.push_back(label);
        col.ids.push_back(static_cast<int>(col.levels.size()) - 1);
      } else {
        col.ids.push_back(static_cast<int>(it - col.levels.begin()));
      }
    }
  }
  if (row == 0) throw ValidationError("'" + path + "' contains no data rows");

  SurvivalDataset ds;
  int n = row;
  int d = static_cast<int>(feature_cols.size());
  ds.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      ds.features(i, c) = flat_features[static_cast<std::size_t>(i) * d + c];
  ds.times = Eigen::Map<Eigen::VectorXd>(times.data(), n);
  ds.events = Eigen::Map<Eigen::VectorXi>(events.data(), n);
  ds.delta_max = schema.delta_max;
  ds.groups = std::move(groups);
  if (schema.standardize) standardize_features(ds.features);
  ds.validate();
  return ds;
}

}  // namespace survdro
