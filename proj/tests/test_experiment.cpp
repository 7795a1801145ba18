#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "survdro/experiment.hpp"

using namespace survdro;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("exp_test") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("exp_test"); }
  std::string str(const std::string& child = "") const { return (path / child).string(); }
};

void write_two_group_csv(const std::string& path, int n, std::uint64_t seed) {
  auto ds = testutil::two_group_dataset(n, seed);
  std::ofstream out(path);
  out.precision(12);
  out << "x1,x2,time,event,group\n";
  for (int i = 0; i < ds.size(); ++i)
    out << ds.features(i, 0) << "," << ds.features(i, 1) << "," << ds.times[i] << ","
        << ds.events[i] << "," << ds.groups[0].levels[static_cast<std::size_t>(ds.groups[0].ids[static_cast<std::size_t>(i)])]
        << "\n";
}

std::string write_config(const TempDir& dir, const std::string& name, const std::string& body) {
  std::string path = dir.str(name);
  std::ofstream out(path);
  out << body;
  return path;
}

std::string small_config(const TempDir& dir, const std::string& data, const std::string& out_dir,
                         const std::string& method, const std::string& model,
                         const std::string& extra = "") {
  std::ostringstream body;
  body << R"({
  "dataset": ")" << data << R"(",
  "schema": {"time": "time", "event": "event", "features": ["x1", "x2"], "groups": ["group"], "standardize": true},
  "model": ")" << model << R"(",
  "method": ")" << method << R"(",
  "seed": 3,
  "repeats": 2,
  "out": ")" << out_dir << R"(",
  "eval_groups": ["group"],
  "train": {"optimizer": "sgd", "lr": 0.05, "max_iterations": 40},
  "dro": {"alpha": 0.3},
  "tuning": {"metric": "ci", "lr_grid": [0.05], "alpha_grid": [0.3], "lambda_grid": [0.5]})"
       << extra << "\n}\n";
  return write_config(dir, "config_" + method + "_" + model + ".json", body.str());
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("config loading, overrides, and rejection") {
  TempDir dir("config");
  std::string data = dir.str("toy.csv");
  write_two_group_csv(data, 60, 5);

  std::string good = small_config(dir, data, dir.str("out"), "dro", "cox-linear");
  ExperimentConfig cfg = load_experiment_config(good);
  CHECK(cfg.model == ModelChoice::CoxLinear);
  CHECK(cfg.method == MethodChoice::Dro);
  CHECK(cfg.dro.alpha == 0.3);
  CHECK(cfg.repeats == 2);
  CHECK(cfg.lr_grid == std::vector<double>{0.05});

  // dro-exact-cox is rejected for discrete-time models
  std::string bad = small_config(dir, data, dir.str("out2"), "dro-exact-cox", "deephit");
  CHECK_THROWS_AS(load_experiment_config(bad), ConfigError);

  std::string broken = write_config(dir, "broken.json", "{ not json");
  CHECK_THROWS_AS(load_experiment_config(broken), ConfigError);

  ExperimentConfig defaults;
  defaults.model = ModelChoice::CoxLinear;
  CHECK(defaults.effective_alpha_grid() == std::vector<double>{0.1, 0.15, 0.2, 0.3, 0.4, 0.5});
  defaults.model = ModelChoice::DeepHit;
  CHECK(defaults.effective_alpha_grid().size() == 10);
}

TEST_CASE("run_experiment produces deterministic outputs with a consistent summary") {
  TempDir dir("run");
  std::string data = dir.str("toy.csv");
  write_two_group_csv(data, 90, 7);

  ExperimentConfig cfg = load_experiment_config(
      small_config(dir, data, dir.str("out_a"), "dro", "cox-linear"));
  RunOutput output = run_experiment(cfg);
  CHECK(output.failures == 0);
  REQUIRE(output.repeats.size() == 2);
  for (const auto& r : output.repeats) {
    CHECK_FALSE(r.failed);
    CHECK(r.metrics.ctd > 0.0);
    CHECK(std::isfinite(r.worst_group_loss));
  }

  ExperimentConfig again = cfg;
  again.out_dir = dir.str("out_b");
  run_experiment(again);
  for (const char* file : {"runs.csv", "summary.csv", "tuning.csv"}) {
    auto a = read_lines(dir.str("out_a/") + file);
    auto b = read_lines(dir.str("out_b/") + file);
    CHECK(a == b);
  }

  // the summary recomputes exactly from the per-repeat rows, column by column
  auto runs = read_lines(dir.str("out_a/runs.csv"));
  REQUIRE(runs.size() == 3);
  auto metric_cell = [&](const std::string& line, int column) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c <= column; ++c) std::getline(ss, cell, ',');
    return cell;
  };
  auto summary = read_lines(dir.str("out_a/summary.csv"));
  for (int column = 2; column <= 10; ++column) {  // ctd .. worst_group_loss
    double v0 = std::stod(metric_cell(runs[1], column));
    double v1 = std::stod(metric_cell(runs[2], column));
    double mean = (v0 + v1) / 2.0;
    double stddev = std::sqrt(((v0 - mean) * (v0 - mean) + (v1 - mean) * (v1 - mean)) / 1.0);
    char expected_mean[32], expected_std[32];
    std::snprintf(expected_mean, sizeof(expected_mean), "%.6g", mean);
    std::snprintf(expected_std, sizeof(expected_std), "%.6g", stddev);
    CHECK(metric_cell(summary[1], column - 1) == expected_mean);
    CHECK(metric_cell(summary[2], column - 1) == expected_std);
  }
}

TEST_CASE("every method trains end to end on a small dataset") {
  TempDir dir("methods");
  std::string data = dir.str("toy.csv");
  write_two_group_csv(data, 70, 11);
  int index = 0;
  for (const std::string method :
       {"erm", "reg-fi", "reg-fg", "reg-fci", "reg-fcg", "dro", "dro-split", "dro-exact-cox"}) {
    ExperimentConfig cfg = load_experiment_config(
        small_config(dir, data, dir.str("out" + std::to_string(index++)), method, "cox-linear"));
    cfg.repeats = 1;
    cfg.train.max_iterations = 15;
    cfg.lambda_grid = {0.4};
    cfg.train.optimizer = OptimizerKind::Adam;  // bounded steps for the raw pair-sum penalties
    RunOutput output = run_experiment(cfg);
    CHECK(output.failures == 0);
    CHECK(output.repeats[0].metrics.ctd > 0.0);
  }
}

TEST_CASE("deephit end to end, including competing risks") {
  TempDir dir("deephit");
  std::string data = dir.str("toy.csv");
  write_two_group_csv(data, 60, 13);
  ExperimentConfig cfg = load_experiment_config(small_config(
      dir, data, dir.str("out"), "dro", "deephit",
      ",\n  \"deephit\": {\"beta\": 0.6, \"sigma\": 0.5, \"grid_steps\": 6, \"hidden\": 8}"));
  cfg.repeats = 1;
  cfg.train.max_iterations = 12;
  RunOutput output = run_experiment(cfg);
  CHECK(output.failures == 0);
  CHECK(output.repeats[0].metrics.ctd > 0.0);

  // two competing events: event column remapped to {0,1,2}
  auto ds = testutil::two_group_dataset(60, 17);
  std::ofstream out(dir.str("competing.csv"));
  out << "x1,x2,time,event,group\n";
  Rng rng(19);
  for (int i = 0; i < ds.size(); ++i) {
    int event = ds.events[i] == 0 ? 0 : (rng.below(2) == 0 ? 1 : 2);
    out << ds.features(i, 0) << "," << ds.features(i, 1) << "," << ds.times[i] << "," << event
        << "," << ds.groups[0].levels[static_cast<std::size_t>(ds.groups[0].ids[static_cast<std::size_t>(i)])] << "\n";
  }
  out.close();
  ExperimentConfig competing = load_experiment_config(small_config(
      dir, dir.str("competing.csv"), dir.str("out_cr"), "erm", "deephit",
      ",\n  \"deephit\": {\"beta\": 0.8, \"sigma\": 0.5, \"grid_steps\": 5, \"hidden\": 6}"));
  competing.schema.delta_max = 2;
  competing.repeats = 1;
  competing.train.max_iterations = 10;
  RunOutput cr = run_experiment(competing);
  CHECK(cr.failures == 0);

  // sample-splitting variant of the discrete-time model
  ExperimentConfig split_cfg = load_experiment_config(small_config(
      dir, data, dir.str("out_split"), "dro-split", "deephit",
      ",\n  \"deephit\": {\"beta\": 0.6, \"sigma\": 0.5, \"grid_steps\": 6, \"hidden\": 8}"));
  split_cfg.repeats = 1;
  split_cfg.train.max_iterations = 10;
  CHECK(run_experiment(split_cfg).failures == 0);
}

TEST_CASE("cox-mlp trains end to end") {
  TempDir dir("coxmlp");
  std::string data = dir.str("toy.csv");
  write_two_group_csv(data, 60, 31);
  ExperimentConfig cfg = load_experiment_config(
      small_config(dir, data, dir.str("out"), "dro", "cox-mlp", ",\n  \"cox\": {\"hidden\": 6}"));
  cfg.repeats = 1;
  cfg.train.max_iterations = 12;
  RunOutput output = run_experiment(cfg);
  CHECK(output.failures == 0);
  CHECK(output.repeats[0].metrics.ctd > 0.0);
}

TEST_CASE("sweep_alpha echoes the alpha column and matches single runs at alpha 1") {
  TempDir dir("sweep");
  std::string data = dir.str("toy.csv");
  write_two_group_csv(data, 80, 23);
  ExperimentConfig cfg = load_experiment_config(
      small_config(dir, data, dir.str("sweep_out"), "dro", "cox-linear"));
  cfg.repeats = 1;
  cfg.train.max_iterations = 25;

  std::vector<double> alphas{0.15, 0.4, 1.0};
  std::vector<SweepRow> rows = sweep_alpha(cfg, alphas);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < alphas.size(); ++k) CHECK(rows[k].alpha == alphas[k]);

  // the alpha = 1 sweep point reproduces a plain run at alpha = 1
  ExperimentConfig single = cfg;
  single.alpha_grid = {1.0};
  single.dro.alpha = 1.0;
  single.out_dir = dir.str("single_out");
  RunOutput run = run_experiment(single);
  CHECK(rows[2].metrics.ctd == run.mean.ctd);
  CHECK(rows[2].metrics.ibs == run.mean.ibs);

  auto sweep_lines = read_lines(dir.str("sweep_out/sweep.csv"));
  REQUIRE(sweep_lines.size() == 4);
  CHECK(sweep_lines[0] == "alpha,ctd,ibs,ci_pct,f_ci,f_cg,worst_group_loss");
  CHECK(sweep_lines[1].substr(0, 5) == "0.15,");
}

TEST_CASE("evaluate_predictions round-trips a written prediction file") {
  TempDir dir("evaluate");
  std::string data = dir.str("toy.csv");
  write_two_group_csv(data, 50, 29);
  ExperimentConfig cfg = load_experiment_config(
      small_config(dir, data, dir.str("out"), "erm", "cox-linear"));

  SurvivalDataset ds = load_csv(data, cfg.schema);
  ModelSpec spec{ModelKind::Linear, 2, {}, 1};
  ModelParams params = init_params(spec, 31);
  SurvivalPrediction pred = predict_proportional_hazards(ds, ds, spec, params);

  std::string pred_path = dir.str("predictions.csv");
  {
    std::ofstream out(pred_path);
    out.precision(17);
    out << "risk";
    for (int l = 1; l <= pred.grid.size(); ++l) out << ",surv_" << pred.grid.point(l);
    out << "\n";
    for (int i = 0; i < pred.size(); ++i) {
      out << pred.risk[static_cast<std::size_t>(i)];
      for (int l = 0; l < pred.grid.size(); ++l) out << "," << pred.survival(i, l);
      out << "\n";
    }
  }
  MetricsReport via_file = evaluate_predictions(cfg, pred_path, PredictionStyle::PartialHazard);
  const GroupColumn* group = ds.find_group("group");
  std::vector<GroupColumn> partitions{*group};
  MetricsReport direct =
      compute_metrics(ds, pred, PredictionStyle::PartialHazard, group, partitions, cfg.train.gamma);
  CHECK(via_file.ctd == doctest::Approx(direct.ctd).epsilon(1e-12));
  CHECK(via_file.ibs == doctest::Approx(direct.ibs).epsilon(1e-9));
  CHECK(via_file.ci_pct == doctest::Approx(direct.ci_pct).epsilon(1e-12));
  CHECK(via_file.f_cg == doctest::Approx(direct.f_cg).epsilon(1e-9));
}

TEST_CASE("worst-group loss ordering responds to alpha on flipped-effect data") {
  // smaller alpha = larger ambiguity set = lower worst-group loss, on average
  ModelSpec spec{ModelKind::Linear, 2, {}, 1};
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.max_iterations = 120;
  cfg.max_iterations = 300;
  std::vector<double> alphas{0.2, 0.7, 1.0};
  std::vector<double> averages;
  for (double alpha : alphas) {
    DroConfig dro;
    dro.alpha = alpha;
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto train = testutil::two_group_dataset(400, 500 + seed, 3.0);
      auto probe = testutil::two_group_dataset(400, 900 + seed, 3.0);
      cfg.seed = seed;
      TrainResult result = train_dro(train, spec, LossSpec::cox(), dro, cfg);
      total += worst_group_mean_loss(probe, probe.groups[0], spec, result.params, LossSpec::cox());
    }
    averages.push_back(total / 10.0);
  }
  CHECK(averages[0] <= averages[1] + 1e-9);
  CHECK(averages[1] <= averages[2] + 1e-9);
}

TEST_CASE("gradient-check suites pass") {
  std::ostringstream sink;
  CHECK(run_gradient_checks(sink));
  CHECK(sink.str().find("FAIL") == std::string::npos);
}
