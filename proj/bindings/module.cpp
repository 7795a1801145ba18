#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "survdro/experiment.hpp"

namespace py = pybind11;
using namespace survdro;

namespace {

SurvivalDataset make_dataset(const Eigen::MatrixXd& features, const Eigen::VectorXd& times,
                             const Eigen::VectorXi& events,
                             const std::map<std::string, std::vector<std::string>>& groups,
                             int delta_max) {
  SurvivalDataset ds;
  ds.features = features;
  ds.times = times;
  ds.events = events;
  ds.delta_max = delta_max;
  for (const auto& [name, labels] : groups) {
    GroupColumn column;
    column.name = name;
    for (const auto& label : labels) {
      auto it = std::find(column.levels.begin(), column.levels.end(), label);
      if (it == column.levels.end()) {
        column.levels.push_back(label);
        column.ids.push_back(static_cast<int>(column.levels.size()) - 1);
      } else {
        column.ids.push_back(static_cast<int>(it - column.levels.begin()));
      }
    }
    ds.groups.push_back(std::move(column));
  }
  ds.validate();
  return ds;
}

// A trained model plus everything needed to predict on new data.
struct TrainedModel {
  std::string kind;  // cox-linear | cox-mlp | deephit
  ModelSpec spec;
  ModelParams params;
  LossSpec loss;
  SurvivalDataset train_data;
  std::vector<TrainStep> history;

  SurvivalPrediction predict(const SurvivalDataset& data) const {
    if (kind == "deephit")
      return predict_discrete(data, spec, params, loss.deephit.grid, loss.delta_max);
    return predict_proportional_hazards(train_data, data, spec, params);
  }
};

TrainedModel train(const SurvivalDataset& ds, const std::string& model, const std::string& method,
                   double alpha, double lr, int iterations, std::uint64_t seed,
                   const std::string& optimizer, double lambda, const std::string& regularizer,
                   const std::string& group, double gamma, double beta, double sigma,
                   int grid_steps, int hidden, int folds, int batch_size) {
  TrainedModel out;
  out.kind = model;
  out.train_data = ds;

  if (model == "deephit") {
    TimeGrid grid = grid_steps > 0 ? uniform_time_grid(ds, grid_steps) : event_time_grid(ds);
    out.spec = ModelSpec{ModelKind::MlpSimplex, ds.dim(), {hidden, hidden},
                         grid.size() * ds.delta_max};
    DeepHitConfig dh;
    dh.beta = beta;
    dh.sigma = sigma;
    dh.grid = grid;
    dh.population = ds.size();
    out.loss = LossSpec::deep_hit(dh, ds.delta_max);
  } else if (model == "cox-linear") {
    out.spec = ModelSpec{ModelKind::Linear, ds.dim(), {}, 1};
    out.loss = LossSpec::cox();
  } else if (model == "cox-mlp") {
    out.spec = ModelSpec{ModelKind::MlpScalar, ds.dim(), {hidden}, 1};
    out.loss = LossSpec::cox();
  } else {
    throw ConfigError("unknown model '" + model + "'");
  }

  TrainConfig cfg;
  cfg.learning_rate = lr;
  cfg.max_iterations = iterations;
  cfg.seed = seed;
  cfg.gamma = gamma;
  cfg.batch_size = batch_size;
  if (optimizer == "adam")
    cfg.optimizer = OptimizerKind::Adam;
  else if (optimizer == "sgd")
    cfg.optimizer = OptimizerKind::Sgd;
  else
    throw ConfigError("unknown optimizer '" + optimizer + "'");

  DroConfig dro;
  dro.alpha = alpha;
  dro.seed = seed;
  dro.folds = folds;

  TrainResult result;
  if (method == "erm") {
    result = train_erm(ds, out.spec, out.loss, cfg);
  } else if (method == "regularized") {
    cfg.lambda = lambda;
    if (regularizer == "individual")
      cfg.regularizer = RegularizerKind::Individual;
    else if (regularizer == "group")
      cfg.regularizer = RegularizerKind::Group;
    else if (regularizer == "censoring-individual")
      cfg.regularizer = RegularizerKind::CensoringIndividual;
    else if (regularizer == "censoring-group")
      cfg.regularizer = RegularizerKind::CensoringGroup;
    else
      throw ConfigError("unknown regularizer '" + regularizer + "'");
    const GroupColumn* partition = group.empty() ? nullptr : ds.find_group(group);
    if (!group.empty() && partition == nullptr)
      throw ConfigError("group '" + group + "' not in the dataset");
    result = train_regularized(ds, out.spec, out.loss, cfg, partition);
  } else if (method == "dro") {
    result = train_dro(ds, out.spec, out.loss, dro, cfg);
  } else if (method == "dro-split") {
    result = train_split_dro(ds, out.spec, out.loss, dro, cfg);
  } else if (method == "dro-exact-cox") {
    if (model == "deephit") throw ConfigError("dro-exact-cox applies to Cox models only");
    result = train_exact_dro_cox(ds, out.spec, dro, cfg);
  } else {
    throw ConfigError("unknown method '" + method + "'");
  }
  out.params = std::move(result.params);
  out.history = std::move(result.history);
  return out;
}

py::dict evaluate(const TrainedModel& model, const SurvivalDataset& test,
                  const std::string& group, double gamma) {
  SurvivalPrediction pred = model.predict(test);
  const GroupColumn* eval_group = group.empty() ? nullptr : test.find_group(group);
  if (!group.empty() && eval_group == nullptr)
    throw ConfigError("group '" + group + "' not in the dataset");
  std::vector<GroupColumn> partitions;
  if (eval_group != nullptr) partitions.push_back(*eval_group);
  PredictionStyle style = model.kind == "deephit" ? PredictionStyle::SurvivalCurve
                                                  : PredictionStyle::PartialHazard;
  MetricsReport report = compute_metrics(test, pred, style, eval_group, partitions, gamma);
  py::dict out;
  out["ctd"] = report.ctd;
  out["ibs"] = report.ibs;
  out["ci_pct"] = report.ci_pct;
  out["f_i"] = report.f_i;
  out["f_g"] = report.f_g;
  out["f_cap"] = report.f_cap;
  out["f_ci"] = report.f_ci;
  out["f_cg"] = report.f_cg;
  return out;
}

}  // namespace

PYBIND11_MODULE(survdro, m) {
  m.doc() = "Survival-model training with distributionally robust optimization";

  py::register_exception<Error>(m, "SurvdroError");

  py::class_<SurvivalDataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("features"), py::arg("times"), py::arg("events"),
           py::arg("groups") = std::map<std::string, std::vector<std::string>>{},
           py::arg("delta_max") = 1)
      .def_property_readonly("n", &SurvivalDataset::size)
      .def_property_readonly("dim", &SurvivalDataset::dim)
      .def_property_readonly("censoring_rate", &SurvivalDataset::censoring_rate)
      .def_readonly("features", &SurvivalDataset::features)
      .def_readonly("times", &SurvivalDataset::times)
      .def_readonly("events", &SurvivalDataset::events);

  m.def(
      "load_csv",
      [](const std::string& path, const std::string& time, const std::string& event,
         const std::vector<std::string>& features, const std::vector<std::string>& groups,
         bool standardize, int delta_max) {
        CsvSchema schema{time, event, features, groups, standardize, delta_max};
        return load_csv(path, schema);
      },
      py::arg("path"), py::arg("time"), py::arg("event"), py::arg("features"),
      py::arg("groups") = std::vector<std::string>{}, py::arg("standardize") = true,
      py::arg("delta_max") = 1);

  m.def("c_alpha", &c_alpha, py::arg("alpha"),
        "Chi-square ambiguity radius coefficient sqrt(2 (1/alpha - 1)^2 + 1)");
  m.def(
      "dro_objective",
      [](const std::vector<double>& losses, double eta, double c) {
        return dro_objective(losses, eta, c);
      },
      py::arg("losses"), py::arg("eta"), py::arg("c_alpha"));
  m.def(
      "solve_eta",
      [](const std::vector<double>& losses, double c, double tol) {
        EtaSolution s = solve_eta(losses, c, tol);
        return py::make_tuple(s.eta, s.value);
      },
      py::arg("losses"), py::arg("c_alpha"), py::arg("tol") = 1e-8,
      "Minimize the dual objective over eta; returns (eta, value)");

  py::class_<TrainedModel>(m, "TrainedModel")
      .def_readonly("kind", &TrainedModel::kind)
      .def_property_readonly("theta",
                             [](const TrainedModel& model) { return model.params.theta; })
      .def_property_readonly(
          "baseline_log_hazard",
          [](const TrainedModel& model) { return model.params.log_hazard; })
      .def_property_readonly("objective_history",
                             [](const TrainedModel& model) {
                               std::vector<double> values;
                               for (const auto& step : model.history)
                                 values.push_back(step.objective);
                               return values;
                             })
      .def(
          "risk_scores",
          [](const TrainedModel& model, const SurvivalDataset& data) {
            SurvivalPrediction pred = model.predict(data);
            return pred.risk;
          },
          py::arg("data"))
      .def(
          "survival",
          [](const TrainedModel& model, const SurvivalDataset& data) {
            SurvivalPrediction pred = model.predict(data);
            return py::make_tuple(pred.grid.points, pred.survival);
          },
          py::arg("data"), "Survival curves: (grid_times, n x m matrix)");

  m.def("train", &train, py::arg("dataset"), py::arg("model") = "cox-linear",
        py::arg("method") = "erm", py::arg("alpha") = 0.5, py::arg("lr") = 0.01,
        py::arg("iterations") = 500, py::arg("seed") = 1, py::arg("optimizer") = "adam",
        py::arg("reg_weight") = 0.0, py::arg("regularizer") = "individual",
        py::arg("group") = "", py::arg("gamma") = 0.01, py::arg("beta") = 0.5,
        py::arg("sigma") = 0.1, py::arg("grid_steps") = 0, py::arg("hidden") = 24,
        py::arg("folds") = 2, py::arg("batch_size") = 0);

  m.def("evaluate", &evaluate, py::arg("model"), py::arg("test"), py::arg("group") = "",
        py::arg("gamma") = 0.01,
        "Accuracy and fairness metrics of a trained model on a test set");
}
