#include "survdro/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace survdro {

using nlohmann::json;

ModelChoice parse_model(const std::string& name) {
  if (name == "cox-linear") return ModelChoice::CoxLinear;
  if (name == "cox-mlp") return ModelChoice::CoxMlp;
  if (name == "deephit") return ModelChoice::DeepHit;
  throw ConfigError("unknown model '" + name + "'");
}

MethodChoice parse_method(const std::string& name) {
  if (name == "erm") return MethodChoice::Erm;
  if (name == "reg-fi") return MethodChoice::RegFi;
  if (name == "reg-fg") return MethodChoice::RegFg;
  if (name == "reg-fci") return MethodChoice::RegFci;
  if (name == "reg-fcg") return MethodChoice::RegFcg;
  if (name == "dro") return MethodChoice::Dro;
  if (name == "dro-split") return MethodChoice::DroSplit;
  if (name == "dro-exact-cox") return MethodChoice::DroExactCox;
  throw ConfigError("unknown method '" + name + "'");
}

std::string model_name(ModelChoice model) {
  switch (model) {
    case ModelChoice::CoxLinear: return "cox-linear";
    case ModelChoice::CoxMlp: return "cox-mlp";
    case ModelChoice::DeepHit: return "deephit";
  }
  return "?";
}

std::string method_name(MethodChoice method) {
  switch (method) {
    case MethodChoice::Erm: return "erm";
    case MethodChoice::RegFi: return "reg-fi";
    case MethodChoice::RegFg: return "reg-fg";
    case MethodChoice::RegFci: return "reg-fci";
    case MethodChoice::RegFcg: return "reg-fcg";
    case MethodChoice::Dro: return "dro";
    case MethodChoice::DroSplit: return "dro-split";
    case MethodChoice::DroExactCox: return "dro-exact-cox";
  }
  return "?";
}

std::vector<double> ExperimentConfig::effective_alpha_grid() const {
  if (!alpha_grid.empty()) return alpha_grid;
  if (model == ModelChoice::DeepHit)
    return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  return {0.1, 0.15, 0.2, 0.3, 0.4, 0.5};
}

void ExperimentConfig::validate() const {
  if (dataset_path.empty()) throw ConfigError("config is missing the dataset path");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (method == MethodChoice::DroExactCox && model == ModelChoice::DeepHit)
    throw ConfigError("dro-exact-cox applies to Cox models only");
  bool group_method = method == MethodChoice::RegFg || method == MethodChoice::RegFcg;
  if (group_method && eval_groups.empty())
    throw ConfigError("group-fairness regularizers need an evaluation group attribute");
  train.validate();
  dro.validate();
  if (lr_grid.empty()) throw ConfigError("learning-rate grid must not be empty");
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }

  ExperimentConfig cfg;
  try {
    cfg.dataset_path = doc.at("dataset").get<std::string>();
    const json& schema = doc.at("schema");
    cfg.schema.time_column = schema.at("time").get<std::string>();
    cfg.schema.event_column = schema.at("event").get<std::string>();
    cfg.schema.feature_columns = schema.at("features").get<std::vector<std::string>>();
    cfg.schema.group_columns = schema.value("groups", std::vector<std::string>{});
    cfg.schema.standardize = schema.value("standardize", true);
    cfg.schema.delta_max = schema.value("delta_max", 1);

    cfg.model = parse_model(doc.value("model", "cox-linear"));
    cfg.method = parse_method(doc.value("method", "erm"));
    cfg.seed = doc.value("seed", std::uint64_t{1});
    cfg.repeats = doc.value("repeats", 10);
    cfg.out_dir = doc.value("out", "results");
    cfg.eval_groups = doc.value("eval_groups", std::vector<std::string>{});

    if (doc.contains("train")) {
      const json& t = doc["train"];
      cfg.train.learning_rate = t.value("lr", cfg.train.learning_rate);
      cfg.train.max_iterations = t.value("max_iterations", cfg.train.max_iterations);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.gamma = t.value("gamma", cfg.train.gamma);
      cfg.train.lambda = t.value("lambda", cfg.train.lambda);
      std::string opt = t.value("optimizer", "adam");
      if (opt == "adam")
        cfg.train.optimizer = OptimizerKind::Adam;
      else if (opt == "sgd")
        cfg.train.optimizer = OptimizerKind::Sgd;
      else
        throw ConfigError("unknown optimizer '" + opt + "'");
    } else {
      cfg.train.optimizer = OptimizerKind::Adam;
    }
    if (doc.contains("dro")) {
      const json& d = doc["dro"];
      cfg.dro.alpha = d.value("alpha", cfg.dro.alpha);
      cfg.dro.eta_tolerance = d.value("eta_tolerance", cfg.dro.eta_tolerance);
      cfg.dro.folds = d.value("folds", cfg.dro.folds);
    }
    if (doc.contains("tuning")) {
      const json& t = doc["tuning"];
      std::string metric = t.value("metric", "ci");
      if (metric == "ci")
        cfg.tuning_metric = TuningMetric::ConcordanceImparity;
      else if (metric == "fcg")
        cfg.tuning_metric = TuningMetric::CensoringGroup;
      else
        throw ConfigError("unknown tuning metric '" + metric + "'");
      cfg.lr_grid = t.value("lr_grid", cfg.lr_grid);
      cfg.alpha_grid = t.value("alpha_grid", cfg.alpha_grid);
      cfg.lambda_grid = t.value("lambda_grid", cfg.lambda_grid);
    }
    if (doc.contains("deephit")) {
      const json& d = doc["deephit"];
      cfg.deephit_beta = d.value("beta", cfg.deephit_beta);
      cfg.deephit_sigma = d.value("sigma", cfg.deephit_sigma);
      cfg.deephit_grid_steps = d.value("grid_steps", cfg.deephit_grid_steps);
      cfg.deephit_hidden = d.value("hidden", cfg.deephit_hidden);
      cfg.deephit_event_weights = d.value("event_weights", cfg.deephit_event_weights);
    }
    if (doc.contains("cox")) cfg.cox_hidden = doc["cox"].value("hidden", cfg.cox_hidden);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

double round_sig6(double value) {
  if (!std::isfinite(value)) return value;
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return std::strtod(buffer, nullptr);
}

SurvivalPrediction predict_proportional_hazards(const SurvivalDataset& train,
                                                const SurvivalDataset& test, const ModelSpec& spec,
                                                const ModelParams& params) {
  std::vector<double> train_scores(static_cast<std::size_t>(train.size()));
  for (int i = 0; i < train.size(); ++i)
    train_scores[static_cast<std::size_t>(i)] =
        forward_scalar(spec, params.theta, train.features.row(i).transpose());
  BreslowBaseline base = breslow_baseline(train, train_scores);

  SurvivalPrediction pred;
  pred.grid = base.grid;
  pred.survival.resize(test.size(), base.grid.size());
  pred.risk.resize(static_cast<std::size_t>(test.size()));
  for (int i = 0; i < test.size(); ++i) {
    double score = forward_scalar(spec, params.theta, test.features.row(i).transpose());
    pred.risk[static_cast<std::size_t>(i)] = score;
    std::vector<double> curve = survival_curve(base, score);
    for (int l = 0; l < base.grid.size(); ++l) pred.survival(i, l) = curve[static_cast<std::size_t>(l)];
  }
  return pred;
}

SurvivalPrediction predict_discrete(const SurvivalDataset& test, const ModelSpec& spec,
                                    const ModelParams& params, const TimeGrid& grid,
                                    int delta_max) {
  const int m = grid.size();
  SurvivalPrediction pred;
  pred.grid = grid;
  pred.survival.resize(test.size(), m);
  pred.risk.resize(static_cast<std::size_t>(test.size()));
  for (int i = 0; i < test.size(); ++i) {
    std::vector<double> pmf = forward_simplex(spec, params.theta, test.features.row(i).transpose());
    for (int l = 0; l < m; ++l) {
      double mass = 0.0;
      for (int delta = 0; delta < delta_max; ++delta)
        for (int j = 0; j <= l; ++j) mass += pmf[static_cast<std::size_t>(delta * m + j)];
      pred.survival(i, l) = std::max(0.0, 1.0 - mass);  // guard float dust past the last step
    }
  }
  double median = observed_time_percentiles(test)[1];
  for (int i = 0; i < test.size(); ++i)
    pred.risk[static_cast<std::size_t>(i)] = 1.0 - pred.survival_at(i, median);
  return pred;
}

MetricsReport compute_metrics(const SurvivalDataset& test, const SurvivalPrediction& pred,
                              PredictionStyle style, const GroupColumn* eval_group,
                              std::span<const GroupColumn> partitions, double gamma) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> times = observed_time_percentiles(test);
  MetricsReport report;
  report.ctd = concordance_td(test, pred);
  report.ibs = ibs(test, pred);

  if (style == PredictionStyle::PartialHazard) {
    std::vector<double> hazard(pred.risk.size());
    for (std::size_t i = 0; i < pred.risk.size(); ++i) hazard[i] = std::exp(pred.risk[i]);
    report.ci_pct = eval_group ? concordance_imparity(test, pred.risk, *eval_group) : nan;
    report.f_i = fairness_individual(hazard, test.features, gamma);
    report.f_g = eval_group ? fairness_group(hazard, *eval_group) : nan;
    report.f_cap = partitions.empty() ? nan : fairness_intersectional(hazard, partitions);
  } else {
    report.ci_pct =
        eval_group ? concordance_imparity_survival(test, pred, *eval_group, times) : nan;
    report.f_i = fairness_individual_survival(pred, test.features, gamma, times);
    report.f_g = eval_group ? fairness_group_survival(pred, *eval_group, times) : nan;
    report.f_cap = partitions.empty() ? nan : fairness_intersectional_survival(pred, partitions, times);
  }
  report.f_ci = fairness_censoring_individual(test, pred, gamma, times);
  report.f_cg = eval_group ? fairness_censoring_group(test, pred, *eval_group, gamma, times) : nan;
  return report;
}

double worst_group_mean_loss(const SurvivalDataset& ds, const GroupColumn& partition,
                             const ModelSpec& spec, const ModelParams& params,
                             const LossSpec& loss) {
  std::vector<int> rows = all_rows(ds);
  std::vector<double> losses = pointwise_loss_values(ds, rows, rows, true, spec, params, loss);
  double worst = -std::numeric_limits<double>::infinity();
  for (int g = 0; g < partition.group_count(); ++g) {
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < ds.size(); ++i)
      if (partition.ids[static_cast<std::size_t>(i)] == g) {
        sum += losses[static_cast<std::size_t>(i)];
        ++count;
      }
    if (count > 0) worst = std::max(worst, sum / count);
  }
  return worst;
}

namespace {

struct ModelContext {
  ModelSpec spec;
  LossSpec loss;
  TimeGrid grid;  // discrete-time models only
};

ModelContext make_context(const ExperimentConfig& cfg, const SurvivalDataset& fit) {
  ModelContext ctx;
  int d = fit.dim();
  if (cfg.model == ModelChoice::DeepHit) {
    ctx.grid = cfg.deephit_grid_steps > 0 ? uniform_time_grid(fit, cfg.deephit_grid_steps)
                                          : event_time_grid(fit);
    ctx.spec = ModelSpec{ModelKind::MlpSimplex, d, {cfg.deephit_hidden, cfg.deephit_hidden},
                         ctx.grid.size() * fit.delta_max};
    DeepHitConfig dh;
    dh.beta = cfg.deephit_beta;
    dh.sigma = cfg.deephit_sigma;
    dh.grid = ctx.grid;
    dh.population = fit.size();
    dh.event_weights = cfg.deephit_event_weights;
    if (!dh.event_weights.empty() &&
        static_cast<int>(dh.event_weights.size()) != fit.delta_max)
      throw ConfigError("event_weights must list one weight per competing event");
    ctx.loss = LossSpec::deep_hit(dh, fit.delta_max);
  } else {
    ctx.spec = cfg.model == ModelChoice::CoxLinear
                   ? ModelSpec{ModelKind::Linear, d, {}, 1}
                   : ModelSpec{ModelKind::MlpScalar, d, {cfg.cox_hidden}, 1};
    ctx.loss = LossSpec::cox();
  }
  return ctx;
}

SurvivalPrediction predict_for(const ExperimentConfig& cfg, const ModelContext& ctx,
                               const SurvivalDataset& fit, const SurvivalDataset& eval,
                               const ModelParams& params) {
  if (cfg.model == ModelChoice::DeepHit)
    return predict_discrete(eval, ctx.spec, params, ctx.grid, fit.delta_max);
  return predict_proportional_hazards(fit, eval, ctx.spec, params);
}

PredictionStyle style_for(const ExperimentConfig& cfg) {
  return cfg.model == ModelChoice::DeepHit ? PredictionStyle::SurvivalCurve
                                           : PredictionStyle::PartialHazard;
}

double validation_fairness(const ExperimentConfig& cfg, const SurvivalDataset& val,
                           const SurvivalPrediction& pred, const GroupColumn* group) {
  if (group == nullptr) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> times = observed_time_percentiles(val);
  try {
    if (cfg.tuning_metric == TuningMetric::ConcordanceImparity) {
      if (style_for(cfg) == PredictionStyle::PartialHazard)
        return concordance_imparity(val, pred.risk, *group);
      return concordance_imparity_survival(val, pred, *group, times);
    }
    return fairness_censoring_group(val, pred, *group, cfg.train.gamma, times);
  } catch (const ValidationError&) {
    // a small validation split can leave a group without valid pairs; such a
    // candidate cannot be selected by the fairness rule
    return std::numeric_limits<double>::quiet_NaN();
  }
}

RegularizerKind regularizer_for(MethodChoice method) {
  switch (method) {
    case MethodChoice::RegFi: return RegularizerKind::Individual;
    case MethodChoice::RegFg: return RegularizerKind::Group;
    case MethodChoice::RegFci: return RegularizerKind::CensoringIndividual;
    case MethodChoice::RegFcg: return RegularizerKind::CensoringGroup;
    default: return RegularizerKind::None;
  }
}

struct Candidate {
  std::string label;
  TrainResult result;
};

std::string format_label(const char* key, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%s=%g", key, value);
  return buffer;
}

std::vector<Candidate> train_candidates(const ExperimentConfig& cfg, const ModelContext& ctx,
                                        const SurvivalDataset& fit, const GroupColumn* fit_group,
                                        std::uint64_t train_seed) {
  std::vector<Candidate> candidates;
  TrainConfig base = cfg.train;
  base.seed = train_seed;
  DroConfig dro = cfg.dro;
  dro.seed = train_seed;

  for (double lr : cfg.lr_grid) {
    TrainConfig tc = base;
    tc.learning_rate = lr;
    std::string lr_label = format_label("lr", lr);
    switch (cfg.method) {
      case MethodChoice::Erm:
        candidates.push_back({lr_label, train_erm(fit, ctx.spec, ctx.loss, tc)});
        break;
      case MethodChoice::RegFi:
      case MethodChoice::RegFg:
      case MethodChoice::RegFci:
      case MethodChoice::RegFcg:
        for (double lambda : cfg.lambda_grid) {
          TrainConfig rc = tc;
          rc.lambda = lambda;
          rc.regularizer = regularizer_for(cfg.method);
          candidates.push_back({lr_label + ";" + format_label("lambda", lambda),
                                train_regularized(fit, ctx.spec, ctx.loss, rc, fit_group)});
        }
        break;
      case MethodChoice::Dro:
      case MethodChoice::DroSplit:
      case MethodChoice::DroExactCox:
        for (double alpha : cfg.effective_alpha_grid()) {
          DroConfig dc = dro;
          dc.alpha = alpha;
          std::string label = lr_label + ";" + format_label("alpha", alpha);
          if (cfg.method == MethodChoice::Dro)
            candidates.push_back({label, train_dro(fit, ctx.spec, ctx.loss, dc, tc)});
          else if (cfg.method == MethodChoice::DroSplit)
            candidates.push_back({label, train_split_dro(fit, ctx.spec, ctx.loss, dc, tc)});
          else
            candidates.push_back({label, train_exact_dro_cox(fit, ctx.spec, dc, tc)});
        }
        break;
    }
  }
  return candidates;
}

std::string sanitize(std::string text) {
  for (char& ch : text)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return text;
}

void round_report(MetricsReport& report) {
  report.ctd = round_sig6(report.ctd);
  report.ibs = round_sig6(report.ibs);
  report.ci_pct = round_sig6(report.ci_pct);
  report.f_i = round_sig6(report.f_i);
  report.f_g = round_sig6(report.f_g);
  report.f_cap = round_sig6(report.f_cap);
  report.f_ci = round_sig6(report.f_ci);
  report.f_cg = round_sig6(report.f_cg);
}

void accumulate_summary(RunOutput& output) {
  std::vector<const MetricsReport*> ok;
  std::vector<double> worst;
  for (const auto& r : output.repeats) {
    if (r.failed) {
      ++output.failures;
      continue;
    }
    ok.push_back(&r.metrics);
    worst.push_back(r.worst_group_loss);
  }
  if (ok.empty()) return;
  auto mean_of = [&](auto field) {
    double total = 0.0;
    for (const auto* m : ok) total += m->*field;
    return total / static_cast<double>(ok.size());
  };
  auto std_of = [&](auto field, double mean) {
    if (ok.size() < 2) return 0.0;
    double total = 0.0;
    for (const auto* m : ok) total += (m->*field - mean) * (m->*field - mean);
    return std::sqrt(total / static_cast<double>(ok.size() - 1));
  };
  auto fill = [&](auto field) {
    double mean = mean_of(field);
    output.mean.*field = mean;
    output.stddev.*field = std_of(field, mean);
  };
  fill(&MetricsReport::ctd);
  fill(&MetricsReport::ibs);
  fill(&MetricsReport::ci_pct);
  fill(&MetricsReport::f_i);
  fill(&MetricsReport::f_g);
  fill(&MetricsReport::f_cap);
  fill(&MetricsReport::f_ci);
  fill(&MetricsReport::f_cg);
  double total = 0.0;
  for (double w : worst) total += w;
  output.mean_worst_group_loss = total / static_cast<double>(worst.size());
  if (worst.size() > 1) {
    double var = 0.0;
    for (double w : worst)
      var += (w - output.mean_worst_group_loss) * (w - output.mean_worst_group_loss);
    output.stddev_worst_group_loss = std::sqrt(var / static_cast<double>(worst.size() - 1));
  } else {
    output.stddev_worst_group_loss = 0.0;
  }
}

void write_outputs(const ExperimentConfig& cfg, const RunOutput& output,
                   const std::vector<std::string>& tuning_rows) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  std::ofstream runs(fs::path(cfg.out_dir) / "runs.csv");
  runs << "repeat,selected," << MetricsReport::csv_header()
       << ",worst_group_loss,tuning_rule_satisfied,status\n";
  for (const auto& r : output.repeats) {
    if (r.failed) {
      runs << r.repeat << ",,,,,,,,,,," << 0 << ",failed: " << sanitize(r.error) << "\n";
      continue;
    }
    char worst[32];
    std::snprintf(worst, sizeof(worst), "%.6g", r.worst_group_loss);
    runs << r.repeat << "," << r.hyperparams << "," << r.metrics.csv_row() << "," << worst << ","
         << (r.tuning_rule_satisfied ? 1 : 0) << ",ok\n";
  }

  std::ofstream summary(fs::path(cfg.out_dir) / "summary.csv");
  summary << "statistic," << MetricsReport::csv_header() << ",worst_group_loss\n";
  char worst_mean[32], worst_std[32];
  std::snprintf(worst_mean, sizeof(worst_mean), "%.6g", output.mean_worst_group_loss);
  std::snprintf(worst_std, sizeof(worst_std), "%.6g", output.stddev_worst_group_loss);
  summary << "mean," << output.mean.csv_row() << "," << worst_mean << "\n";
  summary << "std," << output.stddev.csv_row() << "," << worst_std << "\n";

  std::ofstream tuning(fs::path(cfg.out_dir) / "tuning.csv");
  tuning << "repeat,candidate,val_ctd,val_fairness,selected\n";
  for (const auto& row : tuning_rows) tuning << row << "\n";
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  SurvivalDataset ds = load_csv(cfg.dataset_path, cfg.schema);
  const GroupColumn* eval_group = nullptr;
  if (!cfg.eval_groups.empty()) {
    eval_group = ds.find_group(cfg.eval_groups.front());
    if (eval_group == nullptr)
      throw ConfigError("evaluation group '" + cfg.eval_groups.front() + "' not in the dataset");
    for (const auto& name : cfg.eval_groups)
      if (ds.find_group(name) == nullptr)
        throw ConfigError("evaluation group '" + name + "' not in the dataset");
  }

  SplitAssignment holdout = stratified_split(ds, 0.8, cfg.seed);
  SurvivalDataset train = ds.subset(holdout.d1);
  SurvivalDataset test = ds.subset(holdout.d2);

  const GroupColumn* test_group =
      eval_group != nullptr ? test.find_group(eval_group->name) : nullptr;
  std::vector<GroupColumn> test_partitions;
  for (const auto& name : cfg.eval_groups) test_partitions.push_back(*test.find_group(name));

  RunOutput output;
  std::vector<std::string> tuning_rows;
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  {
    // layout descriptor for the flat parameter files written per repeat
    json descriptor;
    descriptor["model"] = model_name(cfg.model);
    descriptor["method"] = method_name(cfg.method);
    descriptor["input_dim"] = ds.dim();
    descriptor["delta_max"] = ds.delta_max;
    if (cfg.model == ModelChoice::CoxMlp) descriptor["hidden"] = std::vector<int>{cfg.cox_hidden};
    if (cfg.model == ModelChoice::DeepHit)
      descriptor["hidden"] = std::vector<int>{cfg.deephit_hidden, cfg.deephit_hidden};
    std::ofstream model_file(fs::path(cfg.out_dir) / "model.json");
    model_file << descriptor.dump(2) << "\n";
  }

  for (int repeat = 0; repeat < cfg.repeats; ++repeat) {
    RepeatOutcome outcome;
    outcome.repeat = repeat;
    try {
      std::uint64_t repeat_seed = cfg.seed + 7919ull * static_cast<std::uint64_t>(repeat + 1);
      SplitAssignment val_split = stratified_split(train, 0.8, repeat_seed);
      SurvivalDataset fit = train.subset(val_split.d1);
      SurvivalDataset val = train.subset(val_split.d2);
      const GroupColumn* fit_group =
          eval_group != nullptr ? fit.find_group(eval_group->name) : nullptr;
      const GroupColumn* val_group =
          eval_group != nullptr ? val.find_group(eval_group->name) : nullptr;
      ModelContext ctx = make_context(cfg, fit);

      // reference accuracy of the unregularized model for the 5% rule
      double reference_ctd = -std::numeric_limits<double>::infinity();
      for (double lr : cfg.lr_grid) {
        TrainConfig tc = cfg.train;
        tc.learning_rate = lr;
        tc.seed = repeat_seed;
        TrainResult base = train_erm(fit, ctx.spec, ctx.loss, tc);
        SurvivalPrediction pred = predict_for(cfg, ctx, fit, val, base.params);
        reference_ctd = std::max(reference_ctd, concordance_td(val, pred));
      }

      std::vector<Candidate> candidates = train_candidates(cfg, ctx, fit, fit_group, repeat_seed);
      std::vector<TuneCandidate> scored;
      for (const auto& candidate : candidates) {
        SurvivalPrediction pred = predict_for(cfg, ctx, fit, val, candidate.result.params);
        double val_ctd = concordance_td(val, pred);
        double val_fair = validation_fairness(cfg, val, pred, val_group);
        scored.push_back({candidate.label, val_ctd, val_fair});
      }
      TuneSelection selection = tune(scored, reference_ctd);
      for (std::size_t i = 0; i < scored.size(); ++i) {
        std::ostringstream row;
        row << repeat << "," << scored[i].label << "," << round_sig6(scored[i].val_ctd) << ","
            << round_sig6(scored[i].val_fairness) << ","
            << (static_cast<int>(i) == selection.index ? 1 : 0);
        tuning_rows.push_back(row.str());
      }

      const Candidate& chosen = candidates[static_cast<std::size_t>(selection.index)];
      outcome.hyperparams = chosen.label;
      outcome.tuning_rule_satisfied = selection.rule_satisfied;
      SurvivalPrediction pred = predict_for(cfg, ctx, fit, test, chosen.result.params);
      outcome.metrics =
          compute_metrics(test, pred, style_for(cfg), test_group, test_partitions, cfg.train.gamma);
      round_report(outcome.metrics);
      if (test_group != nullptr)
        outcome.worst_group_loss = round_sig6(
            worst_group_mean_loss(test, *test_group, ctx.spec, chosen.result.params, ctx.loss));

      save_params_csv((fs::path(cfg.out_dir) / ("params_repeat" + std::to_string(repeat) + ".csv"))
                          .string(),
                      chosen.result.params);
      write_history_csv((fs::path(cfg.out_dir) / ("history_repeat" + std::to_string(repeat) + ".csv"))
                            .string(),
                        chosen.result.history);
    } catch (const Error& e) {
      outcome.failed = true;
      outcome.error = e.what();
    }
    output.repeats.push_back(std::move(outcome));
  }

  accumulate_summary(output);
  write_outputs(cfg, output, tuning_rows);
  return output;
}

std::vector<SweepRow> sweep_alpha(const ExperimentConfig& cfg, std::span<const double> alphas) {
  if (cfg.method != MethodChoice::Dro && cfg.method != MethodChoice::DroSplit &&
      cfg.method != MethodChoice::DroExactCox)
    throw ConfigError("sweep-alpha requires a DRO method");
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    ExperimentConfig point = cfg;
    point.alpha_grid = {alpha};
    point.dro.alpha = alpha;
    char sub[64];
    std::snprintf(sub, sizeof(sub), "alpha_%g", alpha);
    point.out_dir = (std::filesystem::path(cfg.out_dir) / sub).string();
    RunOutput output = run_experiment(point);
    SweepRow row;
    row.alpha = alpha;
    row.metrics = output.mean;
    row.worst_group_loss = output.mean_worst_group_loss;
    rows.push_back(row);
  }
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream sweep(std::filesystem::path(cfg.out_dir) / "sweep.csv");
  sweep << "alpha,ctd,ibs,ci_pct,f_ci,f_cg,worst_group_loss\n";
  for (const auto& row : rows) {
    char buffer[256];
    std::snprintf(buffer, sizeof(buffer), "%g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g", row.alpha,
                  row.metrics.ctd, row.metrics.ibs, row.metrics.ci_pct, row.metrics.f_ci,
                  row.metrics.f_cg, row.worst_group_loss);
    sweep << buffer << "\n";
  }
  return rows;
}

MetricsReport evaluate_predictions(const ExperimentConfig& cfg, const std::string& predictions_csv,
                                   PredictionStyle style) {
  SurvivalDataset ds = load_csv(cfg.dataset_path, cfg.schema);
  std::ifstream in(predictions_csv);
  if (!in) throw ConfigError("cannot open predictions '" + predictions_csv + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty predictions file");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header[0] != "risk")
    throw SchemaError("predictions file must start with a 'risk' column");
  SurvivalPrediction pred;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].rfind("surv_", 0) != 0)
      throw SchemaError("prediction columns after 'risk' must be named surv_<time>");
    pred.grid.points.push_back(std::stod(header[c].substr(5)));
  }
  for (std::size_t c = 1; c < pred.grid.points.size(); ++c)
    if (pred.grid.points[c] <= pred.grid.points[c - 1])
      throw SchemaError("prediction times must be strictly increasing");
  if (!pred.grid.points.empty() && pred.grid.points.front() <= 0.0)
    throw SchemaError("prediction times must be positive");
  std::vector<std::vector<double>> rows;
  int row_index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_index;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != header.size())
      throw ParseError("predictions row " + std::to_string(row_index) + " has wrong width");
    rows.push_back(values);
  }
  if (static_cast<int>(rows.size()) != ds.size())
    throw ValidationError("predictions row count does not match the dataset");

  pred.survival.resize(ds.size(), pred.grid.size());
  pred.risk.resize(static_cast<std::size_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i) {
    pred.risk[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i)][0];
    for (int l = 0; l < pred.grid.size(); ++l)
      pred.survival(i, l) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(l + 1)];
  }

  const GroupColumn* eval_group =
      cfg.eval_groups.empty() ? nullptr : ds.find_group(cfg.eval_groups.front());
  std::vector<GroupColumn> partitions;
  for (const auto& name : cfg.eval_groups) {
    const GroupColumn* g = ds.find_group(name);
    if (g == nullptr) throw ConfigError("evaluation group '" + name + "' not in the dataset");
    partitions.push_back(*g);
  }
  return compute_metrics(ds, pred, style, eval_group, partitions, cfg.train.gamma);
}

// --- finite-difference suites -------------------------------------------------

namespace {

SurvivalDataset synthetic_sample(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  SurvivalDataset ds;
  ds.features.resize(n, d);
  ds.times.resize(n);
  ds.events.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) ds.features(i, c) = rng.normal();
    ds.times[i] = 0.25 + 3.0 * rng.uniform();
    ds.events[i] = rng.uniform() < 0.7 ? 1 : 0;
  }
  ds.events[0] = 1;
  if (n > 1) ds.events[1] = 0;
  return ds;
}

template <class F>
double gradient_gap(F&& objective, std::span<const double> at) {
  std::vector<double> analytic = ad::gradient(
      [&](ad::Tape&, std::span<const ad::Var> params) { return objective(params); }, at);
  std::vector<double> numeric = ad::finite_difference_gradient(
      [&](std::span<const double> params) { return objective(params); }, at, 1e-5);
  double worst = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    double scale = std::max(std::fabs(numeric[i]), 1e-6);
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

std::vector<double> random_theta(int count, Rng& rng, double scale = 0.6) {
  std::vector<double> theta(static_cast<std::size_t>(count));
  for (auto& v : theta) v = scale * rng.normal();
  return theta;
}

}  // namespace

bool run_gradient_checks(std::ostream& out) {
  bool all_ok = true;
  auto report = [&](const std::string& name, double err, double tol = 1e-4) {
    bool ok = std::isfinite(err) && err <= tol;
    all_ok = all_ok && ok;
    char line[160];
    std::snprintf(line, sizeof(line), "[%s] %-34s max relative error %.3g (tolerance %g)\n",
                  ok ? "ok" : "FAIL", name.c_str(), err, tol);
    out << line;
  };

  {  // scalar and simplex model forwards
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
      int d = 2 + static_cast<int>(rng.below(3));
      ModelSpec spec{ModelKind::MlpScalar, d, {3}, 1};
      Eigen::VectorXd x(d);
      for (int c = 0; c < d; ++c) x[c] = rng.normal();
      std::vector<double> theta = random_theta(spec.param_count(), rng);
      worst = std::max(worst, gradient_gap(
                                  [&](const auto& params) {
                                    detail::ThetaSpanAt<std::decay_t<decltype(params[0])>> at{params};
                                    return forward_scalar_t<std::decay_t<decltype(params[0])>>(spec, at, x);
                                  },
                                  theta));
    }
    report("model scalar forward", worst);
  }

  {  // Cox partial likelihood
    Rng rng(23);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      int n = 4 + static_cast<int>(rng.below(7));
      int d = 1 + static_cast<int>(rng.below(5));
      SurvivalDataset ds = synthetic_sample(n, d, 100 + static_cast<std::uint64_t>(trial));
      ModelSpec spec{ModelKind::Linear, d, {}, 1};
      LossSpec loss = LossSpec::cox();
      std::vector<double> theta = random_theta(d, rng);
      std::vector<int> rows = all_rows(ds);
      worst = std::max(
          worst, gradient_gap(
                     [&](const auto& params) {
                       using S = std::decay_t<decltype(params[0])>;
                       std::vector<S> losses =
                           pointwise_losses<S>(ds, rows, rows, true, spec, params, {}, loss);
                       S total = losses[0];
                       for (std::size_t i = 1; i < losses.size(); ++i) total = total + losses[i];
                       return total / static_cast<double>(losses.size());
                     },
                     theta));
    }
    report("cox partial likelihood", worst);
  }

  {  // DeepHit loss across beta values
    Rng rng(37);
    double worst = 0.0;
    for (double beta : {0.0, 0.5, 1.0}) {
      for (int trial = 0; trial < 7; ++trial) {
        int n = 5 + static_cast<int>(rng.below(5));
        int d = 1 + static_cast<int>(rng.below(3));
        SurvivalDataset ds = synthetic_sample(n, d, 300 + static_cast<std::uint64_t>(trial));
        TimeGrid grid = event_time_grid(ds);
        DeepHitConfig dh;
        dh.beta = beta;
        dh.sigma = 0.4;
        dh.grid = grid;
        dh.population = n;
        LossSpec loss = LossSpec::deep_hit(dh);
        ModelSpec spec{ModelKind::MlpSimplex, d, {3}, grid.size()};
        std::vector<double> theta = random_theta(spec.param_count(), rng, 0.4);
        std::vector<int> rows = all_rows(ds);
        worst = std::max(
            worst, gradient_gap(
                       [&](const auto& params) {
                         using S = std::decay_t<decltype(params[0])>;
                         std::vector<S> losses =
                             pointwise_losses<S>(ds, rows, rows, true, spec, params, {}, loss);
                         S total = losses[0];
                         for (std::size_t i = 1; i < losses.size(); ++i) total = total + losses[i];
                         return total / static_cast<double>(losses.size());
                       },
                       theta));
      }
    }
    report("deephit loss (beta 0/0.5/1)", worst);
  }

  {  // fixed-eta DRO gradient vs finite differences of the dual objective
    Rng rng(53);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      int n = 4 + static_cast<int>(rng.below(7));
      int d = 1 + static_cast<int>(rng.below(5));
      SurvivalDataset ds = synthetic_sample(n, d, 500 + static_cast<std::uint64_t>(trial));
      ModelSpec spec{ModelKind::Linear, d, {}, 1};
      LossSpec loss = LossSpec::cox();
      std::vector<int> rows = all_rows(ds);
      ModelParams params;
      std::vector<double> theta = random_theta(d, rng);
      params.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), d);
      double c = c_alpha(0.2 + 0.6 * rng.uniform());
      std::vector<double> losses = pointwise_loss_values(ds, rows, rows, true, spec, params, loss);
      double max_loss = *std::max_element(losses.begin(), losses.end());
      double eta = 0.3 * max_loss;  // keep some terms active, away from kinks
      Eigen::VectorXd analytic =
          dro_grad_theta(ds, rows, rows, true, spec, params, loss, eta, c);
      std::vector<double> numeric = ad::finite_difference_gradient(
          [&](std::span<const double> th) {
            ModelParams p;
            p.theta = Eigen::Map<const Eigen::VectorXd>(th.data(), d);
            return dro_objective(pointwise_loss_values(ds, rows, rows, true, spec, p, loss), eta, c);
          },
          theta, 1e-5);
      for (int i = 0; i < d; ++i) {
        double scale = std::max(std::fabs(numeric[static_cast<std::size_t>(i)]), 1e-6);
        worst = std::max(worst, std::fabs(analytic[i] - numeric[static_cast<std::size_t>(i)]) / scale);
      }
    }
    report("dro gradient at fixed eta", worst);
  }

  {  // full Cox loss over (theta, baseline)
    Rng rng(71);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      int n = 5 + static_cast<int>(rng.below(6));
      int d = 1 + static_cast<int>(rng.below(4));
      SurvivalDataset raw = synthetic_sample(n, d, 700 + static_cast<std::uint64_t>(trial));
      TimeGrid grid = event_time_grid(raw);
      SurvivalDataset ds = snap_censored_times(raw, grid);
      LossSpec loss = LossSpec::cox_full(grid);
      ModelSpec spec{ModelKind::Linear, d, {}, 1};
      std::vector<int> rows = all_rows(ds);
      std::vector<double> flat = random_theta(d + grid.size(), rng, 0.4);
      worst = std::max(
          worst, gradient_gap(
                     [&](const auto& params) {
                       using S = std::decay_t<decltype(params[0])>;
                       std::span<const S> theta{params.data(), static_cast<std::size_t>(d)};
                       std::span<const S> psi{params.data() + d,
                                              static_cast<std::size_t>(grid.size())};
                       std::vector<S> losses =
                           pointwise_losses<S>(ds, rows, rows, true, spec, theta, psi, loss);
                       S total = losses[0];
                       for (std::size_t i = 1; i < losses.size(); ++i) total = total + losses[i];
                       return total / static_cast<double>(losses.size());
                     },
                     flat));
    }
    report("full cox loss (theta, baseline)", worst);
  }

  {  // every fairness regularizer on the training objective
    Rng rng(91);
    for (RegularizerKind kind :
         {RegularizerKind::Individual, RegularizerKind::Group,
          RegularizerKind::CensoringIndividual, RegularizerKind::CensoringGroup}) {
      double worst = 0.0;
      for (int trial = 0; trial < 5; ++trial) {
        int n = 6 + static_cast<int>(rng.below(5));
        int d = 2;
        SurvivalDataset ds = synthetic_sample(n, d, 900 + static_cast<std::uint64_t>(trial));
        GroupColumn group;
        group.name = "g";
        group.levels = {"a", "b"};
        for (int i = 0; i < n; ++i) group.ids.push_back(i % 2);
        ds.groups.push_back(group);
        ModelSpec spec{ModelKind::Linear, d, {}, 1};
        LossSpec loss = LossSpec::cox();
        TrainConfig cfg;
        cfg.lambda = 0.5;
        cfg.regularizer = kind;
        cfg.gamma = 0.05;
        std::vector<double> theta = random_theta(d, rng, 0.3);
        worst = std::max(worst, gradient_gap(
                                    [&](const auto& params) {
                                      using S = std::decay_t<decltype(params[0])>;
                                      return regularized_objective_t<S>(ds, spec, loss, cfg,
                                                                        &ds.groups[0], params);
                                    },
                                    theta));
      }
      const char* label = kind == RegularizerKind::Individual          ? "individual"
                          : kind == RegularizerKind::Group             ? "group"
                          : kind == RegularizerKind::CensoringIndividual ? "censoring-individual"
                                                                         : "censoring-group";
      report(std::string("regularizer (") + label + ")", worst);
    }
  }

  return all_ok;
}

}  // namespace survdro
