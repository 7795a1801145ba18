#include "survdro/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace survdro {

void ModelSpec::validate() const {
  if (input_dim < 1) throw ValidationError("model input dimension must be positive");
  if (output_dim < 1) throw ValidationError("model output dimension must be positive");
  for (int w : hidden)
    if (w < 1) throw ValidationError("hidden widths must be positive");
  if (kind == ModelKind::Linear) {
    if (!hidden.empty()) throw ValidationError("linear models have no hidden layers");
    if (output_dim != 1) throw ValidationError("linear models emit a single score");
  }
  if (kind == ModelKind::MlpScalar && output_dim != 1)
    throw ValidationError("scalar MLP requires output_dim == 1");
}

std::vector<int> ModelSpec::layer_widths() const {
  std::vector<int> widths;
  widths.push_back(input_dim);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(output_dim);
  return widths;
}

int ModelSpec::param_count() const {
  if (kind == ModelKind::Linear) return input_dim;
  std::vector<int> widths = layer_widths();
  int count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    count += widths[l] * widths[l + 1] + widths[l + 1];
  return count;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ModelParams params;
  params.theta.resize(spec.param_count());
  if (spec.kind == ModelKind::Linear) {
    double a = std::sqrt(6.0 / static_cast<double>(spec.input_dim + 1));
    for (int i = 0; i < spec.input_dim; ++i) params.theta[i] = rng.uniform(-a, a);
    return params;
  }
  std::vector<int> widths = spec.layer_widths();
  int offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    int in = widths[l];
    int out = widths[l + 1];
    double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (int i = 0; i < in * out; ++i) params.theta[offset + i] = rng.uniform(-a, a);
    for (int i = 0; i < out; ++i) params.theta[offset + in * out + i] = 0.0;
    offset += in * out + out;
  }
  return params;
}

namespace {

struct VecAt {
  const Eigen::VectorXd& v;
  double operator[](int i) const { return v[i]; }
};

struct VarAt {
  std::span<const ad::Var> v;
  ad::Var operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

}  // namespace

double forward_scalar(const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& x) {
  if (theta.size() != spec.param_count()) throw ValidationError("parameter vector length mismatch");
  return forward_scalar_t<double>(spec, VecAt{theta}, x);
}

ad::Var forward_scalar(const ModelSpec& spec, std::span<const ad::Var> theta, const Eigen::VectorXd& x) {
  if (static_cast<int>(theta.size()) != spec.param_count())
    throw ValidationError("parameter vector length mismatch");
  return forward_scalar_t<ad::Var>(spec, VarAt{theta}, x);
}

std::vector<double> forward_simplex(const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& x) {
  if (theta.size() != spec.param_count()) throw ValidationError("parameter vector length mismatch");
  return forward_simplex_t<double>(spec, VecAt{theta}, x);
}

std::vector<ad::Var> forward_simplex(const ModelSpec& spec, std::span<const ad::Var> theta, const Eigen::VectorXd& x) {
  if (static_cast<int>(theta.size()) != spec.param_count())
    throw ValidationError("parameter vector length mismatch");
  return forward_simplex_t<ad::Var>(spec, VarAt{theta}, x);
}

void save_params_csv(const std::string& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out.precision(17);
  out << "section,value\n";
  for (Eigen::Index i = 0; i < params.theta.size(); ++i) out << "theta," << params.theta[i] << "\n";
  for (Eigen::Index i = 0; i < params.log_hazard.size(); ++i)
    out << "log_hazard," << params.log_hazard[i] << "\n";
}

ModelParams load_params_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> theta, baseline;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("malformed parameter file '" + path + "'");
    std::string section = line.substr(0, comma);
    double value = std::stod(line.substr(comma + 1));
    if (section == "theta")
      theta.push_back(value);
    else if (section == "log_hazard")
      baseline.push_back(value);
    else
      throw ParseError("unknown section '" + section + "' in '" + path + "'");
  }
  ModelParams params;
  params.theta = Eigen::Map<Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  params.log_hazard =
      Eigen::Map<Eigen::VectorXd>(baseline.data(), static_cast<Eigen::Index>(baseline.size()));
  return params;
}

}  // namespace survdro
