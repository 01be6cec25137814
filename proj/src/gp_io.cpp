/* Copyright 2026 The rgpf Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <json.hpp>

#include "rgpf/dataset.hpp"
#include "rgpf/gp.hpp"

namespace rgpf {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<long>(i)) = a[i];
  return v;
}

Eigen::MatrixXd mat_from_json(const json& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw ParseError("model: ragged matrix");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  }
  return m;
}

std::string basis_name(BasisKind k) {
  switch (k) {
    case BasisKind::kConstant: return "constant";
    case BasisKind::kLinear: return "linear";
    case BasisKind::kQuadratic: return "quadratic";
  }
  return "";
}

BasisKind basis_from_name(const std::string& s) {
  if (s == "constant") return BasisKind::kConstant;
  if (s == "linear") return BasisKind::kLinear;
  if (s == "quadratic") return BasisKind::kQuadratic;
  throw ParseError("unknown basis kind: " + s);
}

std::string kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::kRbf: return "rbf";
    case KernelKind::kExponential: return "exponential";
    case KernelKind::kMatern32: return "matern32";
    case KernelKind::kRationalQuadratic: return "rational_quadratic";
  }
  return "";
}

KernelKind kernel_from_name(const std::string& s) {
  if (s == "rbf") return KernelKind::kRbf;
  if (s == "exponential") return KernelKind::kExponential;
  if (s == "matern32") return KernelKind::kMatern32;
  if (s == "rational_quadratic") return KernelKind::kRationalQuadratic;
  throw ParseError("unknown kernel kind: " + s);
}

}  // namespace

std::string basis_kind_name(BasisKind k) { return basis_name(k); }
BasisKind parse_basis_kind(const std::string& s) { return basis_from_name(s); }
std::string kernel_kind_name(KernelKind k) { return kernel_name(k); }
KernelKind parse_kernel_kind(const std::string& s) {
  return kernel_from_name(s);
}

void save_model(const TrainedModel& model, const std::string& path) {
  json j;
  j["format"] = "rgpf-model-v1";
  j["spec"] = {
      {"basis", basis_name(model.spec.basis.kind)},
      {"input_dim", model.spec.basis.input_dim},
      {"kernel", kernel_name(model.spec.kernel.kind)},
      {"rq_alpha", model.spec.kernel.alpha},
      {"rq_exponential_variant", model.spec.kernel.rq_exponential_variant},
      {"mode", model.spec.mode == EstimatorMode::kRpm ? "rpm" : "gpm"},
      {"huber_c", model.spec.huber_c},
      {"ps_b", model.spec.ps_b},
  };
  if (model.spec.fixed_noise_variance)
    j["spec"]["fixed_noise_variance"] = *model.spec.fixed_noise_variance;
  j["beta"] = vec_to_json(model.beta);
  j["hyperparameters"] = {
      {"length_scales", vec_to_json(model.hp.length_scales)},
      {"signal_variance", model.hp.signal_variance},
      {"noise_variance", model.hp.noise_variance},
  };
  j["standardizer"] = {
      {"center", vec_to_json(model.standardizer.center)},
      {"scale", vec_to_json(model.standardizer.scale)},
  };
  j["training_inputs"] = mat_to_json(model.training_inputs);
  j["training_targets"] = vec_to_json(model.training_targets);
  j["active_columns"] = model.active_columns;
  j["sigma"] = mat_to_json(model.sigma);
  if (model.weights) {
    j["weights"] = {
        {"ps", vec_to_json(model.weights->ps)},
        {"w", vec_to_json(model.weights->w)},
        {"b", model.weights->b},
    };
    j["residual_scale"] = model.residual_scale;
    j["standardized_residuals"] = vec_to_json(model.standardized_residuals);
  }
  j["converged"] = model.converged;
  write_file_atomic(path, j.dump(2) + "\n");
}

TrainedModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("model: invalid JSON in " + path + ": " + e.what());
  }
  try {
    if (j.at("format") != "rgpf-model-v1")
      throw ParseError("model: unknown format in " + path);
    TrainedModel m;
    const auto& s = j.at("spec");
    m.spec.basis.kind = basis_from_name(s.at("basis"));
    m.spec.basis.input_dim = s.at("input_dim");
    m.spec.kernel.kind = kernel_from_name(s.at("kernel"));
    m.spec.kernel.alpha = s.at("rq_alpha");
    m.spec.kernel.rq_exponential_variant = s.at("rq_exponential_variant");
    m.spec.mode =
        s.at("mode") == "rpm" ? EstimatorMode::kRpm : EstimatorMode::kGpm;
    m.spec.huber_c = s.at("huber_c");
    m.spec.ps_b = s.at("ps_b");
    if (s.contains("fixed_noise_variance"))
      m.spec.fixed_noise_variance = s.at("fixed_noise_variance").get<double>();
    m.beta = vec_from_json(j.at("beta"));
    m.hp.length_scales = vec_from_json(j.at("hyperparameters").at("length_scales"));
    m.hp.signal_variance = j.at("hyperparameters").at("signal_variance");
    m.hp.noise_variance = j.at("hyperparameters").at("noise_variance");
    m.standardizer.center = vec_from_json(j.at("standardizer").at("center"));
    m.standardizer.scale = vec_from_json(j.at("standardizer").at("scale"));
    m.training_inputs = mat_from_json(j.at("training_inputs"));
    m.training_targets = vec_from_json(j.at("training_targets"));
    m.active_columns = j.at("active_columns").get<std::vector<int>>();
    m.sigma = mat_from_json(j.at("sigma"));
    if (j.contains("weights")) {
      LeverageWeights lw;
      lw.ps = vec_from_json(j.at("weights").at("ps"));
      lw.w = vec_from_json(j.at("weights").at("w"));
      lw.b = j.at("weights").at("b");
      m.weights = lw;
      m.residual_scale = j.at("residual_scale");
      m.standardized_residuals =
          vec_from_json(j.at("standardized_residuals"));
    }
    m.converged = j.at("converged");

    // The Cholesky factor is recomputed on load; factors are not
    // round-tripped.
    m.chol_sigma = robust_cholesky(m.sigma, 0.0);
    const Eigen::MatrixXd Xs = m.standardizer.apply(m.training_inputs);
    const Eigen::MatrixXd H = build_design_matrix(Xs, m.spec.basis);
    m.residuals = m.training_targets - H * m.beta;
    return m;
  } catch (const json::exception& e) {
    throw ParseError("model: missing or malformed field in " + path + ": " +
                     e.what());
  }
}

}  // namespace rgpf
