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
#ifndef RGPF_GP_HPP_
#define RGPF_GP_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rgpf/basis.hpp"
#include "rgpf/kernels.hpp"
#include "rgpf/robust.hpp"

namespace rgpf {

// gpm: plain WLS mean estimate. rpm: SHGM robust estimate with projection
// statistics leverage weights.
enum class EstimatorMode { kGpm, kRpm };

struct ModelSpec {
  BasisSpec basis;
  KernelSpec kernel;
  EstimatorMode mode = EstimatorMode::kRpm;
  double huber_c = 1.5;
  // PS^2 threshold; <= 0 selects the chi-squared 0.975 quantile with dof
  // equal to the number of varying basis columns.
  double ps_b = 0.0;
  // When set, the noise variance is pinned instead of jointly optimized.
  std::optional<double> fixed_noise_variance;
};

struct FitTraceEntry {
  int outer_iteration = 0;
  double beta_delta = 0.0;
  double nlml = 0.0;
  int irls_iterations = 0;
};

struct TrainedModel {
  ModelSpec spec;
  Eigen::VectorXd beta;  // full basis length; pruned columns hold 0
  KernelHyperparameters hp;
  Standardizer standardizer;
  Eigen::MatrixXd training_inputs;  // raw (unstandardized) X
  Eigen::VectorXd training_targets;
  std::vector<int> active_columns;  // basis columns kept in the regression
  Eigen::MatrixXd sigma;            // Sigma-hat as factored (jitter included)
  Eigen::LLT<Eigen::MatrixXd> chol_sigma;
  Eigen::VectorXd residuals;  // y - H beta
  std::optional<LeverageWeights> weights;  // rpm only
  double residual_scale = 0.0;             // rpm only
  Eigen::VectorXd standardized_residuals;  // rpm only
  bool converged = false;
  std::vector<FitTraceEntry> fit_trace;
};

struct PredictiveDistribution {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;    // empty when only the diagonal was requested
  Eigen::VectorXd per_point_std;
};

struct Tau2Posterior {
  double shape = 0.0;  // (n - q) / 2
  double scale = 0.0;  // (n - q - 2) tau2_hat / 2
  double tau2_hat = 0.0;
};

Eigen::VectorXd wls_beta(const Eigen::MatrixXd& H, const Eigen::MatrixXd& Sigma,
                         const Eigen::VectorXd& y);

struct NlmlResult {
  double value = 0.0;
  // Gradient over (log l_1..log l_d, log tau^2, log sigma_n^2).
  Eigen::VectorXd gradient;
};

// 1/2 r^T Sigma^-1 r + 1/2 log|Sigma| + n/2 log 2pi for the residual
// r = y - H beta, with the analytic gradient in log-hyperparameter space.
NlmlResult neg_log_marginal_likelihood(const KernelHyperparameters& hp,
                                       const KernelSpec& spec,
                                       const Eigen::MatrixXd& Xs,
                                       const Eigen::VectorXd& r,
                                       bool optimize_noise = true);

struct OptimizeOptions {
  int max_iterations = 80;
  double gradient_tol = 1e-5;
  int extra_starts = 4;  // multi-start points beyond the supplied init
  bool optimize_noise = true;
};

// BFGS descent on the negative log marginal likelihood in log-space from
// `init` plus heuristic multi-starts; returns the best local optimum found.
KernelHyperparameters optimize_hyperparameters(
    const Eigen::MatrixXd& Xs, const Eigen::VectorXd& r,
    const KernelSpec& spec, const KernelHyperparameters& init,
    const Eigen::VectorXd& y_for_starts, const OptimizeOptions& opts = {});

struct TrainOptions {
  double outer_tol = 1e-3;
  int max_outer_iterations = 20;
  OptimizeOptions optimizer;
};

TrainedModel train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const ModelSpec& spec, const TrainOptions& opts = {});

PredictiveDistribution predict(const TrainedModel& model,
                               const Eigen::MatrixXd& X_star,
                               bool noisy = false,
                               bool full_covariance = true);

Tau2Posterior tau2_posterior(const Eigen::MatrixXd& H,
                             const Eigen::MatrixXd& Sigma,
                             const Eigen::VectorXd& y);

// Hat matrix S = H (H^T Sigma^-1 H)^-1 H^T Sigma^-1 and residual sensitivity
// matrix W = I - S.
struct ResidualSensitivity {
  Eigen::MatrixXd S;
  Eigen::MatrixXd W;
};
ResidualSensitivity residual_sensitivity(const Eigen::MatrixXd& H,
                                         const Eigen::MatrixXd& Sigma);

// r = W e; the residual pattern produced by a gross error vector.
Eigen::VectorXd smearing_masking_demo(const Eigen::MatrixXd& W,
                                      const Eigen::VectorXd& e);

struct InfluenceDiagnostic {
  double ir = 0.0;       // influence of residual
  Eigen::VectorXd ip;    // influence of position
  Eigen::VectorXd total;
};
InfluenceDiagnostic influence_diagnostic(const TrainedModel& model, int i);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

std::string basis_kind_name(BasisKind k);
BasisKind parse_basis_kind(const std::string& s);
std::string kernel_kind_name(KernelKind k);
KernelKind parse_kernel_kind(const std::string& s);

}  // namespace rgpf

#endif  // RGPF_GP_HPP_
