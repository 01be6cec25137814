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
#ifndef RGPF_ROBUST_HPP_
#define RGPF_ROBUST_HPP_

#include <Eigen/Dense>
#include <vector>

#include "rgpf/errors.hpp"

namespace rgpf {

// Huber threshold; 1.5 trades efficiency at the Gaussian against robustness.
struct HuberSpec {
  double c = 1.5;
};

double huber_rho(double r, double c);
double huber_psi(double r, double c);

// q(r_S) = psi(r_S) / r_S: 1 inside the threshold, c/|r_S| outside; the
// limit value at r_S = 0 is 1.
double huber_q_weight(double r_S, double c);

// s = 1.4826 * (1 + 5/(n-q)) * median|r|, floored at 1e-8 when the median
// absolute residual vanishes (exact fits).
double robust_scale(const Eigen::VectorXd& r, int q);

// Projection statistics of the rows of H: the maximum standardized projection
// distance over the directions from the coordinatewise median through each
// data point. Constant columns (the intercept) carry no positional
// information and are skipped, as are directions with zero MAD.
Eigen::VectorXd projection_statistics(const Eigen::MatrixXd& H);

struct LeverageWeights {
  Eigen::VectorXd ps;  // projection statistics
  Eigen::VectorXd w;   // weights in (0, 1]
  double b = 0.0;      // PS^2 threshold
};

// w_i = 1 when ps_i^2 <= b, b/ps_i^2 otherwise.
LeverageWeights leverage_weights(const Eigen::VectorXd& ps, double b);

// Chi-squared quantile at probability 0.975 with `dof` degrees of freedom;
// the calibrated default for the PS^2 threshold b.
double ps_threshold(int dof);

// Bonferroni-corrected normal quantile Phi^-1(1 - alpha / (2n)) used to
// declare a whitened standardized residual a gross error. With alpha = 0.01
// the family-wise false-rejection rate on clean Gaussian data stays at 1%.
double detection_threshold(int n, double alpha = 0.01);

struct IrlsResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  double final_residual_norm = 0.0;
  bool converged = false;
  std::vector<Eigen::VectorXd> weight_trace;  // per-iteration Q diagonal
  double final_scale = 0.0;                   // robust scale s at exit
  Eigen::VectorXd standardized_residuals;     // r_i / (w_i s) at exit
  Eigen::VectorXd q_weights;                  // q(r_S) at exit
};

// Schweppe-type GM estimator of beta by IRLS. Starts from the WLS solution,
// re-estimates the robust scale every iteration, and stops when the beta
// update falls below tol * (1 + ||beta||_inf) or after max_iter iterations.
IrlsResult shgm_irls(const Eigen::MatrixXd& H, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& Sigma, const LeverageWeights& w,
                     const HuberSpec& huber = {}, double tol = 1e-6,
                     int max_iter = 100);

}  // namespace rgpf

#endif  // RGPF_ROBUST_HPP_
