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
#ifndef RGPF_KERNELS_HPP_
#define RGPF_KERNELS_HPP_

#include <Eigen/Dense>

#include "rgpf/errors.hpp"

namespace rgpf {

enum class KernelKind { kRbf, kExponential, kMatern32, kRationalQuadratic };

struct KernelSpec {
  KernelKind kind = KernelKind::kRbf;
  // Shape parameter of the rational quadratic; ignored by the other kinds.
  double alpha = 1.0;
  // The rational quadratic in its source table composes an exponential inside
  // the (1 + .)^(-alpha) form, which is not unit at zero distance and is kept
  // only as a documented variant; the default is the standard
  // tau^2 * (1 + d^2 / (2 alpha))^(-alpha) form.
  bool rq_exponential_variant = false;
};

struct KernelHyperparameters {
  Eigen::VectorXd length_scales;  // l, one per input dimension
  double signal_variance = 1.0;   // tau^2
  double noise_variance = 0.0;    // sigma_n^2

  void validate() const;
};

double kernel_eval(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                   const KernelSpec& spec, const KernelHyperparameters& hp);

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X1,
                              const Eigen::MatrixXd& X2,
                              const KernelSpec& spec,
                              const KernelHyperparameters& hp);

// K + sigma_n^2 I, with the jitter floor 1e-10 * max diagonal substituted
// when sigma_n^2 is below it.
Eigen::MatrixXd add_nugget(const Eigen::MatrixXd& K, double noise_variance);

// Cholesky with the jitter policy: start at max(sigma_n^2, 1e-10 * tau2_ref),
// escalate x10 up to 1e-4 * tau2_ref on failure, then throw NumericalError.
// tau2_ref defaults to the max diagonal of K. On return, `K_out` (optional)
// receives the matrix actually factored.
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& K,
                                            double noise_variance,
                                            double tau2_ref = -1.0,
                                            Eigen::MatrixXd* K_out = nullptr);

}  // namespace rgpf

#endif  // RGPF_KERNELS_HPP_
