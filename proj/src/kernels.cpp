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
#include "rgpf/kernels.hpp"

#include <cmath>

namespace rgpf {

void KernelHyperparameters::validate() const {
  if (length_scales.size() == 0)
    throw HyperparameterError("kernel: empty length-scale vector");
  if ((length_scales.array() <= 0).any())
    throw HyperparameterError("kernel: length scales must be positive");
  if (signal_variance <= 0)
    throw HyperparameterError("kernel: signal variance must be positive");
  if (noise_variance < 0)
    throw HyperparameterError("kernel: noise variance must be non-negative");
}

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double eval_scaled(const Eigen::VectorXd& d, const KernelSpec& spec,
                   const KernelHyperparameters& hp) {
  const double tau2 = hp.signal_variance;
  const auto& l = hp.length_scales;
  switch (spec.kind) {
    case KernelKind::kRbf: {
      const double s = (d.array() / l.array()).square().sum();
      return tau2 * std::exp(-0.5 * s);
    }
    case KernelKind::kExponential: {
      const double s = (d.array().abs() / l.array()).sum();
      return tau2 * std::exp(-s);
    }
    case KernelKind::kMatern32: {
      const double r = std::sqrt((d.array() / l.array()).square().sum());
      return tau2 * (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
    }
    case KernelKind::kRationalQuadratic: {
      const double s = 0.5 * (d.array() / l.array()).square().sum();
      if (spec.rq_exponential_variant)
        return tau2 * std::pow(1.0 + std::exp(-s / spec.alpha), -spec.alpha);
      return tau2 * std::pow(1.0 + s / spec.alpha, -spec.alpha);
    }
  }
  return 0.0;
}

}  // namespace

double kernel_eval(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                   const KernelSpec& spec, const KernelHyperparameters& hp) {
  hp.validate();
  if (xi.size() != hp.length_scales.size())
    throw DimensionError("kernel_eval(xi)", hp.length_scales.size(), xi.size());
  if (xj.size() != hp.length_scales.size())
    throw DimensionError("kernel_eval(xj)", hp.length_scales.size(), xj.size());
  if (spec.kind == KernelKind::kRationalQuadratic && spec.alpha <= 0)
    throw HyperparameterError("rational quadratic: alpha must be positive");
  return eval_scaled(xi - xj, spec, hp);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X1,
                              const Eigen::MatrixXd& X2,
                              const KernelSpec& spec,
                              const KernelHyperparameters& hp) {
  hp.validate();
  if (X1.cols() != X2.cols())
    throw DimensionError("kernel_matrix", X1.cols(), X2.cols());
  if (X1.cols() != hp.length_scales.size())
    throw DimensionError("kernel_matrix", hp.length_scales.size(), X1.cols());
  const bool symmetric = &X1 == &X2 ||
                         (X1.rows() == X2.rows() && X1.data() == X2.data());
  Eigen::MatrixXd K(X1.rows(), X2.rows());
  for (Eigen::Index i = 0; i < X1.rows(); ++i) {
    const Eigen::Index j0 = symmetric ? i : 0;
    for (Eigen::Index j = j0; j < X2.rows(); ++j) {
      K(i, j) = eval_scaled(X1.row(i) - X2.row(j), spec, hp);
      if (symmetric) K(j, i) = K(i, j);
    }
  }
  return K;
}

Eigen::MatrixXd add_nugget(const Eigen::MatrixXd& K, double noise_variance) {
  if (K.rows() != K.cols())
    throw DimensionError("add_nugget: matrix must be square");
  if (noise_variance < 0)
    throw HyperparameterError("add_nugget: negative noise variance");
  const double ref = K.diagonal().maxCoeff();
  const double floor = 1e-10 * (ref > 0 ? ref : 1.0);
  const double sigma = std::max(noise_variance, floor);
  Eigen::MatrixXd out = K;
  out.diagonal().array() += sigma;
  return out;
}

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& K,
                                            double noise_variance,
                                            double tau2_ref,
                                            Eigen::MatrixXd* K_out) {
  if (K.rows() != K.cols())
    throw DimensionError("robust_cholesky: matrix must be square");
  if (tau2_ref <= 0) {
    tau2_ref = K.rows() > 0 ? K.diagonal().maxCoeff() : 1.0;
    if (tau2_ref <= 0) tau2_ref = 1.0;
  }
  double jitter = 1e-10 * tau2_ref;
  const double jitter_max = 1e-4 * tau2_ref;
  // First attempt with the nugget alone when it already exceeds the floor.
  double extra = noise_variance >= jitter ? 0.0 : jitter;
  while (true) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise_variance + extra;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      if (K_out) *K_out = std::move(A);
      return llt;
    }
    if (extra >= jitter_max)
      throw NumericalError(
          "robust_cholesky: factorization failed after jitter escalation to " +
          std::to_string(extra));
    extra = extra == 0.0 ? jitter : extra * 10.0;
    if (extra > jitter_max) extra = jitter_max;
  }
}

}  // namespace rgpf
