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
#include "rgpf/basis.hpp"

#include <algorithm>
#include <cmath>

namespace rgpf {

double median(Eigen::VectorXd v) {
  const auto n = v.size();
  if (n == 0) throw DimensionError("median: empty vector");
  double* b = v.data();
  double* mid = b + n / 2;
  std::nth_element(b, mid, b + n);
  if (n % 2 == 1) return *mid;
  double hi = *mid;
  double lo = *std::max_element(b, mid);
  return 0.5 * (lo + hi);
}

Eigen::VectorXd build_basis_row(const Eigen::VectorXd& x,
                                const BasisSpec& spec) {
  if (x.size() != spec.input_dim)
    throw DimensionError("build_basis_row", spec.input_dim, x.size());
  Eigen::VectorXd h(spec.output_dim());
  h(0) = 1.0;
  switch (spec.kind) {
    case BasisKind::kConstant:
      break;
    case BasisKind::kLinear:
      h.tail(x.size()) = x;
      break;
    case BasisKind::kQuadratic:
      h.segment(1, x.size()) = x;
      h.tail(x.size()) = x.array().square();
      break;
  }
  return h;
}

Eigen::MatrixXd build_design_matrix(const Eigen::MatrixXd& X,
                                    const BasisSpec& spec) {
  Eigen::MatrixXd H(X.rows(), spec.output_dim());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    H.row(i) = build_basis_row(X.row(i), spec).transpose();
  return H;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  Standardizer s;
  const auto d = X.cols();
  s.center.resize(d);
  s.scale.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double med = median(X.col(j));
    const double mad = median((X.col(j).array() - med).abs().matrix());
    s.center(j) = med;
    s.scale(j) = mad > 0 ? 1.4826 * mad : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != center.size())
    throw DimensionError("Standardizer::apply", center.size(), X.cols());
  return (X.rowwise() - center.transpose()).array().rowwise() /
         scale.transpose().array();
}

Eigen::VectorXd Standardizer::apply_row(const Eigen::VectorXd& x) const {
  if (x.size() != center.size())
    throw DimensionError("Standardizer::apply_row", center.size(), x.size());
  return (x - center).cwiseQuotient(scale);
}

}  // namespace rgpf
