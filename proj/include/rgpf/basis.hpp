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
#ifndef RGPF_BASIS_HPP_
#define RGPF_BASIS_HPP_

#include <Eigen/Dense>

#include "rgpf/errors.hpp"

namespace rgpf {

enum class BasisKind { kConstant, kLinear, kQuadratic };

// Regression basis h(x): constant -> [1]; linear -> [1, x]; quadratic ->
// [1, x, x^2] with pure squares only (no cross terms), so q = 2*input_dim + 1.
struct BasisSpec {
  BasisKind kind = BasisKind::kLinear;
  int input_dim = 0;

  int output_dim() const {
    switch (kind) {
      case BasisKind::kConstant:
        return 1;
      case BasisKind::kLinear:
        return input_dim + 1;
      case BasisKind::kQuadratic:
        return 2 * input_dim + 1;
    }
    return 0;
  }
};

Eigen::VectorXd build_basis_row(const Eigen::VectorXd& x,
                                const BasisSpec& spec);

Eigen::MatrixXd build_design_matrix(const Eigen::MatrixXd& X,
                                    const BasisSpec& spec);

// Per-column affine map frozen from the training inputs: center by median,
// scale by 1.4826 * MAD. Columns with zero MAD keep scale 1 so constant
// inputs pass through unchanged (centered).
struct Standardizer {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd apply_row(const Eigen::VectorXd& x) const;
};

// Median of a vector (copies; average of middle pair for even length).
double median(Eigen::VectorXd v);

}  // namespace rgpf

#endif  // RGPF_BASIS_HPP_
