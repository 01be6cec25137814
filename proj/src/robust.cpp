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
#include "rgpf/robust.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "rgpf/basis.hpp"
#include "rgpf/kernels.hpp"

namespace rgpf {

double huber_rho(double r, double c) {
  const double a = std::abs(r);
  if (a < c) return 0.5 * r * r;
  return c * a - 0.5 * c * c;
}

double huber_psi(double r, double c) {
  if (r > c) return c;
  if (r < -c) return -c;
  return r;
}

double huber_q_weight(double r_S, double c) {
  const double a = std::abs(r_S);
  if (a <= c) return 1.0;
  return c / a;
}

double robust_scale(const Eigen::VectorXd& r, int q) {
  const int n = static_cast<int>(r.size());
  if (n <= q)
    throw DegreesOfFreedomError("robust_scale: need n > q (n=" +
                                std::to_string(n) + ", q=" + std::to_string(q) +
                                ")");
  const double med = median(r.cwiseAbs());
  if (med <= 0) return 1e-8;
  return 1.4826 * (1.0 + 5.0 / (n - q)) * med;
}

Eigen::VectorXd projection_statistics(const Eigen::MatrixXd& H) {
  const Eigen::Index n = H.rows();
  if (n < 2)
    throw DimensionError("projection_statistics: need at least 2 points");

  // Keep only the columns that actually vary across points.
  std::vector<Eigen::Index> varying;
  for (Eigen::Index j = 0; j < H.cols(); ++j) {
    if (H.col(j).maxCoeff() - H.col(j).minCoeff() > 0) varying.push_back(j);
  }
  if (varying.empty())
    throw DegenerateCloudError(
        "projection_statistics: all points identical, no direction exists");
  Eigen::MatrixXd P(n, static_cast<Eigen::Index>(varying.size()));
  for (std::size_t k = 0; k < varying.size(); ++k) P.col(k) = H.col(varying[k]);

  Eigen::VectorXd M(P.cols());
  for (Eigen::Index j = 0; j < P.cols(); ++j) M(j) = median(P.col(j));

  Eigen::VectorXd ps = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z(n), dev(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd u = P.row(j).transpose() - M;
    const double norm = u.norm();
    if (norm == 0) continue;  // point sits at the median, no direction
    z.noalias() = P * (u / norm);
    const double med_z = median(z);
    dev = (z.array() - med_z).abs();
    const double mad = median(dev);
    if (mad <= 0) continue;  // degenerate direction
    const double scale = 1.4826 * mad;
    for (Eigen::Index i = 0; i < n; ++i)
      ps(i) = std::max(ps(i), dev(i) / scale);
  }
  return ps;
}

LeverageWeights leverage_weights(const Eigen::VectorXd& ps, double b) {
  if (b <= 0) throw HyperparameterError("leverage_weights: b must be positive");
  if ((ps.array() < 0).any())
    throw HyperparameterError("leverage_weights: negative projection statistic");
  LeverageWeights out;
  out.ps = ps;
  out.b = b;
  out.w.resize(ps.size());
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    const double ps2 = ps(i) * ps(i);
    out.w(i) = ps2 <= b ? 1.0 : b / ps2;
  }
  return out;
}

double ps_threshold(int dof) {
  if (dof < 1) throw HyperparameterError("ps_threshold: dof must be >= 1");
  boost::math::chi_squared chi2(dof);
  return boost::math::quantile(chi2, 0.975);
}

double detection_threshold(int n, double alpha) {
  if (n < 1) throw HyperparameterError("detection_threshold: n must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw HyperparameterError("detection_threshold: alpha must be in (0, 1)");
  boost::math::normal norm;
  return boost::math::quantile(norm, 1.0 - alpha / (2.0 * n));
}

IrlsResult shgm_irls(const Eigen::MatrixXd& H, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& Sigma, const LeverageWeights& w,
                     const HuberSpec& huber, double tol, int max_iter) {
  const Eigen::Index n = H.rows();
  const Eigen::Index q = H.cols();
  if (n <= q)
    throw DegreesOfFreedomError("shgm_irls: need n > q");
  if (y.size() != n) throw DimensionError("shgm_irls(y)", n, y.size());
  if (w.w.size() != n) throw DimensionError("shgm_irls(w)", n, w.w.size());

  auto llt = robust_cholesky(Sigma, 0.0);
  const Eigen::MatrixXd SinvH = llt.solve(H);
  const Eigen::VectorXd Sinvy = llt.solve(y);

  IrlsResult res;

  // Step 6: plain WLS start.
  {
    Eigen::MatrixXd N = H.transpose() * SinvH;
    Eigen::LLT<Eigen::MatrixXd> nllt(N);
    if (nllt.info() != Eigen::Success)
      throw RankDeficiencyError(
          "shgm_irls: singular normal matrix H^T Sigma^-1 H; "
          "consider a smaller basis");
    res.beta = nllt.solve(H.transpose() * Sinvy);
  }

  Eigen::VectorXd beta = res.beta;
  for (int k = 0; k < max_iter; ++k) {
    const Eigen::VectorXd r = y - H * beta;
    const double s = robust_scale(r, static_cast<int>(q));
    Eigen::VectorXd r_S = r.array() / (w.w.array() * s);
    Eigen::VectorXd qw(n);
    for (Eigen::Index i = 0; i < n; ++i)
      qw(i) = huber_q_weight(r_S(i), huber.c);
    res.weight_trace.push_back(qw);

    Eigen::MatrixXd N = H.transpose() * qw.asDiagonal() * SinvH;
    Eigen::VectorXd rhs = H.transpose() * qw.asDiagonal() * Sinvy;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(N);
    if (qr.rank() < q)
      throw RankDeficiencyError(
          "shgm_irls: singular normal matrix H^T Q Sigma^-1 H; "
          "consider a smaller basis");
    Eigen::VectorXd beta_next = qr.solve(rhs);

    const double delta = (beta_next - beta).lpNorm<Eigen::Infinity>();
    const double ref = 1.0 + beta.lpNorm<Eigen::Infinity>();
    beta = beta_next;
    res.iterations = k + 1;
    if (delta <= tol * ref) {
      res.converged = true;
      break;
    }
  }

  res.beta = beta;
  const Eigen::VectorXd r = y - H * beta;
  res.final_residual_norm = r.norm();
  res.final_scale = robust_scale(r, static_cast<int>(q));
  res.standardized_residuals = r.array() / (w.w.array() * res.final_scale);
  res.q_weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    res.q_weights(i) = huber_q_weight(res.standardized_residuals(i), huber.c);
  return res;
}

}  // namespace rgpf
