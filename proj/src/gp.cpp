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
#include "rgpf/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rgpf {

namespace {

// Columns that carry no regression information — constant columns (the
// intercept already covers them) and columns (nearly) collinear with earlier
// ones — make the normal matrix singular or wildly ill-conditioned. Selected
// by modified Gram-Schmidt in column order; a column survives only if the
// fraction of its norm orthogonal to the kept columns exceeds `tol`. Rows
// with `row_weights` of zero are excluded, so that leverage-flagged rows
// cannot vote a column in on the strength of their outlying entries alone —
// the regression must be solvable on the trusted bulk.
std::vector<int> find_active_columns(const Eigen::MatrixXd& H,
                                     const Eigen::VectorXd& row_weights,
                                     double tol = 0.02) {
  std::vector<int> active;
  std::vector<Eigen::VectorXd> basis;  // orthonormal kept directions
  for (Eigen::Index j = 0; j < H.cols(); ++j) {
    Eigen::VectorXd v = H.col(j).cwiseProduct(row_weights);
    const double norm0 = v.norm();
    if (norm0 <= 0) continue;
    for (const auto& b : basis) v -= b.dot(v) * b;
    for (const auto& b : basis) v -= b.dot(v) * b;  // re-orthogonalize
    if (v.norm() > tol * norm0) {
      basis.push_back(v / v.norm());
      active.push_back(static_cast<int>(j));
    }
  }
  return active;
}

// Count of columns that vary across rows (the projection-statistics cloud
// dimension used for the chi-squared cutoff).
int count_varying_columns(const Eigen::MatrixXd& H) {
  int count = 0;
  for (Eigen::Index j = 0; j < H.cols(); ++j)
    if (H.col(j).maxCoeff() - H.col(j).minCoeff() > 0) ++count;
  return count;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& H,
                               const std::vector<int>& cols) {
  Eigen::MatrixXd out(H.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(k) = H.col(cols[k]);
  return out;
}

Eigen::VectorXd expand_beta(const Eigen::VectorXd& beta_active,
                            const std::vector<int>& cols, Eigen::Index q) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  for (std::size_t k = 0; k < cols.size(); ++k)
    beta(cols[k]) = beta_active(static_cast<Eigen::Index>(k));
  return beta;
}

double gaussian_cdf(double x) {
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
}

}  // namespace

Eigen::VectorXd wls_beta(const Eigen::MatrixXd& H, const Eigen::MatrixXd& Sigma,
                         const Eigen::VectorXd& y) {
  if (H.rows() != y.size()) throw DimensionError("wls_beta", H.rows(), y.size());
  auto llt = robust_cholesky(Sigma, 0.0);
  const Eigen::MatrixXd SinvH = llt.solve(H);
  const Eigen::MatrixXd N = H.transpose() * SinvH;
  Eigen::LLT<Eigen::MatrixXd> nllt(N);
  if (nllt.info() != Eigen::Success) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(H);
    qr.setThreshold(1e-10);
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < H.cols(); ++k)
      cols += (cols.empty() ? "" : ", ") + std::to_string(perm(k));
    throw RankDeficiencyError(
        "wls_beta: normal matrix is rank deficient; offending basis columns: " +
        (cols.empty() ? std::string("(unknown)") : cols));
  }
  return nllt.solve(H.transpose() * llt.solve(y));
}

NlmlResult neg_log_marginal_likelihood(const KernelHyperparameters& hp,
                                       const KernelSpec& spec,
                                       const Eigen::MatrixXd& Xs,
                                       const Eigen::VectorXd& r,
                                       bool optimize_noise) {
  hp.validate();
  const Eigen::Index n = Xs.rows();
  const Eigen::Index d = Xs.cols();
  if (r.size() != n) throw DimensionError("nlml(r)", n, r.size());

  const Eigen::MatrixXd K0 = kernel_matrix(Xs, Xs, spec, hp);
  Eigen::MatrixXd Sigma;
  auto llt = robust_cholesky(K0, hp.noise_variance, hp.signal_variance, &Sigma);

  const Eigen::VectorXd alpha = llt.solve(r);
  const double logdet =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();

  NlmlResult out;
  out.value = 0.5 * r.dot(alpha) + 0.5 * logdet +
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // d/dtheta = 1/2 tr((Sigma^-1 - alpha alpha^T) dSigma/dtheta).
  Eigen::MatrixXd M = llt.solve(Eigen::MatrixXd::Identity(n, n));
  M.noalias() -= alpha * alpha.transpose();

  out.gradient = Eigen::VectorXd::Zero(d + 2);
  const auto& l = hp.length_scales;
  const double tau2 = hp.signal_variance;

  // Elementwise prefactor P such that dK/dlog l_k = P .* (dx_k/l_k)^2,
  // kind by kind.
  Eigen::MatrixXd P(n, n);
  switch (spec.kind) {
    case KernelKind::kRbf:
      P = K0;
      break;
    case KernelKind::kExponential:
      P.setZero();  // handled separately (|dx| scaling, not squared)
      break;
    case KernelKind::kMatern32: {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double rr = std::sqrt(
              ((Xs.row(i) - Xs.row(j)).transpose().array() / l.array())
                  .square()
                  .sum());
          P(i, j) = 3.0 * tau2 * std::exp(-std::sqrt(3.0) * rr);
        }
      break;
    }
    case KernelKind::kRationalQuadratic: {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double s =
              0.5 * ((Xs.row(i) - Xs.row(j)).transpose().array() / l.array())
                        .square()
                        .sum();
          if (spec.rq_exponential_variant) {
            const double e = std::exp(-s / spec.alpha);
            P(i, j) = -tau2 * std::pow(1.0 + e, -spec.alpha - 1.0) * e;
          } else {
            P(i, j) = tau2 * std::pow(1.0 + s / spec.alpha, -spec.alpha - 1.0);
          }
        }
      break;
    }
  }

  for (Eigen::Index k = 0; k < d; ++k) {
    double g = 0.0;
    const double lk = l(k);
    if (spec.kind == KernelKind::kExponential) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double a = std::abs(Xs(i, k) - Xs(j, k)) / lk;
          g += M(i, j) * K0(i, j) * a;
        }
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double dx = (Xs(i, k) - Xs(j, k)) / lk;
          g += M(i, j) * P(i, j) * dx * dx;
        }
    }
    out.gradient(k) = 0.5 * g;
  }

  // dSigma/dlog tau^2 = K0 (every kind scales linearly in tau^2).
  out.gradient(d) = 0.5 * (M.array() * K0.array()).sum();
  if (optimize_noise)
    out.gradient(d + 1) = 0.5 * hp.noise_variance * M.trace();
  return out;
}

namespace {

struct PackedObjective {
  const Eigen::MatrixXd& Xs;
  const Eigen::VectorXd& r;
  const KernelSpec& spec;
  bool optimize_noise;
  double fixed_noise;
  // Data-driven box in log-space. The likelihood has a degenerate ridge
  // (tau^2 and the length scales growing together approach a polynomial
  // kernel) along which it improves forever while the predictive variance
  // turns into catastrophic cancellation; the box cuts the ridge off.
  Eigen::VectorXd theta_lo;
  Eigen::VectorXd theta_hi;

  Eigen::VectorXd pack(const KernelHyperparameters& hp) const {
    const Eigen::Index d = hp.length_scales.size();
    Eigen::VectorXd theta(d + (optimize_noise ? 2 : 1));
    theta.head(d) = hp.length_scales.array().log();
    theta(d) = std::log(hp.signal_variance);
    if (optimize_noise)
      theta(d + 1) = std::log(std::max(hp.noise_variance, 1e-300));
    return theta;
  }

  KernelHyperparameters unpack(const Eigen::VectorXd& theta) const {
    const Eigen::Index d = Xs.cols();
    KernelHyperparameters hp;
    hp.length_scales = theta.head(d).array().exp();
    hp.signal_variance = std::exp(theta(d));
    hp.noise_variance = optimize_noise ? std::exp(theta(d + 1)) : fixed_noise;
    return hp;
  }

  double eval(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
    if ((theta.array().abs() > 40.0).any())
      throw NumericalError("hyperparameters out of range");
    if (theta_lo.size() == theta.size() &&
        ((theta.array() < theta_lo.array()).any() ||
         (theta.array() > theta_hi.array()).any()))
      throw NumericalError("hyperparameters outside the search box");
    const auto hp = unpack(theta);
    const auto res = neg_log_marginal_likelihood(hp, spec, Xs, r,
                                                 optimize_noise);
    if (!std::isfinite(res.value))
      throw NumericalError("non-finite likelihood");
    if (grad) {
      const Eigen::Index d = Xs.cols();
      grad->resize(theta.size());
      grad->head(d + 1) = res.gradient.head(d + 1);
      if (optimize_noise) (*grad)(d + 1) = res.gradient(d + 1);
    }
    return res.value;
  }
};

// Plain BFGS with Armijo backtracking; evaluation failures reject the step.
bool bfgs_minimize(const PackedObjective& obj, Eigen::VectorXd& theta,
                   double& fval, const OptimizeOptions& opts) {
  const Eigen::Index m = theta.size();
  Eigen::VectorXd grad(m);
  try {
    fval = obj.eval(theta, &grad);
  } catch (const NumericalError&) {
    return false;
  }
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(m, m);
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() <= opts.gradient_tol) break;
    Eigen::VectorXd dir = -Hinv * grad;
    double slope = grad.dot(dir);
    if (slope >= 0) {  // reset a corrupted curvature estimate
      Hinv.setIdentity();
      dir = -grad;
      slope = grad.dot(dir);
    }
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd theta_new, grad_new(m);
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      theta_new = theta + step * dir;
      try {
        f_new = obj.eval(theta_new, &grad_new);
        if (f_new <= fval + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
      } catch (const NumericalError&) {
        // shrink and retry
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = theta_new - theta;
    const Eigen::VectorXd yv = grad_new - grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
      Hinv = (I - rho * s * yv.transpose()) * Hinv *
                 (I - rho * yv * s.transpose()) +
             rho * s * s.transpose();
    }
    const double df = fval - f_new;
    theta = theta_new;
    grad = grad_new;
    fval = f_new;
    if (df <= 1e-9 * (1.0 + std::abs(fval))) break;
  }
  return true;
}

struct RobustMeanFit {
  Eigen::VectorXd beta;
  double scale = 0.0;
  Eigen::VectorXd standardized_residuals;
  int irls_iterations = 0;
};

// SHGM mean step with a divergence guard. When Sigma is fitted nearly
// singular (smooth kernel, vanishing noise), GLS stops controlling the raw
// residuals and the IRLS iteration can drift to a fixed point with a huge
// beta whose inflated scale makes it look acceptable to its own objective.
// The guard compares median absolute residuals against the plain WLS fit
// under the same Sigma and falls back to WLS when IRLS is clearly worse.
RobustMeanFit robust_mean_fit(const Eigen::MatrixXd& Ha,
                              const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& Sigma,
                              const LeverageWeights& lw,
                              const HuberSpec& huber, Eigen::Index q_eff) {
  auto irls = shgm_irls(Ha, y, Sigma, lw, huber);
  const Eigen::VectorXd r_irls = (y - Ha * irls.beta).cwiseAbs();
  const Eigen::VectorXd beta_wls = wls_beta(Ha, Sigma, y);
  const Eigen::VectorXd r_wls = (y - Ha * beta_wls).cwiseAbs();
  RobustMeanFit out;
  out.irls_iterations = irls.iterations;
  if (median(r_irls) <= 3.0 * median(r_wls) + 1e-300) {
    out.beta = irls.beta;
    out.scale = irls.final_scale;
    out.standardized_residuals = irls.standardized_residuals;
    return out;
  }
  out.beta = beta_wls;
  const Eigen::VectorXd r = y - Ha * beta_wls;
  out.scale = robust_scale(r, static_cast<int>(q_eff));
  out.standardized_residuals =
      r.array() / (lw.w.array() * out.scale);
  return out;
}

}  // namespace

// Per-dimension median of pairwise absolute differences; the classic
// length-scale initialization.
Eigen::VectorXd median_distance_heuristic(const Eigen::MatrixXd& Xs) {
  const Eigen::Index n = Xs.rows();
  const Eigen::Index d = Xs.cols();
  Eigen::VectorXd l(d);
  const Eigen::Index stride = n > 64 ? n / 64 : 1;
  for (Eigen::Index k = 0; k < d; ++k) {
    std::vector<double> dist;
    for (Eigen::Index i = 0; i < n; i += stride)
      for (Eigen::Index j = i + stride; j < n; j += stride)
        dist.push_back(std::abs(Xs(i, k) - Xs(j, k)));
    double med = 0.0;
    if (!dist.empty()) {
      Eigen::VectorXd v =
          Eigen::Map<Eigen::VectorXd>(dist.data(), static_cast<long>(dist.size()));
      med = median(v);
    }
    l(k) = med > 0 ? med : 1.0;
  }
  return l;
}

KernelHyperparameters optimize_hyperparameters(
    const Eigen::MatrixXd& Xs, const Eigen::VectorXd& r,
    const KernelSpec& spec, const KernelHyperparameters& init,
    const Eigen::VectorXd& y_for_starts, const OptimizeOptions& opts) {
  init.validate();
  PackedObjective obj{Xs, r, spec, opts.optimize_noise, init.noise_variance};

  // Search box centered on the median-distance heuristic and the residual
  // variance; wide enough for any sane optimum, tight enough to cut off the
  // flat-kernel ridge.
  {
    const Eigen::Index d = Xs.cols();
    const Eigen::VectorXd l_med = median_distance_heuristic(Xs);
    const double var_ref =
        std::max({r.squaredNorm() / static_cast<double>(r.size()),
                  (y_for_starts.array() - y_for_starts.mean()).square().mean(),
                  1e-12});
    const Eigen::Index m = d + (opts.optimize_noise ? 2 : 1);
    obj.theta_lo.resize(m);
    obj.theta_hi.resize(m);
    obj.theta_lo.head(d) = l_med.array().log() - 8.0;
    obj.theta_hi.head(d) = l_med.array().log() + 8.0;
    obj.theta_lo(d) = std::log(var_ref) - 20.0;
    obj.theta_hi(d) = std::log(var_ref) + 12.0;
    if (opts.optimize_noise) {
      obj.theta_lo(d + 1) = std::log(var_ref) - 40.0;
      obj.theta_hi(d + 1) = std::log(var_ref) + 6.0;
    }
  }
  auto clamp_into_box = [&](const KernelHyperparameters& hp) {
    Eigen::VectorXd theta = obj.pack(hp);
    theta = theta.cwiseMax(obj.theta_lo).cwiseMin(obj.theta_hi);
    return obj.unpack(theta);
  };

  std::vector<KernelHyperparameters> starts;
  starts.push_back(clamp_into_box(init));
  if (opts.extra_starts > 0) {
    const Eigen::VectorXd l_med = median_distance_heuristic(Xs);
    const double var_y = std::max(
        (y_for_starts.array() - y_for_starts.mean()).square().mean(), 1e-12);
    const double noise_levels[] = {1e-4, 1e-2, 1e-1};
    int added = 0;
    for (double nl : noise_levels) {
      if (added >= opts.extra_starts) break;
      KernelHyperparameters hp;
      hp.length_scales = l_med;
      hp.signal_variance = var_y;
      hp.noise_variance = opts.optimize_noise ? nl * var_y : init.noise_variance;
      starts.push_back(clamp_into_box(hp));
      ++added;
    }
    if (added < opts.extra_starts) {
      KernelHyperparameters hp;
      hp.length_scales = 3.0 * l_med;
      hp.signal_variance = var_y;
      hp.noise_variance =
          opts.optimize_noise ? 1e-2 * var_y : init.noise_variance;
      starts.push_back(clamp_into_box(hp));
    }
  }

  bool any_ok = false;
  double best_f = std::numeric_limits<double>::infinity();
  KernelHyperparameters best = init;
  std::string failures;
  for (const auto& s : starts) {
    Eigen::VectorXd theta = obj.pack(s);
    double f = 0.0;
    try {
      if (!bfgs_minimize(obj, theta, f, opts)) continue;
    } catch (const std::exception& e) {
      failures += std::string(e.what()) + "; ";
      continue;
    }
    any_ok = true;
    if (f < best_f) {
      best_f = f;
      best = obj.unpack(theta);
    }
  }
  if (!any_ok)
    throw OptimizationError(
        "optimize_hyperparameters: every start failed factorization: " +
        failures);

  // Never return something worse than the (boxed) starting point.
  try {
    const KernelHyperparameters init_boxed = clamp_into_box(init);
    Eigen::VectorXd theta0 = obj.pack(init_boxed);
    if (obj.eval(theta0, nullptr) < best_f) return init_boxed;
  } catch (const NumericalError&) {
  }
  return best;
}

TrainedModel train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const ModelSpec& spec, const TrainOptions& opts) {
  const Eigen::Index n = X.rows();
  if (y.size() != n) throw DimensionError("train(y)", n, y.size());
  if (X.cols() != spec.basis.input_dim)
    throw DimensionError("train(X)", spec.basis.input_dim, X.cols());

  TrainedModel model;
  model.spec = spec;
  model.training_inputs = X;
  model.training_targets = y;
  model.standardizer = Standardizer::fit(X);
  const Eigen::MatrixXd Xs = model.standardizer.apply(X);
  const Eigen::MatrixXd H = build_design_matrix(Xs, spec.basis);

  LeverageWeights lw;
  Eigen::VectorXd row_weights = Eigen::VectorXd::Ones(n);
  if (spec.mode == EstimatorMode::kRpm) {
    const Eigen::VectorXd ps = projection_statistics(H);
    const int dof = count_varying_columns(H);
    const double b = spec.ps_b > 0 ? spec.ps_b : ps_threshold(std::max(dof, 1));
    lw = leverage_weights(ps, b);
    model.weights = lw;
    for (Eigen::Index i = 0; i < n; ++i)
      row_weights(i) = lw.w(i) == 1.0 ? 1.0 : 0.0;
    if (row_weights.sum() < 3.0) row_weights.setOnes();  // degenerate cloud
  }

  model.active_columns = find_active_columns(H, row_weights);
  const Eigen::MatrixXd Ha = select_columns(H, model.active_columns);
  const Eigen::Index q_eff = Ha.cols();
  if (n <= q_eff + 2)
    throw DegreesOfFreedomError(
        "train: need n > q + 2 (n=" + std::to_string(n) +
        ", q=" + std::to_string(q_eff) + ")");

  // Initial covariance hyperparameters.
  KernelHyperparameters hp;
  hp.length_scales = median_distance_heuristic(Xs);
  const double var_y = std::max((y.array() - y.mean()).square().mean(), 1e-12);
  hp.signal_variance = var_y;
  hp.noise_variance = spec.fixed_noise_variance.value_or(1e-2 * var_y);

  HuberSpec huber{spec.huber_c};
  Eigen::VectorXd beta_a = Eigen::VectorXd::Zero(q_eff);
  bool have_beta = false;

  for (int outer = 0; outer < opts.max_outer_iterations; ++outer) {
    const Eigen::MatrixXd K0 = kernel_matrix(Xs, Xs, spec.kernel, hp);
    const Eigen::MatrixXd Sigma = add_nugget(K0, hp.noise_variance);

    Eigen::VectorXd beta_new;
    int irls_iters = 0;
    if (spec.mode == EstimatorMode::kRpm) {
      auto fit = robust_mean_fit(Ha, y, Sigma, lw, huber, q_eff);
      beta_new = fit.beta;
      irls_iters = fit.irls_iterations;
      model.residual_scale = fit.scale;
      model.standardized_residuals = fit.standardized_residuals;
    } else {
      beta_new = wls_beta(Ha, Sigma, y);
    }

    const double delta =
        have_beta ? (beta_new - beta_a).lpNorm<Eigen::Infinity>()
                  : std::numeric_limits<double>::infinity();
    const double ref = 1.0 + beta_a.lpNorm<Eigen::Infinity>();
    beta_a = beta_new;

    const Eigen::VectorXd r = y - Ha * beta_a;
    // Multi-starts on every round: the likelihood is multimodal and the
    // incumbent alone can track a drifting mean fit into a poor basin.
    OptimizeOptions oo = opts.optimizer;
    oo.optimize_noise = !spec.fixed_noise_variance.has_value();
    if (spec.mode == EstimatorMode::kRpm) {
      // The likelihood is not robust: one gross residual drags the whole
      // covariance fit. Fit it without the rows the gross-error detector
      // rejects (see the closing refit below for the two tests). On clean
      // data the detector keeps every row and this path coincides with the
      // plain fit.
      const double lambda = 2.0 * detection_threshold(static_cast<int>(n));
      std::vector<Eigen::Index> trusted;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double white =
            lw.w(i) * std::abs(model.standardized_residuals(i));
        if (white <= lambda && lw.w(i) >= 0.01) trusted.push_back(i);
      }
      if (static_cast<Eigen::Index>(trusted.size()) > q_eff + 2 &&
          static_cast<Eigen::Index>(trusted.size()) < n) {
        Eigen::MatrixXd Xt(static_cast<Eigen::Index>(trusted.size()),
                           Xs.cols());
        Eigen::VectorXd rt(static_cast<Eigen::Index>(trusted.size()));
        Eigen::VectorXd yt(static_cast<Eigen::Index>(trusted.size()));
        for (std::size_t k = 0; k < trusted.size(); ++k) {
          Xt.row(static_cast<Eigen::Index>(k)) = Xs.row(trusted[k]);
          rt(static_cast<Eigen::Index>(k)) = r(trusted[k]);
          yt(static_cast<Eigen::Index>(k)) = y(trusted[k]);
        }
        hp = optimize_hyperparameters(Xt, rt, spec.kernel, hp, yt, oo);
      } else {
        hp = optimize_hyperparameters(Xs, r, spec.kernel, hp, y, oo);
      }
    } else {
      hp = optimize_hyperparameters(Xs, r, spec.kernel, hp, y, oo);
    }

    FitTraceEntry entry;
    entry.outer_iteration = outer + 1;
    entry.beta_delta = have_beta ? delta : 0.0;
    entry.irls_iterations = irls_iters;
    entry.nlml =
        neg_log_marginal_likelihood(hp, spec.kernel, Xs, r, false).value;
    model.fit_trace.push_back(entry);

    if (have_beta && delta <= opts.outer_tol * ref) {
      model.converged = true;
      break;
    }
    have_beta = true;
  }

  // Final mean estimate consistent with the final covariance hyperparameters.
  model.hp = hp;
  const Eigen::MatrixXd K0 = kernel_matrix(Xs, Xs, spec.kernel, hp);
  const Eigen::MatrixXd Sigma = add_nugget(K0, hp.noise_variance);
  if (spec.mode == EstimatorMode::kRpm) {
    auto fit = robust_mean_fit(Ha, y, Sigma, lw, huber, q_eff);
    beta_a = fit.beta;
    model.residual_scale = fit.scale;
    model.standardized_residuals = fit.standardized_residuals;
    // Rows identified as gross errors are rejected from the closing GLS
    // refit and from the predictive conditioning set. The psi-weights bound
    // their influence during the iteration but do not remove it, and the
    // kernel correction term would otherwise feed their gross residuals
    // straight back into the prediction. Two tests: the whitened residual
    // |r_i| / s = w_i |r_S,i| against a Bonferroni normal quantile catches
    // vertical errors, and w_i < 0.01 (PS^2 more than 100x the threshold b)
    // catches structural leverage outliers, whose self-leverage can mask
    // their own residual. The factor 2 on the quantile absorbs the tail
    // inflation that whitening with an estimated, nearly singular Sigma
    // adds on top of the Gaussian model.
    const double lambda = 2.0 * detection_threshold(static_cast<int>(n));
    constexpr double kGrossLeverageWeight = 0.01;
    std::vector<Eigen::Index> trusted;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double white = lw.w(i) * std::abs(model.standardized_residuals(i));
      if (white <= lambda && lw.w(i) >= kGrossLeverageWeight)
        trusted.push_back(i);
    }
    const auto n_t = static_cast<Eigen::Index>(trusted.size());
    if (n_t > q_eff + 2) {
      Eigen::MatrixXd X_t(n_t, X.cols()), Xs_t(n_t, Xs.cols());
      Eigen::MatrixXd Ha_t(n_t, q_eff);
      Eigen::VectorXd y_t(n_t);
      for (Eigen::Index k = 0; k < n_t; ++k) {
        X_t.row(k) = X.row(trusted[k]);
        Xs_t.row(k) = Xs.row(trusted[k]);
        Ha_t.row(k) = Ha.row(trusted[k]);
        y_t(k) = y(trusted[k]);
      }
      const Eigen::MatrixXd K0_t = kernel_matrix(Xs_t, Xs_t, spec.kernel, hp);
      const Eigen::MatrixXd Sigma_t = add_nugget(K0_t, hp.noise_variance);
      beta_a = wls_beta(Ha_t, Sigma_t, y_t);
      // Keep the per-row diagnostics aligned with the trusted rows.
      LeverageWeights lw_t;
      lw_t.b = lw.b;
      lw_t.ps.resize(n_t);
      lw_t.w.resize(n_t);
      Eigen::VectorXd rs_t(n_t);
      for (Eigen::Index k = 0; k < n_t; ++k) {
        lw_t.ps(k) = lw.ps(trusted[k]);
        lw_t.w(k) = lw.w(trusted[k]);
        rs_t(k) = model.standardized_residuals(trusted[k]);
      }
      model.weights = lw_t;
      model.standardized_residuals = rs_t;
      model.training_inputs = X_t;
      model.training_targets = y_t;
      model.chol_sigma = robust_cholesky(K0_t, hp.noise_variance,
                                         hp.signal_variance, &model.sigma);
      model.beta = expand_beta(beta_a, model.active_columns, H.cols());
      model.residuals = y_t - Ha_t * beta_a;
      return model;
    }
  } else {
    beta_a = wls_beta(Ha, Sigma, y);
  }
  model.chol_sigma = robust_cholesky(K0, hp.noise_variance, hp.signal_variance,
                                     &model.sigma);
  model.beta = expand_beta(beta_a, model.active_columns, H.cols());
  model.residuals = y - H * model.beta;
  return model;
}

PredictiveDistribution predict(const TrainedModel& model,
                               const Eigen::MatrixXd& X_star, bool noisy,
                               bool full_covariance) {
  if (X_star.cols() != model.training_inputs.cols())
    throw DimensionError("predict", model.training_inputs.cols(),
                         X_star.cols());
  const Eigen::MatrixXd Xs = model.standardizer.apply(model.training_inputs);
  const Eigen::MatrixXd Xs_star = model.standardizer.apply(X_star);
  const Eigen::MatrixXd H_star = build_design_matrix(Xs_star, model.spec.basis);

  const Eigen::MatrixXd C =
      kernel_matrix(Xs, Xs_star, model.spec.kernel, model.hp);  // n x n*
  PredictiveDistribution out;
  out.mean = H_star * model.beta +
             C.transpose() * model.chol_sigma.solve(model.residuals);

  if (full_covariance) {
    Eigen::MatrixXd V =
        kernel_matrix(Xs_star, Xs_star, model.spec.kernel, model.hp);
    if (noisy) V.diagonal().array() += model.hp.noise_variance;
    Eigen::MatrixXd cov = V - C.transpose() * model.chol_sigma.solve(C);
    cov = 0.5 * (cov + cov.transpose()).eval();
    out.per_point_std = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    cov.diagonal() = cov.diagonal().cwiseMax(0.0);
    out.covariance = std::move(cov);
  } else {
    // Diagonal only: var_j = V_jj - || L^-1 c_j ||^2.
    const Eigen::MatrixXd Linv_C =
        model.chol_sigma.matrixL().solve(C);
    out.per_point_std.resize(X_star.rows());
    KernelHyperparameters hp_diag = model.hp;
    for (Eigen::Index j = 0; j < X_star.rows(); ++j) {
      double v = kernel_eval(Xs_star.row(j), Xs_star.row(j), model.spec.kernel,
                             hp_diag);
      if (noisy) v += model.hp.noise_variance;
      v -= Linv_C.col(j).squaredNorm();
      out.per_point_std(j) = std::sqrt(std::max(v, 0.0));
    }
  }
  return out;
}

Tau2Posterior tau2_posterior(const Eigen::MatrixXd& H,
                             const Eigen::MatrixXd& Sigma,
                             const Eigen::VectorXd& y) {
  const Eigen::Index n = H.rows();
  const Eigen::Index q = H.cols();
  if (n <= q + 2)
    throw DegreesOfFreedomError("tau2_posterior: need n > q + 2 (n=" +
                                std::to_string(n) + ", q=" + std::to_string(q) +
                                ")");
  auto llt = robust_cholesky(Sigma, 0.0);
  const Eigen::VectorXd Sinv_y = llt.solve(y);
  const Eigen::MatrixXd SinvH = llt.solve(H);
  const Eigen::MatrixXd N = H.transpose() * SinvH;
  Eigen::LLT<Eigen::MatrixXd> nllt(N);
  if (nllt.info() != Eigen::Success)
    throw RankDeficiencyError("tau2_posterior: singular normal matrix");
  const Eigen::VectorXd beta = nllt.solve(H.transpose() * Sinv_y);
  const double quad = y.dot(Sinv_y) - y.dot(SinvH * beta);

  Tau2Posterior out;
  out.tau2_hat = std::max(quad, 0.0) / static_cast<double>(n - q - 2);
  out.shape = 0.5 * static_cast<double>(n - q);
  out.scale = 0.5 * static_cast<double>(n - q - 2) * out.tau2_hat;
  return out;
}

ResidualSensitivity residual_sensitivity(const Eigen::MatrixXd& H,
                                         const Eigen::MatrixXd& Sigma) {
  const Eigen::Index n = H.rows();
  auto llt = robust_cholesky(Sigma, 0.0);
  const Eigen::MatrixXd SinvH = llt.solve(H);
  const Eigen::MatrixXd N = H.transpose() * SinvH;
  Eigen::LLT<Eigen::MatrixXd> nllt(N);
  if (nllt.info() != Eigen::Success)
    throw RankDeficiencyError("residual_sensitivity: singular normal matrix");
  ResidualSensitivity out;
  out.S = H * nllt.solve(SinvH.transpose());
  out.W = Eigen::MatrixXd::Identity(n, n) - out.S;
  return out;
}

Eigen::VectorXd smearing_masking_demo(const Eigen::MatrixXd& W,
                                      const Eigen::VectorXd& e) {
  if (W.cols() != e.size())
    throw DimensionError("smearing_masking_demo", W.cols(), e.size());
  return W * e;
}

InfluenceDiagnostic influence_diagnostic(const TrainedModel& model, int i) {
  if (model.spec.mode != EstimatorMode::kRpm || !model.weights)
    throw Error("influence_diagnostic: requires a trained robust model");
  const Eigen::Index n = model.training_inputs.rows();
  if (i < 0 || i >= n)
    throw DimensionError("influence_diagnostic: index out of range");

  const Eigen::MatrixXd Xs = model.standardizer.apply(model.training_inputs);
  const Eigen::MatrixXd H = build_design_matrix(Xs, model.spec.basis);
  const Eigen::MatrixXd Ha = select_columns(H, model.active_columns);

  const double c = model.spec.huber_c;
  const double e_psi_prime = 2.0 * gaussian_cdf(c) - 1.0;
  const double r_S = model.standardized_residuals(i);

  InfluenceDiagnostic out;
  out.ir = huber_psi(r_S, c) / e_psi_prime;
  const Eigen::MatrixXd N = Ha.transpose() * Ha;
  Eigen::LLT<Eigen::MatrixXd> nllt(N);
  if (nllt.info() != Eigen::Success)
    throw RankDeficiencyError("influence_diagnostic: singular H^T H");
  const Eigen::VectorXd ip_a =
      nllt.solve(Ha.row(i).transpose()) * model.weights->w(i);
  out.ip = expand_beta(ip_a, model.active_columns, H.cols());
  out.total = out.ir * out.ip;
  return out;
}

}  // namespace rgpf
