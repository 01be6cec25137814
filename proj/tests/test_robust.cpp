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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rgpf/basis.hpp"
#include "rgpf/gp.hpp"
#include "rgpf/rng.hpp"
#include "rgpf/robust.hpp"

using namespace rgpf;

namespace {

double mad_1d(const Eigen::VectorXd& h) {
  const double med = median(h);
  return median((h.array() - med).abs().matrix());
}

// Independent 1-D oracle: PS_i = |h_i - med| / (1.4826 * MAD).
Eigen::VectorXd ps_1d_oracle(const Eigen::VectorXd& h) {
  const double med = median(h);
  const double scale = 1.4826 * mad_1d(h);
  return (h.array() - med).abs() / scale;
}

LeverageWeights unit_weights(Eigen::Index n) {
  LeverageWeights w;
  w.ps = Eigen::VectorXd::Zero(n);
  w.w = Eigen::VectorXd::Ones(n);
  w.b = 1.0;
  return w;
}

}  // namespace

TEST_CASE("huber_rho: values and C1 continuity at the threshold") {
  const double c = 1.5;
  CHECK(huber_rho(0.0, c) == 0.0);
  CHECK(huber_rho(1.0, c) == 0.5);
  CHECK(huber_rho(3.0, c) == doctest::Approx(3.375).epsilon(1e-15));
  CHECK(huber_rho(-3.0, c) == huber_rho(3.0, c));
  // rho(c) = c^2/2 from both branches, psi(c) = c: machine-precision match.
  CHECK(huber_rho(c, c) == 0.5 * c * c);
  const double eps = 1e-12;
  CHECK(std::abs(huber_rho(c + eps, c) - huber_rho(c - eps, c)) < 1e-11);
  CHECK(huber_psi(c, c) == c);
  CHECK(huber_psi(-c, c) == -c);
  CHECK(std::abs(huber_psi(c + eps, c) - huber_psi(c - eps, c)) < 1e-11);
}

TEST_CASE("huber_q_weight: inside, outside, zero, symmetry") {
  CHECK(huber_q_weight(0.5, 1.5) == 1.0);
  CHECK(huber_q_weight(3.0, 1.5) == 0.5);
  CHECK(huber_q_weight(-3.0, 1.5) == 0.5);
  CHECK(huber_q_weight(0.0, 1.5) == 1.0);
}

TEST_CASE("psi bounded by c and q in (0,1] over 1e5 random residuals") {
  std::mt19937_64 rng(23);
  const double c = 1.5;
  for (int t = 0; t < 100000; ++t) {
    const double r = 2000.0 * canonical_uniform(rng) - 1000.0;
    CHECK(std::abs(huber_psi(r, c)) <= c);
    const double q = huber_q_weight(r, c);
    CHECK(q > 0.0);
    CHECK(q <= 1.0);
    // psi(r) = q(r) * r.
    CHECK(huber_psi(r, c) == doctest::Approx(q * r).epsilon(1e-12));
  }
}

TEST_CASE("robust_scale: formula, floor, degrees of freedom") {
  Eigen::VectorXd r(5);
  r << -1, 1, -1, 1, 1;
  CHECK(robust_scale(r, 0) == doctest::Approx(2.9652).epsilon(1e-12));
  CHECK(robust_scale(Eigen::VectorXd::Zero(6), 0) == 1e-8);
  Eigen::VectorXd mostly_zero(5);
  mostly_zero << 0, 0, 0, 0, 10;
  CHECK(robust_scale(mostly_zero, 0) == 1e-8);
  CHECK_THROWS_AS(robust_scale(r, 5), DegreesOfFreedomError);
}

TEST_CASE("projection_statistics: 1-D hand value") {
  Eigen::MatrixXd H(5, 1);
  H << 1, 2, 3, 4, 100;
  Eigen::VectorXd ps = projection_statistics(H);
  CHECK(ps(4) == doctest::Approx(97.0 / 1.4826).epsilon(1e-12));
}

TEST_CASE("projection_statistics: exact 1-D equivalence oracle") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    const int n = 5 + static_cast<int>(rng() % 100);
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) h(i) = 20.0 * canonical_uniform(rng) - 10.0;
    Eigen::VectorXd ps = projection_statistics(h);
    Eigen::VectorXd oracle = ps_1d_oracle(h);
    CHECK((ps - oracle).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("projection_statistics: translation and scale invariance") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 5; ++t) {
    const int n = 20 + static_cast<int>(rng() % 481);
    const int q = 1 + static_cast<int>(rng() % 10);
    Eigen::MatrixXd H(n, q);
    for (Eigen::Index i = 0; i < H.size(); ++i)
      H.data()[i] = 6.0 * canonical_uniform(rng) - 3.0;
    Eigen::VectorXd ps = projection_statistics(H);

    Eigen::MatrixXd Ht = H;
    Eigen::RowVectorXd shift(q);
    for (int j = 0; j < q; ++j) shift(j) = 100.0 * canonical_uniform(rng) - 50.0;
    Ht.rowwise() += shift;
    CHECK((projection_statistics(Ht) - ps).lpNorm<Eigen::Infinity>() < 1e-10);

    Eigen::MatrixXd Hs = 10.0 * H;
    CHECK((projection_statistics(Hs) - ps).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("projection_statistics: intercept column is ignored") {
  std::mt19937_64 rng(37);
  Eigen::MatrixXd H(40, 2);
  for (Eigen::Index i = 0; i < H.size(); ++i)
    H.data()[i] = canonical_uniform(rng);
  Eigen::MatrixXd Hc(40, 3);
  Hc.col(0) = Eigen::VectorXd::Ones(40);
  Hc.col(1) = H.col(0);
  Hc.col(2) = H.col(1);
  CHECK((projection_statistics(Hc) - projection_statistics(H))
            .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("projection_statistics: degenerate cloud throws") {
  Eigen::MatrixXd H = Eigen::MatrixXd::Constant(5, 2, 3.0);
  CHECK_THROWS_AS(projection_statistics(H), DegenerateCloudError);
}

TEST_CASE("leverage_weights: boundary, quartering, all-clear") {
  const double b = 4.0;
  Eigen::VectorXd ps(3);
  ps << 2.0, 4.0, 1.0;  // ps^2 = b exactly; (2 sqrt b)^2 = 4b; below
  LeverageWeights w = leverage_weights(ps, b);
  CHECK(w.w(0) == 1.0);
  CHECK(w.w(1) == 0.25);
  CHECK(w.w(2) == 1.0);
  CHECK_THROWS_AS(leverage_weights(ps, 0.0), HyperparameterError);
}

TEST_CASE("ps_threshold and detection_threshold: table values") {
  CHECK(ps_threshold(1) == doctest::Approx(5.02389).epsilon(1e-5));
  CHECK(ps_threshold(2) == doctest::Approx(7.37776).epsilon(1e-5));
  CHECK(ps_threshold(10) == doctest::Approx(20.48318).epsilon(1e-5));
  CHECK_THROWS_AS(ps_threshold(0), HyperparameterError);
  // Phi^-1(0.975): textbook value.
  CHECK(detection_threshold(1, 0.05) ==
        doctest::Approx(1.95996398454).epsilon(1e-9));
  CHECK_THROWS_AS(detection_threshold(0), HyperparameterError);
  CHECK_THROWS_AS(detection_threshold(10, 1.5), HyperparameterError);
}

TEST_CASE("shgm_irls: clean data converges to WLS in one iteration") {
  std::mt19937_64 rng(41);
  const int n = 40, q = 3;
  Eigen::MatrixXd H(n, q);
  H.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    H(i, 1) = canonical_uniform(rng);
    H(i, 2) = canonical_uniform(rng);
  }
  Eigen::VectorXd beta_true(q);
  beta_true << 1.0, -2.0, 0.5;
  Eigen::VectorXd y = H * beta_true;
  for (int i = 0; i < n; ++i) y(i) += 0.01 * (canonical_uniform(rng) - 0.5);
  Eigen::MatrixXd Sigma = Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd wls = wls_beta(H, Sigma, y);
  // Huge c: every q-weight is 1, the first IRLS step reproduces WLS.
  auto res = shgm_irls(H, y, Sigma, unit_weights(n), HuberSpec{1e12});
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK((res.beta - wls).lpNorm<Eigen::Infinity>() <
        1e-10 * (1.0 + wls.lpNorm<Eigen::Infinity>()));
  for (const auto& qw : res.weight_trace) CHECK((qw.array() == 1.0).all());
}

TEST_CASE("shgm_irls: exact fit is a fixed point") {
  std::mt19937_64 rng(43);
  const int n = 20, q = 2;
  Eigen::MatrixXd H(n, q);
  H.col(0).setOnes();
  for (int i = 0; i < n; ++i) H(i, 1) = canonical_uniform(rng);
  Eigen::VectorXd beta_true(q);
  beta_true << 3.0, -1.0;
  Eigen::VectorXd y = H * beta_true;
  Eigen::MatrixXd Sigma = Eigen::MatrixXd::Identity(n, n);
  auto res = shgm_irls(H, y, Sigma, unit_weights(n));
  CHECK((res.beta - beta_true).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(res.final_residual_norm < 1e-10);
}

TEST_CASE("shgm_irls: resists planted vertical outliers where WLS fails") {
  std::mt19937_64 rng(47);
  const int n = 50, q = 2;
  Eigen::MatrixXd H(n, q);
  H.col(0).setOnes();
  for (int i = 0; i < n; ++i) H(i, 1) = 2.0 * canonical_uniform(rng) - 1.0;
  Eigen::VectorXd beta_true(q);
  beta_true << 1.0, 2.0;
  const double sigma = 0.05;
  Eigen::VectorXd y = H * beta_true;
  std::normal_distribution<double> gauss(0.0, sigma);
  for (int i = 0; i < n; ++i) y(i) += gauss(rng);
  Eigen::VectorXd y_clean = y;
  for (int i = 0; i < 10; ++i) y(i) += 50.0 * sigma;  // gross vertical errors
  Eigen::MatrixXd Sigma = sigma * sigma * Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd beta_clean = wls_beta(H, Sigma, y_clean);
  Eigen::VectorXd beta_wls = wls_beta(H, Sigma, y);
  auto res = shgm_irls(H, y, Sigma, unit_weights(n));

  // Standard error of the clean WLS intercept ~ sigma/sqrt(n). Huber's soft
  // rejection leaves a small residual bias, so allow a few multiples.
  const double se = sigma / std::sqrt(static_cast<double>(n));
  CHECK((res.beta - beta_clean).lpNorm<Eigen::Infinity>() < 10.0 * se);
  CHECK((beta_wls - beta_clean).lpNorm<Eigen::Infinity>() > 10.0 * se);

  // Descent check on the SHGM objective with s frozen at its converged value.
  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd r = y - H * beta;
    double obj = 0.0;
    for (int i = 0; i < n; ++i)
      obj += huber_rho(r(i) / res.final_scale, 1.5);
    return obj;
  };
  CHECK(objective(res.beta) <= objective(beta_wls) + 1e-12);
}

TEST_CASE("shgm_irls: leverage weights bound the influence of position") {
  std::mt19937_64 rng(53);
  const int n = 30, q = 2;
  Eigen::MatrixXd H(n, q);
  H.col(0).setOnes();
  for (int i = 0; i < n; ++i) H(i, 1) = canonical_uniform(rng);
  H(0, 1) = 1e4;  // bad leverage point
  Eigen::VectorXd beta_true(q);
  beta_true << 1.0, -1.0;
  Eigen::VectorXd y = H * beta_true;
  for (int i = 0; i < n; ++i) y(i) += 0.01 * (canonical_uniform(rng) - 0.5);
  y(0) = 5.0;  // inconsistent with the trend at its position
  Eigen::MatrixXd Sigma = 1e-4 * Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd ps = projection_statistics(H);
  LeverageWeights lw = leverage_weights(ps, ps_threshold(1));
  CHECK(lw.w(0) < 0.01);
  auto robust = shgm_irls(H, y, Sigma, lw);
  auto naive = shgm_irls(H, y, Sigma, unit_weights(n));
  CHECK(std::abs(robust.beta(1) - beta_true(1)) < 0.01);
  CHECK(std::abs(naive.beta(1) - beta_true(1)) >
        std::abs(robust.beta(1) - beta_true(1)));
}

TEST_CASE("shgm_irls: dimension and rank errors") {
  Eigen::MatrixXd H = Eigen::MatrixXd::Ones(3, 3);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd Sigma = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(shgm_irls(H, y, Sigma, unit_weights(3)),
                  DegreesOfFreedomError);
  Eigen::MatrixXd H2(3, 2);
  H2 << 1, 2, 1, 2, 1, 2;  // duplicated column
  CHECK_THROWS_AS(shgm_irls(H2, y, Sigma, unit_weights(3)),
                  RankDeficiencyError);
}
