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
// End-to-end acceptance suite. Each test prints one machine-greppable
// "criterion N: PASS|FAIL" line in addition to the doctest assertions.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "rgpf/gp.hpp"
#include "rgpf/powerflow.hpp"
#include "rgpf/stochastic.hpp"

using namespace rgpf;
using cx = std::complex<double>;

namespace {

std::string case_path() { return std::string(RGPF_DATA_DIR) + "/ieee33.json"; }

void report(int criterion, bool pass) {
  std::printf("criterion %d: %s\n", criterion, pass ? "PASS" : "FAIL");
  std::fflush(stdout);
  CHECK(pass);
}

LeverageWeights unit_weights(Eigen::Index n) {
  LeverageWeights lw;
  lw.ps = Eigen::VectorXd::Ones(n);
  lw.w = Eigen::VectorXd::Ones(n);
  lw.b = 1.0;
  return lw;
}

SweepProtocol paper_protocol() {
  SweepProtocol protocol;  // defaults: n=150/60, V19_mag, quadratic basis
  return protocol;
}

}  // namespace

TEST_CASE("criterion 1: robustness separation at 25% contamination") {
  const auto t0 = std::chrono::steady_clock::now();
  NetworkCase net = load_case(case_path());
  const SweepProtocol protocol = paper_protocol();
  double rpm_sum = 0.0, gpm_sum = 0.0;
  bool pass = true;
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    BenchmarkResult res = run_benchmark(net, protocol, 0.25, seed);
    rpm_sum += res.rpm_rmse;
    gpm_sum += res.gpm_rmse;
  }
  const double rpm_mean = rpm_sum / 5.0;
  const double gpm_mean = gpm_sum / 5.0;
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
  pass = rpm_mean <= 0.05 && gpm_mean >= 5.0 * rpm_mean && seconds <= 300.0;
  std::printf("  rpm rmse %.3g p.u., gpm/rpm ratio %.1f, %.0f s\n", rpm_mean,
              gpm_mean / rpm_mean, seconds);
  report(1, pass);
}

TEST_CASE("criterion 2: clean-data equivalence of rpm and gpm") {
  NetworkCase net = load_case(case_path());
  const SweepProtocol protocol = paper_protocol();
  bool pass = true;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    BenchmarkResult res = run_benchmark(net, protocol, 0.0, seed);
    const double beta_rel =
        (res.rpm_beta - res.gpm_beta).lpNorm<Eigen::Infinity>() /
        std::max(res.gpm_beta.lpNorm<Eigen::Infinity>(), 1e-300);
    const double rmse_rel = std::abs(res.rpm_rmse - res.gpm_rmse) /
                            std::max(res.gpm_rmse, 1e-300);
    if (beta_rel > 1e-3 || rmse_rel > 0.10) {
      std::printf("  seed %llu: beta_rel %.3g rmse_rel %.3g\n",
                  static_cast<unsigned long long>(seed), beta_rel, rmse_rel);
      pass = false;
    }
  }
  report(2, pass);
}

TEST_CASE("criterion 3: bounded bias across the contamination grid") {
  NetworkCase net = load_case(case_path());
  const SweepProtocol protocol = paper_protocol();
  const std::vector<double> fractions = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
  const std::vector<std::uint64_t> seeds = {100, 101, 102};
  const auto cells = contamination_sweep(net, protocol, fractions, seeds);

  std::map<double, double> rpm_mean, gpm_mean;
  std::map<double, int> count;
  bool pass = true;
  for (const auto& cell : cells) {
    if (!cell.error.empty()) {
      std::printf("  cell (f=%g seed=%llu %s) failed: %s\n", cell.fraction,
                  static_cast<unsigned long long>(cell.seed),
                  cell.mode.c_str(), cell.error.c_str());
      pass = false;
      continue;
    }
    (cell.mode == "rpm" ? rpm_mean : gpm_mean)[cell.fraction] += cell.rmse;
    if (cell.mode == "rpm") count[cell.fraction] += 1;
  }
  for (auto& [f, v] : rpm_mean) v /= count[f];
  for (auto& [f, v] : gpm_mean) v /= count[f];
  for (double f : fractions) {
    const double ratio = rpm_mean[f] / rpm_mean[0.0];
    if (ratio > 3.0) {
      std::printf("  rpm rmse ratio at f=%g is %.2f (> 3)\n", f, ratio);
      pass = false;
    }
  }
  const double gpm_ratio = gpm_mean[0.25] / gpm_mean[0.0];
  if (gpm_ratio < 10.0) {
    std::printf("  gpm rmse ratio at f=0.25 is %.2f (< 10)\n", gpm_ratio);
    pass = false;
  }
  std::printf("  rpm 0.25/0 ratio %.2f, gpm 0.25/0 ratio %.1f\n",
              rpm_mean[0.25] / rpm_mean[0.0], gpm_ratio);
  report(3, pass);
}

TEST_CASE("criterion 4: gp core vs dense oracle and finite differences") {
  bool pass = true;
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const int n = 5 + static_cast<int>(rng() % 26);
    const int d = 1 + static_cast<int>(rng() % 3);
    const int n_star = 4;
    Eigen::MatrixXd X(n, d), Xs(n_star, d);
    for (Eigen::Index i = 0; i < X.size(); ++i)
      X.data()[i] = 4.0 * canonical_uniform(rng) - 2.0;
    for (Eigen::Index i = 0; i < Xs.size(); ++i)
      Xs.data()[i] = 4.0 * canonical_uniform(rng) - 2.0;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i)
      y(i) = std::sin(X.row(i).sum()) + 0.1 * canonical_uniform(rng);

    BasisSpec basis{BasisKind::kLinear, d};
    KernelSpec kernel{KernelKind::kRbf};
    KernelHyperparameters hp;
    hp.length_scales =
        Eigen::VectorXd::Constant(d, 0.8 + canonical_uniform(rng));
    hp.signal_variance = 0.5 + canonical_uniform(rng);
    hp.noise_variance = 0.01 + 0.1 * canonical_uniform(rng);

    TrainedModel m;
    m.spec.basis = basis;
    m.spec.kernel = kernel;
    m.hp = hp;
    m.standardizer.center = Eigen::VectorXd::Zero(d);
    m.standardizer.scale = Eigen::VectorXd::Ones(d);
    m.training_inputs = X;
    m.training_targets = y;
    const Eigen::MatrixXd H = build_design_matrix(X, basis);
    const Eigen::MatrixXd K0 = kernel_matrix(X, X, kernel, hp);
    m.chol_sigma =
        robust_cholesky(K0, hp.noise_variance, hp.signal_variance, &m.sigma);
    m.beta = wls_beta(H, m.sigma, y);
    m.residuals = y - H * m.beta;

    const PredictiveDistribution pred = predict(m, Xs, false, true);
    const Eigen::MatrixXd Sinv = m.sigma.inverse();
    const Eigen::MatrixXd Hs = build_design_matrix(Xs, basis);
    const Eigen::MatrixXd C = kernel_matrix(X, Xs, kernel, hp);
    const Eigen::VectorXd mean = Hs * m.beta + C.transpose() * Sinv * m.residuals;
    const Eigen::MatrixXd cov = kernel_matrix(Xs, Xs, kernel, hp) -
                                C.transpose() * Sinv * C;
    if ((pred.mean - mean).lpNorm<Eigen::Infinity>() >= 1e-10 ||
        (pred.covariance - cov).lpNorm<Eigen::Infinity>() >= 1e-10)
      pass = false;
  }

  for (int t = 0; t < 10 && pass; ++t) {
    const int n = 8 + static_cast<int>(rng() % 13);
    const int d = 1 + static_cast<int>(rng() % 2);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i)
      X.data()[i] = 4.0 * canonical_uniform(rng) - 2.0;
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r(i) = canonical_uniform(rng) - 0.5;
    KernelSpec spec{KernelKind::kRbf};
    KernelHyperparameters hp;
    hp.length_scales =
        Eigen::VectorXd::Constant(d, 0.7 + canonical_uniform(rng));
    hp.signal_variance = 0.5 + canonical_uniform(rng);
    hp.noise_variance = 0.05 + 0.1 * canonical_uniform(rng);
    const NlmlResult res = neg_log_marginal_likelihood(hp, spec, X, r);
    const double h = 1e-5;
    for (int k = 0; k < d + 2; ++k) {
      auto value_at = [&](double delta) {
        KernelHyperparameters p = hp;
        if (k < d)
          p.length_scales(k) *= std::exp(delta);
        else if (k == d)
          p.signal_variance *= std::exp(delta);
        else
          p.noise_variance *= std::exp(delta);
        return neg_log_marginal_likelihood(p, spec, X, r).value;
      };
      const double fd = (value_at(h) - value_at(-h)) / (2.0 * h);
      const double scale =
          std::max({std::abs(fd), std::abs(res.gradient(k)), 1e-8});
      if (std::abs(res.gradient(k) - fd) / scale >= 1e-4) pass = false;
    }
  }
  report(4, pass);
}

TEST_CASE("criterion 5: projection statistics oracle and invariances") {
  bool pass = true;
  std::mt19937_64 rng(7);

  // 1-D closed form |h - med| / (1.4826 MAD) to 1e-12.
  for (int t = 0; t < 20 && pass; ++t) {
    const int n = 5 + static_cast<int>(rng() % 60);
    Eigen::MatrixXd H(n, 1);
    for (int i = 0; i < n; ++i) H(i, 0) = 100.0 * canonical_uniform(rng);
    const Eigen::VectorXd ps = projection_statistics(H);
    const double med = median(H.col(0));
    const Eigen::VectorXd dev = (H.col(0).array() - med).abs();
    const double mad = median(dev);
    if (mad <= 0) continue;
    for (int i = 0; i < n; ++i) {
      const double want = std::abs(H(i, 0) - med) / (1.4826 * mad);
      if (std::abs(ps(i) - want) >= 1e-12) pass = false;
    }
  }

  // Translation and positive-scaling invariance to 1e-10.
  for (int t = 0; t < 10 && pass; ++t) {
    const int n = 20 + static_cast<int>(rng() % 481);
    const int q = 1 + static_cast<int>(rng() % 10);
    Eigen::MatrixXd H(n, q);
    for (Eigen::Index i = 0; i < H.size(); ++i)
      H.data()[i] = 10.0 * canonical_uniform(rng) - 5.0;
    const Eigen::VectorXd ps = projection_statistics(H);
    Eigen::MatrixXd Ht = H;
    Eigen::MatrixXd Hs = H;
    for (int j = 0; j < q; ++j) {
      Ht.col(j).array() += 13.5 * (j + 1);
      Hs.col(j) *= 7.25;
    }
    if ((projection_statistics(Ht) - ps).lpNorm<Eigen::Infinity>() >= 1e-10)
      pass = false;
    if ((projection_statistics(Hs) - ps).lpNorm<Eigen::Infinity>() >= 1e-10)
      pass = false;
  }
  report(5, pass);
}

TEST_CASE("criterion 6: estimator fixed points and psi bounds") {
  bool pass = true;
  std::mt19937_64 rng(11);

  // IRLS with q-weights forced to 1 (huge c never clips) equals WLS.
  const int n = 40, q = 3;
  Eigen::MatrixXd H(n, q);
  H.col(0).setOnes();
  for (int i = 0; i < n; ++i)
    for (int j = 1; j < q; ++j) H(i, j) = canonical_uniform(rng);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i)
    y(i) = 1.0 + H(i, 1) - 2.0 * H(i, 2) + 0.3 * (canonical_uniform(rng) - 0.5);
  const Eigen::MatrixXd Sigma = Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd wls = wls_beta(H, Sigma, y);
  const auto res = shgm_irls(H, y, Sigma, unit_weights(n), HuberSpec{1e12});
  if ((res.beta - wls).lpNorm<Eigen::Infinity>() >=
      1e-10 * (1.0 + wls.lpNorm<Eigen::Infinity>()))
    pass = false;

  // Huber continuity at c to machine precision.
  const double c = 1.5;
  const double eps = std::numeric_limits<double>::epsilon();
  if (std::abs(huber_rho(c, c) - 0.5 * c * c) > 4 * eps) pass = false;
  if (std::abs(huber_rho(c * (1 + eps), c) - 0.5 * c * c) > 8 * eps)
    pass = false;
  if (std::abs(huber_psi(c, c) - c) > 4 * eps) pass = false;
  if (std::abs(huber_psi(c * (1 + eps), c) - c) > 8 * eps) pass = false;

  // |psi| <= c over 1e5 random residuals.
  for (int t = 0; t < 100000; ++t) {
    const double r = 1e3 * (canonical_uniform(rng) - 0.5);
    if (std::abs(huber_psi(r, c)) > c + 1e-15) pass = false;
  }
  report(6, pass);
}

TEST_CASE("criterion 7: power-flow fidelity") {
  bool pass = true;
  NetworkCase net = load_case(case_path());
  const int nb = net.bus_count();
  const int slack = net.bus_index(net.slack_bus);
  const double z_base = net.base_kv * net.base_kv * 1000.0 / net.base_kva;

  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(nb, nb);
  for (const Branch& br : net.branches) {
    const int a = net.bus_index(br.from);
    const int b = net.bus_index(br.to);
    const cx yy = 1.0 / cx(br.r_ohm / z_base, br.x_ohm / z_base);
    Y(a, a) += yy;
    Y(b, b) += yy;
    Y(a, b) -= yy;
    Y(b, a) -= yy;
  }

  auto base_inj = [&] {
    Injections inj;
    inj.p_kw.resize(nb);
    inj.q_kvar.resize(nb);
    for (int i = 0; i < nb; ++i) {
      inj.p_kw(i) = net.buses[i].load_p_kw;
      inj.q_kvar(i) = net.buses[i].load_q_kvar;
    }
    return inj;
  };

  // Independent Gauss-Seidel reference solution for the base case.
  {
    Injections inj = base_inj();
    Eigen::VectorXcd s(nb), v = Eigen::VectorXcd::Ones(nb);
    for (int i = 0; i < nb; ++i)
      s(i) = -cx(inj.p_kw(i), inj.q_kvar(i)) / net.base_kva;
    for (int it = 0; it < 20000; ++it) {
      double delta = 0.0;
      for (int i = 0; i < nb; ++i) {
        if (i == slack) continue;
        cx sum = 0.0;
        for (int j = 0; j < nb; ++j)
          if (j != i) sum += Y(i, j) * v(j);
        const cx vn = (std::conj(s(i) / v(i)) - sum) / Y(i, i);
        delta = std::max(delta, std::abs(vn - v(i)));
        v(i) = vn;
      }
      if (delta < 1e-12) break;
    }
    const PowerFlowSolution sol = solve_power_flow(net, inj);
    for (int i = 0; i < nb; ++i)
      if (std::abs(sol.v_mag(i) - std::abs(v(i))) >= 1e-4) pass = false;
  }

  // Power balance on 100 random profiles.
  std::mt19937_64 rng(13);
  for (int t = 0; t < 100 && pass; ++t) {
    Injections inj = base_inj();
    for (int i = 0; i < nb; ++i) {
      const double f = 0.25 + 1.5 * canonical_uniform(rng);
      inj.p_kw(i) *= f;
      inj.q_kvar(i) *= f;
    }
    const PowerFlowSolution sol = solve_power_flow(net, inj);
    Eigen::VectorXcd v(nb);
    for (int i = 0; i < nb; ++i)
      v(i) = std::polar(sol.v_mag(i), sol.v_ang_deg(i) * M_PI / 180.0);
    const Eigen::VectorXcd iv = Y * v;
    for (int i = 0; i < nb; ++i) {
      if (i == slack) continue;
      const cx s_calc = v(i) * std::conj(iv(i));
      const cx s_spec = -cx(inj.p_kw(i), inj.q_kvar(i)) / net.base_kva;
      if (std::abs(s_calc - s_spec) >= 1e-6) pass = false;
    }
  }

  // Zero load: exactly flat.
  {
    Injections inj;
    inj.p_kw = Eigen::VectorXd::Zero(nb);
    inj.q_kvar = Eigen::VectorXd::Zero(nb);
    const PowerFlowSolution sol = solve_power_flow(net, inj);
    if (!(sol.v_mag.array() == 1.0).all()) pass = false;
    if (!(sol.v_ang_deg.array() == 0.0).all()) pass = false;
  }
  report(7, pass);
}

TEST_CASE("criterion 8: smearing and masking residual patterns") {
  bool pass = true;
  // The demo design: two coincident extreme-leverage points plus a bulk.
  const int n = 10;
  Eigen::MatrixXd H(n, 2);
  Eigen::VectorXd x(n);
  x << 1e6, 1e6, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
  H.col(0).setOnes();
  H.col(1) = x;
  const auto sens =
      residual_sensitivity(H, Eigen::MatrixXd::Identity(n, n));

  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e(0) = 10.0;
  const Eigen::VectorXd smeared = smearing_masking_demo(sens.W, e);
  int spread = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(smeared(i)) > 1e-12) ++spread;
  if (spread < 2) pass = false;

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sens.W.topLeftCorner(2, 2),
                                              Eigen::ComputeFullV);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(n);
  e2.head(2) = 10.0 * svd.matrixV().col(1);
  const Eigen::VectorXd masked = smearing_masking_demo(sens.W, e2);
  if (std::abs(masked(0)) >= 1e-8 || std::abs(masked(1)) >= 1e-8) pass = false;
  report(8, pass);
}

TEST_CASE("criterion 9: kernel PSD, symmetry, tau^2 diagonal") {
  bool pass = true;
  std::mt19937_64 rng(17);
  const KernelKind kinds[] = {KernelKind::kRbf, KernelKind::kExponential,
                              KernelKind::kMatern32,
                              KernelKind::kRationalQuadratic};
  for (KernelKind kind : kinds) {
    KernelSpec spec{kind, 1.2};
    for (int t = 0; t < 25; ++t) {
      const int n = 2 + static_cast<int>(rng() % 40);
      const int d = 1 + static_cast<int>(rng() % 4);
      Eigen::MatrixXd X(n, d);
      for (Eigen::Index i = 0; i < X.size(); ++i)
        X.data()[i] = 10.0 * canonical_uniform(rng) - 5.0;
      KernelHyperparameters hp;
      hp.length_scales =
          Eigen::VectorXd::Constant(d, 0.3 + canonical_uniform(rng));
      hp.signal_variance = 0.5 + canonical_uniform(rng);
      hp.noise_variance = 1e-6;
      const Eigen::MatrixXd K = kernel_matrix(X, X, spec, hp);
      if (K != K.transpose()) pass = false;
      if (!(K.diagonal().array() == hp.signal_variance).all()) pass = false;
      try {
        robust_cholesky(K, hp.noise_variance);
      } catch (const Error&) {
        pass = false;
      }
    }
  }
  report(9, pass);
}

TEST_CASE("criterion 10: CLI pipeline determinism") {
  namespace fs = std::filesystem;
  const std::string cli = RGPF_CLI_PATH;
  bool pass = true;

  auto run_pipeline = [&](const std::string& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string common = std::string(" --case ") + case_path() +
                               " --seed 4242 --out-dir " + dir;
    const std::string quiet = " > /dev/null 2>&1";
    std::string cmd;
    cmd = cli + " generate --n-train 150 --n-test 60" + common + quiet;
    if (std::system(cmd.c_str()) != 0) return false;
    cmd = cli + " corrupt --input " + dir + "/train.csv --output-file " + dir +
          "/corrupted.csv --fraction 0.25" + common + quiet;
    if (std::system(cmd.c_str()) != 0) return false;
    cmd = cli + " train --data " + dir + "/corrupted.csv --mode rpm" + common +
          quiet;
    if (std::system(cmd.c_str()) != 0) return false;
    cmd = cli + " predict --model " + dir + "/model_19_mag.json --data " + dir +
          "/test.csv" + common + quiet;
    if (std::system(cmd.c_str()) != 0) return false;
    cmd = cli + " evaluate --predictions " + dir + "/predictions.csv " +
          "--reference " + dir + "/test.csv" + common + quiet;
    return std::system(cmd.c_str()) == 0;
  };

  if (!run_pipeline("acceptance_run_a") || !run_pipeline("acceptance_run_b")) {
    pass = false;
  } else {
    const char* artifacts[] = {"train.csv",      "test.csv",
                               "corrupted.csv",  "corrupted.csv.mask.json",
                               "model_19_mag.json", "predictions.csv",
                               "metrics.json"};
    for (const char* name : artifacts) {
      const std::string a = std::string("acceptance_run_a/") + name;
      const std::string b = std::string("acceptance_run_b/") + name;
      if (!fs::exists(a) || !fs::exists(b) || read_file(a) != read_file(b)) {
        std::printf("  artifact differs or missing: %s\n", name);
        pass = false;
      }
    }
  }
  fs::remove_all("acceptance_run_a");
  fs::remove_all("acceptance_run_b");
  report(10, pass);
}
