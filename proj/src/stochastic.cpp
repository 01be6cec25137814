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
#include "rgpf/stochastic.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/distributions/weibull.hpp>

#include <algorithm>
#include <cmath>

#include "rgpf/basis.hpp"
#include "rgpf/gp.hpp"

namespace rgpf {

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
  return {Kind::kUniform, lo, hi, 0.0};
}
DistributionSpec DistributionSpec::weibull(double shape, double scale) {
  return {Kind::kWeibull, shape, scale, 0.0};
}
DistributionSpec DistributionSpec::beta(double a, double b) {
  return {Kind::kBeta, a, b, 0.0};
}
DistributionSpec DistributionSpec::gaussian(double mean, double std) {
  return {Kind::kGaussian, mean, std, 0.0};
}
DistributionSpec DistributionSpec::student_t(double dof, double location,
                                             double scale) {
  return {Kind::kStudentT, dof, location, scale};
}

void DistributionSpec::validate() const {
  switch (kind) {
    case Kind::kUniform:
      if (b <= a) throw HyperparameterError("uniform: need hi > lo");
      break;
    case Kind::kWeibull:
      if (a <= 0 || b <= 0)
        throw HyperparameterError("weibull: shape and scale must be positive");
      break;
    case Kind::kBeta:
      if (a <= 0 || b <= 0)
        throw HyperparameterError("beta: both shape parameters must be positive");
      break;
    case Kind::kGaussian:
      if (b <= 0) throw HyperparameterError("gaussian: std must be positive");
      break;
    case Kind::kStudentT:
      if (a <= 0 || c <= 0)
        throw HyperparameterError("student_t: dof and scale must be positive");
      break;
  }
}

double DistributionSpec::quantile(double u) const {
  validate();
  u = std::min(std::max(u, 1e-15), 1.0 - 1e-15);
  switch (kind) {
    case Kind::kUniform:
      return a + (b - a) * u;
    case Kind::kWeibull:
      return boost::math::quantile(boost::math::weibull_distribution<>(a, b), u);
    case Kind::kBeta:
      return boost::math::quantile(boost::math::beta_distribution<>(a, b), u);
    case Kind::kGaussian:
      return boost::math::quantile(boost::math::normal_distribution<>(a, b), u);
    case Kind::kStudentT:
      return b + c * boost::math::quantile(
                        boost::math::students_t_distribution<>(a), u);
  }
  return 0.0;
}

double DistributionSpec::sample(std::mt19937_64& rng) const {
  return quantile(canonical_uniform(rng));
}

namespace {

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

double robust_column_scale(const Eigen::VectorXd& col) {
  const double med = median(col);
  return 1.4826 * median((col.array() - med).abs().matrix());
}

double percentile(Eigen::VectorXd v, double p) {
  std::sort(v.data(), v.data() + v.size());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<Eigen::Index>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v(lo) * (1.0 - frac) + v(hi) * frac;
}

}  // namespace

Eigen::MatrixXd lhs_sample(const std::vector<DistributionSpec>& dims, int K,
                           std::mt19937_64& rng) {
  if (K < 1) throw HyperparameterError("lhs_sample: need K >= 1");
  for (const auto& d : dims) d.validate();
  const auto n_dims = static_cast<Eigen::Index>(dims.size());
  Eigen::MatrixXd out(K, n_dims);
  std::vector<int> strata(static_cast<std::size_t>(K));
  for (Eigen::Index j = 0; j < n_dims; ++j) {
    for (int i = 0; i < K; ++i) strata[static_cast<std::size_t>(i)] = i;
    shuffle_vec(strata, rng);
    for (int i = 0; i < K; ++i) {
      const double u =
          (static_cast<double>(strata[static_cast<std::size_t>(i)]) +
           canonical_uniform(rng)) /
          static_cast<double>(K);
      out(i, j) = dims[static_cast<std::size_t>(j)].quantile(u);
    }
  }
  return out;
}

void OutlierSpec::validate() const {
  if (fraction < 0) throw HyperparameterError("outliers: negative fraction");
  if (fraction >= 0.5)
    throw HyperparameterError(
        "outliers: fraction >= 0.5 exceeds the breakdown point of every "
        "regression-equivariant estimator");
  if (magnitude_scale <= 0)
    throw HyperparameterError("outliers: magnitude_scale must be positive");
  noise.validate();
}

std::pair<Dataset, CorruptionMask> inject_outliers(const Dataset& clean,
                                                   const OutlierSpec& spec,
                                                   const SeedStream& seeds,
                                                   const NetworkCase* net) {
  spec.validate();
  const Eigen::Index n = clean.n();
  const int m = static_cast<int>(spec.fraction * static_cast<double>(n));
  CorruptionMask mask;
  if (spec.fraction == 0.0 || m == 0) {
    if (spec.fraction > 0)
      throw HyperparameterError(
          "inject_outliers: fraction * n rounds down to zero rows");
    return {clean, mask};
  }

  auto rng = seeds.stream("outliers");
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] =
      static_cast<int>(i);
  if (spec.random_placement) shuffle_vec(rows, rng);
  rows.resize(static_cast<std::size_t>(m));
  std::sort(rows.begin(), rows.end());
  mask.rows = rows;

  Dataset out = clean;
  Eigen::VectorXd x_scales(clean.X.cols());
  for (Eigen::Index j = 0; j < clean.X.cols(); ++j)
    x_scales(j) = robust_column_scale(clean.X.col(j));
  Eigen::VectorXd y_scales(clean.Y.cols());
  for (Eigen::Index j = 0; j < clean.Y.cols(); ++j)
    y_scales(j) = robust_column_scale(clean.Y.col(j));

  auto perturb_x = [&](int row) {
    for (Eigen::Index j = 0; j < out.X.cols(); ++j) {
      const double draw = spec.noise.sample(rng);
      if (x_scales(j) > 0)
        out.X(row, j) += draw * spec.magnitude_scale * x_scales(j);
    }
  };

  if (spec.targets & kBadLeverage) {
    for (int row : rows) perturb_x(row);
    mask.x_touched = true;
  }

  if (spec.targets & kGoodLeverage) {
    // Consistent (X, y) pairs: perturb X and regenerate y.
    Eigen::MatrixXd theta;  // linear-trend fallback, one column per output
    if (net == nullptr) {
      Eigen::MatrixXd A(n, clean.X.cols() + 1);
      A.col(0).setOnes();
      A.rightCols(clean.X.cols()) = clean.X;
      // Ridge-regularized least squares; constant columns are harmless here.
      Eigen::MatrixXd N = A.transpose() * A;
      N.diagonal().array() += 1e-8 * N.diagonal().maxCoeff();
      theta = N.ldlt().solve(A.transpose() * clean.Y);
    }
    for (int row : rows) {
      const Eigen::VectorXd x_old = out.X.row(row);
      perturb_x(row);
      if (net != nullptr) {
        const int p = net->bus_count();
        Injections inj;
        inj.p_kw.resize(p);
        inj.q_kvar.resize(p);
        for (int i = 0; i < p; ++i) {
          inj.p_kw(i) = out.X(row, 2 * i);
          inj.q_kvar(i) = out.X(row, 2 * i + 1);
        }
        const auto sol = solve_power_flow(*net, inj);
        for (Eigen::Index k = 0;
             k < static_cast<Eigen::Index>(clean.output_names.size()); ++k) {
          const auto& name = clean.output_names[static_cast<std::size_t>(k)];
          const bool is_mag = name.size() > 4 &&
                              name.compare(name.size() - 4, 4, "_mag") == 0;
          const int bus = std::stoi(name.substr(1, name.size() - 5));
          const int bi = net->bus_index(bus);
          out.Y(row, k) = is_mag ? sol.v_mag(bi) : sol.v_ang_deg(bi);
        }
      } else {
        const Eigen::VectorXd dx = out.X.row(row).transpose() - x_old;
        out.Y.row(row) += (theta.bottomRows(clean.X.cols()).transpose() * dx)
                              .transpose();
      }
    }
    mask.x_touched = true;
    mask.y_touched = true;
  }

  if (spec.targets & kVertical) {
    for (int row : rows) {
      for (Eigen::Index j = 0; j < out.Y.cols(); ++j) {
        const double draw = spec.noise.sample(rng);
        if (y_scales(j) > 0)
          out.Y(row, j) += draw * spec.magnitude_scale * y_scales(j);
      }
    }
    mask.y_touched = true;
  }

  return {out, mask};
}

DistributionSpec res_distribution(const ResAttachment& res) {
  return res.kind == ResKind::kWind ? DistributionSpec::weibull(2.06, 7.1)
                                    : DistributionSpec::beta(2.06, 2.5);
}

double res_power_kw(const ResAttachment& res, double sample) {
  if (res.kind == ResKind::kWind)
    return std::min(std::max(sample, 0.0), res.capacity_kw);
  return std::min(std::max(sample, 0.0), 1.0) * res.capacity_kw;
}

MonteCarloEnsemble monte_carlo_reference(const NetworkCase& net,
                                         const Eigen::MatrixXd& base_injections,
                                         const Eigen::VectorXd& timestamps,
                                         const OutputSpec& output, int K,
                                         const SeedStream& seeds) {
  if (K < 1) throw HyperparameterError("monte_carlo_reference: need K >= 1");
  const int p = net.bus_count();
  if (base_injections.cols() != 2 * p)
    throw DimensionError("monte_carlo_reference", 2 * p,
                         base_injections.cols());
  std::vector<DistributionSpec> dims;
  for (const auto& res : net.res_attachments)
    dims.push_back(res_distribution(res));

  MonteCarloEnsemble ens;
  const int out_idx = net.bus_index(output.bus);
  for (Eigen::Index t = 0; t < base_injections.rows(); ++t) {
    auto rng = seeds.stream("lhs", static_cast<std::uint64_t>(t));
    const Eigen::MatrixXd samples = lhs_sample(dims, K, rng);
    Eigen::VectorXd values(K);
    for (int k = 0; k < K; ++k) {
      Injections inj;
      inj.p_kw.resize(p);
      inj.q_kvar.resize(p);
      for (int i = 0; i < p; ++i) {
        inj.p_kw(i) = base_injections(t, 2 * i);
        inj.q_kvar(i) = base_injections(t, 2 * i + 1);
      }
      for (std::size_t r = 0; r < net.res_attachments.size(); ++r) {
        const auto& res = net.res_attachments[r];
        inj.p_kw(net.bus_index(res.bus)) -=
            res_power_kw(res, samples(k, static_cast<Eigen::Index>(r)));
      }
      PowerFlowSolution sol;
      try {
        sol = solve_power_flow(net, inj);
      } catch (const ConvergenceError& e) {
        throw ConvergenceError("monte_carlo_reference: instance " +
                               std::to_string(t) + ", sample " +
                               std::to_string(k) + ": " + e.what());
      }
      values(k) = output.magnitude ? sol.v_mag(out_idx) : sol.v_ang_deg(out_idx);
    }
    MonteCarloSummary s;
    s.timestamp = timestamps.size() > t ? timestamps(t) : static_cast<double>(t);
    s.mean = values.mean();
    s.std = K > 1 ? std::sqrt((values.array() - s.mean).square().sum() /
                              static_cast<double>(K - 1))
                  : 0.0;
    s.p05 = percentile(values, 0.05);
    s.p50 = percentile(values, 0.50);
    s.p95 = percentile(values, 0.95);
    ens.summary.push_back(s);
    ens.outputs.push_back(std::move(values));
  }
  return ens;
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  if (pred.size() != ref.size() || pred.size() == 0)
    throw DimensionError("rmse", ref.size(), pred.size());
  return std::sqrt((pred - ref).squaredNorm() /
                   static_cast<double>(pred.size()));
}

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  if (pred.size() != ref.size() || pred.size() == 0)
    throw DimensionError("mae", ref.size(), pred.size());
  return (pred - ref).cwiseAbs().mean();
}

SynthesizedSeries synthesize_series(const NetworkCase& net,
                                    const SeriesSpec& spec,
                                    const SeedStream& seeds) {
  if (spec.length < 1) throw HyperparameterError("series: need length >= 1");
  const int p = net.bus_count();
  const int n = spec.length;
  SynthesizedSeries out;
  out.timestamps.resize(n);
  for (int t = 0; t < n; ++t) out.timestamps(t) = spec.dt * t;

  out.loads.resize(n, 2 * p);
  auto rng = seeds.stream("series");
  const boost::math::normal_distribution<> stdnorm;
  const double stat_sd =
      spec.ar_sigma / std::sqrt(1.0 - spec.ar_phi * spec.ar_phi);
  // One AR(1) load factor per bus, applied to both P and Q (constant power
  // factor), as a real feeder's demand behaves.
  for (int bus = 0; bus < p; ++bus) {
    const double base_p = net.buses[static_cast<std::size_t>(bus)].load_p_kw;
    const double base_q = net.buses[static_cast<std::size_t>(bus)].load_q_kvar;
    double x = stat_sd * boost::math::quantile(stdnorm, canonical_uniform(rng));
    for (int t = 0; t < n; ++t) {
      const double factor = std::max(1.0 + x, 0.1);
      out.loads(t, 2 * bus) = base_p * factor;
      out.loads(t, 2 * bus + 1) = base_q * factor;
      x = spec.ar_phi * x +
          spec.ar_sigma * boost::math::quantile(stdnorm, canonical_uniform(rng));
    }
  }

  const auto n_res = static_cast<Eigen::Index>(net.res_attachments.size());
  out.res_kw.resize(n, n_res);
  for (Eigen::Index r = 0; r < n_res; ++r) {
    const auto& res = net.res_attachments[static_cast<std::size_t>(r)];
    const auto dist = res_distribution(res);
    for (int t = 0; t < n; ++t)
      out.res_kw(t, r) = res_power_kw(res, dist.sample(rng));
  }

  out.injections = out.loads;
  for (Eigen::Index r = 0; r < n_res; ++r) {
    const int bi = net.bus_index(net.res_attachments[static_cast<std::size_t>(r)].bus);
    out.injections.col(2 * bi) -= out.res_kw.col(r);
  }
  return out;
}

Eigen::MatrixXd synthesize_injection_series(const NetworkCase& net,
                                            const SeriesSpec& spec,
                                            const SeedStream& seeds) {
  return synthesize_series(net, spec, seeds).injections;
}

namespace {

BasisKind basis_kind_from_order(int order) {
  switch (order) {
    case 0: return BasisKind::kConstant;
    case 1: return BasisKind::kLinear;
    case 2: return BasisKind::kQuadratic;
  }
  throw HyperparameterError("basis order must be 0, 1, or 2");
}

}  // namespace

BenchmarkResult run_benchmark(const NetworkCase& net,
                              const SweepProtocol& protocol, double fraction,
                              std::uint64_t seed) {
  SeedStream seeds(seed);
  SeriesSpec series = protocol.series;
  series.length = protocol.n_train + protocol.n_test;
  const auto synth = synthesize_series(net, series, seeds);
  const Dataset full = simulate_time_series(net, synth.injections,
                                            synth.timestamps, {protocol.output});

  Dataset train_ds, test_ds;
  train_ds.timestamps = full.timestamps.head(protocol.n_train);
  train_ds.X = full.X.topRows(protocol.n_train);
  train_ds.Y = full.Y.topRows(protocol.n_train);
  train_ds.output_names = full.output_names;
  test_ds.timestamps = full.timestamps.tail(protocol.n_test);
  test_ds.X = full.X.bottomRows(protocol.n_test);
  test_ds.Y = full.Y.bottomRows(protocol.n_test);
  test_ds.output_names = full.output_names;

  OutlierSpec outliers = protocol.outliers;
  outliers.fraction = fraction;
  Dataset corrupted = train_ds;
  if (fraction > 0)
    corrupted = inject_outliers(train_ds, outliers, seeds, &net).first;

  ModelSpec spec;
  spec.basis.kind = basis_kind_from_order(protocol.basis_order);
  spec.basis.input_dim = static_cast<int>(train_ds.X.cols());

  const Eigen::VectorXd y_train = corrupted.Y.col(0);
  const Eigen::VectorXd y_test = test_ds.Y.col(0);

  BenchmarkResult result;
  spec.mode = EstimatorMode::kRpm;
  const TrainedModel rpm = train(corrupted.X, y_train, spec);
  spec.mode = EstimatorMode::kGpm;
  const TrainedModel gpm = train(corrupted.X, y_train, spec);

  const auto rpm_pred = predict(rpm, test_ds.X, false, false);
  const auto gpm_pred = predict(gpm, test_ds.X, false, false);
  result.rpm_beta = rpm.beta;
  result.gpm_beta = gpm.beta;
  result.rpm_rmse = rmse(rpm_pred.mean, y_test);
  result.gpm_rmse = rmse(gpm_pred.mean, y_test);
  result.rpm_mae = mae(rpm_pred.mean, y_test);
  result.gpm_mae = mae(gpm_pred.mean, y_test);
  if (rpm.weights)
    result.downweighted =
        static_cast<int>((rpm.weights->w.array() < 1.0).count());
  return result;
}

std::vector<SweepCell> contamination_sweep(
    const NetworkCase& net, const SweepProtocol& protocol,
    const std::vector<double>& fractions,
    const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepCell> cells;
  for (double fraction : fractions) {
    for (std::uint64_t seed : seeds) {
      SweepCell rpm_cell, gpm_cell;
      rpm_cell.fraction = gpm_cell.fraction = fraction;
      rpm_cell.seed = gpm_cell.seed = seed;
      rpm_cell.mode = "rpm";
      gpm_cell.mode = "gpm";
      rpm_cell.quantity = gpm_cell.quantity = protocol.output.name();
      try {
        const auto result = run_benchmark(net, protocol, fraction, seed);
        rpm_cell.rmse = result.rpm_rmse;
        rpm_cell.mae = result.rpm_mae;
        gpm_cell.rmse = result.gpm_rmse;
        gpm_cell.mae = result.gpm_mae;
      } catch (const std::exception& e) {
        rpm_cell.error = gpm_cell.error = e.what();
      }
      cells.push_back(rpm_cell);
      cells.push_back(gpm_cell);
    }
  }
  return cells;
}

}  // namespace rgpf
