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
#ifndef RGPF_STOCHASTIC_HPP_
#define RGPF_STOCHASTIC_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rgpf/dataset.hpp"
#include "rgpf/powerflow.hpp"
#include "rgpf/rng.hpp"

namespace rgpf {

struct DistributionSpec {
  enum class Kind { kUniform, kWeibull, kBeta, kGaussian, kStudentT };
  Kind kind = Kind::kUniform;
  // Meaning by kind: uniform(lo, hi); weibull(shape, scale); beta(a, b);
  // gaussian(mean, std); student_t(dof, location, scale).
  double a = 0.0;
  double b = 1.0;
  double c = 1.0;

  static DistributionSpec uniform(double lo, double hi);
  static DistributionSpec weibull(double shape, double scale);
  static DistributionSpec beta(double a, double b);
  static DistributionSpec gaussian(double mean, double std);
  static DistributionSpec student_t(double dof, double location = 0.0,
                                    double scale = 1.0);

  void validate() const;
  double quantile(double u) const;  // inverse CDF, u in (0, 1)
  double sample(std::mt19937_64& rng) const;
};

// Latin hypercube: one draw per equal-probability stratum per dimension,
// independently permuted across dimensions, mapped through the inverse CDF.
Eigen::MatrixXd lhs_sample(const std::vector<DistributionSpec>& dims, int K,
                           std::mt19937_64& rng);

enum OutlierTargets : unsigned {
  kVertical = 1u,
  kBadLeverage = 2u,
  kGoodLeverage = 4u,
};

struct OutlierSpec {
  double fraction = 0.25;
  unsigned targets = kVertical | kBadLeverage;
  DistributionSpec noise = DistributionSpec::student_t(10.0);
  double magnitude_scale = 8.0;
  bool random_placement = false;  // false = prefix rows

  void validate() const;
};

struct CorruptionMask {
  std::vector<int> rows;  // corrupted row indices, ascending
  bool x_touched = false;
  bool y_touched = false;
};

// Perturbs floor(fraction * n) rows additively by noise draws scaled by
// magnitude_scale times the per-column robust scale of the clean data.
// Good-leverage rows are re-evaluated through the simulator when a network
// case is supplied, otherwise co-perturbed along a fitted linear trend.
std::pair<Dataset, CorruptionMask> inject_outliers(
    const Dataset& clean, const OutlierSpec& spec, const SeedStream& seeds,
    const NetworkCase* net = nullptr);

struct MonteCarloSummary {
  double timestamp = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double p05 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct MonteCarloEnsemble {
  std::vector<Eigen::VectorXd> outputs;  // per instance, length K
  std::vector<MonteCarloSummary> summary;
};

// For each instance row of `base_injections`, draws K RES output samples by
// LHS from the attached distributions, solves the power flow for each, and
// collects the requested output quantity.
MonteCarloEnsemble monte_carlo_reference(
    const NetworkCase& net, const Eigen::MatrixXd& base_injections,
    const Eigen::VectorXd& timestamps, const OutputSpec& output, int K,
    const SeedStream& seeds);

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);
double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

// Synthetic clean injection series: per-column load = base load scaled by an
// AR(1) factor (phi, innovation std), RES outputs drawn i.i.d. from their
// attached distributions (Weibull direct in kW, Beta scaled by capacity),
// entering as negative load at the attachment bus.
struct SeriesSpec {
  int length = 0;
  double dt = 1.0;
  double ar_phi = 0.95;
  double ar_sigma = 0.03;
};

struct SynthesizedSeries {
  Eigen::VectorXd timestamps;
  Eigen::MatrixXd loads;       // n x 2p, load component only
  Eigen::MatrixXd res_kw;      // n x |res|, sampled RES outputs
  Eigen::MatrixXd injections;  // loads with RES entered as negative load
};

SynthesizedSeries synthesize_series(const NetworkCase& net,
                                    const SeriesSpec& spec,
                                    const SeedStream& seeds);

Eigen::MatrixXd synthesize_injection_series(const NetworkCase& net,
                                            const SeriesSpec& spec,
                                            const SeedStream& seeds);

// Input-uncertainty model attached to a RES unit: Weibull(2.06, 7.1) power in
// kW for wind (capped at capacity downstream), Beta(2.06, 2.5) irradiance
// fraction scaled by capacity for PV.
DistributionSpec res_distribution(const ResAttachment& res);

// Sampled RES power in kW for one inverse-CDF draw.
double res_power_kw(const ResAttachment& res, double sample);

struct SweepCell {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::string mode;      // "rpm" | "gpm"
  std::string quantity;  // output column name
  double rmse = 0.0;
  double mae = 0.0;
  std::string error;  // non-empty when this cell failed
};

struct SweepProtocol {
  int n_train = 150;
  int n_test = 60;
  OutputSpec output{19, true};
  int basis_order = 2;  // 0 constant, 1 linear, 2 quadratic
  OutlierSpec outliers;
  SeriesSpec series;
};

// One full benchmark cell: synthesize a clean series, corrupt the training
// block, train both estimator modes, evaluate on the clean test block.
struct BenchmarkResult {
  Eigen::VectorXd rpm_beta;
  Eigen::VectorXd gpm_beta;
  double rpm_rmse = 0.0;
  double gpm_rmse = 0.0;
  double rpm_mae = 0.0;
  double gpm_mae = 0.0;
  int downweighted = 0;  // rpm leverage weights below 1
};

BenchmarkResult run_benchmark(const NetworkCase& net,
                              const SweepProtocol& protocol, double fraction,
                              std::uint64_t seed);

// Trains both estimator modes per (fraction, seed) cell and records test
// RMSE/MAE; per-cell failures are recorded, not fatal.
std::vector<SweepCell> contamination_sweep(const NetworkCase& net,
                                           const SweepProtocol& protocol,
                                           const std::vector<double>& fractions,
                                           const std::vector<std::uint64_t>& seeds);

}  // namespace rgpf

#endif  // RGPF_STOCHASTIC_HPP_
