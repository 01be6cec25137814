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
#ifndef RGPF_POWERFLOW_HPP_
#define RGPF_POWERFLOW_HPP_

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "rgpf/dataset.hpp"
#include "rgpf/errors.hpp"

namespace rgpf {

struct Bus {
  int id = 0;
  double load_p_kw = 0.0;
  double load_q_kvar = 0.0;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
};

enum class ResKind { kPv, kWind };

struct ResAttachment {
  int bus = 0;
  ResKind kind = ResKind::kPv;
  double capacity_kw = 0.0;
};

// Radial distribution network rooted at the slack bus.
struct NetworkCase {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  int slack_bus = 1;
  double base_kv = 12.66;
  double base_kva = 10000.0;
  std::vector<ResAttachment> res_attachments;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int bus_index(int id) const;  // position in `buses`, throws if unknown

  // Radiality (edges = buses - 1, connected from slack) and impedance signs.
  void validate() const;
};

NetworkCase load_case(const std::string& path);

struct PowerFlowSolution {
  Eigen::VectorXd v_mag;      // p.u., ordered as case.buses
  Eigen::VectorXd v_ang_deg;  // degrees
  int iterations = 0;
  double max_mismatch = 0.0;  // p.u. power
};

// Net load per bus (positive consumes), ordered as case.buses, in kW/kVAr.
struct Injections {
  Eigen::VectorXd p_kw;
  Eigen::VectorXd q_kvar;
};

// Backward/forward sweep; converges when the largest voltage change between
// sweeps drops below 1e-8 p.u. (200 sweeps max).
PowerFlowSolution solve_power_flow(const NetworkCase& net,
                                   const Injections& inj);

struct OutputSpec {
  int bus = 0;
  bool magnitude = true;
  std::string name() const {
    return "V" + std::to_string(bus) + (magnitude ? "_mag" : "_ang");
  }
};

// Runs the solver once per row of `series` (n x 2p, interleaved P_i/Q_i in
// kW/kVAr) and collects the requested output quantities.
Dataset simulate_time_series(const NetworkCase& net,
                             const Eigen::MatrixXd& series,
                             const Eigen::VectorXd& timestamps,
                             const std::vector<OutputSpec>& outputs);

}  // namespace rgpf

#endif  // RGPF_POWERFLOW_HPP_
