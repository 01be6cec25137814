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
#include "rgpf/powerflow.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <queue>

namespace rgpf {

using nlohmann::json;
using Complex = std::complex<double>;

int NetworkCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<int>(i);
  throw ParseError("network: unknown bus id " + std::to_string(id));
}

void NetworkCase::validate() const {
  if (buses.empty()) throw ParseError("network: no buses");
  const int n = bus_count();
  bus_index(slack_bus);
  if (static_cast<int>(branches.size()) != n - 1)
    throw ParseError("network: cycle or disconnection: " +
                     std::to_string(branches.size()) + " branches for " +
                     std::to_string(n) + " buses (need buses - 1)");
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : branches) {
    if (br.r_ohm < 0 || br.x_ohm < 0)
      throw ParseError("network: negative impedance on branch " +
                       std::to_string(br.from) + "-" + std::to_string(br.to));
    const int a = bus_index(br.from);
    const int b = bus_index(br.to);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  // Connectivity from the slack; with edges = n - 1 this also rules out cycles.
  std::vector<char> seen(n, 0);
  std::queue<int> work;
  work.push(bus_index(slack_bus));
  seen[work.front()] = 1;
  while (!work.empty()) {
    const int u = work.front();
    work.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        work.push(v);
      }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[i])
      throw ParseError("network: bus " + std::to_string(buses[i].id) +
                       " is disconnected from the slack bus");
  for (const auto& r : res_attachments) {
    bus_index(r.bus);
    if (r.capacity_kw < 0)
      throw ParseError("network: negative RES capacity at bus " +
                       std::to_string(r.bus));
  }
}

NetworkCase load_case(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("case file " + path + ": invalid JSON: " + e.what());
  }
  NetworkCase net;
  try {
    net.base_kv = j.at("base_kv");
    net.base_kva = j.at("base_kva");
    net.slack_bus = j.at("slack");
    for (const auto& b : j.at("buses")) {
      Bus bus;
      bus.id = b.at("id");
      bus.load_p_kw = b.at("load_p_kw");
      bus.load_q_kvar = b.at("load_q_kvar");
      net.buses.push_back(bus);
    }
    for (const auto& b : j.at("branches")) {
      Branch br;
      br.from = b.at("from");
      br.to = b.at("to");
      br.r_ohm = b.at("r_ohm");
      br.x_ohm = b.at("x_ohm");
      net.branches.push_back(br);
    }
    if (j.contains("res")) {
      for (const auto& r : j.at("res")) {
        ResAttachment res;
        res.bus = r.at("bus");
        const std::string kind = r.at("kind");
        if (kind == "pv")
          res.kind = ResKind::kPv;
        else if (kind == "wind")
          res.kind = ResKind::kWind;
        else
          throw ParseError("case file " + path + ": unknown RES kind " + kind);
        res.capacity_kw = r.at("capacity_kw");
        net.res_attachments.push_back(res);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError("case file " + path + ": " + e.what());
  }
  net.validate();
  return net;
}

namespace {

struct SweepOrder {
  std::vector<int> parent;         // parent bus index, -1 for slack
  std::vector<int> parent_branch;  // branch index into net.branches
  std::vector<int> order;          // BFS order from slack (root first)
};

SweepOrder build_order(const NetworkCase& net) {
  const int n = net.bus_count();
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, branch)
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const int a = net.bus_index(net.branches[k].from);
    const int b = net.bus_index(net.branches[k].to);
    adj[a].push_back({b, static_cast<int>(k)});
    adj[b].push_back({a, static_cast<int>(k)});
  }
  SweepOrder so;
  so.parent.assign(n, -1);
  so.parent_branch.assign(n, -1);
  const int root = net.bus_index(net.slack_bus);
  std::vector<char> seen(n, 0);
  seen[root] = 1;
  std::queue<int> work;
  work.push(root);
  while (!work.empty()) {
    const int u = work.front();
    work.pop();
    so.order.push_back(u);
    for (const auto& [v, k] : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        so.parent[v] = u;
        so.parent_branch[v] = k;
        work.push(v);
      }
  }
  return so;
}

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkCase& net,
                                   const Injections& inj) {
  const int n = net.bus_count();
  if (inj.p_kw.size() != n || inj.q_kvar.size() != n)
    throw DimensionError("solve_power_flow: injections", n, inj.p_kw.size());

  const double z_base = net.base_kv * net.base_kv * 1000.0 / net.base_kva;
  const SweepOrder so = build_order(net);
  const int root = net.bus_index(net.slack_bus);

  std::vector<Complex> s_pu(n);  // net load, p.u.
  for (int i = 0; i < n; ++i)
    s_pu[i] = Complex(inj.p_kw(i), inj.q_kvar(i)) / net.base_kva;
  std::vector<Complex> z_pu(net.branches.size());
  for (std::size_t k = 0; k < net.branches.size(); ++k)
    z_pu[k] = Complex(net.branches[k].r_ohm, net.branches[k].x_ohm) / z_base;

  std::vector<Complex> v(n, Complex(1.0, 0.0));
  std::vector<Complex> i_acc(n);
  int it = 0;
  double dv = 0.0;
  const double tol = 1e-8;
  const int max_sweeps = 200;
  for (it = 1; it <= max_sweeps; ++it) {
    // Backward: accumulate load currents from the leaves toward the root.
    for (int i = 0; i < n; ++i) i_acc[i] = std::conj(s_pu[i] / v[i]);
    for (auto rit = so.order.rbegin(); rit != so.order.rend(); ++rit) {
      const int u = *rit;
      if (so.parent[u] >= 0) i_acc[so.parent[u]] += i_acc[u];
    }
    // Forward: update voltages from the slack outward.
    dv = 0.0;
    for (int u : so.order) {
      if (u == root) continue;
      const Complex v_new =
          v[so.parent[u]] - z_pu[so.parent_branch[u]] * i_acc[u];
      dv = std::max(dv, std::abs(v_new - v[u]));
      v[u] = v_new;
    }
    if (dv <= tol) break;
  }
  if (dv > tol) {
    int worst = 0;
    double worst_v = 1.0;
    for (int i = 0; i < n; ++i)
      if (std::abs(v[i]) < worst_v) {
        worst_v = std::abs(v[i]);
        worst = i;
      }
    throw ConvergenceError(
        "solve_power_flow: no convergence after " +
        std::to_string(max_sweeps) + " sweeps (worst bus " +
        std::to_string(net.buses[worst].id) +
        ", |V| = " + std::to_string(worst_v) + " p.u.)");
  }

  PowerFlowSolution sol;
  sol.iterations = it;
  sol.v_mag.resize(n);
  sol.v_ang_deg.resize(n);
  for (int i = 0; i < n; ++i) {
    sol.v_mag(i) = std::abs(v[i]);
    sol.v_ang_deg(i) = std::arg(v[i]) * 180.0 / std::numbers::pi;
  }
  // Power mismatch at the solution: bus power recomputed from the voltage
  // profile via branch currents vs the specified load.
  std::vector<Complex> net_in(n);  // current arriving from the parent branch
  for (int u : so.order) {
    if (u == root) continue;
    const Complex z = z_pu[so.parent_branch[u]];
    // Zero-impedance branches leave the voltage drop undefined; fall back to
    // the accumulated sweep current.
    net_in[u] = std::abs(z) > 0 ? (v[so.parent[u]] - v[u]) / z : i_acc[u];
  }
  double mismatch = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    Complex i_load = net_in[i];
    for (int c = 0; c < n; ++c)
      if (so.parent[c] == i) i_load -= net_in[c];
    mismatch = std::max(mismatch, std::abs(v[i] * std::conj(i_load) - s_pu[i]));
  }
  sol.max_mismatch = mismatch;
  return sol;
}

Dataset simulate_time_series(const NetworkCase& net,
                             const Eigen::MatrixXd& series,
                             const Eigen::VectorXd& timestamps,
                             const std::vector<OutputSpec>& outputs) {
  const int n = net.bus_count();
  if (series.cols() != 2 * n)
    throw DimensionError("simulate_time_series: series", 2 * n, series.cols());
  if (timestamps.size() != series.rows())
    throw DimensionError("simulate_time_series: timestamps", series.rows(),
                         timestamps.size());

  Dataset ds;
  ds.timestamps = timestamps;
  ds.X = series;
  for (const auto& out : outputs) ds.output_names.push_back(out.name());
  ds.Y.resize(series.rows(), static_cast<Eigen::Index>(outputs.size()));

  for (Eigen::Index t = 0; t < series.rows(); ++t) {
    Injections inj;
    inj.p_kw.resize(n);
    inj.q_kvar.resize(n);
    for (int i = 0; i < n; ++i) {
      inj.p_kw(i) = series(t, 2 * i);
      inj.q_kvar(i) = series(t, 2 * i + 1);
    }
    PowerFlowSolution sol;
    try {
      sol = solve_power_flow(net, inj);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("simulate_time_series: instance at t=" +
                             format_double(timestamps(t)) + ": " + e.what());
    }
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const int bi = net.bus_index(outputs[k].bus);
      ds.Y(t, static_cast<Eigen::Index>(k)) =
          outputs[k].magnitude ? sol.v_mag(bi) : sol.v_ang_deg(bi);
    }
  }
  return ds;
}

}  // namespace rgpf
