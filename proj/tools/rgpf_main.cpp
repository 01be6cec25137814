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
// rgpf experiment CLI: generate | corrupt | train | predict | evaluate |
// sweep | demo-residuals.
//
// Exit codes: 0 ok, 2 config/usage, 3 simulation, 4 training, 5 I/O.
// Errors are reported as a single JSON object on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rgpf/dataset.hpp"
#include "rgpf/gp.hpp"
#include "rgpf/powerflow.hpp"
#include "rgpf/stochastic.hpp"

namespace {

using nlohmann::json;
using namespace rgpf;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitTraining = 4;
constexpr int kExitIo = 5;

struct CliError : std::runtime_error {
  int code;
  CliError(int code, const std::string& msg)
      : std::runtime_error(msg), code(code) {}
};

[[noreturn]] void fail(int code, const std::string& kind,
                       const std::string& message) {
  json err;
  err["error"]["code"] = code;
  err["error"]["kind"] = kind;
  err["error"]["message"] = message;
  std::cerr << err.dump() << "\n";
  std::exit(code);
}

// Everything the experiment protocol needs, as data. Every field has a JSON
// key of the same name and a --kebab-case flag override.
struct ExperimentConfig {
  std::string case_path = "data/ieee33.json";
  int n_train = 150;
  int n_test = 60;
  std::vector<OutputSpec> outputs = {{19, true}};
  std::string basis = "quadratic";
  std::string kernel = "rbf";
  std::string mode = "rpm";
  double huber_c = 1.5;
  double ps_b = 0.0;
  double outlier_fraction = 0.25;
  double magnitude_scale = 8.0;
  bool random_placement = false;
  double ar_phi = 0.95;
  double ar_sigma = 0.03;
  int mc_samples = 7000;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
};

OutputSpec parse_output_name(const std::string& name) {
  // "V19_mag" or "V19_ang".
  const auto us = name.rfind('_');
  if (name.size() < 6 || name[0] != 'V' || us == std::string::npos)
    throw ParseError("malformed output quantity name: " + name);
  const std::string suffix = name.substr(us + 1);
  if (suffix != "mag" && suffix != "ang")
    throw ParseError("malformed output quantity name: " + name);
  OutputSpec out;
  out.magnitude = suffix == "mag";
  try {
    out.bus = std::stoi(name.substr(1, us - 1));
  } catch (const std::exception&) {
    throw ParseError("malformed output quantity name: " + name);
  }
  return out;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("RGPF_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ParseError(std::string("RGPF_SEED is not an integer: ") + env);
    }
  }
  return 1;
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  cfg.seed = default_seed();
  if (path.empty()) return cfg;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("config " + path + ": invalid JSON: " + e.what());
  }
  try {
    if (j.contains("case_path")) cfg.case_path = j["case_path"];
    if (j.contains("n_train")) cfg.n_train = j["n_train"];
    if (j.contains("n_test")) cfg.n_test = j["n_test"];
    if (j.contains("outputs")) {
      cfg.outputs.clear();
      for (const auto& o : j["outputs"])
        cfg.outputs.push_back(parse_output_name(o.get<std::string>()));
    }
    if (j.contains("basis")) cfg.basis = j["basis"];
    if (j.contains("kernel")) cfg.kernel = j["kernel"];
    if (j.contains("mode")) cfg.mode = j["mode"];
    if (j.contains("huber_c")) cfg.huber_c = j["huber_c"];
    if (j.contains("ps_b")) cfg.ps_b = j["ps_b"];
    if (j.contains("outlier_fraction")) cfg.outlier_fraction = j["outlier_fraction"];
    if (j.contains("magnitude_scale")) cfg.magnitude_scale = j["magnitude_scale"];
    if (j.contains("random_placement")) cfg.random_placement = j["random_placement"];
    if (j.contains("ar_phi")) cfg.ar_phi = j["ar_phi"];
    if (j.contains("ar_sigma")) cfg.ar_sigma = j["ar_sigma"];
    if (j.contains("mc_samples")) cfg.mc_samples = j["mc_samples"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"];
  } catch (const json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  BasisSpec basis;
  basis.kind = parse_basis_kind(cfg.basis);
  basis.input_dim = 2;  // placeholder; q scales with the real input dim
  if (cfg.n_train < 1) throw ParseError("config: n_train must be >= 1");
  if (cfg.n_test < 1) throw ParseError("config: n_test must be >= 1");
  if (cfg.mc_samples < 1) throw ParseError("config: mc_samples must be >= 1");
  if (cfg.outputs.empty()) throw ParseError("config: no output quantities");
  if (cfg.mode != "rpm" && cfg.mode != "gpm")
    throw ParseError("config: mode must be rpm or gpm");
  parse_kernel_kind(cfg.kernel);
}

ModelSpec model_spec_from(const ExperimentConfig& cfg, Eigen::Index input_dim) {
  ModelSpec spec;
  spec.basis.kind = parse_basis_kind(cfg.basis);
  spec.basis.input_dim = static_cast<int>(input_dim);
  spec.kernel.kind = parse_kernel_kind(cfg.kernel);
  spec.mode = cfg.mode == "rpm" ? EstimatorMode::kRpm : EstimatorMode::kGpm;
  spec.huber_c = cfg.huber_c;
  spec.ps_b = cfg.ps_b;
  return spec;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string model_file_name(const OutputSpec& out) {
  return "model_" + std::to_string(out.bus) +
         (out.magnitude ? "_mag" : "_ang") + ".json";
}

// ---- subcommands -----------------------------------------------------------

int cmd_generate(const ExperimentConfig& cfg) {
  validate_config(cfg);
  NetworkCase net;
  try {
    net = load_case(cfg.case_path);
  } catch (const IoError& e) {
    // A missing case file is a configuration problem, not an I/O failure.
    throw CliError(kExitConfig, e.what());
  }
  SeedStream seeds(cfg.seed);
  SeriesSpec series;
  series.length = cfg.n_train + cfg.n_test;
  series.ar_phi = cfg.ar_phi;
  series.ar_sigma = cfg.ar_sigma;

  Dataset full;
  try {
    const auto synth = synthesize_series(net, series, seeds);
    full = simulate_time_series(net, synth.injections, synth.timestamps,
                                cfg.outputs);
  } catch (const ConvergenceError& e) {
    throw CliError(kExitSimulation, e.what());
  }

  Dataset train_ds, test_ds;
  train_ds.timestamps = full.timestamps.head(cfg.n_train);
  train_ds.X = full.X.topRows(cfg.n_train);
  train_ds.Y = full.Y.topRows(cfg.n_train);
  train_ds.output_names = full.output_names;
  test_ds.timestamps = full.timestamps.tail(cfg.n_test);
  test_ds.X = full.X.bottomRows(cfg.n_test);
  test_ds.Y = full.Y.bottomRows(cfg.n_test);
  test_ds.output_names = full.output_names;

  write_dataset_csv(train_ds, join_path(cfg.output_dir, "train.csv"));
  write_dataset_csv(test_ds, join_path(cfg.output_dir, "test.csv"));
  std::cout << "train.csv: " << train_ds.n() << " rows, "
            << train_ds.X.cols() + train_ds.Y.cols() + 1 << " columns\n"
            << "test.csv: " << test_ds.n() << " rows, "
            << test_ds.X.cols() + test_ds.Y.cols() + 1 << " columns\n";
  return kExitOk;
}

int cmd_corrupt(const ExperimentConfig& cfg, const std::string& input,
                const std::string& output_path) {
  const Dataset clean = read_dataset_csv(input);
  OutlierSpec spec;
  spec.fraction = cfg.outlier_fraction;
  spec.magnitude_scale = cfg.magnitude_scale;
  spec.random_placement = cfg.random_placement;
  SeedStream seeds(cfg.seed);
  NetworkCase net;
  const NetworkCase* net_ptr = nullptr;
  if ((spec.targets & kGoodLeverage) && !cfg.case_path.empty()) {
    net = load_case(cfg.case_path);
    net_ptr = &net;
  }
  const auto [corrupted, mask] = inject_outliers(clean, spec, seeds, net_ptr);
  write_dataset_csv(corrupted, output_path);

  json jm;
  jm["rows"] = mask.rows;
  jm["x_touched"] = mask.x_touched;
  jm["y_touched"] = mask.y_touched;
  write_file_atomic(output_path + ".mask.json", jm.dump(2) + "\n");
  std::cout << "corrupted " << mask.rows.size() << " of " << clean.n()
            << " rows -> " << output_path << "\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& data_path) {
  const Dataset ds = read_dataset_csv(data_path);
  validate_config(cfg);
  const ModelSpec base_spec = model_spec_from(cfg, ds.X.cols());

  for (std::size_t k = 0; k < ds.output_names.size(); ++k) {
    const auto& name = ds.output_names[k];
    const OutputSpec out = parse_output_name(name);
    TrainedModel model;
    try {
      model = train(ds.X, ds.Y.col(static_cast<Eigen::Index>(k)), base_spec);
    } catch (const Error& e) {
      const std::string trace_path =
          join_path(cfg.output_dir, "train_failure_" + name + ".txt");
      write_file_atomic(trace_path, std::string(e.what()) + "\n");
      throw CliError(kExitTraining,
                     std::string(e.what()) + " (trace: " + trace_path + ")");
    }
    const std::string path = join_path(cfg.output_dir, model_file_name(out));
    save_model(model, path);

    std::ostringstream summary;
    summary << name << ": " << (model.converged ? "converged" : "NOT converged")
            << " after " << model.fit_trace.size() << " outer iterations; ";
    summary << "length scales [";
    for (Eigen::Index i = 0; i < model.hp.length_scales.size(); ++i)
      summary << (i ? " " : "") << format_double(model.hp.length_scales(i));
    summary << "], tau2 " << format_double(model.hp.signal_variance)
            << ", noise " << format_double(model.hp.noise_variance);
    if (model.weights) {
      const int down =
          static_cast<int>((model.weights->w.array() < 1.0).count());
      summary << "; " << down << " downweighted points";
    }
    summary << " -> " << path << "\n";
    std::cout << summary.str();
  }
  return kExitOk;
}

int cmd_predict(const ExperimentConfig& cfg, const std::string& model_path,
                const std::string& data_path) {
  const TrainedModel model = load_model(model_path);
  const Dataset ds = read_dataset_csv(data_path);
  if (ds.X.cols() != model.training_inputs.cols())
    throw ParseError("predict: dataset has " + std::to_string(ds.X.cols()) +
                     " input columns, model expects " +
                     std::to_string(model.training_inputs.cols()));
  const auto pred = predict(model, ds.X, false, false);

  std::ostringstream csv;
  csv << "timestamp,mean,std\n";
  for (Eigen::Index i = 0; i < pred.mean.size(); ++i)
    csv << format_double(ds.timestamps(i)) << "," << format_double(pred.mean(i))
        << "," << format_double(pred.per_point_std(i)) << "\n";
  const std::string path = join_path(cfg.output_dir, "predictions.csv");
  write_file_atomic(path, csv.str());
  std::cout << "wrote " << pred.mean.size() << " predictions -> " << path
            << "\n";
  return kExitOk;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& pred_path,
                 const std::string& ref_path, const std::string& quantity) {
  const Dataset ref = read_dataset_csv(ref_path);
  const std::string content = read_file(pred_path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line).at(0) != "timestamp")
    throw ParseError("predictions " + pred_path + ": missing header");
  std::vector<double> means;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 2)
      throw ParseError("predictions " + pred_path + ": short row");
    means.push_back(std::stod(fields[1]));
  }
  const Eigen::VectorXd pred =
      Eigen::Map<const Eigen::VectorXd>(means.data(),
                                        static_cast<Eigen::Index>(means.size()));
  const std::string name = quantity.empty() ? ref.output_names.at(0) : quantity;
  const Eigen::VectorXd truth = ref.output(name);

  json metrics;
  metrics[name]["rmse"] = rmse(pred, truth);
  metrics[name]["mae"] = mae(pred, truth);
  const std::string path = join_path(cfg.output_dir, "metrics.json");
  write_file_atomic(path, metrics.dump(2) + "\n");
  std::cout << metrics.dump(2) << "\n";
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, std::vector<double> fractions,
              int n_seeds) {
  validate_config(cfg);
  NetworkCase net;
  try {
    net = load_case(cfg.case_path);
  } catch (const IoError& e) {
    throw CliError(kExitConfig, e.what());
  }
  if (fractions.empty()) fractions = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
  for (double f : fractions)
    if (f < 0.0 || f > 0.25)
      throw ParseError("sweep: fractions must lie in [0, 0.25]");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i) seeds.push_back(cfg.seed + i);

  SweepProtocol protocol;
  protocol.n_train = cfg.n_train;
  protocol.n_test = cfg.n_test;
  protocol.output = cfg.outputs.at(0);
  protocol.basis_order = cfg.basis == "constant" ? 0
                         : cfg.basis == "linear" ? 1
                                                 : 2;
  protocol.outliers.magnitude_scale = cfg.magnitude_scale;
  protocol.outliers.random_placement = cfg.random_placement;
  protocol.series.ar_phi = cfg.ar_phi;
  protocol.series.ar_sigma = cfg.ar_sigma;

  const auto cells = contamination_sweep(net, protocol, fractions, seeds);
  std::ostringstream csv;
  csv << "fraction,seed,mode,quantity,rmse,mae\n";
  for (const auto& cell : cells) {
    if (!cell.error.empty())
      std::cerr << "sweep cell (fraction " << cell.fraction << ", seed "
                << cell.seed << ") failed: " << cell.error << "\n";
    csv << format_double(cell.fraction) << "," << cell.seed << ","
        << cell.mode << "," << cell.quantity << ","
        << format_double(cell.error.empty() ? cell.rmse
                                            : std::nan("")) << ","
        << format_double(cell.error.empty() ? cell.mae : std::nan(""))
        << "\n";
  }
  const std::string path = join_path(cfg.output_dir, "sweep.csv");
  write_file_atomic(path, csv.str());
  std::cout << "wrote " << cells.size() << " sweep cells -> " << path << "\n";
  return kExitOk;
}

// Toy instance reproducing the smearing and masking failure modes of plain
// WLS residual screening.
int cmd_demo_residuals() {
  const int n = 10;
  Eigen::MatrixXd H(n, 2);
  Eigen::VectorXd x(n);
  // Two coincident extreme-leverage points followed by a benign bulk.
  x << 1e6, 1e6, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
  H.col(0).setOnes();
  H.col(1) = x;
  const Eigen::MatrixXd Sigma = Eigen::MatrixXd::Identity(n, n);
  const auto sens = residual_sensitivity(H, Sigma);

  std::cout << "smearing: single gross error e_1 = 10 at index 1\n";
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  e(0) = 10.0;
  Eigen::VectorXd r = smearing_masking_demo(sens.W, e);
  std::cout << "  index  error  residual\n";
  for (int i = 0; i < n; ++i)
    std::cout << "  " << i + 1 << "  " << format_double(e(i)) << "  "
              << format_double(r(i)) << "\n";
  int spread = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(r(i)) > 1e-12) ++spread;
  std::cout << "  residuals contaminated at " << spread
            << " non-error indices (smearing)\n\n";

  std::cout << "masking: paired gross errors along the near-null direction of "
               "the leading 2x2 block of W\n";
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      sens.W.topLeftCorner(2, 2), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector2d v = svd.matrixV().col(1);
  e.setZero();
  e(0) = 10.0 * v(0);
  e(1) = 10.0 * v(1);
  r = smearing_masking_demo(sens.W, e);
  std::cout << "  index  error  residual\n";
  for (int i = 0; i < n; ++i)
    std::cout << "  " << i + 1 << "  " << format_double(e(i)) << "  "
              << format_double(r(i)) << "\n";
  std::cout << "  |r_1| = " << format_double(std::abs(r(0)))
            << ", |r_2| = " << format_double(std::abs(r(1)))
            << " despite |e_1|, |e_2| > 5 (masking)\n";
  return kExitOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Robust Gaussian-process surrogate experiments for radial "
               "distribution feeders"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> opt_case, opt_basis, opt_kernel, opt_mode,
      opt_out_dir;
  std::optional<int> opt_n_train, opt_n_test, opt_mc;
  std::optional<double> opt_fraction, opt_scale, opt_huber_c, opt_ps_b;
  std::optional<std::uint64_t> opt_seed;
  std::optional<bool> opt_random_placement;
  std::vector<std::string> opt_outputs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--case", opt_case, "network case file");
    sub->add_option("--n-train", opt_n_train, "training series length");
    sub->add_option("--n-test", opt_n_test, "test series length");
    sub->add_option("--output", opt_outputs,
                    "output quantity, e.g. V19_mag (repeatable)");
    sub->add_option("--basis", opt_basis, "constant | linear | quadratic");
    sub->add_option("--kernel", opt_kernel,
                    "rbf | exponential | matern32 | rational_quadratic");
    sub->add_option("--mode", opt_mode, "rpm | gpm");
    sub->add_option("--huber-c", opt_huber_c, "Huber threshold");
    sub->add_option("--ps-b", opt_ps_b, "PS^2 cutoff (<=0: chi-squared 0.975)");
    sub->add_option("--fraction", opt_fraction, "outlier fraction");
    sub->add_option("--magnitude-scale", opt_scale, "outlier magnitude scale");
    sub->add_option("--random-placement", opt_random_placement,
                    "random instead of prefix outlier rows");
    sub->add_option("--mc-samples", opt_mc, "Monte Carlo sample count");
    sub->add_option("--seed", opt_seed, "root seed (beats RGPF_SEED)");
    sub->add_option("--out-dir", opt_out_dir, "artifact directory");
  };

  auto* generate = app.add_subcommand("generate", "simulate train/test CSVs");
  add_common(generate);

  std::string corrupt_input, corrupt_output = "corrupted.csv";
  auto* corrupt = app.add_subcommand("corrupt", "inject outliers into a CSV");
  add_common(corrupt);
  corrupt->add_option("--input", corrupt_input, "clean dataset CSV")
      ->required();
  corrupt->add_option("--output-file", corrupt_output, "corrupted CSV path");

  std::string train_data;
  auto* train_cmd = app.add_subcommand("train", "fit surrogate models");
  add_common(train_cmd);
  train_cmd->add_option("--data", train_data, "training dataset CSV")
      ->required();

  std::string predict_model, predict_data;
  auto* predict_cmd = app.add_subcommand("predict", "evaluate a model");
  add_common(predict_cmd);
  predict_cmd->add_option("--model", predict_model, "model JSON")->required();
  predict_cmd->add_option("--data", predict_data, "dataset CSV")->required();

  std::string eval_pred, eval_ref, eval_quantity;
  auto* evaluate = app.add_subcommand("evaluate", "RMSE/MAE vs reference");
  add_common(evaluate);
  evaluate->add_option("--predictions", eval_pred, "predictions.csv")
      ->required();
  evaluate->add_option("--reference", eval_ref, "reference dataset CSV")
      ->required();
  evaluate->add_option("--quantity", eval_quantity,
                       "output column (default: first)");

  std::vector<double> sweep_fractions;
  int sweep_seeds = 3;
  auto* sweep = app.add_subcommand("sweep", "contamination sweep");
  add_common(sweep);
  sweep->add_option("--fractions", sweep_fractions,
                    "contamination fractions (default 0..0.25 step 0.05)");
  sweep->add_option("--seeds", sweep_seeds, "seeds per fraction");

  auto* demo =
      app.add_subcommand("demo-residuals", "smearing/masking WLS demo");
  (void)demo;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::exit(app.exit(e));
    }
    fail(kExitConfig, "usage", e.what());
  }

  ExperimentConfig cfg = load_config(config_path);
  if (opt_case) cfg.case_path = *opt_case;
  if (opt_n_train) cfg.n_train = *opt_n_train;
  if (opt_n_test) cfg.n_test = *opt_n_test;
  if (!opt_outputs.empty()) {
    cfg.outputs.clear();
    for (const auto& o : opt_outputs)
      cfg.outputs.push_back(parse_output_name(o));
  }
  if (opt_basis) cfg.basis = *opt_basis;
  if (opt_kernel) cfg.kernel = *opt_kernel;
  if (opt_mode) cfg.mode = *opt_mode;
  if (opt_huber_c) cfg.huber_c = *opt_huber_c;
  if (opt_ps_b) cfg.ps_b = *opt_ps_b;
  if (opt_fraction) cfg.outlier_fraction = *opt_fraction;
  if (opt_scale) cfg.magnitude_scale = *opt_scale;
  if (opt_random_placement) cfg.random_placement = *opt_random_placement;
  if (opt_mc) cfg.mc_samples = *opt_mc;
  if (opt_seed) cfg.seed = *opt_seed;
  if (opt_out_dir) cfg.output_dir = *opt_out_dir;
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec)
    throw IoError("cannot create output directory " + cfg.output_dir + ": " +
                  ec.message());

  if (generate->parsed()) return cmd_generate(cfg);
  if (corrupt->parsed()) return cmd_corrupt(cfg, corrupt_input, corrupt_output);
  if (train_cmd->parsed()) return cmd_train(cfg, train_data);
  if (predict_cmd->parsed()) return cmd_predict(cfg, predict_model, predict_data);
  if (evaluate->parsed())
    return cmd_evaluate(cfg, eval_pred, eval_ref, eval_quantity);
  if (sweep->parsed()) return cmd_sweep(cfg, sweep_fractions, sweep_seeds);
  if (demo->parsed()) return cmd_demo_residuals();
  fail(kExitConfig, "usage", "no subcommand");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const CliError& e) {
    fail(e.code, "command", e.what());
  } catch (const ConvergenceError& e) {
    fail(kExitSimulation, "simulation", e.what());
  } catch (const OptimizationError& e) {
    fail(kExitTraining, "training", e.what());
  } catch (const NumericalError& e) {
    fail(kExitTraining, "training", e.what());
  } catch (const ParseError& e) {
    fail(kExitConfig, "config", e.what());
  } catch (const HyperparameterError& e) {
    fail(kExitConfig, "config", e.what());
  } catch (const DimensionError& e) {
    fail(kExitConfig, "config", e.what());
  } catch (const IoError& e) {
    fail(kExitIo, "io", e.what());
  } catch (const Error& e) {
    fail(kExitTraining, "training", e.what());
  } catch (const std::exception& e) {
    fail(kExitIo, "internal", e.what());
  }
}
