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
#ifndef RGPF_DATASET_HPP_
#define RGPF_DATASET_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rgpf/errors.hpp"

namespace rgpf {

// Paired design inputs X (n x 2p, interleaved per-bus P_i, Q_i columns in kW
// and kVAr) and outputs Y (one column per requested voltage quantity), with
// timestamps.
struct Dataset {
  Eigen::VectorXd timestamps;
  Eigen::MatrixXd X;
  std::vector<std::string> output_names;
  Eigen::MatrixXd Y;

  Eigen::Index n() const { return X.rows(); }

  Eigen::Index output_index(const std::string& name) const;
  Eigen::VectorXd output(const std::string& name) const {
    return Y.col(output_index(name));
  }
};

// CSV schema: header `timestamp,P_1,Q_1,...,P_p,Q_p,<output names>`,
// RFC 4180, UTF-8, '.' decimal separator. Numbers are written with 17
// significant digits so a round trip is bit exact.
void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// Writes to a temp file in the same directory and renames into place.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Shortest-17-digit formatting used for all CSV numeric fields.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace rgpf

#endif  // RGPF_DATASET_HPP_
