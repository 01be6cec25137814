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
#include "rgpf/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rgpf {

Eigen::Index Dataset::output_index(const std::string& name) const {
  for (std::size_t j = 0; j < output_names.size(); ++j)
    if (output_names[j] == name) return static_cast<Eigen::Index>(j);
  throw ParseError("dataset: no output column named '" + name + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("rename failed: " + tmp + " -> " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.X.cols();
  if (d % 2 != 0) throw DimensionError("dataset: X must have 2p columns");
  if (ds.Y.rows() != n || ds.timestamps.size() != n)
    throw DimensionError("dataset: row counts disagree");
  if (static_cast<Eigen::Index>(ds.output_names.size()) != ds.Y.cols())
    throw DimensionError("dataset: output name/column mismatch");

  std::string out;
  out += "timestamp";
  for (Eigen::Index b = 0; b < d / 2; ++b) {
    out += ",P_" + std::to_string(b + 1);
    out += ",Q_" + std::to_string(b + 1);
  }
  for (const auto& name : ds.output_names) out += "," + name;
  out += "\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out += format_double(ds.timestamps(i));
    for (Eigen::Index j = 0; j < d; ++j) out += "," + format_double(ds.X(i, j));
    for (Eigen::Index j = 0; j < ds.Y.cols(); ++j)
      out += "," + format_double(ds.Y(i, j));
    out += "\n";
  }
  write_file_atomic(path, out);
}

Dataset read_dataset_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset: empty file " + path);
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "timestamp")
    throw ParseError("dataset: header must start with 'timestamp' in " + path);

  // Input columns are the leading P_i/Q_i pairs; everything after is output.
  std::size_t d = 0;
  while (1 + d < header.size()) {
    const std::string& name = header[1 + d];
    const std::string want =
        (d % 2 == 0 ? "P_" : "Q_") + std::to_string(d / 2 + 1);
    if (name != want) break;
    ++d;
  }
  if (d == 0 || d % 2 != 0)
    throw ParseError("dataset: malformed injection columns in " + path);

  Dataset ds;
  ds.output_names.assign(header.begin() + 1 + static_cast<long>(d),
                         header.end());

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("dataset: row " + std::to_string(lineno) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()) + " in " + path);
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      try {
        std::size_t pos = 0;
        row[j] = std::stod(fields[j], &pos);
        if (pos != fields[j].size()) throw std::invalid_argument(fields[j]);
      } catch (const std::exception&) {
        throw ParseError("dataset: bad number '" + fields[j] + "' at row " +
                         std::to_string(lineno) + " in " + path);
      }
    }
    rows.push_back(std::move(row));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(ds.output_names.size());
  ds.timestamps.resize(n);
  ds.X.resize(n, static_cast<Eigen::Index>(d));
  ds.Y.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.timestamps(i) = rows[i][0];
    for (std::size_t j = 0; j < d; ++j)
      ds.X(i, static_cast<Eigen::Index>(j)) = rows[i][1 + j];
    for (Eigen::Index j = 0; j < m; ++j)
      ds.Y(i, j) = rows[i][1 + d + static_cast<std::size_t>(j)];
  }
  return ds;
}

}  // namespace rgpf
