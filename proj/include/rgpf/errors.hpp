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
#ifndef RGPF_ERRORS_HPP_
#define RGPF_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace rgpf {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input vector/matrix shapes disagree with what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
  DimensionError(const std::string& where, long expected, long actual)
      : Error(where + ": expected length " + std::to_string(expected) +
              ", got " + std::to_string(actual)) {}
};

// Hyperparameters outside their admissible domain (e.g. l <= 0).
class HyperparameterError : public Error {
 public:
  using Error::Error;
};

// Cholesky failure after jitter escalation, overflow, etc.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// n too small relative to the number of basis columns.
class DegreesOfFreedomError : public Error {
 public:
  using Error::Error;
};

// All points of a cloud coincide; no projection direction exists.
class DegenerateCloudError : public Error {
 public:
  using Error::Error;
};

// Singular normal matrix; names the offending basis columns when known.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Hyperparameter optimization failed from every start.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

// Power-flow solver did not converge (voltage collapse).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed case/config/dataset files.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rgpf

#endif  // RGPF_ERRORS_HPP_
