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
#ifndef RGPF_RNG_HPP_
#define RGPF_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace rgpf {

// All randomness flows from one root seed through named sub-streams so that
// experiments are reproducible and components independently re-seedable.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }

  // Derives the seed for sub-stream (name, index).
  std::uint64_t derive(std::string_view name, std::uint64_t index = 0) const;

  std::mt19937_64 stream(std::string_view name, std::uint64_t index = 0) const {
    return std::mt19937_64(derive(name, index));
  }

 private:
  std::uint64_t root_;
};

// Uniform double in [0, 1) with 53 random bits; avoids the
// implementation-defined behavior of std::uniform_real_distribution.
inline double canonical_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace rgpf

#endif  // RGPF_RNG_HPP_
