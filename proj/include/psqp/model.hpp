/*
 * Copyright 2026 The psqp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "psqp/autodiff.hpp"
#include "psqp/linalg.hpp"

namespace psqp {

/// Fully connected network: tanh on hidden layers, identity on the output.
struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output

  void validate() const;
  std::size_t num_layers() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_dim() const { return static_cast<std::size_t>(widths.front()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(widths.back()); }

  /// Sum over layers of in * out + out.
  std::size_t param_count() const;
};

/// Parameters are flat: per layer, the out x in weight matrix row-major, then
/// the out biases.
struct LayerParams {
  Matrix weights;
  Vector bias;
};

std::vector<LayerParams> unflatten(const MlpSpec& spec, std::span<const double> theta);
Vector flatten(const MlpSpec& spec, std::span<const LayerParams> layers);

/// Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.
Vector init_params(const MlpSpec& spec, std::uint64_t seed);

Vector forward(const MlpSpec& spec, std::span<const double> theta, std::span<const double> input);
std::vector<Var> forward(const MlpSpec& spec, std::span<const Var> theta, std::span<const Var> input);

/// (u(t), u'(t), u''(t)) for a scalar-input, scalar-output network, with each
/// component recorded on the tape of `theta`.
Jet2 forward_jet(const MlpSpec& spec, std::span<const Var> theta, double t);

/// Tape-free counterpart of forward_jet.
struct JetValue {
  double val = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};
JetValue forward_jet_values(const MlpSpec& spec, std::span<const double> theta, double t);

/// Binary parameter file: int32 layer-width count L, L int32 widths, then the
/// parameters as float64. Everything little-endian.
struct StoredParams {
  std::vector<int> widths;
  Vector theta;
};

void write_params(std::ostream& os, std::span<const int> widths, std::span<const double> theta);
StoredParams read_params(std::istream& is);
void save_params(const std::filesystem::path& path, const MlpSpec& spec, std::span<const double> theta);
StoredParams load_params(const std::filesystem::path& path);

// Little-endian primitives shared with the optimizer checkpoint format.
void write_i32(std::ostream& os, std::int32_t v);
void write_f64(std::ostream& os, double v);
std::int32_t read_i32(std::istream& is);
double read_f64(std::istream& is);

}  // namespace psqp
