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

#include "psqp/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace psqp {
namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

std::size_t weight_offset(const MlpSpec& spec, std::size_t layer) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    off += in * out + out;
  }
  return off;
}

void check_theta(const MlpSpec& spec, std::size_t size) {
  if (size != spec.param_count()) {
    std::ostringstream os;
    os << "parameter vector has length " << size << ", network expects " << spec.param_count();
    throw DimensionMismatch(os.str());
  }
}

}  // namespace

void MlpSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("network needs at least an input and an output layer");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("layer widths must be positive");
}

std::size_t MlpSpec::param_count() const {
  validate();
  return weight_offset(*this, num_layers());
}

std::vector<LayerParams> unflatten(const MlpSpec& spec, std::span<const double> theta) {
  check_theta(spec, theta.size());
  std::vector<LayerParams> layers;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    LayerParams p{Matrix(out, in, std::vector<double>(theta.begin() + off, theta.begin() + off + in * out)),
                  Vector(theta.begin() + off + in * out, theta.begin() + off + in * out + out)};
    off += in * out + out;
    layers.push_back(std::move(p));
  }
  return layers;
}

Vector flatten(const MlpSpec& spec, std::span<const LayerParams> layers) {
  if (layers.size() != spec.num_layers()) throw DimensionMismatch("flatten: layer count");
  Vector theta;
  theta.reserve(spec.param_count());
  for (const auto& l : layers) {
    theta.insert(theta.end(), l.weights.data().begin(), l.weights.data().end());
    theta.insert(theta.end(), l.bias.begin(), l.bias.end());
  }
  check_theta(spec, theta.size());
  return theta;
}

Vector init_params(const MlpSpec& spec, std::uint64_t seed) {
  Vector theta(spec.param_count(), 0.0);
  std::mt19937_64 gen(seed);
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < in * out; ++i) theta[off + i] = dist(gen);
    off += in * out + out;
  }
  return theta;
}

Vector forward(const MlpSpec& spec, std::span<const double> theta, std::span<const double> input) {
  check_theta(spec, theta.size());
  if (input.size() != spec.input_dim()) throw DimensionMismatch("forward: input length");
  Vector x(input.begin(), input.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    const bool hidden = l + 1 < spec.num_layers();
    Vector y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double z = theta[off + in * out + o];
      const double* w = theta.data() + off + o * in;
      for (std::size_t i = 0; i < in; ++i) z += w[i] * x[i];
      y[o] = hidden ? std::tanh(z) : z;
    }
    off += in * out + out;
    x = std::move(y);
  }
  return x;
}

std::vector<Var> forward(const MlpSpec& spec, std::span<const Var> theta, std::span<const Var> input) {
  check_theta(spec, theta.size());
  if (input.size() != spec.input_dim()) throw DimensionMismatch("forward: input length");
  std::vector<Var> x(input.begin(), input.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    const bool hidden = l + 1 < spec.num_layers();
    std::vector<Var> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      const Var z = dot(theta.subspan(off + o * in, in), x, theta[off + in * out + o]);
      y[o] = hidden ? tanh(z) : z;
    }
    off += in * out + out;
    x = std::move(y);
  }
  return x;
}

Jet2 forward_jet(const MlpSpec& spec, std::span<const Var> theta, double t) {
  check_theta(spec, theta.size());
  if (spec.input_dim() != 1 || spec.output_dim() != 1)
    throw DimensionMismatch("forward_jet: network must map a scalar to a scalar");
  std::vector<Jet2> x{Jet2::input(t)};
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    const bool hidden = l + 1 < spec.num_layers();
    std::vector<Jet2> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      const Jet2 z = affine(theta.subspan(off + o * in, in), x, theta[off + in * out + o]);
      y[o] = hidden ? tanh(z) : z;
    }
    off += in * out + out;
    x = std::move(y);
  }
  return x.front();
}

JetValue forward_jet_values(const MlpSpec& spec, std::span<const double> theta, double t) {
  check_theta(spec, theta.size());
  if (spec.input_dim() != 1 || spec.output_dim() != 1)
    throw DimensionMismatch("forward_jet_values: network must map a scalar to a scalar");
  std::vector<JetValue> x{{t, 1.0, 0.0}};
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(spec.widths[l]);
    const auto out = static_cast<std::size_t>(spec.widths[l + 1]);
    const bool hidden = l + 1 < spec.num_layers();
    std::vector<JetValue> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      JetValue z{theta[off + in * out + o], 0.0, 0.0};
      const double* w = theta.data() + off + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        z.val += w[i] * x[i].val;
        z.d1 += w[i] * x[i].d1;
        z.d2 += w[i] * x[i].d2;
      }
      if (hidden) {
        const double th = std::tanh(z.val);
        const double s = 1.0 - th * th;
        z = {th, s * z.d1, s * z.d2 - 2.0 * th * s * z.d1 * z.d1};
      }
      y[o] = z;
    }
    off += in * out + out;
    x = std::move(y);
  }
  return x.front();
}

void write_i32(std::ostream& os, std::int32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& os, double v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::int32_t read_i32(std::istream& is) {
  std::int32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("parameter file truncated");
  return to_little(v);
}

double read_f64(std::istream& is) {
  double v = 0.0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("parameter file truncated");
  return to_little(v);
}

void write_params(std::ostream& os, std::span<const int> widths, std::span<const double> theta) {
  write_i32(os, static_cast<std::int32_t>(widths.size()));
  for (int w : widths) write_i32(os, w);
  for (double v : theta) write_f64(os, v);
}

StoredParams read_params(std::istream& is) {
  StoredParams out;
  const std::int32_t count = read_i32(is);
  if (count < 1 || count > 1024) throw std::runtime_error("parameter file: bad width count");
  std::size_t n = 1;
  for (std::int32_t i = 0; i < count; ++i) {
    const std::int32_t w = read_i32(is);
    if (w < 1) throw std::runtime_error("parameter file: bad width");
    out.widths.push_back(w);
  }
  if (out.widths.size() == 1) {
    n = static_cast<std::size_t>(out.widths.front());
  } else {
    n = MlpSpec{out.widths}.param_count();
  }
  out.theta.resize(n);
  for (double& v : out.theta) v = read_f64(is);
  return out;
}

void save_params(const std::filesystem::path& path, const MlpSpec& spec, std::span<const double> theta) {
  check_theta(spec, theta.size());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_params(os, spec.widths, theta);
}

StoredParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_params(is);
}

}  // namespace psqp
