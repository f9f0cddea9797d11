// SPDX-License-Identifier: Apache-2.0

#include "beamcast/channel.hpp"

#include <cmath>

#include "beamcast/errors.hpp"
#include "beamcast/hash.hpp"
#include "beamcast/rng.hpp"

namespace beamcast {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void ArrayGeometry::validate() const {
  if (n_h < 1 || n_v < 1) throw ConfigError("array geometry: element counts must be >= 1");
  if (spacing <= 0.0) throw ConfigError("array geometry: spacing must be positive");
}

void SubcarrierGrid::validate() const {
  if (n_subcarriers < 1) throw ConfigError("subcarrier grid: need at least one subcarrier");
  if (spacing <= 0.0) throw ConfigError("subcarrier grid: spacing must be positive");
}

std::vector<cdouble> steering_vector(double azimuth, double elevation, const ArrayGeometry& geom) {
  geom.validate();
  const double norm = 1.0 / std::sqrt(static_cast<double>(geom.n_elements()));
  const double cos_el = std::cos(elevation);
  const double sin_az_sin_el = std::sin(azimuth) * std::sin(elevation);
  // pi at half-wavelength spacing, 2*pi*spacing in general
  const double k = kTwoPi * geom.spacing;
  std::vector<cdouble> a(static_cast<std::size_t>(geom.n_elements()));
  for (int h = 0; h < geom.n_h; ++h) {
    for (int v = 0; v < geom.n_v; ++v) {
      const double phase = k * (static_cast<double>(h) * cos_el +
                                static_cast<double>(v) * sin_az_sin_el);
      a[static_cast<std::size_t>(h * geom.n_v + v)] = std::polar(norm, phase);
    }
  }
  return a;
}

ChannelResponse channel_response(const std::vector<PathComponent>& paths,
                                 const SubcarrierGrid& grid, const ArrayGeometry& geom) {
  grid.validate();
  geom.validate();
  ChannelResponse resp;
  resp.n_subcarriers = grid.n_subcarriers;
  resp.n_elements = geom.n_elements();
  resp.h.assign(static_cast<std::size_t>(resp.n_subcarriers) * static_cast<std::size_t>(resp.n_elements),
                cdouble{0.0, 0.0});
  for (const PathComponent& p : paths) {
    if (p.attenuation < 0.0) throw ContractError("path attenuation must be >= 0");
    if (p.delay < 0.0) throw ContractError("path delay must be >= 0");
    const std::vector<cdouble> a = steering_vector(p.azimuth, p.elevation, geom);
    for (int k = 0; k < grid.n_subcarriers; ++k) {
      const double phase = -kTwoPi * grid.frequency(k) * p.delay + p.phase;
      const cdouble coeff = std::polar(p.attenuation, phase);
      cdouble* dst = resp.h.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(resp.n_elements);
      for (int i = 0; i < resp.n_elements; ++i) dst[i] += coeff * a[static_cast<std::size_t>(i)];
    }
  }
  return resp;
}

Codebook dft_codebook(const ArrayGeometry& geom) {
  geom.validate();
  Codebook cb;
  cb.n_elements = geom.n_elements();
  cb.size = geom.n_elements();
  cb.beams.resize(static_cast<std::size_t>(cb.size) * static_cast<std::size_t>(cb.n_elements));
  const double norm = 1.0 / std::sqrt(static_cast<double>(cb.n_elements));
  for (int p = 0; p < geom.n_h; ++p) {
    for (int q = 0; q < geom.n_v; ++q) {
      const int m = p * geom.n_v + q;
      cdouble* beam = cb.beams.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(cb.n_elements);
      for (int h = 0; h < geom.n_h; ++h) {
        for (int v = 0; v < geom.n_v; ++v) {
          const double phase = -kTwoPi * (static_cast<double>(h * p) / static_cast<double>(geom.n_h) +
                                          static_cast<double>(v * q) / static_cast<double>(geom.n_v));
          beam[h * geom.n_v + v] = std::polar(norm, phase);
        }
      }
    }
  }
  return cb;
}

std::uint64_t Codebook::hash() const {
  Fnv1a h;
  const std::int64_t dims[2] = {size, n_elements};
  h.update(dims, sizeof(dims));
  h.update(beams.data(), beams.size() * sizeof(cdouble));
  return h.digest();
}

double received_power(const ChannelResponse& h, std::span<const cdouble> f) {
  if (static_cast<int>(f.size()) != h.n_elements) {
    throw DimensionError("received_power: beam length does not match channel");
  }
  if (h.n_subcarriers < 1) throw DimensionError("received_power: empty channel");
  double acc = 0.0;
  for (int k = 0; k < h.n_subcarriers; ++k) {
    const cdouble* row = h.h.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(h.n_elements);
    cdouble dot{0.0, 0.0};
    for (int i = 0; i < h.n_elements; ++i) dot += row[i] * f[static_cast<std::size_t>(i)];
    acc += std::norm(dot);
  }
  return acc / static_cast<double>(h.n_subcarriers);
}

int optimal_beam(const ChannelResponse& h, const Codebook& cb) {
  if (cb.size < 1) throw DimensionError("optimal_beam: empty codebook");
  int best = 0;
  double best_power = received_power(h, cb.beam(0));
  for (int m = 1; m < cb.size; ++m) {
    const double p = received_power(h, cb.beam(m));
    if (p > best_power) {
      best_power = p;
      best = m;
    }
  }
  return best;
}

RxSignal simulate_rx(const ChannelResponse& h, std::span<const cdouble> f,
                     std::span<const cdouble> x, double sigma2, std::uint64_t seed) {
  if (sigma2 < 0.0) throw ContractError("simulate_rx: sigma2 must be >= 0");
  if (static_cast<int>(x.size()) != h.n_subcarriers) {
    throw DimensionError("simulate_rx: symbol count does not match subcarriers");
  }
  RxSignal rx;
  rx.transmit.assign(x.begin(), x.end());
  rx.noise_variance = sigma2;
  rx.noise.resize(x.size());
  rx.received.resize(x.size());
  Rng rng(seed);
  const double comp_std = std::sqrt(sigma2 / 2.0);
  for (int k = 0; k < h.n_subcarriers; ++k) {
    const cdouble* row = h.h.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(h.n_elements);
    cdouble dot{0.0, 0.0};
    for (int i = 0; i < h.n_elements; ++i) dot += row[i] * f[static_cast<std::size_t>(i)];
    const cdouble n{comp_std * rng.gaussian(), comp_std * rng.gaussian()};
    rx.noise[static_cast<std::size_t>(k)] = n;
    rx.received[static_cast<std::size_t>(k)] = dot * x[static_cast<std::size_t>(k)] + n;
  }
  return rx;
}

namespace {

Tensor complex_to_tensor(std::span<const cdouble> values, Shape leading) {
  leading.push_back(2);
  std::vector<double> data;
  data.reserve(values.size() * 2);
  for (const cdouble& v : values) {
    data.push_back(v.real());
    data.push_back(v.imag());
  }
  return Tensor(std::move(leading), std::move(data));
}

}  // namespace

Tensor codebook_to_tensor(const Codebook& cb) {
  return complex_to_tensor(cb.beams, Shape{cb.size, cb.n_elements});
}

Tensor channel_to_tensor(const ChannelResponse& h) {
  return complex_to_tensor(h.h, Shape{h.n_subcarriers, h.n_elements});
}

}  // namespace beamcast
