// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMCAST_CHANNEL_HPP
#define BEAMCAST_CHANNEL_HPP

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "beamcast/tensor.hpp"

namespace beamcast {

inline constexpr double kSpeedOfLight = 299792458.0;

using cdouble = std::complex<double>;

// Uniform planar array at the base station, n_h x n_v elements,
// inter-element spacing in wavelengths (0.5 unless configured otherwise).
struct ArrayGeometry {
  int n_h = 8;
  int n_v = 8;
  double spacing = 0.5;

  int n_elements() const { return n_h * n_v; }
  void validate() const;
};

// One multipath component: amplitude, propagation delay, extra phase shift,
// and the departure direction at the array. `azimuth` is the angle in the
// x-y plane; `elevation` is the polar angle measured from the vertical axis.
struct PathComponent {
  double attenuation = 0.0;  // >= 0
  double delay = 0.0;        // seconds, >= 0
  double phase = 0.0;        // radians in [0, 2*pi)
  double azimuth = 0.0;
  double elevation = 0.0;
  int bounces = 0;  // 0 = line of sight
};

// OFDM grid; subcarrier k sits at f_c + (k - N_s/2) * spacing.
struct SubcarrierGrid {
  int n_subcarriers = 16;
  double center_frequency = 28e9;  // Hz
  double spacing = 120e3;          // Hz

  double frequency(int k) const {
    return center_frequency +
           (static_cast<double>(k) - static_cast<double>(n_subcarriers) / 2.0) * spacing;
  }
  void validate() const;
};

// Per-subcarrier complex channel vectors h[k], each of length N_b.
struct ChannelResponse {
  int n_subcarriers = 0;
  int n_elements = 0;
  std::vector<cdouble> h;  // [n_subcarriers][n_elements], row-major

  std::span<const cdouble> at(int k) const {
    return {h.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n_elements),
            static_cast<std::size_t>(n_elements)};
  }
};

// M unit-norm beamforming vectors of length N_b.
struct Codebook {
  int n_elements = 0;
  int size = 0;  // M
  std::vector<cdouble> beams;  // [size][n_elements], row-major

  std::span<const cdouble> beam(int m) const {
    return {beams.data() + static_cast<std::size_t>(m) * static_cast<std::size_t>(n_elements),
            static_cast<std::size_t>(n_elements)};
  }
  // FNV-1a over dimensions and raw coefficient bytes; guards label provenance.
  std::uint64_t hash() const;
};

// One synthesized reception: y[k] = h^T[k] f x[k] + n[k].
struct RxSignal {
  std::vector<cdouble> transmit;
  double noise_variance = 0.0;
  std::vector<cdouble> noise;
  std::vector<cdouble> received;
};

// Array response for a departure direction; unit L2 norm, element (h, v)
// flattened h-major at index h * n_v + v.
std::vector<cdouble> steering_vector(double azimuth, double elevation, const ArrayGeometry& geom);

// h[k] = sum_l alpha_l * exp(-j 2 pi f_k tau_l + j psi_l) * a(theta_l, phi_l).
ChannelResponse channel_response(const std::vector<PathComponent>& paths,
                                 const SubcarrierGrid& grid, const ArrayGeometry& geom);

// Kronecker product of the n_h- and n_v-point unitary DFT matrices;
// beam m = p * n_v + q. M = n_h * n_v.
Codebook dft_codebook(const ArrayGeometry& geom);

// Subcarrier-averaged |h^T[k] f|^2 (plain transpose, as in the system model).
double received_power(const ChannelResponse& h, std::span<const cdouble> f);

// Index of the power-maximizing codebook beam; ties break to the lowest index.
int optimal_beam(const ChannelResponse& h, const Codebook& cb);

// Applies beam f to the channel and adds circularly-symmetric complex
// Gaussian noise of variance sigma2, deterministically seeded.
RxSignal simulate_rx(const ChannelResponse& h, std::span<const cdouble> f,
                     std::span<const cdouble> x, double sigma2, std::uint64_t seed);

// Complex data as a BCTN-compatible tensor with a trailing (real, imag) axis.
Tensor codebook_to_tensor(const Codebook& cb);
Tensor channel_to_tensor(const ChannelResponse& h);

}  // namespace beamcast

#endif  // BEAMCAST_CHANNEL_HPP
