// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "beamcast/channel.hpp"
#include "beamcast/errors.hpp"
#include "beamcast/rng.hpp"
#include "beamcast/tensor_io.hpp"

using namespace beamcast;

namespace {
constexpr double kPi = std::numbers::pi;

double l2_norm(std::span<const cdouble> v) {
  double s = 0.0;
  for (const cdouble& c : v) s += std::norm(c);
  return std::sqrt(s);
}
}  // namespace

TEST_CASE("steering vector basic cases") {
  ArrayGeometry one{1, 1, 0.5};
  auto a = steering_vector(0.3, 1.2, one);
  REQUIRE(a.size() == 1);
  CHECK(a[0].real() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a[0].imag() == doctest::Approx(0.0).epsilon(1e-15));

  // azimuth 0, elevation pi/2: cos(el) = 0 and sin(az) = 0 kill both phase terms
  ArrayGeometry upa{8, 8, 0.5};
  auto b = steering_vector(0.0, kPi / 2.0, upa);
  REQUIRE(b.size() == 64);
  for (const cdouble& v : b) {
    CHECK(v.real() == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
    CHECK(std::abs(v.imag()) < 1e-12);
  }
}

TEST_CASE("steering vector entry against independent evaluation") {
  // azimuth pi/6, elevation pi/3, element (h=1, v=1):
  // phase = pi * (cos(pi/3) + sin(pi/6) sin(pi/3)) = pi (0.5 + 0.5 sin(pi/3))
  ArrayGeometry upa{8, 8, 0.5};
  auto a = steering_vector(kPi / 6.0, kPi / 3.0, upa);
  const double phase = kPi * (0.5 + 0.5 * std::sin(kPi / 3.0));
  const cdouble expect = std::polar(1.0 / 8.0, phase);
  const cdouble got = a[1 * 8 + 1];  // h-major flattening
  CHECK(got.real() == doctest::Approx(expect.real()).epsilon(1e-12));
  CHECK(got.imag() == doctest::Approx(expect.imag()).epsilon(1e-12));

  // full independent re-evaluation of every element
  for (int h = 0; h < 8; ++h) {
    for (int v = 0; v < 8; ++v) {
      const double ph = kPi * (h * std::cos(kPi / 3.0) + v * std::sin(kPi / 6.0) * std::sin(kPi / 3.0));
      const cdouble e = std::polar(1.0 / 8.0, ph);
      CHECK(std::abs(a[h * 8 + v] - e) < 1e-12);
    }
  }
}

TEST_CASE("steering vector has unit norm for 1000 random directions") {
  ArrayGeometry upa{8, 8, 0.5};
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    const double az = rng.uniform(-kPi, kPi);
    const double el = rng.uniform(0.0, kPi);
    CHECK(std::abs(l2_norm(steering_vector(az, el, upa)) - 1.0) < 1e-12);
  }
}

TEST_CASE("channel response examples") {
  ArrayGeometry upa{4, 4, 0.5};
  SubcarrierGrid grid{8, 28e9, 120e3};

  SUBCASE("single path with zero delay and phase reproduces the steering vector") {
    PathComponent p{1.0, 0.0, 0.0, 0.7, 1.1, 0};
    auto resp = channel_response({p}, grid, upa);
    auto a = steering_vector(0.7, 1.1, upa);
    for (int k = 0; k < grid.n_subcarriers; ++k) {
      auto row = resp.at(k);
      for (int i = 0; i < 16; ++i) CHECK(std::abs(row[i] - a[i]) < 1e-14);
    }
  }
  SUBCASE("empty path list gives the zero channel") {
    auto resp = channel_response({}, grid, upa);
    for (const cdouble& v : resp.h) CHECK(v == cdouble{0.0, 0.0});
  }
  SUBCASE("two identical paths with opposite phases cancel") {
    PathComponent p1{1.0, 0.0, 0.0, 0.2, 1.3, 0};
    PathComponent p2 = p1;
    p2.phase = kPi;
    auto resp = channel_response({p1, p2}, grid, upa);
    for (const cdouble& v : resp.h) CHECK(std::abs(v) < 1e-15);
    // with a delay the carrier phase is huge; cancellation then holds to the
    // rounding of (phi + pi) at that magnitude
    p1.delay = p2.delay = 2e-7;
    auto resp2 = channel_response({p1, p2}, grid, upa);
    for (const cdouble& v : resp2.h) CHECK(std::abs(v) < 1e-10);
  }
  SUBCASE("additive in the path list") {
    Rng rng(5);
    std::vector<PathComponent> pa, pb, all;
    for (int i = 0; i < 3; ++i) {
      PathComponent p{rng.uniform(0.1, 1.0), rng.uniform(0.0, 1e-6), rng.uniform(0.0, 2 * kPi),
                      rng.uniform(-kPi, kPi), rng.uniform(0.0, kPi), 0};
      pa.push_back(p);
      all.push_back(p);
    }
    for (int i = 0; i < 2; ++i) {
      PathComponent p{rng.uniform(0.1, 1.0), rng.uniform(0.0, 1e-6), rng.uniform(0.0, 2 * kPi),
                      rng.uniform(-kPi, kPi), rng.uniform(0.0, kPi), 1};
      pb.push_back(p);
      all.push_back(p);
    }
    auto ra = channel_response(pa, grid, upa);
    auto rb = channel_response(pb, grid, upa);
    auto rall = channel_response(all, grid, upa);
    for (std::size_t i = 0; i < rall.h.size(); ++i) {
      CHECK(std::abs(rall.h[i] - (ra.h[i] + rb.h[i])) < 1e-12);
    }
  }
}

TEST_CASE("dft codebook structure") {
  ArrayGeometry upa{8, 8, 0.5};
  Codebook cb = dft_codebook(upa);
  REQUIRE(cb.size == 64);
  REQUIRE(cb.n_elements == 64);

  SUBCASE("beam 0 is the constant column") {
    for (const cdouble& v : cb.beam(0)) {
      CHECK(v.real() == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
      CHECK(std::abs(v.imag()) < 1e-14);
    }
  }
  SUBCASE("unitarity over all pairs") {
    for (int m = 0; m < 64; ++m) {
      for (int n = 0; n < 64; ++n) {
        cdouble dot{0.0, 0.0};
        auto fm = cb.beam(m);
        auto fn = cb.beam(n);
        for (int i = 0; i < 64; ++i) dot += std::conj(fm[i]) * fn[i];
        const double expect = (m == n) ? 1.0 : 0.0;
        CHECK(std::abs(dot - cdouble{expect, 0.0}) < 1e-12);
      }
    }
  }
  SUBCASE("matches an independent Kronecker construction") {
    // oracle: build full n_h- and n_v-point unitary DFT matrices, then kron
    const int nh = 8, nv = 8;
    std::vector<cdouble> fh(nh * nh), fv(nv * nv);
    for (int r = 0; r < nh; ++r) {
      for (int c = 0; c < nh; ++c) {
        fh[r * nh + c] = std::polar(1.0 / std::sqrt(8.0), -2.0 * kPi * r * c / nh);
      }
    }
    for (int r = 0; r < nv; ++r) {
      for (int c = 0; c < nv; ++c) {
        fv[r * nv + c] = std::polar(1.0 / std::sqrt(8.0), -2.0 * kPi * r * c / nv);
      }
    }
    // column m = p*nv + q of (Fh kron Fv); row index h*nv + v
    for (int p = 0; p < nh; ++p) {
      for (int q = 0; q < nv; ++q) {
        auto beam = cb.beam(p * nv + q);
        for (int h = 0; h < nh; ++h) {
          for (int v = 0; v < nv; ++v) {
            const cdouble expect = fh[h * nh + p] * fv[v * nv + q];
            CHECK(std::abs(beam[h * nv + v] - expect) < 1e-13);
          }
        }
      }
    }
  }
}

TEST_CASE("received power examples") {
  ArrayGeometry upa{8, 8, 0.5};
  Codebook cb = dft_codebook(upa);

  SUBCASE("aligned conjugate channel gives unit power") {
    ChannelResponse h;
    h.n_subcarriers = 4;
    h.n_elements = 64;
    for (int k = 0; k < 4; ++k) {
      for (const cdouble& v : cb.beam(17)) h.h.push_back(std::conj(v));
    }
    CHECK(received_power(h, cb.beam(17)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zero channel gives zero power") {
    ChannelResponse h;
    h.n_subcarriers = 4;
    h.n_elements = 64;
    h.h.assign(4 * 64, cdouble{0.0, 0.0});
    CHECK(received_power(h, cb.beam(3)) == 0.0);
  }
  SUBCASE("single subcarrier with h^T f = 3+4j gives 25") {
    ChannelResponse h;
    h.n_subcarriers = 1;
    h.n_elements = 1;
    h.h = {cdouble{3.0, 4.0}};
    std::vector<cdouble> f{cdouble{1.0, 0.0}};
    CHECK(received_power(h, f) == doctest::Approx(25.0).epsilon(1e-14));
  }
  SUBCASE("dimension mismatch is an error") {
    ChannelResponse h;
    h.n_subcarriers = 1;
    h.n_elements = 2;
    h.h = {cdouble{1, 0}, cdouble{0, 1}};
    std::vector<cdouble> f{cdouble{1.0, 0.0}};
    CHECK_THROWS_AS(received_power(h, f), DimensionError);
  }
}

TEST_CASE("optimal beam oracle sweep over every codebook index") {
  ArrayGeometry upa{8, 8, 0.5};
  Codebook cb = dft_codebook(upa);
  for (int m = 0; m < cb.size; ++m) {
    ChannelResponse h;
    h.n_subcarriers = 2;
    h.n_elements = 64;
    for (int k = 0; k < 2; ++k) {
      for (const cdouble& v : cb.beam(m)) h.h.push_back(std::conj(v));
    }
    CHECK(optimal_beam(h, cb) == m);
  }
}

TEST_CASE("optimal beam invariances") {
  ArrayGeometry upa{8, 8, 0.5};
  SubcarrierGrid grid{16, 28e9, 120e3};
  Codebook cb = dft_codebook(upa);
  Rng rng(77);
  std::vector<PathComponent> paths;
  for (int i = 0; i < 4; ++i) {
    paths.push_back({rng.uniform(0.1, 1.0), rng.uniform(0.0, 1e-6), rng.uniform(0.0, 2 * kPi),
                     rng.uniform(-kPi, kPi), rng.uniform(0.0, kPi), 0});
  }
  ChannelResponse h = channel_response(paths, grid, upa);
  const int base = optimal_beam(h, cb);

  SUBCASE("global complex scaling keeps the argmax") {
    const cdouble c{-2.3, 1.9};
    ChannelResponse hs = h;
    for (cdouble& v : hs.h) v *= c;
    CHECK(optimal_beam(hs, cb) == base);
  }
  SUBCASE("all-zero channel breaks ties to index 0") {
    ChannelResponse hz;
    hz.n_subcarriers = 16;
    hz.n_elements = 64;
    hz.h.assign(16 * 64, cdouble{0.0, 0.0});
    CHECK(optimal_beam(hz, cb) == 0);
  }
}

TEST_CASE("simulate_rx examples") {
  ArrayGeometry upa{4, 4, 0.5};
  SubcarrierGrid grid{8, 28e9, 120e3};
  Codebook cb = dft_codebook(upa);
  PathComponent p{0.8, 1e-7, 0.4, 0.3, 1.4, 0};
  ChannelResponse h = channel_response({p}, grid, upa);
  std::vector<cdouble> x(8, cdouble{1.0, 0.0});

  SUBCASE("noiseless reception is exact") {
    RxSignal rx = simulate_rx(h, cb.beam(5), x, 0.0, 9);
    for (int k = 0; k < 8; ++k) {
      cdouble dot{0.0, 0.0};
      auto row = h.at(k);
      auto f = cb.beam(5);
      for (int i = 0; i < 16; ++i) dot += row[i] * f[i];
      CHECK(std::abs(rx.received[static_cast<std::size_t>(k)] - dot) == 0.0);
    }
  }
  SUBCASE("zero channel leaves pure noise") {
    ChannelResponse hz;
    hz.n_subcarriers = 8;
    hz.n_elements = 16;
    hz.h.assign(8 * 16, cdouble{0.0, 0.0});
    RxSignal rx = simulate_rx(hz, cb.beam(0), x, 0.25, 11);
    for (int k = 0; k < 8; ++k) {
      CHECK(rx.received[static_cast<std::size_t>(k)] == rx.noise[static_cast<std::size_t>(k)]);
    }
  }
  SUBCASE("empirical noise variance within 2 percent") {
    ChannelResponse hz;
    hz.n_subcarriers = 100000;
    hz.n_elements = 1;
    hz.h.assign(100000, cdouble{0.0, 0.0});
    std::vector<cdouble> xs(100000, cdouble{1.0, 0.0});
    std::vector<cdouble> f{cdouble{1.0, 0.0}};
    const double sigma2 = 0.7;
    RxSignal rx = simulate_rx(hz, f, xs, sigma2, 13);
    double acc = 0.0;
    for (const cdouble& n : rx.noise) acc += std::norm(n);
    acc /= static_cast<double>(rx.noise.size());
    CHECK(std::abs(acc - sigma2) / sigma2 < 0.02);
  }
  SUBCASE("deterministic for a fixed seed") {
    RxSignal a = simulate_rx(h, cb.beam(5), x, 0.5, 21);
    RxSignal b = simulate_rx(h, cb.beam(5), x, 0.5, 21);
    CHECK(a.received == b.received);
  }
}

TEST_CASE("complex tensor dumps round trip through BCTN") {
  ArrayGeometry upa{4, 2, 0.5};
  Codebook cb = dft_codebook(upa);
  Tensor t = codebook_to_tensor(cb);
  CHECK(t.shape() == Shape{8, 8, 2});
  std::stringstream ss;
  write_bctn(ss, t);
  Tensor u = read_bctn(ss);
  for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(u.data()[i] == t.data()[i]);
  // interleaved (real, imag) layout
  CHECK(t.data()[0] == cb.beams[0].real());
  CHECK(t.data()[1] == cb.beams[0].imag());
}
