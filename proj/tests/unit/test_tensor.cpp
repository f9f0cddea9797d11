// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "beamcast/adam.hpp"
#include "beamcast/errors.hpp"
#include "beamcast/ops.hpp"
#include "beamcast/tape.hpp"
#include "beamcast/tensor.hpp"
#include "beamcast/tensor_io.hpp"
#include "support/gradcheck.hpp"

using namespace beamcast;
using testsupport::max_grad_rel_error;

TEST_CASE("tensor invariants") {
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.shape() == Shape{2, 3});
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1.0}), DimensionError);
  CHECK_THROWS_AS(t.value(), ContractError);
  CHECK(Tensor::scalar(4.0).value() == 4.0);

  Tensor bad(Shape{2}, std::vector<double>{1.0, std::nan("")});
  CHECK_FALSE(bad.all_finite());
  CHECK_THROWS_AS(bad.check_finite("test"), NumericalError);
}

TEST_CASE("matmul identity cases") {
  Tensor eye(Shape{3, 3});
  for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0;
  Tensor x(Shape{3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor y = matmul(eye, x);
  for (std::int64_t i = 0; i < 6; ++i) CHECK(y.data()[i] == x.data()[i]);

  Tensor a(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor i2(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor b = matmul(a, i2);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(b.data()[i] == a.data()[i]);

  CHECK_THROWS_AS(matmul(a, x), DimensionError);
}

TEST_CASE("matmul gradient equals ones times B transpose") {
  Rng rng(7);
  Tensor a = Tensor::randn(Shape{3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn(Shape{4, 5}, rng, 1.0, false);
  {
    Tape tape;
    Tensor loss = sum(matmul(a, b));
    tape.backward(loss);
  }
  // d/dA sum(A*B) = ones * B^T
  for (std::int64_t i = 0; i < 3; ++i) {
    for (std::int64_t j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (std::int64_t k = 0; k < 5; ++k) expect += b.data()[j * 5 + k];
      CHECK(a.grad()[i * 4 + j] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  CHECK(max_grad_rel_error([&]() { return sum(matmul(a, b)); }, {a}) < 1e-6);
}

TEST_CASE("batched and broadcast matmul match per-slice products") {
  Rng rng(3);
  Tensor a = Tensor::randn(Shape{2, 3, 4}, rng);
  Tensor b2 = Tensor::randn(Shape{4, 5}, rng);
  Tensor bb = Tensor::randn(Shape{2, 4, 5}, rng);
  Tensor c1 = matmul(a, b2);
  Tensor c2 = matmul(a, bb);
  CHECK(c1.shape() == Shape{2, 3, 5});
  CHECK(c2.shape() == Shape{2, 3, 5});
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 5; ++j) {
        double e1 = 0.0, e2 = 0.0;
        for (int k = 0; k < 4; ++k) {
          e1 += a.data()[(s * 3 + i) * 4 + k] * b2.data()[k * 5 + j];
          e2 += a.data()[(s * 3 + i) * 4 + k] * bb.data()[(s * 4 + k) * 5 + j];
        }
        CHECK(c1.data()[(s * 3 + i) * 5 + j] == doctest::Approx(e1).epsilon(1e-12));
        CHECK(c2.data()[(s * 3 + i) * 5 + j] == doctest::Approx(e2).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("softmax rows basic examples") {
  Tensor x(Shape{1, 4});
  Tensor y = softmax_rows(x);
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(0.25).epsilon(1e-15));

  Tensor big(Shape{1, 2}, std::vector<double>{1000.0, 0.0});
  Tensor yb = softmax_rows(big);
  CHECK(yb.all_finite());
  CHECK(yb.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(yb.data()[1] < 1e-300);
}

TEST_CASE("softmax rows sum to one and are permutation equivariant") {
  Rng rng(11);
  Tensor x = Tensor::randn(Shape{20, 7}, rng, 3.0);
  Tensor y = softmax_rows(x);
  for (int r = 0; r < 20; ++r) {
    double s = 0.0;
    for (int i = 0; i < 7; ++i) s += y.data()[r * 7 + i];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  // permute columns of one row, outputs permute identically
  std::vector<double> row(x.data(), x.data() + 7);
  std::vector<double> perm_row = {row[3], row[0], row[6], row[1], row[5], row[2], row[4]};
  Tensor xp(Shape{1, 7}, perm_row);
  Tensor yp = softmax_rows(xp);
  const int perm[7] = {3, 0, 6, 1, 5, 2, 4};
  for (int i = 0; i < 7; ++i) {
    CHECK(yp.data()[i] == doctest::Approx(y.data()[perm[i]]).epsilon(1e-14));
  }
}

TEST_CASE("softmax jacobian against central differences") {
  Rng rng(5);
  Tensor x = Tensor::randn(Shape{3, 5}, rng, 1.0, true);
  Tensor w = Tensor::randn(Shape{3, 5}, rng);  // random projection to scalar
  auto build = [&]() { return sum(mul(softmax_rows(x), w)); };
  CHECK(max_grad_rel_error(build, {x}) < 1e-6);
}

TEST_CASE("rms_norm examples and scale invariance") {
  // mean(x^2) = 1, so y = 1/sqrt(1 + eps_norm): all ones up to the 1e-6 epsilon
  Tensor x = Tensor::ones(Shape{2, 4});
  Tensor g = Tensor::ones(Shape{4});
  Tensor y = rms_norm(x, g);
  for (std::int64_t i = 0; i < 8; ++i) CHECK(std::abs(y.data()[i] - 1.0) < 1e-6);

  // scale invariance holds to 1e-9 once |x| dwarfs eps_norm
  Rng rng(13);
  Tensor xr = Tensor::randn(Shape{4, 6}, rng, 40.0);
  Tensor gr = Tensor::randn(Shape{6}, rng);
  Tensor y1 = rms_norm(xr, gr);
  Tensor y2 = rms_norm(scale(xr, 37.5), gr);
  for (std::int64_t i = 0; i < y1.numel(); ++i) {
    CHECK(std::abs(y1.data()[i] - y2.data()[i]) < 1e-9);
  }
}

TEST_CASE("rms_norm gradient check") {
  Rng rng(17);
  Tensor x = Tensor::randn(Shape{3, 6}, rng, 1.0, true);
  Tensor g = Tensor::randn(Shape{6}, rng, 1.0, true);
  Tensor w = Tensor::randn(Shape{3, 6}, rng);
  auto build = [&]() { return sum(mul(rms_norm(x, g), w)); };
  CHECK(max_grad_rel_error(build, {x, g}) < 1e-6);
}

TEST_CASE("swiglu zero cases and gradient") {
  Rng rng(19);
  const int d = 4, h = 6;
  Tensor wg = Tensor::randn(Shape{d, h}, rng, 1.0, true);
  Tensor wu = Tensor::randn(Shape{d, h}, rng, 1.0, true);
  Tensor wd = Tensor::randn(Shape{h, d}, rng, 1.0, true);

  Tensor zero_x(Shape{2, d});
  Tensor y0 = swiglu(zero_x, wg, wu, wd);
  for (std::int64_t i = 0; i < y0.numel(); ++i) CHECK(y0.data()[i] == 0.0);

  Tensor x = Tensor::randn(Shape{2, d}, rng, 1.0, true);
  Tensor zero_gate(Shape{d, h});
  Tensor y1 = swiglu(x, zero_gate, wu, wd);
  for (std::int64_t i = 0; i < y1.numel(); ++i) CHECK(y1.data()[i] == 0.0);

  Tensor w = Tensor::randn(Shape{2, d}, rng);
  auto build = [&]() { return sum(mul(swiglu(x, wg, wu, wd), w)); };
  CHECK(max_grad_rel_error(build, {x, wg, wu, wd}) < 1e-6);

  Tensor bad(Shape{d + 1, h});
  CHECK_THROWS_AS(swiglu(x, bad, wu, wd), DimensionError);
}

TEST_CASE("backward populates gradients and enforces scalar loss") {
  Tensor x(Shape{3}, std::vector<double>{1.0, -2.0, 3.0}, true);
  {
    Tape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
  }
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);

  x.zero_grad();
  {
    Tape tape;
    Tensor loss = sum(mul(x, x));
    tape.backward(loss);
  }
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 2.0 * x.data()[i]);

  {
    Tape tape;
    Tensor y = mul(x, x);  // non-scalar
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
  {
    Tape tape;
    Tensor off_tape = Tensor::scalar(1.0);
    CHECK_THROWS_AS(tape.backward(off_tape), ContractError);
  }
}

TEST_CASE("fan-out accumulates gradients additively") {
  Tensor x(Shape{2}, std::vector<double>{2.0, 5.0}, true);
  {
    Tape tape;
    Tensor a = scale(x, 3.0);
    Tensor b = mul(x, x);
    Tensor loss = sum(add(a, b));  // d/dx = 3 + 2x
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == doctest::Approx(3.0 + 4.0).epsilon(1e-15));
  CHECK(x.grad()[1] == doctest::Approx(3.0 + 10.0).epsilon(1e-15));
}

TEST_CASE("unreachable tensors keep zero gradient") {
  Tensor x(Shape{2}, std::vector<double>{1.0, 1.0}, true);
  Tensor orphan(Shape{2}, std::vector<double>{1.0, 1.0}, true);
  {
    Tape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
  }
  CHECK(orphan.grad()[0] == 0.0);
  CHECK(orphan.grad()[1] == 0.0);
}

TEST_CASE("elementwise and shape op gradients") {
  Rng rng(23);
  Tensor x = Tensor::randn(Shape{2, 3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn(Shape{4}, rng, 1.0, true);
  Tensor w = Tensor::randn(Shape{2, 3, 4}, rng);

  CHECK(max_grad_rel_error([&]() { return sum(mul(add(x, b), w)); }, {x, b}) < 1e-6);
  CHECK(max_grad_rel_error([&]() { return sum(mul(mul(x, b), w)); }, {x, b}) < 1e-6);
  CHECK(max_grad_rel_error([&]() { return sum(mul(sigmoid(x), w)); }, {x}) < 1e-6);
  CHECK(max_grad_rel_error([&]() { return sum(mul(swish(x), w)); }, {x}) < 1e-6);
  CHECK(max_grad_rel_error([&]() { return sum(mul(scale(x, -1.7), w)); }, {x}) < 1e-6);
  CHECK(max_grad_rel_error([&]() { return sum(mul(reshape(x, Shape{6, 4}), reshape(w, Shape{6, 4}))); }, {x}) < 1e-6);
  CHECK(max_grad_rel_error([&]() {
          return sum(mul(permute(x, {2, 0, 1}), Tensor::ones(Shape{4, 2, 3})));
        }, {x}) < 1e-6);
  CHECK(max_grad_rel_error([&]() { return sum(mul(mean_axis(x, 1), Tensor::ones(Shape{2, 4}))); }, {x}) < 1e-6);

  Tensor pos = Tensor::randn(Shape{3, 4}, rng, 1.0, true);
  // keep values away from the clamp floor so the derivative is smooth
  for (std::int64_t i = 0; i < pos.numel(); ++i) pos.data()[i] = 0.5 + std::abs(pos.data()[i]);
  CHECK(max_grad_rel_error([&]() { return sum(log_clamped(pos, 1e-12)); }, {pos}) < 1e-6);

  Tensor r = Tensor::randn(Shape{3, 4}, rng, 1.0, true);
  // keep away from the relu kink
  for (std::int64_t i = 0; i < r.numel(); ++i) {
    if (std::abs(r.data()[i]) < 0.1) r.data()[i] = 0.5;
  }
  Tensor wr = Tensor::randn(Shape{3, 4}, rng);
  CHECK(max_grad_rel_error([&]() { return sum(mul(relu(r), wr)); }, {r}) < 1e-6);
}

TEST_CASE("concat forward and gradient") {
  Rng rng(29);
  Tensor a = Tensor::randn(Shape{2, 3}, rng, 1.0, true);
  Tensor b = Tensor::randn(Shape{4, 3}, rng, 1.0, true);
  Tensor c = concat(a, b, 0);
  CHECK(c.shape() == Shape{6, 3});
  for (int i = 0; i < 6; ++i) CHECK(c.data()[i] == a.data()[i]);
  for (int i = 0; i < 12; ++i) CHECK(c.data()[6 + i] == b.data()[i]);

  Tensor w = Tensor::randn(Shape{6, 3}, rng);
  CHECK(max_grad_rel_error([&]() { return sum(mul(concat(a, b, 0), w)); }, {a, b}) < 1e-6);

  Tensor a2 = Tensor::randn(Shape{2, 2}, rng);
  CHECK_THROWS_AS(concat(a, a2, 0), DimensionError);
}

TEST_CASE("matmul_nt and linear gradients") {
  Rng rng(31);
  Tensor x = Tensor::randn(Shape{2, 5, 3}, rng, 1.0, true);
  Tensor w = Tensor::randn(Shape{4, 3}, rng, 1.0, true);
  Tensor m = Tensor::randn(Shape{2, 5, 4}, rng);
  CHECK(max_grad_rel_error([&]() { return sum(mul(linear(x, w), m)); }, {x, w}) < 1e-6);

  Tensor bt = Tensor::randn(Shape{2, 4, 3}, rng, 1.0, true);
  CHECK(max_grad_rel_error([&]() { return sum(mul(matmul_nt(x, bt), m)); }, {x, bt}) < 1e-6);
}

TEST_CASE("adam examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p(Shape{3}, std::vector<double>{1.0, 2.0, 3.0}, true);
    std::vector<Tensor> params{p};
    AdamState st;
    st.learning_rate = 0.1;
    adam_step(params, st);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == 2.0);
    CHECK(p.data()[2] == 3.0);
    CHECK(st.step == 1);
  }
  SUBCASE("zero learning rate is a no-op") {
    Tensor p(Shape{2}, std::vector<double>{1.0, -1.0}, true);
    p.grad()[0] = 0.5;
    p.grad()[1] = -2.0;
    std::vector<Tensor> params{p};
    AdamState st;
    st.learning_rate = 0.0;
    adam_step(params, st);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -1.0);
    // gradients zeroed afterward
    CHECK(p.grad()[0] == 0.0);
    CHECK(p.grad()[1] == 0.0);
  }
  SUBCASE("hand-computed single step") {
    // p=1, g=1, lr=0.1, defaults: expected p ~= 0.9000000316
    Tensor p(Shape{1}, std::vector<double>{1.0}, true);
    p.grad()[0] = 1.0;
    std::vector<Tensor> params{p};
    AdamState st;
    st.learning_rate = 0.1;
    adam_step(params, st);
    CHECK(p.data()[0] == doctest::Approx(0.9000000316).epsilon(1e-9));
  }
  SUBCASE("missing gradient is a contract error") {
    Tensor p(Shape{2});  // requires_grad = false
    std::vector<Tensor> params{p};
    AdamState st;
    CHECK_THROWS_AS(adam_step(params, st), ContractError);
  }
}

TEST_CASE("deterministic across repeated runs with the same seed") {
  auto run = []() {
    Rng rng(12345);
    Tensor a = Tensor::randn(Shape{8, 8}, rng, 1.0, true);
    Tensor b = Tensor::randn(Shape{8, 8}, rng);
    Tensor loss;
    {
      Tape tape;
      loss = sum(mul(softmax_rows(matmul(a, b)), b));
      tape.backward(loss);
    }
    std::vector<double> out(a.grad().begin(), a.grad().end());
    out.push_back(loss.value());
    return out;
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(r1 == r2);
}

TEST_CASE("BCTN round trip and corruption detection") {
  Rng rng(37);
  Tensor t = Tensor::randn(Shape{3, 4, 5}, rng, 2.0);
  std::stringstream ss;
  write_bctn(ss, t);
  Tensor u = read_bctn(ss);
  CHECK(u.shape() == t.shape());
  for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(u.data()[i] == t.data()[i]);

  std::stringstream bad("NOTBCTNxxxxxxxxxxxxxxxx");
  CHECK_THROWS_AS(read_bctn(bad), DataIntegrityError);

  std::stringstream trunc;
  write_bctn(trunc, t);
  std::string s = trunc.str();
  s.resize(s.size() / 2);
  std::stringstream half(s);
  CHECK_THROWS_AS(read_bctn(half), DataIntegrityError);
}

TEST_CASE("rope rotation basics and gradient") {
  // position 0 is the identity
  Rng rng(43);
  Tensor x = Tensor::randn(Shape{1, 6}, rng);
  std::vector<std::int64_t> zero_pos{0};
  Tensor y = rope_apply(x, 10000.0, zero_pos);
  for (std::int64_t i = 0; i < 6; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-15));

  // pair (1,0) at position p, first pair: angle is exactly p
  const double p = 0.7;
  Tensor unit(Shape{1, 2}, std::vector<double>{1.0, 0.0});
  std::vector<std::int64_t> pos{7};
  Tensor rot(Shape{1, 2}, std::vector<double>{1.0, 0.0});
  Tensor yr = rope_apply(rot, 10000.0, pos);
  CHECK(yr.data()[0] == doctest::Approx(std::cos(7.0)).epsilon(1e-12));
  CHECK(yr.data()[1] == doctest::Approx(std::sin(7.0)).epsilon(1e-12));
  (void)p;
  (void)unit;

  // norms preserved
  Tensor xs = Tensor::randn(Shape{2, 5, 8}, rng);
  Tensor ys = rope_apply(xs, 10000.0);
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 5; ++t) {
      double n_in = 0.0, n_out = 0.0;
      for (int i = 0; i < 8; ++i) {
        n_in += xs.data()[(s * 5 + t) * 8 + i] * xs.data()[(s * 5 + t) * 8 + i];
        n_out += ys.data()[(s * 5 + t) * 8 + i] * ys.data()[(s * 5 + t) * 8 + i];
      }
      CHECK(std::abs(std::sqrt(n_in) - std::sqrt(n_out)) < 1e-12);
    }
  }

  Tensor xg = Tensor::randn(Shape{3, 4}, rng, 1.0, true);
  Tensor w = Tensor::randn(Shape{3, 4}, rng);
  CHECK(max_grad_rel_error([&]() { return sum(mul(rope_apply(xg, 10000.0), w)); }, {xg}) < 1e-6);

  Tensor odd(Shape{2, 3});
  CHECK_THROWS_AS(rope_apply(odd, 10000.0), ConfigError);
}

TEST_CASE("embedding lookup and gradient scatter") {
  Rng rng(47);
  Tensor table = Tensor::randn(Shape{5, 3}, rng, 1.0, true);
  std::vector<int> ids{1, 3, 1};
  Tensor e = embedding(table, ids);
  CHECK(e.shape() == Shape{3, 3});
  for (int j = 0; j < 3; ++j) {
    CHECK(e.data()[0 * 3 + j] == table.data()[1 * 3 + j]);
    CHECK(e.data()[1 * 3 + j] == table.data()[3 * 3 + j]);
    CHECK(e.data()[2 * 3 + j] == table.data()[1 * 3 + j]);
  }
  Tensor w = Tensor::randn(Shape{3, 3}, rng);
  CHECK(max_grad_rel_error([&]() { return sum(mul(embedding(table, ids), w)); }, {table}) < 1e-6);

  std::vector<int> bad{5};
  CHECK_THROWS_AS(embedding(table, bad), ContractError);
}

TEST_CASE("conv2d matches direct computation and gradient check") {
  Rng rng(53);
  Tensor x = Tensor::randn(Shape{2, 2, 5, 5}, rng, 1.0, true);
  Tensor w = Tensor::randn(Shape{3, 2, 3, 3}, rng, 1.0, true);
  Tensor b = Tensor::randn(Shape{3}, rng, 1.0, true);
  Tensor y = conv2d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{2, 3, 3, 3});

  // independent direct evaluation of one output element
  const int ib = 1, oc = 2, oy = 1, ox = 2;
  double expect = b.data()[oc];
  for (int ic = 0; ic < 2; ++ic) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int iy = oy * 2 - 1 + ky;
        const int ix = ox * 2 - 1 + kx;
        if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
        expect += x.data()[((ib * 2 + ic) * 5 + iy) * 5 + ix] *
                  w.data()[((oc * 2 + ic) * 3 + ky) * 3 + kx];
      }
    }
  }
  CHECK(y.data()[((ib * 3 + oc) * 3 + oy) * 3 + ox] == doctest::Approx(expect).epsilon(1e-12));

  Tensor m = Tensor::randn(Shape{2, 3, 3, 3}, rng);
  CHECK(max_grad_rel_error([&]() { return sum(mul(conv2d(x, w, b, 2, 1), m)); }, {x, w, b}) < 1e-6);
}

TEST_CASE("batch_norm statistics and gradient check") {
  Rng rng(59);
  Tensor x = Tensor::randn(Shape{4, 3, 2, 2}, rng, 2.0, true);
  Tensor gamma = Tensor::ones(Shape{3}, true);
  Tensor beta = Tensor::zeros(Shape{3}, true);
  Tensor rm = Tensor::zeros(Shape{3});
  Tensor rv = Tensor::ones(Shape{3});
  Tensor y = batch_norm(x, gamma, beta, rm, rv, 0.1, 1e-5, true);
  // per-channel output mean ~ 0, variance ~ 1
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (int b = 0; b < 4; ++b) {
      for (int s = 0; s < 4; ++s) mean += y.data()[(b * 3 + c) * 4 + s];
    }
    mean /= 16.0;
    for (int b = 0; b < 4; ++b) {
      for (int s = 0; s < 4; ++s) {
        const double d = y.data()[(b * 3 + c) * 4 + s] - mean;
        var += d * d;
      }
    }
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }

  Tensor m = Tensor::randn(Shape{4, 3, 2, 2}, rng);
  auto build = [&]() {
    Tensor rm2 = Tensor::zeros(Shape{3});
    Tensor rv2 = Tensor::ones(Shape{3});
    return sum(mul(batch_norm(x, gamma, beta, rm2, rv2, 0.1, 1e-5, true), m));
  };
  CHECK(max_grad_rel_error(build, {x, gamma, beta}) < 1e-6);

  // eval mode: affine via running stats, no stat mutation
  Tensor before_rm(Shape{3}, std::vector<double>(rm.data(), rm.data() + 3));
  Tensor ye = batch_norm(x, gamma, beta, rm, rv, 0.1, 1e-5, false);
  for (int c = 0; c < 3; ++c) CHECK(rm.data()[c] == before_rm.data()[c]);
  CHECK(ye.all_finite());
}

TEST_CASE("dropout keeps scale and masks gradients") {
  Rng rng(41);
  Tensor x = Tensor::ones(Shape{1000});
  Tensor y = dropout(x, 0.25, rng);
  double mean = 0.0;
  std::int64_t zeros = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    mean += y.data()[i];
    if (y.data()[i] == 0.0) ++zeros;
  }
  mean /= static_cast<double>(y.numel());
  CHECK(mean == doctest::Approx(1.0).epsilon(0.1));
  CHECK(zeros > 150);
  CHECK(zeros < 350);

  Tensor xg = Tensor::randn(Shape{4, 6}, rng, 1.0, true);
  auto build = [&]() {
    Rng drop_rng(99);  // same mask on every evaluation
    return sum(dropout(xg, 0.5, drop_rng));
  };
  CHECK(max_grad_rel_error(build, {xg}) < 1e-6);
}
