#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fairtrans/params.hpp"
#include "fairtrans/rng.hpp"
#include "fairtrans/tensor.hpp"

using namespace fairtrans;

namespace {

std::vector<double> to_vec(const Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

}  // namespace

TEST_CASE("matmul identity leaves the operand unchanged") {
  Tensor eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(7);
  std::vector<double> mv(9);
  for (double& v : mv) v = rng.normal();
  Tensor m = Tensor::from_values({3, 3}, mv);
  Tensor out = matmul(eye, m);
  auto ov = to_vec(out);
  for (size_t i = 0; i < 9; ++i) CHECK(ov[i] == doctest::Approx(mv[i]).epsilon(1e-15));
}

TEST_CASE("matmul numeric 2x2") {
  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_values({2, 2}, {5, 6, 7, 8});
  auto c = to_vec(matmul(a, b));
  CHECK(c == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("logistic of zero is one half") {
  CHECK(logistic(Tensor::scalar(0.0)).value() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("l2 normalize of a 3-4-5 triangle") {
  Tensor v = Tensor::from_values({2}, {3, 4});
  auto n = to_vec(l2_normalize_rows(v));
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("l2 normalize output has unit norm for norms above 1e-8") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(6);
    for (double& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-7.5, 2.0));
    Tensor t = Tensor::from_values({2, 3}, v);
    double norm0 = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    double norm1 = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5]);
    if (norm0 <= 1e-8 || norm1 <= 1e-8) continue;
    auto y = to_vec(l2_normalize_rows(t));
    double n0 = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
    double n1 = std::sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5]);
    CHECK(std::fabs(n0 - 1.0) < 1e-9);
    CHECK(std::fabs(n1 - 1.0) < 1e-9);
  }
}

TEST_CASE("l2 normalize rejects a zero-norm row") {
  Tensor z = Tensor::zeros({3});
  CHECK_THROWS_AS(l2_normalize_rows(z), std::domain_error);
}

TEST_CASE("log rejects non-positive input instead of producing NaN") {
  CHECK_THROWS_AS(log(Tensor::scalar(0.0)), std::domain_error);
  CHECK_THROWS_AS(log(Tensor::scalar(-1.0)), std::domain_error);
}

TEST_CASE("shape mismatch errors name the op and both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  try {
    matmul(a, b);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("(2x3)") != std::string::npos);
    CHECK(msg.find("(4x5)") != std::string::npos);
  }
}

TEST_CASE("backward of sum of squares") {
  Tensor x = Tensor::from_values({3}, {1, 2, 3}, true);
  Tensor loss = sum(mul(x, x));
  backward(loss);
  auto g = x.grad();
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(g[2] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("backward of log-logistic at zero") {
  // d/dw log(sigma(w)) = 1 - sigma(w) = 0.5 at w = 0
  Tensor w = Tensor::scalar(0.0);
  w.set_requires_grad(true);
  Tensor loss = log(logistic(w));
  backward(loss);
  CHECK(w.grad()[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
  Tensor x = Tensor::from_values({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), std::invalid_argument);
}

TEST_CASE("repeated backward accumulates; zero_grad resets") {
  Tensor x = Tensor::from_values({2}, {1.5, -2.0}, true);
  Tensor loss = sum(mul(x, x));
  backward(loss);
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(x.grad()[1] == doctest::Approx(-8.0).epsilon(1e-15));
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(23);
  std::vector<double> xv(6);
  for (double& v : xv) v = rng.normal();
  const double a = 1.7, b = -0.6;

  auto grads_of = [&](bool combined) {
    Tensor x = Tensor::from_values({2, 3}, xv, true);
    Tensor l1 = mean(mul(x, x));
    Tensor l2 = sum(tanh(x));
    if (combined) {
      backward(add(scale(l1, a), scale(l2, b)));
      return std::vector<double>(x.grad().begin(), x.grad().end());
    }
    backward(l1);
    std::vector<double> g1(x.grad().begin(), x.grad().end());
    x.zero_grad();
    backward(l2);
    std::vector<double> g2(x.grad().begin(), x.grad().end());
    std::vector<double> out(6);
    for (size_t i = 0; i < 6; ++i) out[i] = a * g1[i] + b * g2[i];
    return out;
  };

  auto gc = grads_of(true);
  auto gs = grads_of(false);
  for (size_t i = 0; i < 6; ++i) CHECK(std::fabs(gc[i] - gs[i]) < 1e-12);
}

TEST_CASE("identical seeds give bitwise-identical values and gradients") {
  auto run = [] {
    Rng rng(99);
    ParameterSet ps;
    Tensor& w = ps.create("w", {4, 3}, 0.3, rng);
    Tensor x = Tensor::from_values({2, 4}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8});
    Tensor loss = mean(tanh(matmul(x, w)));
    backward(loss);
    std::vector<double> out(w.values().begin(), w.values().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.push_back(loss.value());
    return out;
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(r1 == r2);  // exact bit equality
}

TEST_CASE("broadcast add of a bias row") {
  Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor b = Tensor::from_values({3}, {10, 20, 30}, true);
  Tensor y = add(x, b);
  CHECK(to_vec(y) == std::vector<double>{11, 22, 33, 14, 25, 36});
  backward(mean(y));
  CHECK(b.grad()[0] == doctest::Approx(2.0 / 6.0));
  CHECK(x.grad()[0] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("log_sum_exp_rows is stable for huge logits") {
  Tensor t = Tensor::from_values({1, 3}, {1000.0, 0.0, -1000.0});
  double v = to_vec(log_sum_exp_rows(t))[0];
  CHECK(v == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("concat along both axes round-trips gradients") {
  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
  Tensor b = Tensor::from_values({2, 1}, {9, 8}, true);
  Tensor c = concat(a, b, 1);
  CHECK(c.shape() == std::vector<size_t>{2, 3});
  CHECK(to_vec(c) == std::vector<double>{1, 2, 9, 3, 4, 8});
  backward(sum(c));
  CHECK(a.grad()[3] == 1.0);
  CHECK(b.grad()[1] == 1.0);

  Tensor d = concat(Tensor::from_values({2}, {1, 2}), Tensor::from_values({3}, {3, 4, 5}), 0);
  CHECK(to_vec(d) == std::vector<double>{1, 2, 3, 4, 5});
}

TEST_CASE("dot, clamp, relu, abs gradients behave at their flats") {
  Tensor x = Tensor::from_values({3}, {-2.0, 0.5, 3.0}, true);
  backward(sum(clamp(x, 0.0, 1.0)));
  CHECK(x.grad()[0] == 0.0);  // below the clamp window
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 0.0);  // above

  Tensor u = Tensor::from_values({2}, {1.0, -1.0}, true);
  Tensor v = Tensor::from_values({2}, {3.0, 4.0});
  backward(dot(u, v));
  CHECK(u.grad()[0] == 3.0);
  CHECK(u.grad()[1] == 4.0);
}

TEST_CASE("arccos and cosine invert each other in value and slope") {
  Tensor x = Tensor::from_values({1}, {0.37}, true);
  Tensor y = cosine(arccos(x));
  CHECK(y.value() == doctest::Approx(0.37).epsilon(1e-14));
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(arccos(Tensor::scalar(1.5)), std::domain_error);
}

TEST_CASE("detach blocks gradient flow") {
  Tensor x = Tensor::from_values({2}, {1, 2}, true);
  Tensor d = mul(x, x).detach();
  CHECK_FALSE(d.requires_grad());
  Tensor loss = sum(d);
  backward(loss);  // nothing reachable requires grad; must not throw
  CHECK_FALSE(x.has_grad());
}
