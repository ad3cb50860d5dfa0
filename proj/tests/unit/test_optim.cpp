// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "evattr/errors.hpp"
#include "evattr/optim.hpp"

using namespace evattr;

namespace {

double rosenbrock(std::span<const double> x) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("nelder-mead minimizes a quadratic bowl") {
  const auto f = [](std::span<const double> x) {
    return 3.0 * (x[0] - 1.5) * (x[0] - 1.5) + 0.5 * (x[1] + 2.0) * (x[1] + 2.0);
  };
  const std::vector<double> start{0.0, 0.0}, step{0.5, 0.5};
  const auto res = optim::nelder_mead(f, start, step);
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.5).epsilon(1e-4));
  CHECK(res.x[1] == doctest::Approx(-2.0).epsilon(1e-4));
}

TEST_CASE("nelder-mead with bfgs polish handles rosenbrock") {
  const std::vector<double> start{-1.2, 1.0}, step{0.4, 0.4};
  auto res = optim::nelder_mead(rosenbrock, start, step);
  auto polished = optim::bfgs_polish(rosenbrock, res.x);
  CHECK(polished.f < 1e-10);
  CHECK(polished.x[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("nelder-mead tolerates infeasible regions") {
  // +inf to the left of x = 0.3; minimum at the boundary-side quadratic
  const auto f = [](std::span<const double> x) {
    if (x[0] < 0.3) return std::numeric_limits<double>::infinity();
    return (x[0] - 1.0) * (x[0] - 1.0);
  };
  const std::vector<double> start{0.5}, step{0.4};
  const auto res = optim::nelder_mead(f, start, step);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("central gradient and hessian of a known function") {
  const auto f = [](std::span<const double> x) {
    return x[0] * x[0] + 3.0 * x[0] * x[1] + 5.0 * x[1] * x[1];
  };
  const std::vector<double> at{1.0, -2.0};
  const auto g = optim::central_gradient(f, at, 1e-6, 1e-9);
  CHECK(g[0] == doctest::Approx(2.0 * 1.0 + 3.0 * -2.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(3.0 * 1.0 + 10.0 * -2.0).epsilon(1e-6));

  bool ok = false;
  const auto h = optim::central_hessian(f, at, 1e-4, 1e-6, &ok);
  CHECK(ok);
  CHECK(h(0, 0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(h(0, 1) == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(h(1, 1) == doctest::Approx(10.0).epsilon(1e-5));
}

TEST_CASE("bisection finds the certified side of a root") {
  const auto g = [](double x) { return 2.0 - x; };  // root at 2, g(lo) > 0
  const double root = optim::bisect_root(g, 0.0, 5.0, 1e-9);
  CHECK(root == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(g(root) <= 0.0);
  CHECK_THROWS_AS(optim::bisect_root(g, 3.0, 5.0, 1e-9), BracketError);
}

TEST_CASE("golden section minimizes a discontinuous unimodal step") {
  // mimics the penalized bound objective: huge on the left, x on the right
  const auto f = [](double x) { return x < 1.7 ? 1e12 + (1.7 - x) : x; };
  const auto res = optim::golden_section_min(f, 0.0, 10.0, 1e-6);
  CHECK(res.x == doctest::Approx(1.7).epsilon(1e-4));
}
