// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace evattr::optim {

/// Scalar objective over a parameter vector. Infeasible points may
/// return +inf; all routines here treat +inf as "worse than anything".
using Objective = std::function<double(std::span<const double>)>;

struct MinimizeResult {
  std::vector<double> x;
  double f{};
  int iterations{};
  int evaluations{};
  bool converged{false};
};

struct NelderMeadOptions {
  int max_iterations{4000};
  double f_tolerance{1e-10};  // relative spread of simplex values
  double x_tolerance{1e-7};   // relative spread of simplex vertices
};

/// Derivative-free simplex minimization. `step` gives the initial simplex
/// edge length per coordinate. Vertices at +inf are tolerated as long as
/// the start itself is finite.
MinimizeResult nelder_mead(const Objective& f, std::span<const double> start,
                           std::span<const double> step,
                           const NelderMeadOptions& opts = {});

struct PolishOptions {
  int max_iterations{200};
  double grad_tolerance{1e-7};   // on the max-norm of the gradient, scaled by max(1,|f|)
  double gradient_rel_step{1e-6};
  double gradient_abs_floor{1e-9};
};

/// Quasi-Newton (BFGS) refinement with central-difference gradients and
/// backtracking line search. Meant to tighten a simplex solution; returns
/// the start unchanged if no improving step exists.
MinimizeResult bfgs_polish(const Objective& f, std::span<const double> start,
                           const PolishOptions& opts = {});

/// Central-difference gradient with per-coordinate relative steps.
std::vector<double> central_gradient(const Objective& f, std::span<const double> x,
                                     double rel_step, double abs_floor);

/// Central-difference Hessian. Steps are halved (up to three times) if a
/// probe point evaluates non-finite; `ok` reports whether all entries
/// ended up finite.
Eigen::MatrixXd central_hessian(const Objective& f, std::span<const double> x,
                                double rel_step, double abs_floor, bool* ok = nullptr);

/// Bisection for g(x) = 0 on [lo, hi] with g(lo) > 0 >= g(hi); returns the
/// certified hi end of the final bracket (g <= 0 there).
double bisect_root(const std::function<double(double)>& g, double lo, double hi,
                   double x_tol, int max_iterations = 200);

struct ScalarMinResult {
  double x{};
  double f{};
};

/// Golden-section search for a (possibly discontinuous) unimodal scalar
/// function on [lo, hi].
ScalarMinResult golden_section_min(const std::function<double(double)>& f, double lo,
                                   double hi, double x_tol, int max_iterations = 400);

}  // namespace evattr::optim
