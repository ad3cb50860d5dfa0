// SPDX-License-Identifier: Apache-2.0
#include "evattr/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evattr/errors.hpp"

namespace evattr::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double eval(const Objective& f, const std::vector<double>& x, int& count) {
  ++count;
  const double v = f(x);
  return std::isnan(v) ? kInf : v;
}

}  // namespace

MinimizeResult nelder_mead(const Objective& f, std::span<const double> start,
                           std::span<const double> step, const NelderMeadOptions& opts) {
  const std::size_t n = start.size();
  if (n == 0 || step.size() != n) {
    throw InvalidInputError("nelder_mead: start and step must be non-empty and match");
  }
  int evals = 0;

  std::vector<std::vector<double>> verts(n + 1, std::vector<double>(start.begin(), start.end()));
  std::vector<double> fv(n + 1);
  fv[0] = eval(f, verts[0], evals);
  for (std::size_t i = 0; i < n; ++i) {
    auto& v = verts[i + 1];
    v[i] += step[i];
    double fi = eval(f, v, evals);
    if (!std::isfinite(fi)) {  // try the opposite direction, then shrink toward start
      v[i] = start[i] - step[i];
      fi = eval(f, v, evals);
      double scale = 0.5;
      while (!std::isfinite(fi) && scale > 1.0 / 64.0) {
        v[i] = start[i] + scale * step[i];
        fi = eval(f, v, evals);
        scale *= 0.5;
      }
    }
    fv[i + 1] = fi;
  }

  std::vector<std::size_t> order(n + 1);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto sort_order = [&] {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };

  std::vector<double> centroid(n), probe(n);
  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iterations; ++iter) {
    sort_order();
    const double best = fv[order[0]];
    const double worst = fv[order[n]];
    if (std::isfinite(worst) &&
        worst - best <= opts.f_tolerance * (1.0 + std::abs(best))) {
      // equal values on a straddling simplex are not convergence
      bool tight = true;
      const auto& xb = verts[order[0]];
      for (std::size_t i = 1; i <= n && tight; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (std::abs(verts[order[i]][j] - xb[j]) >
              opts.x_tolerance * (1.0 + std::abs(xb[j]))) {
            tight = false;
            break;
          }
        }
      }
      if (tight) {
        converged = true;
        break;
      }
    }

    for (std::size_t j = 0; j < n; ++j) {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += verts[order[i]][j];
      centroid[j] = c / static_cast<double>(n);
    }
    const auto& xw = verts[order[n]];

    auto blend = [&](double t) {
      for (std::size_t j = 0; j < n; ++j) probe[j] = centroid[j] + t * (centroid[j] - xw[j]);
    };

    blend(1.0);  // reflect
    const double fr = eval(f, probe, evals);
    if (fr < fv[order[0]]) {
      std::vector<double> reflected = probe;
      blend(2.0);  // expand
      const double fe = eval(f, probe, evals);
      if (fe < fr) {
        verts[order[n]] = probe;
        fv[order[n]] = fe;
      } else {
        verts[order[n]] = std::move(reflected);
        fv[order[n]] = fr;
      }
      continue;
    }
    if (fr < fv[order[n - 1]]) {
      verts[order[n]] = probe;
      fv[order[n]] = fr;
      continue;
    }
    blend(fr < fv[order[n]] ? 0.5 : -0.5);  // outside / inside contraction
    const double fc = eval(f, probe, evals);
    if (fc < std::min(fr, fv[order[n]])) {
      verts[order[n]] = probe;
      fv[order[n]] = fc;
      continue;
    }
    // shrink toward the best vertex
    const auto xb = verts[order[0]];
    for (std::size_t i = 1; i <= n; ++i) {
      auto& v = verts[order[i]];
      for (std::size_t j = 0; j < n; ++j) v[j] = xb[j] + 0.5 * (v[j] - xb[j]);
      fv[order[i]] = eval(f, v, evals);
    }
  }

  sort_order();
  MinimizeResult out;
  out.x = verts[order[0]];
  out.f = fv[order[0]];
  out.iterations = iter;
  out.evaluations = evals;
  out.converged = converged && std::isfinite(out.f);
  return out;
}

std::vector<double> central_gradient(const Objective& f, std::span<const double> x,
                                     double rel_step, double abs_floor) {
  const std::size_t n = x.size();
  std::vector<double> g(n), probe(x.begin(), x.end());
  int evals = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double h = std::max(rel_step * std::abs(x[i]), abs_floor);
    double fp = kInf, fm = kInf;
    for (int attempt = 0; attempt < 4; ++attempt) {
      probe[i] = x[i] + h;
      fp = eval(f, probe, evals);
      probe[i] = x[i] - h;
      fm = eval(f, probe, evals);
      if (std::isfinite(fp) && std::isfinite(fm)) break;
      h *= 0.5;
    }
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

MinimizeResult bfgs_polish(const Objective& f, std::span<const double> start,
                           const PolishOptions& opts) {
  const std::size_t n = start.size();
  MinimizeResult out;
  out.x.assign(start.begin(), start.end());
  int evals = 0;
  out.f = eval(f, out.x, evals);
  if (!std::isfinite(out.f)) {
    out.evaluations = evals;
    return out;
  }

  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  Mat hinv = Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  auto grad = [&](const std::vector<double>& at) {
    auto g = central_gradient(f, at, opts.gradient_rel_step, opts.gradient_abs_floor);
    return Vec(Eigen::Map<const Vec>(g.data(), static_cast<Eigen::Index>(n)));
  };

  Vec g = grad(out.x);
  std::vector<double> trial(n);
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    const double scale = std::max(1.0, std::abs(out.f));
    if (!g.allFinite()) break;
    if (g.cwiseAbs().maxCoeff() <= opts.grad_tolerance * scale) {
      out.converged = true;
      break;
    }
    Vec dir = -(hinv * g);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // reset to steepest descent
      hinv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
      if (!(slope < 0.0)) break;
    }

    double t = 1.0;
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = out.x[j] + t * dir[static_cast<Eigen::Index>(j)];
      f_new = eval(f, trial, evals);
      if (std::isfinite(f_new) && f_new <= out.f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    Vec g_new = grad(trial);
    Vec s = t * dir;
    Vec y = g_new - g;
    const double sy = s.dot(y);
    if (std::isfinite(sy) && sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      Mat eye = Mat::Identity(hinv.rows(), hinv.cols());
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) +
             rho * s * s.transpose();
    } else {
      hinv.setIdentity();
    }
    out.x = trial;
    out.f = f_new;
    g = g_new;
    if (!g.allFinite()) break;
  }
  out.iterations = iter;
  out.evaluations = evals;
  return out;
}

Eigen::MatrixXd central_hessian(const Objective& f, std::span<const double> x,
                                double rel_step, double abs_floor, bool* ok) {
  const std::size_t n = x.size();
  const Eigen::Index ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(ni, ni);
  int evals = 0;

  for (double shrink = 1.0; shrink >= 0.125; shrink *= 0.5) {
    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) {
      step[i] = shrink * std::max(rel_step * std::abs(x[i]), abs_floor);
    }
    std::vector<double> probe(x.begin(), x.end());
    const double f0 = eval(f, probe, evals);
    bool finite = std::isfinite(f0);

    for (std::size_t i = 0; i < n && finite; ++i) {
      probe[i] = x[i] + step[i];
      const double fp = eval(f, probe, evals);
      probe[i] = x[i] - step[i];
      const double fm = eval(f, probe, evals);
      probe[i] = x[i];
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
          (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
      finite = std::isfinite(fp) && std::isfinite(fm);
    }
    for (std::size_t i = 0; i < n && finite; ++i) {
      for (std::size_t j = i + 1; j < n && finite; ++j) {
        probe[i] = x[i] + step[i];
        probe[j] = x[j] + step[j];
        const double fpp = eval(f, probe, evals);
        probe[j] = x[j] - step[j];
        const double fpm = eval(f, probe, evals);
        probe[i] = x[i] - step[i];
        const double fmm = eval(f, probe, evals);
        probe[j] = x[j] + step[j];
        const double fmp = eval(f, probe, evals);
        probe[i] = x[i];
        probe[j] = x[j];
        const double hij = (fpp - fpm - fmp + fmm) / (4.0 * step[i] * step[j]);
        h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = hij;
        h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = hij;
        finite = std::isfinite(hij);
      }
    }
    if (finite && h.allFinite()) {
      if (ok) *ok = true;
      return h;
    }
  }
  if (ok) *ok = false;
  return h;
}

double bisect_root(const std::function<double(double)>& g, double lo, double hi,
                   double x_tol, int max_iterations) {
  double glo = g(lo);
  double ghi = g(hi);
  if (!(glo > 0.0) || ghi > 0.0) {
    throw BracketError("bisect_root: bracket does not straddle the root");
  }
  for (int i = 0; i < max_iterations && hi - lo > x_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

ScalarMinResult golden_section_min(const std::function<double(double)>& f, double lo,
                                   double hi, double x_tol, int max_iterations) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < max_iterations && b - a > x_tol; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? ScalarMinResult{x1, f1} : ScalarMinResult{x2, f2};
}

}  // namespace evattr::optim
