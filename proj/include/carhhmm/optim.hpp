#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

namespace carhhmm {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

/// Central-difference gradient with per-coordinate relative steps.
inline Eigen::VectorXd central_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x,
                                        double rel_step, long& n_evals) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = f(xp);
    xp(i) = xi - h;
    const double fm = f(xp);
    xp(i) = xi;
    n_evals += 2;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Central-difference Hessian (symmetric by construction).
inline Eigen::MatrixXd central_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x,
                                       double rel_step) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd step(n);
  for (int i = 0; i < n; ++i) step(i) = rel_step * std::max(1.0, std::abs(x(i)));
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (int i = 0; i < n; ++i) {
    xp(i) = x(i) + step(i);
    const double fp = f(xp);
    xp(i) = x(i) - step(i);
    const double fm = f(xp);
    xp(i) = x(i);
    hess(i, i) = (fp - 2.0 * f0 + fm) / (step(i) * step(i));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      xp(i) = x(i) + step(i);
      xp(j) = x(j) + step(j);
      const double fpp = f(xp);
      xp(j) = x(j) - step(j);
      const double fpm = f(xp);
      xp(i) = x(i) - step(i);
      const double fmm = f(xp);
      xp(j) = x(j) + step(j);
      const double fmp = f(xp);
      xp(i) = x(i);
      xp(j) = x(j);
      hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * step(i) * step(j));
    }
  }
  return hess;
}

struct OptimOptions {
  double grad_tol_rel = 1e-5;   // converged when ||g||_inf < grad_tol_rel * max(1, |f|)
  double step_tol_rel = 1e-9;   // ... or the relative step falls below this
  int max_iters = 500;
  double fd_step_rel = 1e-6;
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int n_iters = 0;
  long n_evals = 0;
  double grad_inf_norm = std::numeric_limits<double>::quiet_NaN();
};

/// BFGS with a backtracking sufficient-decrease line search and numerical
/// gradients. Non-finite objective values are treated as +inf so the line
/// search backs away from invalid regions.
inline OptimResult bfgs_minimize(const ObjectiveFn& raw_f, const Eigen::VectorXd& x0,
                                 const OptimOptions& opts = {}) {
  const int n = static_cast<int>(x0.size());
  OptimResult res;
  res.n_evals = 0;
  auto f = [&](const Eigen::VectorXd& x) {
    const double v = raw_f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  Eigen::VectorXd x = x0;
  double fx = f(x);
  ++res.n_evals;
  if (!std::isfinite(fx)) {
    res.x = x;
    res.f = fx;
    return res;
  }
  Eigen::VectorXd g = central_gradient(f, x, opts.fd_step_rel, res.n_evals);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);

  constexpr double kArmijoC1 = 1e-4;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    res.n_iters = iter + 1;
    res.grad_inf_norm = g.cwiseAbs().maxCoeff();
    if (res.grad_inf_norm < opts.grad_tol_rel * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd p = -(h_inv * g);
    double slope = g.dot(p);
    if (!(slope < 0.0)) {  // lost positive definiteness, restart from steepest descent
      h_inv.setIdentity();
      p = -g;
      slope = g.dot(p);
      if (!(slope < 0.0)) break;  // gradient numerically zero
    }

    // backtracking line search with sufficient decrease
    double alpha = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = x + alpha * p;
      f_new = f(x_new);
      ++res.n_evals;
      if (f_new <= fx + kArmijoC1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // no decrease along the search direction

    const Eigen::VectorXd s = x_new - x;
    const double step_rel = s.cwiseAbs().maxCoeff() / std::max(1.0, x.cwiseAbs().maxCoeff());
    Eigen::VectorXd g_new = central_gradient(f, x_new, opts.fd_step_rel, res.n_evals);
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd outer_sy = s * y.transpose();
      h_inv = h_inv - rho * (outer_sy * h_inv + h_inv * outer_sy.transpose()) +
              rho * rho * (y.dot(h_inv * y)) * (s * s.transpose()) + rho * (s * s.transpose());
    }
    x = x_new;
    fx = f_new;
    g = g_new;
    if (step_rel < opts.step_tol_rel) break;  // stalled; convergence judged by gradient below
  }
  res.grad_inf_norm = g.cwiseAbs().maxCoeff();
  if (!res.converged)
    res.converged = res.grad_inf_norm < opts.grad_tol_rel * std::max(1.0, std::abs(fx));
  res.x = std::move(x);
  res.f = fx;
  return res;
}

}  // namespace carhhmm
