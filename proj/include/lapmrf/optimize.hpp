#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "lapmrf/errors.hpp"

namespace lapmrf {

struct OptimizerConfig {
  double tol_grad_inf = 1e-6;
  int max_iters = 10000;
  int memory = 10;                     // quasi-Newton history length
  double sufficient_decrease = 1e-4;   // line-search c1
  double curvature = 0.9;              // line-search c2
};

struct OptimizeDiagnostics {
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double final_value = 0.0;
};

namespace detail {

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v)
    if (std::abs(x) > m) m = std::abs(x);
  return m;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::string point_string(const std::vector<double>& x) {
  std::string s = "[";
  for (std::size_t i = 0; i < x.size() && i < 8; ++i) {
    if (i) s += ", ";
    s += std::to_string(x[i]);
  }
  if (x.size() > 8) s += ", ...";
  return s + "]";
}

}  // namespace detail

// Maximizes a smooth concave objective by limited-memory quasi-Newton ascent
// (internally: minimize the negation) with a strong-Wolfe line search.
//
// Objective signature: double obj(const std::vector<double>& x,
//                                 std::vector<double>& grad)
// returning the value and filling grad (same length as x).
template <class Objective>
std::pair<std::vector<double>, OptimizeDiagnostics> maximize(Objective&& objective,
                                                             std::vector<double> x0,
                                                             const OptimizerConfig& cfg) {
  if (cfg.tol_grad_inf <= 0.0) throw DimensionError("tolerance must be positive");
  if (cfg.max_iters < 1) throw DimensionError("iteration cap must be at least 1");
  const std::size_t dim = x0.size();

  // work in minimization form: f = -objective
  std::vector<double> grad_buf(dim);
  auto eval = [&](const std::vector<double>& x, std::vector<double>& g) {
    double v = objective(x, grad_buf);
    if (!std::isfinite(v))
      throw NumericalError("objective not finite at " + detail::point_string(x), x);
    g.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!std::isfinite(grad_buf[i]))
        throw NumericalError("gradient not finite at " + detail::point_string(x), x);
      g[i] = -grad_buf[i];
    }
    return -v;
  };

  std::vector<double> x = std::move(x0);
  std::vector<double> g;
  double f = eval(x, g);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> history;

  OptimizeDiagnostics diag;
  diag.final_grad_norm = detail::inf_norm(g);
  if (diag.final_grad_norm <= cfg.tol_grad_inf) {
    diag.converged = true;
    diag.final_value = -f;
    return {std::move(x), diag};
  }

  std::vector<double> d(dim), x_trial(dim), g_trial(dim);
  const double c1 = cfg.sufficient_decrease;
  const double c2 = cfg.curvature;

  // Once the objective stops improving by more than rounding noise over a
  // window of iterations, further line searches only wander; give up early
  // rather than spend the whole iteration budget there.
  double f_window = f;
  int window_len = 0;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // two-loop recursion for d = -H g
    d = g;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      alpha[k] = history[k].rho * detail::dot(history[k].s, d);
      for (std::size_t i = 0; i < dim; ++i) d[i] -= alpha[k] * history[k].y[i];
    }
    if (!history.empty()) {
      const Pair& last = history.back();
      double gamma = detail::dot(last.s, last.y) / detail::dot(last.y, last.y);
      for (double& di : d) di *= gamma;
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      double beta = history[k].rho * detail::dot(history[k].y, d);
      for (std::size_t i = 0; i < dim; ++i) d[i] += (alpha[k] - beta) * history[k].s[i];
    }
    for (double& di : d) di = -di;

    double dg0 = detail::dot(d, g);
    if (dg0 >= 0.0) {  // not a descent direction; restart from steepest descent
      history.clear();
      for (std::size_t i = 0; i < dim; ++i) d[i] = -g[i];
      dg0 = detail::dot(d, g);
    }

    auto phi = [&](double a, double& slope) {
      for (std::size_t i = 0; i < dim; ++i) x_trial[i] = x[i] + a * d[i];
      double v = eval(x_trial, g_trial);
      slope = detail::dot(d, g_trial);
      return v;
    };

    // strong-Wolfe search: bracket then bisect
    double step = history.empty() ? std::min(1.0, 1.0 / std::max(1.0, detail::inf_norm(g)))
                                  : 1.0;
    double a_prev = 0.0, f_prev = f;
    double a = step;
    double a_acc = -1.0, f_acc = 0.0;
    double lo = 0.0, hi = 0.0, f_lo = f;
    bool zoom = false;
    for (int ls = 0; ls < 30; ++ls) {
      double slope;
      double fa = phi(a, slope);
      if (fa > f + c1 * a * dg0 || (ls > 0 && fa >= f_prev)) {
        lo = a_prev;
        hi = a;
        f_lo = f_prev;
        zoom = true;
        break;
      }
      if (std::abs(slope) <= -c2 * dg0) {
        a_acc = a;
        f_acc = fa;
        break;
      }
      if (slope >= 0.0) {
        lo = a;
        hi = a_prev;
        f_lo = fa;
        zoom = true;
        break;
      }
      a_prev = a;
      f_prev = fa;
      a *= 2.0;
    }
    if (zoom) {
      for (int z = 0; z < 60 && a_acc < 0.0; ++z) {
        double mid = 0.5 * (lo + hi);
        double slope;
        double fm = phi(mid, slope);
        if (fm > f + c1 * mid * dg0 || fm >= f_lo) {
          hi = mid;
        } else {
          if (std::abs(slope) <= -c2 * dg0) {
            a_acc = mid;
            f_acc = fm;
            break;
          }
          if (slope * (hi - lo) >= 0.0) hi = lo;
          lo = mid;
          f_lo = fm;
        }
        if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
      }
      if (a_acc < 0.0 && lo > 0.0) {  // accept the best Armijo point found
        double slope;
        a_acc = lo;
        f_acc = phi(lo, slope);
      }
    }
    if (a_acc < 0.0) {  // plain backtracking as a last resort
      a = step;
      for (int bt = 0; bt < 60; ++bt) {
        double slope;
        double fa = phi(a, slope);
        if (fa <= f + c1 * a * dg0) {
          a_acc = a;
          f_acc = fa;
          break;
        }
        a *= 0.5;
      }
    }
    if (a_acc < 0.0) break;  // no progress possible; report non-converged

    // every accept path evaluates phi at a_acc last, so x_trial and g_trial
    // already hold the new point
    Pair p;
    p.s.resize(dim);
    p.y.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      p.s[i] = x_trial[i] - x[i];
      p.y[i] = g_trial[i] - g[i];
    }
    double sy = detail::dot(p.s, p.y);
    x = x_trial;
    g = g_trial;
    f = f_acc;
    diag.iterations = iter + 1;
    if (sy > 1e-10 * std::sqrt(detail::dot(p.s, p.s)) * std::sqrt(detail::dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      history.push_back(std::move(p));
      if (static_cast<int>(history.size()) > cfg.memory) history.pop_front();
    }

    diag.final_grad_norm = detail::inf_norm(g);
    if (diag.final_grad_norm <= cfg.tol_grad_inf) {
      diag.converged = true;
      break;
    }
    if (++window_len >= 10) {
      if (f_window - f <= 1e-14 * std::max(1.0, std::abs(f))) break;
      f_window = f;
      window_len = 0;
    }
  }

  diag.final_value = -f;
  return {std::move(x), diag};
}

}  // namespace lapmrf
