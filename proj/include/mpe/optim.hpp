// Copyright 2026 The mpe-bpsk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Smooth constrained minimizer over real vectors.
//
// Spectral projected gradient (Barzilai-Borwein step, Armijo backtracking
// along the projection arc) with four constraint families:
//
//   balls        sum_{i in I} x_i^2 <= bound
//   spheres      sum_{i in I} x_i^2  = 1        (projection = renormalization)
//   halfspaces   c . x + d >= 0
//   inequalities g(x) >= 0 for a user supplied smooth vector function
//
// When only balls and halfspaces are present the feasible set is convex and
// the projection onto it is computed exactly with Dykstra's alternating
// projections. Otherwise halfspaces and inequalities are kept by rejecting
// infeasible trial points, and an infeasible start is first repaired with a
// quadratic penalty phase of increasing weight.

#include "mpe/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace mpe::optim {

struct Ball {
  std::vector<Index> indices;
  double bound = 1.0;
};

struct Sphere {
  std::vector<Index> indices;
};

struct Halfspace {
  RealVec coeffs;
  double offset = 0.0;
  double value(const RealVec& x) const { return coeffs.dot(x) + offset; }
};

struct InequalityBlock {
  // g(x), every component required >= 0
  std::function<RealVec(const RealVec&)> values;
  // sum_i weights_i * grad g_i(x)
  std::function<RealVec(const RealVec& x, const RealVec& weights)> weighted_gradient;
};

struct ConstraintSet {
  std::vector<Ball> balls;
  std::vector<Sphere> spheres;
  std::vector<Halfspace> halfspaces;
  std::vector<InequalityBlock> inequalities;

  bool convex() const { return spheres.empty() && inequalities.empty(); }

  // Largest amount by which any constraint is violated (0 when feasible).
  double max_violation(const RealVec& x) const {
    double v = 0.0;
    for (const auto& b : balls) {
      double s = 0.0;
      for (Index i : b.indices) s += x[i] * x[i];
      v = std::max(v, s - b.bound);
    }
    for (const auto& s : spheres) {
      double n = 0.0;
      for (Index i : s.indices) n += x[i] * x[i];
      v = std::max(v, std::abs(std::sqrt(n) - 1.0));
    }
    v = std::max(v, inequality_violation(x));
    return v;
  }

  double inequality_violation(const RealVec& x) const {
    double v = 0.0;
    for (const auto& h : halfspaces) v = std::max(v, -h.value(x));
    for (const auto& q : inequalities) {
      const RealVec g = q.values(x);
      if (g.size() > 0) v = std::max(v, -g.minCoeff());
    }
    return v;
  }
};

struct SolveOptions {
  double g_tol = 1e-8;
  double f_tol = 1e-12;
  int max_iters = 5000;
  double c_tol = 1e-8;
  double armijo = 1e-4;
  int stall_window = 3;  // consecutive sub-f_tol decreases before stopping
  double step_min = 1e-30;
  double step_max = 1e30;
  // penalty phase (non-convex constraint sets only)
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  int penalty_rounds = 14;
  double feasibility_margin = 1e-7;
  // Dykstra projection
  int dykstra_max_cycles = 2000;
  double dykstra_tol = 1e-14;
};

struct SolveReport {
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  bool feasible = true;
  double max_constraint_violation = 0.0;
};

// Returns f(x); writes the gradient when grad != nullptr.
using Objective = std::function<double(const RealVec& x, RealVec* grad)>;

struct Solution {
  RealVec x;
  double f = 0.0;
  SolveReport report;
};

namespace detail {

inline void project_balls(RealVec& x, const std::vector<Ball>& balls) {
  for (const auto& b : balls) {
    double s = 0.0;
    for (Index i : b.indices) s += x[i] * x[i];
    if (s > b.bound) {
      const double f = std::sqrt(b.bound / s);
      for (Index i : b.indices) x[i] *= f;
    }
  }
}

inline void project_spheres(RealVec& x, const std::vector<Sphere>& spheres) {
  for (const auto& s : spheres) {
    double n = 0.0;
    for (Index i : s.indices) n += x[i] * x[i];
    n = std::sqrt(n);
    if (n > 0.0) {
      for (Index i : s.indices) x[i] /= n;
    } else if (!s.indices.empty()) {
      x[s.indices.front()] = 1.0;
    }
  }
}

inline void project_halfspace(RealVec& x, const Halfspace& h) {
  const double v = h.value(x);
  if (v < 0.0) {
    const double n2 = h.coeffs.squaredNorm();
    if (n2 > 0.0) x -= (v / n2) * h.coeffs;
  }
}

// Euclidean projection onto (product of balls) intersected with halfspaces.
inline RealVec dykstra(const RealVec& v, const ConstraintSet& cs, const SolveOptions& opt) {
  RealVec y = v;
  if (cs.halfspaces.empty()) {
    project_balls(y, cs.balls);
    return y;
  }
  if (cs.max_violation(v) <= 0.0) return y;
  const std::size_t nsets = cs.halfspaces.size() + 1;
  std::vector<RealVec> inc(nsets, RealVec::Zero(v.size()));
  for (int cycle = 0; cycle < opt.dykstra_max_cycles; ++cycle) {
    double change = 0.0;
    for (std::size_t s = 0; s < nsets; ++s) {
      RealVec z = y + inc[s];
      if (s < cs.halfspaces.size())
        project_halfspace(z, cs.halfspaces[s]);
      else
        project_balls(z, cs.balls);
      inc[s] = y + inc[s] - z;
      change += (z - y).squaredNorm();
      y = std::move(z);
    }
    if (change <= opt.dykstra_tol * opt.dykstra_tol * std::max(1.0, y.squaredNorm()) &&
        cs.inequality_violation(y) <= opt.c_tol)
      break;
  }
  return y;
}

struct Projector {
  const ConstraintSet& cs;
  const SolveOptions& opt;
  bool exact_halfspaces;

  RealVec operator()(const RealVec& v) const {
    if (exact_halfspaces) return dykstra(v, cs, opt);
    RealVec y = v;
    project_balls(y, cs.balls);
    project_spheres(y, cs.spheres);
    return y;
  }
};

// SPG core. `x` must already satisfy every constraint the projector does
// not enforce, to within `accept_tol` (checked by `admissible`).
template <typename Admissible>
Solution spg(const Objective& fun, RealVec x, const Projector& proj, const Admissible& admissible,
             const SolveOptions& opt) {
  Solution sol;
  RealVec g(x.size());
  double f = fun(x, &g);
  if (!std::isfinite(f)) throw Error("minimize: non-finite objective at start");
  sol.report.objective_trace.push_back(f);

  auto pg_norm = [&](const RealVec& xx, const RealVec& gg) {
    return (proj(xx - gg) - xx).lpNorm<Eigen::Infinity>();
  };

  double pg = pg_norm(x, g);
  double alpha = pg > 0.0 ? std::clamp(1.0 / pg, opt.step_min, opt.step_max) : 1.0;
  int small_steps = 0;
  int it = 0;
  bool converged = false;
  RealVec g_new(x.size());
  for (; it < opt.max_iters; ++it) {
    if (pg <= opt.g_tol) {
      converged = true;
      break;
    }
    double t = 1.0;
    bool accepted = false;
    RealVec x_new;
    double f_new = f;
    for (int bt = 0; bt < 400 && t * alpha >= opt.step_min; ++bt) {
      x_new = proj(x - (t * alpha) * g);
      const RealVec step = x_new - x;
      const double gd = g.dot(step);
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      if (admissible(x_new)) {
        f_new = fun(x_new, &g_new);
        if (std::isfinite(f_new) && f_new <= f + opt.armijo * std::min(gd, 0.0) && (gd < 0.0 || f_new < f)) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      // no decrease representable at this point
      converged = true;
      break;
    }
    const RealVec s = x_new - x;
    const RealVec yv = g_new - g;
    const double sy = s.dot(yv);
    // nonpositive curvature: grow the last accepted step instead
    alpha = std::clamp(sy > 0.0 ? s.squaredNorm() / sy : 2.0 * t * alpha, opt.step_min, opt.step_max);
    const double decrease = f - f_new;
    x = std::move(x_new);
    g = g_new;
    f = f_new;
    sol.report.objective_trace.push_back(f);
    small_steps = decrease < opt.f_tol ? small_steps + 1 : 0;
    if (small_steps >= opt.stall_window) {
      converged = true;
      ++it;
      break;
    }
    pg = pg_norm(x, g);
  }
  sol.x = std::move(x);
  sol.f = f;
  sol.report.iterations = it;
  sol.report.converged = converged;
  return sol;
}

}  // namespace detail

inline Solution minimize(const Objective& fun, RealVec x0, const ConstraintSet& cs, const SolveOptions& opt = {}) {
  if (!x0.allFinite()) throw Error("minimize: non-finite start");
  int penalty_iters = 0;

  if (cs.convex()) {
    detail::Projector proj{cs, opt, true};
    RealVec x = proj(x0);
    const bool feasible = cs.max_violation(x) <= opt.c_tol;
    auto admissible = [&](const RealVec& y) { return cs.inequality_violation(y) <= opt.c_tol; };
    Solution sol = detail::spg(fun, std::move(x), proj, admissible, opt);
    sol.report.feasible = feasible && cs.max_violation(sol.x) <= opt.c_tol;
    sol.report.max_constraint_violation = cs.max_violation(sol.x);
    return sol;
  }

  detail::Projector proj{cs, opt, false};
  RealVec x = proj(x0);

  if (cs.inequality_violation(x) > opt.c_tol) {
    // Penalty phase on max(0, margin - g)^2.
    const double margin = opt.feasibility_margin;
    double mu = opt.penalty_init;
    auto no_check = [](const RealVec&) { return true; };
    for (int round = 0; round < opt.penalty_rounds; ++round) {
      Objective pen = [&](const RealVec& y, RealVec* grad) {
        double f = fun(y, grad);
        for (const auto& h : cs.halfspaces) {
          const double v = margin - h.value(y);
          if (v > 0.0) {
            f += mu * v * v;
            if (grad) *grad -= (2.0 * mu * v) * h.coeffs;
          }
        }
        for (const auto& q : cs.inequalities) {
          const RealVec gv = q.values(y);
          RealVec wts = RealVec::Zero(gv.size());
          bool any = false;
          for (Index i = 0; i < gv.size(); ++i) {
            const double v = margin - gv[i];
            if (v > 0.0) {
              f += mu * v * v;
              wts[i] = -2.0 * mu * v;
              any = true;
            }
          }
          if (grad && any) *grad += q.weighted_gradient(y, wts);
        }
        return f;
      };
      Solution s = detail::spg(pen, x, proj, no_check, opt);
      penalty_iters += s.report.iterations;
      x = std::move(s.x);
      if (cs.inequality_violation(x) <= opt.c_tol) break;
      mu *= opt.penalty_growth;
    }
  }

  if (cs.inequality_violation(x) > opt.c_tol) {
    Solution sol;
    RealVec g(x.size());
    sol.f = fun(x, &g);
    sol.x = std::move(x);
    sol.report.objective_trace.push_back(sol.f);
    sol.report.iterations = penalty_iters;
    sol.report.converged = false;
    sol.report.feasible = false;
    sol.report.max_constraint_violation = cs.max_violation(sol.x);
    return sol;
  }

  auto admissible = [&](const RealVec& y) { return cs.inequality_violation(y) <= opt.c_tol; };
  Solution sol = detail::spg(fun, std::move(x), proj, admissible, opt);
  sol.report.iterations += penalty_iters;
  sol.report.feasible = cs.max_violation(sol.x) <= opt.c_tol;
  sol.report.max_constraint_violation = cs.max_violation(sol.x);
  return sol;
}

}  // namespace mpe::optim
