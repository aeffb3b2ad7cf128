// LassoFlow - prescribed-time elastic-net Lasso solver via Newton KKT flows
// Copyright 2026 LassoFlow Contributors
// Licensed under Apache 2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lassoflow/flow.hpp"
#include "lassoflow/problem.hpp"

namespace lassoflow {

/// Counters accumulated over one integration.
struct IntegrationStats {
  long steps_accepted = 0;
  long steps_rejected = 0;
  long linear_solves = 0;
  long fallback_solves = 0;
};

enum class IntegrationStatus { ok, step_underflow };

struct TrajectorySample {
  double t;
  VectorXd z;
  VectorXd w;
  double residual_norm;
  VectorXd x;  // recovered z_head - z_tail
};

/// Time-sampled flow states. Sample times are exact integration points
/// (steps land on the requested grid); after the settle event the state is
/// held constant, so trailing samples repeat the settled state.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::optional<double> settle_time;
  IntegrationStats stats;
  IntegrationStatus status = IntegrationStatus::ok;
};

/// Stop-event predicate: the state freezes once the residual norm falls to
/// eps_stop (inclusive).
inline bool detect_settle(double norm, double eps_stop) { return norm <= eps_stop; }

// ---------------------------------------------------------------------------
// SDIRK3(2): 3-stage stiffly accurate L-stable SDIRK of order 3 with an
// embedded order-2 estimator. gamma is the root of
// x^3 - 3x^2 + (3/2)x - 1/6 in (1/3, 1); the weight difference between the
// two orders reduces to a second difference of the stage derivatives.
// ---------------------------------------------------------------------------
namespace sdirk {
inline constexpr double gamma = 0.4358665215084589994160194511935568;
inline constexpr double c2 = (1.0 + gamma) / 2.0;
inline constexpr double a21 = (1.0 - gamma) / 2.0;
inline constexpr double b1 = 1.2084966491760100703364776840633231;
inline constexpr double b2 = -0.6443631706844690697524971352568799;
inline constexpr double b3 = gamma;
inline constexpr double d_est = gamma - 0.2;  // est = d_est * h * (k1 - 2 k2 + k3)
}  // namespace sdirk

namespace detail {

template <class System>
struct StepResult {
  VectorXd y_new;
  VectorXd est;  // filtered embedded error estimate (state space)
  VectorXd k3;   // derivative at y_new (stiffly accurate last stage)
};

// One SDIRK step of size h from (t, y). lu factors (I - h*gamma*J) with J
// evaluated at (t, y). Modified Newton per stage; returns nullopt when the
// iteration fails to contract.
template <class System>
std::optional<StepResult<System>> sdirk_step(System& sys, double t, const VectorXd& y,
                                             double h,
                                             const Eigen::PartialPivLU<MatrixXd>& lu,
                                             const VectorXd& f_pred, long& solves) {
  constexpr double newton_tol = 1e-4;
  const double cs[3] = {sdirk::gamma, sdirk::c2, 1.0};
  VectorXd k = f_pred;
  VectorXd ks[3];
  VectorXd stage_base;
  for (int i = 0; i < 3; ++i) {
    stage_base = y;
    if (i == 1) stage_base += (h * sdirk::a21) * ks[0];
    if (i == 2) stage_base += (h * sdirk::b1) * ks[0] + (h * sdirk::b2) * ks[1];
    bool converged = false;
    for (int it = 0; it < 8; ++it) {
      const VectorXd f = sys.rhs(t + cs[i] * h, stage_base + (h * sdirk::gamma) * k);
      const VectorXd dk = lu.solve(f - k);
      ++solves;
      k += dk;
      if (!k.allFinite()) return std::nullopt;
      if (dk.norm() <= newton_tol * k.norm() + 1e-300) {
        converged = true;
        break;
      }
    }
    if (!converged) return std::nullopt;
    ks[i] = k;
  }
  StepResult<System> out;
  out.y_new = y + (h * sdirk::b1) * ks[0] + (h * sdirk::b2) * ks[1] +
              (h * sdirk::b3) * ks[2];
  out.est = lu.solve((sdirk::d_est * h) * (ks[0] - 2.0 * ks[1] + ks[2]));
  ++solves;
  out.k3 = std::move(ks[2]);
  return out;
}

}  // namespace detail

struct OdeSample {
  double t;
  VectorXd y;
  double residual_norm;
};

struct OdeRun {
  std::vector<OdeSample> samples;
  std::optional<double> settle_time;
  IntegrationStats stats;
  IntegrationStatus status = IntegrationStatus::ok;
};

/// Adaptive integration of y' = sys.rhs(t, y) from 0 to T_p with samples at
/// the given times (steps are clipped to land on them exactly), residual-space
/// error control, and the settle stop event. System requirements:
///   VectorXd rhs(double t, const VectorXd& y)
///   MatrixXd jacobian(double t, const VectorXd& y)
///   double residual_norm(const VectorXd& y)
///   double error_norm(const VectorXd& y_old, const VectorXd& y_new,
///                     const VectorXd& est, double atol, double rtol)
///   bool state_ok(const VectorXd& y, double tol_nn)
template <class System>
OdeRun integrate_ode(System& sys, const VectorXd& y0, const FlowParams& p,
                     std::vector<double> times) {
  const double T = p.T_p;
  for (double tv : times)
    if (!(tv >= 0.0) || tv > T)
      throw std::invalid_argument("integrate: sample times must lie in [0, T_p]");
  times.push_back(0.0);
  times.push_back(T);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  OdeRun run;
  run.samples.reserve(times.size() + 1);
  VectorXd y = y0;
  double cur_norm = sys.residual_norm(y);
  run.samples.push_back({0.0, y, cur_norm});

  auto freeze_rest = [&](std::size_t next_si, double settle_t) {
    run.settle_time = settle_t;
    if (run.samples.back().t < settle_t)
      run.samples.push_back({settle_t, y, cur_norm});
    for (std::size_t i = next_si; i < times.size(); ++i)
      if (times[i] > settle_t) run.samples.push_back({times[i], y, cur_norm});
  };

  if (detect_settle(cur_norm, p.eps_stop)) {
    freeze_rest(1, 0.0);
    return run;
  }

  const double hmax = T / 50.0;
  double t = 0.0;
  double h_prop = std::min(hmax, 1e-4 * T);
  VectorXd f_cur = sys.rhs(0.0, y);
  std::size_t next_si = 1;
  double err_prev = 1.0;
  bool grow_block = false;

  while (true) {
    const double to_next = times[next_si] - t;
    double h_use = std::min({h_prop, hmax, to_next});
    bool clipped = h_use < std::min(h_prop, hmax);
    MatrixXd J = sys.jacobian(t, y);

    std::optional<StepResult<System>> step;
    Eigen::PartialPivLU<MatrixXd> lu;
    double err = 0.0;
    while (true) {
      lu.compute(MatrixXd::Identity(y.size(), y.size()) - (h_use * sdirk::gamma) * J);
      ++run.stats.linear_solves;
      step = detail::sdirk_step(sys, t, y, h_use, lu, f_cur, run.stats.linear_solves);
      if (step) {
        err = sys.error_norm(y, step->y_new, step->est, p.atol, p.rtol);
        if (std::isfinite(err) && err <= 1.0 && step->y_new.allFinite() &&
            sys.state_ok(step->y_new, p.tol_nn))
          break;
      }
      ++run.stats.steps_rejected;
      grow_block = true;
      clipped = false;
      h_use *= 0.5;
      if (h_use < 1e-14 * T) {
        run.status = IntegrationStatus::step_underflow;
        return run;
      }
    }
    ++run.stats.steps_accepted;

    double new_norm = sys.residual_norm(step->y_new);
    if (detect_settle(new_norm, p.eps_stop)) {
      // locate the first crossing of eps_stop inside [t, t + h_use]
      double lo = 0.0, hi = h_use;
      VectorXd y_hi = step->y_new;
      for (int iter = 0; iter < 60 && hi - lo > 1e-12 * std::max(1.0, T); ++iter) {
        const double mid = 0.5 * (lo + hi);
        Eigen::PartialPivLU<MatrixXd> lu_mid(
            MatrixXd::Identity(y.size(), y.size()) - (mid * sdirk::gamma) * J);
        ++run.stats.linear_solves;
        auto sub = detail::sdirk_step(sys, t, y, mid, lu_mid, f_cur, run.stats.linear_solves);
        if (!sub) break;
        if (detect_settle(sys.residual_norm(sub->y_new), p.eps_stop)) {
          hi = mid;
          y_hi = std::move(sub->y_new);
        } else {
          lo = mid;
        }
      }
      y = std::move(y_hi);
      cur_norm = sys.residual_norm(y);
      freeze_rest(next_si, t + hi);
      return run;
    }

    t = clipped ? times[next_si] : t + h_use;
    y = std::move(step->y_new);
    f_cur = std::move(step->k3);
    cur_norm = new_norm;

    const double e = std::max(err, 1e-10);
    double fac = 0.9 * std::pow(e, -0.7 / 3.0) * std::pow(err_prev, 0.4 / 3.0);
    if (grow_block) fac = std::min(fac, 1.0);
    grow_block = false;
    err_prev = e;
    const double h_pi = h_use * std::clamp(fac, 0.2, 4.0);
    h_prop = clipped ? std::max(h_prop, h_pi) : h_pi;

    if (clipped) {
      run.samples.push_back({t, y, cur_norm});
      if (++next_si >= times.size()) break;
    }
  }
  return run;
}

// ---------------------------------------------------------------------------
// KKT flow system: state y = (z; w), mass-matrix Newton direction as velocity.
// Error control lives in residual space: the embedded state estimate is mapped
// through the KKT Jacobian M = [Q, -I; W, Z] (which is exactly du/dy) and
// weighted against atol + rtol * ||u||, so accuracy follows the shrinking
// residual instead of a fixed absolute floor.
// ---------------------------------------------------------------------------
class KktFlowSystem {
 public:
  KktFlowSystem(const NnqpProblem& nnqp, double k) : nnqp_(nnqp), k_(k) {}

  Eigen::Index dim() const { return 2 * nnqp_.dim(); }

  VectorXd rhs(double t, const VectorXd& y) {
    const Eigen::Index d = nnqp_.dim();
    const Residual res = residual_at(y);
    const double gain = gain_scale(res.norm, k_);
    NewtonDirection dir = detail_solve(y.head(d), y.tail(d), res, gain, t);
    VectorXd out(2 * d);
    out.head(d) = std::move(dir.dz);
    out.tail(d) = std::move(dir.dw);
    return out;
  }

  // d(rhs)/dy = M^{-1} * (-phi*M - (phi'/r) u (u^T M) - dM*F), with
  // dM*F = [0, 0; diag(F_w), diag(F_z)].
  MatrixXd jacobian(double t, const VectorXd& y) {
    const Eigen::Index d = nnqp_.dim();
    const auto z = y.head(d);
    const auto w = y.tail(d);
    const Residual res = residual_at(y);
    const double r = res.norm;
    if (!(r > 0.0)) throw EquilibriumError("jacobian: at equilibrium");
    const double phi = k_ * (1.0 / r + r);
    const double dphi = k_ * (1.0 - 1.0 / (r * r));
    const VectorXd f = rhs(t, y);

    VectorXd utm(2 * d);  // u^T M, using Q = Q^T
    utm.head(d) = nnqp_.Q * res.u1 + w.cwiseProduct(res.u2);
    utm.tail(d) = -res.u1 + z.cwiseProduct(res.u2);

    MatrixXd B(2 * d, 2 * d);
    B.topLeftCorner(d, d) = -phi * nnqp_.Q;
    B.topRightCorner(d, d) = phi * MatrixXd::Identity(d, d);
    B.bottomLeftCorner(d, d) = MatrixXd((-phi * w).asDiagonal());
    B.bottomRightCorner(d, d) = MatrixXd((-phi * z).asDiagonal());
    VectorXd u(2 * d);
    u.head(d) = res.u1;
    u.tail(d) = res.u2;
    B.noalias() -= (dphi / r) * u * utm.transpose();
    B.bottomLeftCorner(d, d).diagonal() -= f.tail(d);
    B.bottomRightCorner(d, d).diagonal() -= f.head(d);

    // solve M X = B by the same reduced elimination used for the direction
    MatrixXd reduced = z.asDiagonal() * nnqp_.Q;
    reduced.diagonal() += w;
    Eigen::PartialPivLU<MatrixXd> lu(reduced);
    ++linear_solves;
    MatrixXd xz =
        lu.solve(B.bottomRows(d) + z.asDiagonal() * MatrixXd(B.topRows(d)));
    MatrixXd out(2 * d, 2 * d);
    out.bottomRows(d).noalias() = nnqp_.Q * xz - B.topRows(d);
    out.topRows(d) = std::move(xz);
    return out;
  }

  double residual_norm(const VectorXd& y) const { return residual_at(y).norm; }

  double error_norm(const VectorXd& y_old, const VectorXd& y_new, const VectorXd& est,
                    double atol, double rtol) const {
    const Eigen::Index d = nnqp_.dim();
    const auto z = y_old.head(d);
    const auto w = y_old.tail(d);
    VectorXd du(2 * d);
    du.head(d) = nnqp_.Q * est.head(d) - est.tail(d);
    du.tail(d) = w.cwiseProduct(est.head(d)) + z.cwiseProduct(est.tail(d));
    const double scale =
        atol + rtol * std::max(residual_norm(y_old), residual_norm(y_new));
    return du.norm() / (scale * std::sqrt(static_cast<double>(2 * d)));
  }

  bool state_ok(const VectorXd& y, double tol_nn) const {
    return y.minCoeff() >= -tol_nn;
  }

  Residual residual_at(const VectorXd& y) const {
    const Eigen::Index d = nnqp_.dim();
    Residual r;
    r.u1 = nnqp_.Q * y.head(d) - y.tail(d) + nnqp_.q;
    r.u2 = y.head(d).cwiseProduct(y.tail(d));
    r.norm = std::sqrt(r.u1.squaredNorm() + r.u2.squaredNorm());
    return r;
  }

  long linear_solves = 0;
  long fallback_solves = 0;

 private:
  NewtonDirection detail_solve(const Eigen::Ref<const VectorXd>& z,
                               const Eigen::Ref<const VectorXd>& w, const Residual& res,
                               double gain, double t) {
    NewtonDirection dir = detail::solve_kkt_direction(nnqp_, z, w, res, gain, t);
    ++linear_solves;
    if (dir.used_fallback) ++fallback_solves;
    return dir;
  }

  const NnqpProblem& nnqp_;
  double k_;
};

/// Prescribed-time Newton flow for a strongly convex quadratic
/// f(x) = (1/2) x^T P x + c^T x: solves P x' = -gain * (P x + c).
class QuadraticNewtonFlow {
 public:
  QuadraticNewtonFlow(MatrixXd P, VectorXd c, double k)
      : P_(std::move(P)), c_(std::move(c)), k_(k), llt_(P_) {
    if (P_.rows() != P_.cols() || P_.rows() != c_.size())
      throw std::invalid_argument("QuadraticNewtonFlow: dimension mismatch");
    if (llt_.info() != Eigen::Success)
      throw std::invalid_argument("QuadraticNewtonFlow: P must be positive definite");
  }

  Eigen::Index dim() const { return c_.size(); }

  VectorXd rhs(double, const VectorXd& y) {
    const VectorXd g = P_ * y + c_;
    const double r = g.norm();
    const double gain = gain_scale(r, k_);  // throws at equilibrium
    ++linear_solves;
    return llt_.solve((-gain) * g);
  }

  MatrixXd jacobian(double, const VectorXd& y) {
    const VectorXd g = P_ * y + c_;
    const double r = g.norm();
    if (!(r > 0.0)) throw EquilibriumError("jacobian: at equilibrium");
    const double phi = k_ * (1.0 / r + r);
    const double dphi = k_ * (1.0 - 1.0 / (r * r));
    ++linear_solves;
    const VectorXd pg = llt_.solve(g);
    MatrixXd J = -phi * MatrixXd::Identity(dim(), dim());
    J.noalias() -= (dphi / r) * pg * (P_ * g).transpose();
    return J;
  }

  double residual_norm(const VectorXd& y) const { return (P_ * y + c_).norm(); }

  double error_norm(const VectorXd& y_old, const VectorXd& y_new, const VectorXd& est,
                    double atol, double rtol) const {
    const double scale =
        atol + rtol * std::max(residual_norm(y_old), residual_norm(y_new));
    return (P_ * est).norm() / (scale * std::sqrt(static_cast<double>(dim())));
  }

  bool state_ok(const VectorXd&, double) const { return true; }

  long linear_solves = 0;

 private:
  MatrixXd P_;
  VectorXd c_;
  double k_;
  Eigen::LLT<MatrixXd> llt_;
};

/// Uniform grid of n_intervals+1 points on [0, T_p].
inline std::vector<double> uniform_sample_times(double t_p, int n_intervals = 200) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_intervals) + 1);
  for (int i = 0; i <= n_intervals; ++i)
    out.push_back(t_p * static_cast<double>(i) / static_cast<double>(n_intervals));
  out.back() = t_p;
  return out;
}

/// Integrate the KKT flow from a strictly positive start to T_p, sampling at
/// the requested times plus the settle event.
inline Trajectory integrate_flow(const NnqpProblem& nnqp, const FlowState& init,
                                 const FlowParams& params,
                                 const std::vector<double>& sample_times) {
  const Eigen::Index d = nnqp.dim();
  if (init.z.size() != d || init.w.size() != d)
    throw std::invalid_argument("integrate_flow: init dimension mismatch");
  if (!(init.z.minCoeff() > 0.0) || !(init.w.minCoeff() > 0.0))
    throw std::invalid_argument(
        "integrate_flow: init must be strictly positive elementwise");

  KktFlowSystem sys(nnqp, params.k);
  VectorXd y0(2 * d);
  y0.head(d) = init.z;
  y0.tail(d) = init.w;
  OdeRun run = integrate_ode(sys, y0, params, sample_times);

  Trajectory traj;
  traj.settle_time = run.settle_time;
  traj.stats = run.stats;
  traj.stats.linear_solves += sys.linear_solves;
  traj.stats.fallback_solves += sys.fallback_solves;
  traj.status = run.status;
  traj.samples.reserve(run.samples.size());
  for (auto& s : run.samples) {
    TrajectorySample ts;
    ts.t = s.t;
    ts.z = s.y.head(d);
    ts.w = s.y.tail(d);
    ts.residual_norm = s.residual_norm;
    ts.x = ts.z.head(nnqp.n_x) - ts.z.tail(nnqp.n_x);
    traj.samples.push_back(std::move(ts));
  }
  return traj;
}

}  // namespace lassoflow
