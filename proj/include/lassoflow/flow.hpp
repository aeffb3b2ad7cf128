// LassoFlow - prescribed-time elastic-net Lasso solver via Newton KKT flows
// Copyright 2026 LassoFlow Contributors
// Licensed under Apache 2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "lassoflow/problem.hpp"

namespace lassoflow {

/// Thrown when an operation is called at (or numerically at) the KKT point,
/// where the direction field 1/||u|| is undefined. Callers are expected to
/// stop on the settle event instead of evaluating the field there.
struct EquilibriumError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Thrown when the flow's linear system is singular or numerically
/// rank-deficient even after falling back to the full block factorization.
struct SingularSystemError : std::runtime_error {
  double flow_time;
  double condition_estimate;
  SingularSystemError(double t, double cond)
      : std::runtime_error("flow linear system is numerically singular at t = " +
                           std::to_string(t) + " (condition estimate " +
                           std::to_string(cond) + ")"),
        flow_time(t),
        condition_estimate(cond) {}
};

/// Primal-dual pair evolving under the flow: z = (x+; x-), w = (v; s).
struct FlowState {
  VectorXd z;
  VectorXd w;
  double t = 0.0;
};

/// Flow gain and integration controls. k and T_p are tied by k = pi / (2 T_p):
/// the residual norm decays along arctan at rate k, so the flow settles no
/// later than T_p from any start.
struct FlowParams {
  double k;
  double T_p;
  double eps_stop = 1e-10;  // residual-norm stop threshold (settle event)
  double rtol = 1e-8;       // residual-space relative tolerance
  double atol = 1e-12;      // residual-space absolute floor
  double tol_nn = 1e-9;     // nonnegativity slack allowed during integration

  static FlowParams from_settling_time(double t_p) {
    if (!(t_p > 0.0)) throw std::invalid_argument("FlowParams: T_p must be > 0");
    FlowParams p;
    p.T_p = t_p;
    p.k = std::numbers::pi / (2.0 * t_p);
    return p;
  }

  static FlowParams from_gain(double k) {
    if (!(k > 0.0)) throw std::invalid_argument("FlowParams: k must be > 0");
    FlowParams p;
    p.k = k;
    p.T_p = std::numbers::pi / (2.0 * k);
    return p;
  }

 private:
  FlowParams() : k(0), T_p(0) {}
};

/// KKT residual of the NNQP at (z, w):
///   u1 = Q z - w + q   (stationarity)
///   u2 = z .* w        (complementarity)
struct Residual {
  VectorXd u1;
  VectorXd u2;
  double norm;  // || (u1; u2) ||_2
};

inline Residual kkt_residual(const NnqpProblem& nnqp, const FlowState& s) {
  if (s.z.size() != nnqp.dim() || s.w.size() != nnqp.dim())
    throw std::invalid_argument("kkt_residual: state dimension mismatch");
  Residual r;
  r.u1 = nnqp.Q * s.z - s.w + nnqp.q;
  r.u2 = s.z.cwiseProduct(s.w);
  r.norm = std::sqrt(r.u1.squaredNorm() + r.u2.squaredNorm());
  return r;
}

/// Shared scalar factor of both flow equations: k * (1/norm + norm).
/// Minimum value 2k, attained at norm = 1.
inline double gain_scale(double norm, double k) {
  if (!(norm > 0.0))
    throw EquilibriumError("gain_scale: residual norm is zero (at equilibrium)");
  return k * (1.0 / norm + norm);
}

/// State velocity (dz, dw) solving the implicit block system
///   [Q, -I; W, Z] (dz; dw) = -gain * (u1; u2),  W = diag(w), Z = diag(z).
struct NewtonDirection {
  VectorXd dz;
  VectorXd dw;
  bool used_fallback = false;  // true when the full block solve was needed
};

namespace detail {

// Reduced elimination: dw = Q dz + gain*u1 turns the second block row into
//   (W + Z Q) dz = -gain * (u2 + Z u1).
// W + ZQ is nonsymmetric, so a pivoted general LU is used. When its condition
// estimate exceeds 1e12 the full 4n x 4n block system is factored instead.
inline NewtonDirection solve_kkt_direction(const NnqpProblem& nnqp, const VectorXd& z,
                                           const VectorXd& w, const Residual& res,
                                           double gain, double flow_time) {
  const Eigen::Index d = nnqp.dim();
  MatrixXd reduced = z.asDiagonal() * nnqp.Q;
  reduced.diagonal() += w;
  Eigen::PartialPivLU<MatrixXd> lu(reduced);
  const double rc = lu.rcond();
  NewtonDirection dir;
  if (rc > 1e-12) {
    dir.dz = lu.solve(-gain * (res.u2 + z.cwiseProduct(res.u1)));
    dir.dw = nnqp.Q * dir.dz + gain * res.u1;
    return dir;
  }
  MatrixXd full(2 * d, 2 * d);
  full.topLeftCorner(d, d) = nnqp.Q;
  full.topRightCorner(d, d) = -MatrixXd::Identity(d, d);
  full.bottomLeftCorner(d, d) = MatrixXd(w.asDiagonal());
  full.bottomRightCorner(d, d) = MatrixXd(z.asDiagonal());
  VectorXd rhs(2 * d);
  rhs.head(d) = -gain * res.u1;
  rhs.tail(d) = -gain * res.u2;
  Eigen::PartialPivLU<MatrixXd> lu_full(full);
  const double rc_full = lu_full.rcond();
  if (!(rc_full > 1e-14))
    throw SingularSystemError(flow_time, rc_full > 0.0 ? 1.0 / rc_full
                                                       : std::numeric_limits<double>::infinity());
  const VectorXd dy = lu_full.solve(rhs);
  if (!dy.allFinite())
    throw SingularSystemError(flow_time, 1.0 / rc_full);
  dir.dz = dy.head(d);
  dir.dw = dy.tail(d);
  dir.used_fallback = true;
  return dir;
}

}  // namespace detail

inline NewtonDirection newton_direction(const NnqpProblem& nnqp, const FlowState& s,
                                        double k) {
  const Residual res = kkt_residual(nnqp, s);
  const double gain = gain_scale(res.norm, k);  // throws at equilibrium
  return detail::solve_kkt_direction(nnqp, s.z, s.w, res, gain, s.t);
}

/// Closed-form residual norm along the flow: the norm r obeys
/// dr/dt = -k (1 + r^2), so r(t) = tan(max(0, arctan(r0) - k t)).
inline double analytic_residual_norm(double norm0, double k, double t) {
  if (norm0 < 0.0) throw std::invalid_argument("analytic_residual_norm: norm0 < 0");
  if (t < 0.0) throw std::invalid_argument("analytic_residual_norm: t < 0");
  const double phase = std::atan(norm0) - k * t;
  return phase > 0.0 ? std::tan(phase) : 0.0;
}

/// Exact settling time arctan(norm0) / k; always <= pi / (2k) = T_p.
inline double analytic_settling_time(double norm0, double k) {
  if (norm0 < 0.0) throw std::invalid_argument("analytic_settling_time: norm0 < 0");
  if (!(k > 0.0)) throw std::invalid_argument("analytic_settling_time: k must be > 0");
  return std::atan(norm0) / k;
}

/// Velocity of the prescribed-time Newton flow for a smooth strongly convex
/// objective: solves  hessian * dx = -k * (1/||g|| + ||g||) * g.
inline VectorXd unconstrained_newton_rhs(const MatrixXd& hessian, const VectorXd& grad,
                                         double k) {
  if (hessian.rows() != hessian.cols() || hessian.rows() != grad.size())
    throw std::invalid_argument("unconstrained_newton_rhs: dimension mismatch");
  const double gnorm = grad.norm();
  if (!(gnorm > 0.0))
    throw EquilibriumError("unconstrained_newton_rhs: zero gradient (at equilibrium)");
  const double gain = gain_scale(gnorm, k);
  Eigen::PartialPivLU<MatrixXd> lu(hessian);
  if (!(lu.rcond() > 1e-14))
    throw SingularSystemError(0.0, lu.rcond() > 0.0 ? 1.0 / lu.rcond()
                                                    : std::numeric_limits<double>::infinity());
  return lu.solve(-gain * grad);
}

}  // namespace lassoflow
