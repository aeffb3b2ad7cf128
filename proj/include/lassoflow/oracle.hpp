// LassoFlow - prescribed-time elastic-net Lasso solver via Newton KKT flows
// Copyright 2026 LassoFlow Contributors
// Licensed under Apache 2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lassoflow/problem.hpp"

namespace lassoflow {

enum class OracleMethod { prox_gradient, sign_enum };

struct OracleResult {
  VectorXd x;
  double objective = 0.0;
  long iterations = 0;
  bool converged = false;
  OracleMethod method = OracleMethod::prox_gradient;
};

namespace detail {

// Largest eigenvalue of A^T A by power iteration (fixed 30 rounds, deterministic
// start), inflated slightly so 1/L stays a safe step size.
inline double lipschitz_bound(const MatrixXd& a, double rho) {
  const Eigen::Index n = a.cols();
  VectorXd v = VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double lam = 0.0;
  for (int it = 0; it < 30; ++it) {
    VectorXd av = a.transpose() * (a * v);
    lam = av.norm();
    if (lam == 0.0) break;
    v = av / lam;
  }
  return 2.0 * lam * 1.01 + 2.0 * rho;
}

inline VectorXd soft_threshold(const VectorXd& v, double thr) {
  return v.array().sign() * (v.array().abs() - thr).max(0.0);
}

}  // namespace detail

/// Accelerated proximal gradient (with restart on objective increase) on the
/// elastic-net objective. Converged means the fixed-point residual
/// ||x - prox_step(x)||_inf has reached tol.
inline OracleResult solve_prox(const LassoProblem& p, double tol = 1e-10,
                               long max_iter = 200000) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_prox: tol must be > 0");
  const double L = detail::lipschitz_bound(p.A, p.rho);
  auto grad_smooth = [&](const VectorXd& x) -> VectorXd {
    return 2.0 * (p.A.transpose() * (p.A * x - p.b)) + 2.0 * p.rho * x;
  };
  auto prox_step = [&](const VectorXd& x) -> VectorXd {
    return detail::soft_threshold(x - grad_smooth(x) / L, p.tau / L);
  };

  OracleResult out;
  out.method = OracleMethod::prox_gradient;
  VectorXd x = VectorXd::Zero(p.n_x());
  VectorXd yv = x;
  double tk = 1.0;
  double f_prev = elastic_net_objective(p, x);
  for (long it = 1; it <= max_iter; ++it) {
    const VectorXd x_next = detail::soft_threshold(yv - grad_smooth(yv) / L, p.tau / L);
    const double f_next = elastic_net_objective(p, x_next);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    if (f_next > f_prev) {
      yv = x_next;  // restart momentum
      tk = 1.0;
    } else {
      yv = x_next + ((tk - 1.0) / t_next) * (x_next - x);
      tk = t_next;
    }
    x = x_next;
    f_prev = f_next;
    out.iterations = it;
    if ((x - prox_step(x)).lpNorm<Eigen::Infinity>() <= tol) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.objective = elastic_net_objective(p, x);
  return out;
}

/// Exact tiny-instance oracle: enumerate all 3^{n_x} sign patterns of x, solve
/// each pattern's reduced normal equations (2 A_F^T A_F + 2 rho I) x_F =
/// 2 A_F^T b - tau * sigma_F by symmetric factorization, discard sign
/// mismatches, and keep the best objective.
inline OracleResult solve_sign_enum(const LassoProblem& p) {
  const Eigen::Index n = p.n_x();
  if (n > 8)
    throw std::invalid_argument("solve_sign_enum: n_x = " + std::to_string(n) +
                                " exceeds the enumeration bound of 8");
  long n_patterns = 1;
  for (Eigen::Index i = 0; i < n; ++i) n_patterns *= 3;

  OracleResult out;
  out.method = OracleMethod::sign_enum;
  out.x = VectorXd::Zero(n);
  out.objective = elastic_net_objective(p, out.x);

  std::vector<int> sign(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> free_idx;
  for (long code = 1; code < n_patterns; ++code) {
    long rem = code;
    free_idx.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = static_cast<int>(rem % 3);  // 0, 1, 2 -> 0, +1, -1
      rem /= 3;
      sign[static_cast<std::size_t>(i)] = (s == 2) ? -1 : s;
      if (s != 0) free_idx.push_back(i);
    }
    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
    MatrixXd af(p.m(), nf);
    VectorXd sig(nf);
    for (Eigen::Index j = 0; j < nf; ++j) {
      af.col(j) = p.A.col(free_idx[static_cast<std::size_t>(j)]);
      sig(j) = sign[static_cast<std::size_t>(free_idx[static_cast<std::size_t>(j)])];
    }
    MatrixXd h = 2.0 * (af.transpose() * af);
    h.diagonal().array() += 2.0 * p.rho;
    Eigen::LLT<MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) continue;
    const VectorXd xf = llt.solve(2.0 * (af.transpose() * p.b) - p.tau * sig);
    bool feasible = true;
    for (Eigen::Index j = 0; j < nf && feasible; ++j)
      feasible = sig(j) * xf(j) >= 0.0;
    if (!feasible) continue;
    VectorXd x = VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < nf; ++j) x(free_idx[static_cast<std::size_t>(j)]) = xf(j);
    const double f = elastic_net_objective(p, x);
    if (f < out.objective) {
      out.objective = f;
      out.x = std::move(x);
    }
    ++out.iterations;
  }
  out.converged = true;
  return out;
}

/// Ground-truth NNQP minimizer assembled from the Lasso oracle as
/// y = (max(x*, 0); max(-x*, 0)); complementarity holds exactly by
/// construction.
inline VectorXd solve_nnqp_oracle(const NnqpProblem& nnqp, const LassoProblem& p,
                                  double tol = 1e-10) {
  const OracleResult res = solve_prox(p, tol);
  if (!res.converged)
    throw std::runtime_error("solve_nnqp_oracle: proximal oracle did not converge");
  VectorXd y(2 * nnqp.n_x);
  y.head(nnqp.n_x) = res.x.cwiseMax(0.0);
  y.tail(nnqp.n_x) = (-res.x).cwiseMax(0.0);
  return y;
}

}  // namespace lassoflow
