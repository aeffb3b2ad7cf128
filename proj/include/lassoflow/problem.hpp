// LassoFlow - prescribed-time elastic-net Lasso solver via Newton KKT flows
// Copyright 2026 LassoFlow Contributors
// Licensed under Apache 2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"

namespace lassoflow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Elastic-net regression instance:
///   minimize  ||A x - b||^2 + tau * ||x||_1 + rho * ||x||^2
/// over x in R^{n_x}. Immutable after construction; construction validates.
struct LassoProblem {
  MatrixXd A;
  VectorXd b;
  double tau;
  double rho;

  LassoProblem(MatrixXd A_in, VectorXd b_in, double tau_in, double rho_in)
      : A(std::move(A_in)), b(std::move(b_in)), tau(tau_in), rho(rho_in) {
    if (A.rows() < 1 || A.cols() < 1)
      throw std::invalid_argument("LassoProblem: 'A' must be at least 1 x 1");
    if (!A.allFinite())
      throw std::invalid_argument("LassoProblem: 'A' contains non-finite entries");
    if (b.size() != A.rows())
      throw std::invalid_argument("LassoProblem: 'b' has length " +
                                  std::to_string(b.size()) + " but 'A' has " +
                                  std::to_string(A.rows()) + " rows");
    if (!b.allFinite())
      throw std::invalid_argument("LassoProblem: 'b' contains non-finite entries");
    if (!(tau > 0.0) || !std::isfinite(tau))
      throw std::invalid_argument("LassoProblem: 'tau' must be positive and finite");
    // rho = 0 is rejected even for full-column-rank A: the stacked splitting below
    // always has (v; v) in the kernel of the A^T A block, so only rho*I keeps the
    // quadratic form definite and the flow's mass matrix invertible.
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("LassoProblem: 'rho' must be positive and finite");
  }

  Eigen::Index n_x() const { return A.cols(); }
  Eigen::Index m() const { return A.rows(); }
};

/// Smooth nonnegative QP over y = (x+; x-) >= 0:
///   minimize (1/2) y^T Q y + q^T y
/// with Q symmetric positive definite by construction.
struct NnqpProblem {
  MatrixXd Q;
  VectorXd q;
  Eigen::Index n_x;

  NnqpProblem(MatrixXd Q_in, VectorXd q_in, Eigen::Index n_x_in)
      : Q(std::move(Q_in)), q(std::move(q_in)), n_x(n_x_in) {
    if (n_x < 1) throw std::invalid_argument("NnqpProblem: n_x must be >= 1");
    if (Q.rows() != 2 * n_x || Q.cols() != 2 * n_x)
      throw std::invalid_argument("NnqpProblem: Q must be 2*n_x square");
    if (q.size() != 2 * n_x)
      throw std::invalid_argument("NnqpProblem: q must have length 2*n_x");
    if (Q != Q.transpose())
      throw std::invalid_argument("NnqpProblem: Q must be exactly symmetric");
    if (Eigen::LLT<MatrixXd>(Q).info() != Eigen::Success)
      throw std::invalid_argument("NnqpProblem: Q must be positive definite");
  }

  Eigen::Index dim() const { return 2 * n_x; }
};

/// Recovered minimizer of a LassoProblem together with diagnostics.
struct Solution {
  VectorXd x;
  double objective = 0.0;
  double kkt_residual_norm = 0.0;
};

/// Exact elastic-net objective of Eq-form ||Ax-b||^2 + tau*||x||_1 + rho*||x||^2.
inline double elastic_net_objective(const LassoProblem& p, const VectorXd& x) {
  if (x.size() != p.n_x())
    throw std::invalid_argument("elastic_net_objective: x has length " +
                                std::to_string(x.size()) + " but problem has n_x = " +
                                std::to_string(p.n_x()));
  return (p.A * x - p.b).squaredNorm() + p.tau * x.lpNorm<1>() + p.rho * x.squaredNorm();
}

/// Splitting objective g(x+, x-) = ||A(x+ - x-) - b||^2 + tau*1^T(x+; x-)
/// + rho*||x+||^2 + rho*||x-||^2, evaluated directly. Equals the NNQP quadratic
/// form plus b^T b on the nonnegative orthant; tests lean on that identity.
inline double split_objective(const LassoProblem& p, const VectorXd& x_plus,
                              const VectorXd& x_minus) {
  if (x_plus.size() != p.n_x() || x_minus.size() != p.n_x())
    throw std::invalid_argument("split_objective: x+ / x- must have length n_x");
  return (p.A * (x_plus - x_minus) - p.b).squaredNorm() +
         p.tau * (x_plus.sum() + x_minus.sum()) + p.rho * x_plus.squaredNorm() +
         p.rho * x_minus.squaredNorm();
}

/// Build the nonnegative QP equivalent to the elastic net.
///
/// Expanding the splitting objective into (1/2) y^T Q y + q^T y + b^T b gives
///   Q = 2 * ([A^T A, -A^T A; -A^T A, A^T A] + rho I),
///   q = (-2 A^T b + tau 1; 2 A^T b + tau 1).
/// Q is assembled from a single exactly-symmetric copy of A^T A so that
/// Q == Q^T holds bitwise.
inline NnqpProblem build_nnqp(const LassoProblem& p) {
  const Eigen::Index n = p.n_x();
  MatrixXd S = MatrixXd::Zero(n, n);
  S.selfadjointView<Eigen::Lower>().rankUpdate(p.A.transpose());
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();

  MatrixXd Q(2 * n, 2 * n);
  Q.topLeftCorner(n, n) = 2.0 * S;
  Q.bottomRightCorner(n, n) = 2.0 * S;
  Q.topRightCorner(n, n) = -2.0 * S;
  Q.bottomLeftCorner(n, n) = -2.0 * S;
  Q.diagonal().array() += 2.0 * p.rho;

  const VectorXd atb = p.A.transpose() * p.b;
  VectorXd q(2 * n);
  q.head(n) = -2.0 * atb + VectorXd::Constant(n, p.tau);
  q.tail(n) = 2.0 * atb + VectorXd::Constant(n, p.tau);
  return NnqpProblem(std::move(Q), std::move(q), n);
}

/// x = z[0..n_x) - z[n_x..2*n_x): undo the positive/negative split.
inline VectorXd recover_solution(const NnqpProblem& nnqp, const VectorXd& z) {
  if (z.size() != nnqp.dim())
    throw std::invalid_argument("recover_solution: z has length " +
                                std::to_string(z.size()) + " but NNQP dimension is " +
                                std::to_string(nnqp.dim()));
  return z.head(nnqp.n_x) - z.tail(nnqp.n_x);
}

/// (1/2) y^T Q y + q^T y.
inline double nnqp_objective(const NnqpProblem& nnqp, const VectorXd& y) {
  if (y.size() != nnqp.dim())
    throw std::invalid_argument("nnqp_objective: y has length " +
                                std::to_string(y.size()) + " but NNQP dimension is " +
                                std::to_string(nnqp.dim()));
  return 0.5 * y.dot(nnqp.Q * y) + nnqp.q.dot(y);
}

// ---------------------------------------------------------------------------
// Problem file format (JSON): {"A": [[...]], "b": [...], "tau": t, "rho": r}
// ---------------------------------------------------------------------------

inline LassoProblem problem_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  auto fail = [](const std::string& msg) -> void {
    throw std::invalid_argument("problem file: " + msg);
  };
  if (!j.is_object()) fail("top level must be a JSON object");
  for (const char* key : {"A", "b", "tau", "rho"})
    if (!j.contains(key)) fail(std::string("missing field '") + key + "'");

  const json& ja = j.at("A");
  if (!ja.is_array() || ja.empty()) fail("field 'A' must be a non-empty array of rows");
  const std::size_t rows = ja.size();
  if (!ja.at(0).is_array() || ja.at(0).empty())
    fail("field 'A' rows must be non-empty arrays");
  const std::size_t cols = ja.at(0).size();
  MatrixXd A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = ja.at(i);
    if (!row.is_array() || row.size() != cols)
      fail("field 'A' row " + std::to_string(i) + " has inconsistent length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row.at(c).is_number())
        fail("field 'A' entry (" + std::to_string(i) + "," + std::to_string(c) +
             ") is not a number");
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          row.at(c).get<double>();
    }
  }

  const json& jb = j.at("b");
  if (!jb.is_array()) fail("field 'b' must be an array");
  VectorXd b(static_cast<Eigen::Index>(jb.size()));
  for (std::size_t i = 0; i < jb.size(); ++i) {
    if (!jb.at(i).is_number())
      fail("field 'b' entry " + std::to_string(i) + " is not a number");
    b(static_cast<Eigen::Index>(i)) = jb.at(i).get<double>();
  }
  if (b.size() != A.rows())
    fail("field 'b' has length " + std::to_string(b.size()) + " but 'A' has " +
         std::to_string(A.rows()) + " rows");

  if (!j.at("tau").is_number()) fail("field 'tau' must be a number");
  if (!j.at("rho").is_number()) fail("field 'rho' must be a number");
  const double tau = j.at("tau").get<double>();
  const double rho = j.at("rho").get<double>();
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("field 'tau' must be > 0");
  if (!(rho > 0.0) || !std::isfinite(rho)) fail("field 'rho' must be > 0");
  if (!A.allFinite()) fail("field 'A' contains non-finite entries");
  if (!b.allFinite()) fail("field 'b' contains non-finite entries");
  return LassoProblem(std::move(A), std::move(b), tau, rho);
}

inline nlohmann::json problem_to_json(const LassoProblem& p) {
  nlohmann::json ja = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.A.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < p.A.cols(); ++c) row.push_back(p.A(i, c));
    ja.push_back(std::move(row));
  }
  nlohmann::json jb = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.b.size(); ++i) jb.push_back(p.b(i));
  return nlohmann::json{{"A", std::move(ja)}, {"b", std::move(jb)},
                        {"tau", p.tau}, {"rho", p.rho}};
}

inline LassoProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("problem file: " + path.string() +
                                " is not valid JSON: " + e.what());
  }
  return problem_from_json(j);
}

inline void save_problem(const LassoProblem& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write problem file: " + path.string());
  out << problem_to_json(p).dump(2) << '\n';
}

}  // namespace lassoflow
