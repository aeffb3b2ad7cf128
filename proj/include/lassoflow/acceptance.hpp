// LassoFlow - prescribed-time elastic-net Lasso solver via Newton KKT flows
// Copyright 2026 LassoFlow Contributors
// Licensed under Apache 2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lassoflow/harness.hpp"

namespace lassoflow {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AcceptanceOptions {
  std::filesystem::path output_dir = "acceptance_out";
  int threads = 0;  // 0 -> hardware concurrency
};

namespace acceptance {

namespace detail {

inline ExperimentConfig paper_scale_config(const AcceptanceOptions& opt,
                                           const char* subdir) {
  ExperimentConfig cfg;  // n_x=10, m=20, tau=1, rho=0.1, n=100, seed=42
  cfg.output_dir = opt.output_dir / subdir;
  cfg.threads = opt.threads;
  cfg.write_plots = false;
  return cfg;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace detail

/// Experiment (1) at paper scale: every (instance, T_p) run reaches the oracle
/// solution to 1e-6 in the infinity norm and settles no later than T_p.
inline CriterionResult criterion_1(const AcceptanceOptions& opt,
                                   ExperimentReport& rep_out) {
  CriterionResult r{1, "experiment 1: prescribed settling times", false, ""};
  ExperimentConfig cfg = detail::paper_scale_config(opt, "exp1");
  rep_out = run_experiment_1(cfg);
  bool settled = true;
  double worst_settle_slack = -std::numeric_limits<double>::infinity();
  for (const auto& run : rep_out.runs) {
    settled = settled && run.status == "ok" && run.settle_time.has_value();
    if (run.settle_time)
      worst_settle_slack = std::max(worst_settle_slack, *run.settle_time - run.t_p);
  }
  r.pass = settled && rep_out.max_final_error_inf <= 1e-6 && worst_settle_slack <= 0.0;
  r.detail = "max |x(T_p)-x*|_inf = " + detail::fmt(rep_out.max_final_error_inf) +
             ", worst settle-T_p = " + detail::fmt(worst_settle_slack) + " over " +
             std::to_string(rep_out.runs.size()) + " runs";
  return r;
}

/// Experiment (2): all init scales settle by t = 1 and the measured settle
/// time matches arctan(||u(0)||)/k to 1e-4.
inline CriterionResult criterion_2(const AcceptanceOptions& opt,
                                   ExperimentReport& rep_out) {
  CriterionResult r{2, "experiment 2: initial-condition independence", false, ""};
  ExperimentConfig cfg = detail::paper_scale_config(opt, "exp2");
  cfg.experiment = ExperimentKind::initial_conditions;
  rep_out = run_experiment_2(cfg);
  bool settled = true;
  for (const auto& run : rep_out.runs)
    settled = settled && run.status == "ok" && run.settle_time.has_value() &&
              *run.settle_time <= 1.0;
  r.pass = settled && rep_out.max_settle_mismatch <= 1e-4;
  r.detail = "max settle time = " + detail::fmt(rep_out.max_settle_time) +
             ", max |measured-predicted| = " +
             detail::fmt(rep_out.max_settle_mismatch);
  return r;
}

struct NormLawStats {
  double max_norm_dev = 0.0;   // |arctan||u(t)|| - (arctan||u(0)|| - k t)|
  double max_ray_drift = 0.0;  // angular drift of (u1; u2) direction, radians
};

/// Shared sweep for criteria 3 and 4: 20 paper-scale instances, T_p = 1,
/// sampled states compared against the closed-form residual law and the
/// constancy of the residual direction, before settling.
inline NormLawStats norm_law_sweep(const AcceptanceOptions& opt) {
  NormLawStats out;
  std::vector<NormLawStats> per(20);
  parallel_for_indexed(20, opt.threads, [&](int i) {
    const LassoProblem p = gen_instance(10, 20, 1.0, 0.1, 42 + static_cast<std::uint64_t>(i));
    const NnqpProblem nnqp = build_nnqp(p);
    const FlowParams params = FlowParams::from_settling_time(1.0);
    FlowState init;
    init.z = VectorXd::Ones(nnqp.dim());
    init.w = VectorXd::Ones(nnqp.dim());
    const Residual res0 = kkt_residual(nnqp, init);
    const double theta0 = std::atan(res0.norm);
    VectorXd u0(2 * nnqp.dim());
    u0.head(nnqp.dim()) = res0.u1;
    u0.tail(nnqp.dim()) = res0.u2;
    u0.normalize();

    const Trajectory traj = integrate_flow(nnqp, init, params, uniform_sample_times(1.0));
    NormLawStats st;
    for (const auto& s : traj.samples) {
      if (traj.settle_time && s.t >= *traj.settle_time) continue;
      st.max_norm_dev = std::max(
          st.max_norm_dev, std::abs(std::atan(s.residual_norm) - (theta0 - params.k * s.t)));
      const Residual res = kkt_residual(nnqp, FlowState{s.z, s.w, s.t});
      VectorXd u(2 * nnqp.dim());
      u.head(nnqp.dim()) = res.u1;
      u.tail(nnqp.dim()) = res.u2;
      u.normalize();
      const double dot = std::clamp(u.dot(u0), -1.0, 1.0);
      const double ang = std::atan2((u - dot * u0).norm(), dot);
      st.max_ray_drift = std::max(st.max_ray_drift, ang);
    }
    per[static_cast<std::size_t>(i)] = st;
  });
  for (const auto& st : per) {
    out.max_norm_dev = std::max(out.max_norm_dev, st.max_norm_dev);
    out.max_ray_drift = std::max(out.max_ray_drift, st.max_ray_drift);
  }
  return out;
}

inline CriterionResult criterion_3(const NormLawStats& st) {
  CriterionResult r{3, "norm law: arctan residual decays linearly at rate k", false, ""};
  r.pass = st.max_norm_dev <= 1e-6;
  r.detail = "max deviation = " + detail::fmt(st.max_norm_dev) + " (<= 1e-6)";
  return r;
}

inline CriterionResult criterion_4(const NormLawStats& st) {
  CriterionResult r{4, "ray invariance: residual direction is constant", false, ""};
  r.pass = st.max_ray_drift <= 1e-6;
  r.detail = "max angular drift = " + detail::fmt(st.max_ray_drift) + " rad (<= 1e-6)";
  return r;
}

inline CriterionResult criterion_5(const ExperimentReport& rep1,
                                   const ExperimentReport& rep2) {
  CriterionResult r{5, "nonnegativity of z and w along all trajectories", false, ""};
  const double m = std::min(rep1.min_state_entry, rep2.min_state_entry);
  r.pass = m >= -1e-9;
  r.detail = "min state entry = " + detail::fmt(m) + " (>= -1e-9)";
  return r;
}

/// Flow, proximal-gradient, and sign-enumeration solutions agree pairwise on
/// small instances, and the flow's NNQP solution is complementary.
inline CriterionResult criterion_6(const AcceptanceOptions& opt) {
  CriterionResult r{6, "oracle equivalence on small instances", false, ""};
  std::vector<double> max_pair(50, 0.0), max_comp(50, 0.0);
  std::vector<int> failed(50, 0);
  parallel_for_indexed(50, opt.threads, [&](int i) {
    const LassoProblem p = gen_instance(5, 10, 1.0, 0.1, 7000 + static_cast<std::uint64_t>(i));
    const NnqpProblem nnqp = build_nnqp(p);
    const OracleResult prox = solve_prox(p, 1e-10);
    const OracleResult enm = solve_sign_enum(p);
    FlowState init;
    init.z = VectorXd::Ones(nnqp.dim());
    init.w = VectorXd::Ones(nnqp.dim());
    const Trajectory traj = integrate_flow(nnqp, init, FlowParams::from_settling_time(1.0),
                                           uniform_sample_times(1.0));
    if (!prox.converged || !traj.settle_time) {
      failed[static_cast<std::size_t>(i)] = 1;
      return;
    }
    const VectorXd& x_flow = traj.samples.back().x;
    const VectorXd& z = traj.samples.back().z;
    double pair = (prox.x - enm.x).lpNorm<Eigen::Infinity>();
    pair = std::max(pair, (x_flow - prox.x).lpNorm<Eigen::Infinity>());
    pair = std::max(pair, (x_flow - enm.x).lpNorm<Eigen::Infinity>());
    max_pair[static_cast<std::size_t>(i)] = pair;
    max_comp[static_cast<std::size_t>(i)] =
        z.head(nnqp.n_x).cwiseProduct(z.tail(nnqp.n_x)).lpNorm<Eigen::Infinity>();
  });
  double pair = 0.0, comp = 0.0;
  int nfail = 0;
  for (int i = 0; i < 50; ++i) {
    pair = std::max(pair, max_pair[static_cast<std::size_t>(i)]);
    comp = std::max(comp, max_comp[static_cast<std::size_t>(i)]);
    nfail += failed[static_cast<std::size_t>(i)];
  }
  r.pass = nfail == 0 && pair <= 1e-6 && comp <= 1e-8;
  r.detail = "max pairwise |dx|_inf = " + detail::fmt(pair) +
             ", max complementarity = " + detail::fmt(comp);
  return r;
}

/// The arctan settling bound pi/(2k) is strictly tighter than the generic
/// two-power bound 2/k1 + 2/k2 with k1 = sqrt(2) k, k2 = 2 sqrt(2) k.
inline CriterionResult criterion_7() {
  CriterionResult r{7, "settling bound tightness", false, ""};
  bool ok = true;
  std::ostringstream os;
  os.precision(6);
  for (double k : {std::numbers::pi / 2.0, 5.0 * std::numbers::pi / 4.0,
                   5.0 * std::numbers::pi}) {
    const double k1 = std::sqrt(2.0) * k;
    const double k2 = 2.0 * std::sqrt(2.0) * k;
    const double tight = std::numbers::pi / (2.0 * k);
    const double generic = 2.0 / k1 + 2.0 / k2;
    ok = ok && tight < generic;
    os << "k=" << k << ": " << tight << " < " << generic << "; ";
  }
  r.pass = ok;
  r.detail = os.str();
  return r;
}

/// Prescribed-time Newton flow on random strongly convex quadratics: the
/// gradient norm at T_p = 1 (k = pi/2) is below 1e-6.
inline CriterionResult criterion_8(const AcceptanceOptions& opt) {
  CriterionResult r{8, "unconstrained Newton flow on quadratics", false, ""};
  std::vector<double> grad_norm(20, 0.0);
  parallel_for_indexed(20, opt.threads, [&](int i) {
    std::mt19937_64 rng(8000 + static_cast<std::uint64_t>(i));
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = 2 + static_cast<int>(rng() % 49);  // 2..50
    MatrixXd g(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) g(a, b) = normal(rng);
    MatrixXd pmat = g.transpose() * g / static_cast<double>(n);
    pmat.diagonal().array() += 0.5;
    pmat = 0.5 * (pmat + pmat.transpose()).eval();
    VectorXd c(n), x0(n);
    for (int a = 0; a < n; ++a) c(a) = normal(rng);
    for (int a = 0; a < n; ++a) x0(a) = 2.0 * normal(rng);

    QuadraticNewtonFlow sys(pmat, c, std::numbers::pi / 2.0);
    const FlowParams params = FlowParams::from_settling_time(1.0);
    const OdeRun run = integrate_ode(sys, x0, params, uniform_sample_times(1.0));
    grad_norm[static_cast<std::size_t>(i)] = run.samples.back().residual_norm;
  });
  double worst = 0.0;
  for (double gn : grad_norm) worst = std::max(worst, gn);
  r.pass = worst <= 1e-6;
  r.detail = "max ||grad f(x(T_p))|| = " + detail::fmt(worst) + " (<= 1e-6)";
  return r;
}

}  // namespace acceptance

/// Run all acceptance criteria, printing one pass/fail line per criterion.
/// Returns the results; callers exit nonzero when any failed.
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                                   std::ostream& os) {
  std::filesystem::create_directories(opt.output_dir);
  std::vector<CriterionResult> results;
  auto emit = [&](const CriterionResult& r) {
    os << (r.pass ? "PASS" : "FAIL") << "  criterion " << r.id << ": " << r.name
       << "  [" << r.detail << "]\n";
    os.flush();
    results.push_back(r);
  };

  ExperimentReport rep1, rep2;
  emit(acceptance::criterion_1(opt, rep1));
  emit(acceptance::criterion_2(opt, rep2));
  const acceptance::NormLawStats st = acceptance::norm_law_sweep(opt);
  emit(acceptance::criterion_3(st));
  emit(acceptance::criterion_4(st));
  emit(acceptance::criterion_5(rep1, rep2));
  emit(acceptance::criterion_6(opt));
  emit(acceptance::criterion_7());
  emit(acceptance::criterion_8(opt));
  return results;
}

}  // namespace lassoflow
