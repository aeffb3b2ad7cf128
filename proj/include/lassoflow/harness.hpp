// LassoFlow - prescribed-time elastic-net Lasso solver via Newton KKT flows
// Copyright 2026 LassoFlow Contributors
// Licensed under Apache 2.0

#pragma once

#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lassoflow/integrate.hpp"
#include "lassoflow/oracle.hpp"
#include "lassoflow/problem.hpp"
#include "lassoflow/svg.hpp"

namespace lassoflow {

enum class ExperimentKind { prescribed_times, initial_conditions, single };

/// Parameters for a batch experiment. Instance i is generated with seed
/// `seed + i`, so a config fully determines its problem set.
struct ExperimentConfig {
  int n_x = 10;
  int m = 20;
  double tau = 1.0;
  double rho = 0.1;
  int n_problems = 100;
  std::uint64_t seed = 42;
  ExperimentKind experiment = ExperimentKind::prescribed_times;
  std::vector<double> t_p_list = {1.0, 0.8, 0.6, 0.4, 0.2, 0.1};
  std::vector<double> init_scales = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  std::filesystem::path output_dir = "out";
  double rtol = 1e-8;
  double atol = 1e-12;
  int threads = 0;  // 0 -> hardware concurrency
  bool write_plots = true;
};

/// Draw a Lasso instance with i.i.d. standard normal A and b from a seeded
/// generator. Fill order is A row-major then b, so a seed pins the instance.
inline LassoProblem gen_instance(int n_x, int m, double tau, double rho,
                                 std::uint64_t seed) {
  if (n_x < 1 || m < 1)
    throw std::invalid_argument("gen_instance: n_x and m must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd a(m, n_x);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n_x; ++j) a(i, j) = normal(rng);
  VectorXd b(m);
  for (int i = 0; i < m; ++i) b(i) = normal(rng);
  return LassoProblem(std::move(a), std::move(b), tau, rho);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

// shortest round-trippable decimal representation
inline void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// One row per sample: t, residual norm, ||x(t) - x*||_2, min z entry, min w
/// entry. Values are written with shortest round-trip precision.
inline void export_csv(const Trajectory& traj, const VectorXd& x_oracle,
                       const std::filesystem::path& path) {
  std::string body = "t,residual_norm,error_vs_oracle,min_z,min_w\n";
  for (const auto& s : traj.samples) {
    detail::append_double(body, s.t);
    body += ',';
    detail::append_double(body, s.residual_norm);
    body += ',';
    detail::append_double(body, (s.x - x_oracle).norm());
    body += ',';
    detail::append_double(body, s.z.minCoeff());
    body += ',';
    detail::append_double(body, s.w.minCoeff());
    body += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path.string());
  out << body;
  if (!out) throw std::runtime_error("failed writing CSV file: " + path.string());
}

struct CsvRow {
  double t, residual_norm, error_vs_oracle, min_z, min_w;
};

inline std::vector<CsvRow> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CsvRow r{};
    double* fields[5] = {&r.t, &r.residual_norm, &r.error_vs_oracle, &r.min_z,
                         &r.min_w};
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int f = 0; f < 5; ++f) {
      auto res = std::from_chars(p, end, *fields[f]);
      if (res.ec != std::errc{})
        throw std::runtime_error("malformed CSV row in " + path.string());
      p = res.ptr;
      if (f < 4 && p < end && *p == ',') ++p;
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment batches
// ---------------------------------------------------------------------------

/// Outcome of one (instance, setting) integration.
struct RunRecord {
  int problem_id = 0;
  std::uint64_t seed = 0;
  double t_p = 0.0;
  double init_scale = 1.0;
  double norm0 = 0.0;               // ||u(0)||
  double predicted_settle = 0.0;    // arctan(norm0) / k
  std::optional<double> settle_time;
  double final_error_inf = 0.0;     // ||x(T_p) - x*||_inf
  double final_error_l2 = 0.0;
  double min_z = 0.0;
  double min_w = 0.0;
  IntegrationStats stats;
  std::string csv_path;
  std::string status = "ok";        // "ok" or an error message
};

struct ExperimentReport {
  std::string experiment;
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  double max_final_error_inf = 0.0;
  double max_settle_time = 0.0;
  double min_state_entry = 0.0;
  double max_settle_mismatch = 0.0;  // |measured - predicted|, settled runs
  int n_failed = 0;
  bool pass = false;
  std::string figure_note;
};

/// Run fn(i) for i in [0, n) on a small worker pool. Worker count never
/// changes the result: each index owns its slot and nothing is shared.
inline void parallel_for_indexed(int n, int threads,
                                 const std::function<void(int)>& fn) {
  int nt = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nt = std::max(1, std::min(nt, n));
  if (nt == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  for (int w = 0; w < nt; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

namespace detail {

inline std::string run_csv_name(const char* tag, int problem_id, double setting) {
  std::ostringstream name;
  name << "instance_" << problem_id << '_' << tag << '_' << setting << ".csv";
  return name.str();
}

struct SingleRunOutput {
  RunRecord record;
  std::vector<double> sample_t;
  std::vector<double> sample_err;  // ||x(t) - x*||_2 per sample, for plots
};

inline SingleRunOutput run_one(const LassoProblem& problem, const NnqpProblem& nnqp,
                               const VectorXd& x_star, int problem_id,
                               std::uint64_t seed, double t_p, double init_scale,
                               const ExperimentConfig& cfg,
                               const std::filesystem::path& csv_path) {
  SingleRunOutput out;
  RunRecord& rec = out.record;
  rec.problem_id = problem_id;
  rec.seed = seed;
  rec.t_p = t_p;
  rec.init_scale = init_scale;
  rec.csv_path = csv_path.string();

  FlowParams params = FlowParams::from_settling_time(t_p);
  params.rtol = cfg.rtol;
  params.atol = cfg.atol;
  FlowState init;
  init.z = VectorXd::Constant(nnqp.dim(), init_scale);
  init.w = VectorXd::Constant(nnqp.dim(), init_scale);
  rec.norm0 = kkt_residual(nnqp, init).norm;
  rec.predicted_settle = analytic_settling_time(rec.norm0, params.k);

  try {
    const Trajectory traj =
        integrate_flow(nnqp, init, params, uniform_sample_times(t_p));
    if (traj.status != IntegrationStatus::ok) rec.status = "step_underflow";
    rec.settle_time = traj.settle_time;
    rec.stats = traj.stats;
    const auto& last = traj.samples.back();
    rec.final_error_inf = (last.x - x_star).lpNorm<Eigen::Infinity>();
    rec.final_error_l2 = (last.x - x_star).norm();
    rec.min_z = std::numeric_limits<double>::infinity();
    rec.min_w = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.samples) {
      rec.min_z = std::min(rec.min_z, s.z.minCoeff());
      rec.min_w = std::min(rec.min_w, s.w.minCoeff());
      out.sample_t.push_back(s.t);
      out.sample_err.push_back((s.x - x_star).norm());
    }
    export_csv(traj, x_star, csv_path);
  } catch (const std::exception& e) {
    rec.status = e.what();
  }
  return out;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return nlohmann::json{
      {"n_x", c.n_x},           {"m", c.m},
      {"tau", c.tau},           {"rho", c.rho},
      {"n_problems", c.n_problems}, {"seed", c.seed},
      {"t_p_list", c.t_p_list}, {"init_scales", c.init_scales},
      {"output_dir", c.output_dir.string()}, {"rtol", c.rtol},
      {"atol", c.atol},         {"threads", c.threads}};
}

inline nlohmann::json record_to_json(const RunRecord& r) {
  nlohmann::json j{{"problem_id", r.problem_id},
                   {"seed", r.seed},
                   {"t_p", r.t_p},
                   {"init_scale", r.init_scale},
                   {"norm0", r.norm0},
                   {"predicted_settle", r.predicted_settle},
                   {"final_error_inf", r.final_error_inf},
                   {"final_error_l2", r.final_error_l2},
                   {"min_z", r.min_z},
                   {"min_w", r.min_w},
                   {"steps_accepted", r.stats.steps_accepted},
                   {"steps_rejected", r.stats.steps_rejected},
                   {"linear_solves", r.stats.linear_solves},
                   {"fallback_solves", r.stats.fallback_solves},
                   {"csv", r.csv_path},
                   {"status", r.status}};
  if (r.settle_time)
    j["settle_time"] = *r.settle_time;
  else
    j["settle_time"] = nullptr;
  return j;
}

inline void write_report_json(const ExperimentReport& rep,
                              const std::filesystem::path& path) {
  nlohmann::json j{{"schema_version", 1},
                   {"experiment", rep.experiment},
                   {"config", config_to_json(rep.config)},
                   {"figure_note", rep.figure_note},
                   {"aggregate",
                    {{"n_runs", rep.runs.size()},
                     {"n_failed", rep.n_failed},
                     {"max_final_error_inf", rep.max_final_error_inf},
                     {"max_settle_time", rep.max_settle_time},
                     {"min_state_entry", rep.min_state_entry},
                     {"max_settle_mismatch", rep.max_settle_mismatch},
                     {"pass", rep.pass}}}};
  j["runs"] = nlohmann::json::array();
  for (const auto& r : rep.runs) j["runs"].push_back(record_to_json(r));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << j.dump(2) << '\n';
}

// Shared driver: one experiment is a (instance x setting) grid where a setting
// is either a prescribed time or an initial-condition scale.
inline ExperimentReport run_batch(const ExperimentConfig& cfg, const char* name,
                                  const char* tag, const std::vector<double>& settings,
                                  bool settings_are_times) {
  if (settings.empty())
    throw std::invalid_argument(std::string(name) + ": settings list must be non-empty");
  namespace fs = std::filesystem;
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const fs::path plot_dir = dir / "plots";
  if (cfg.write_plots) fs::create_directories(plot_dir);

  ExperimentReport rep;
  rep.experiment = name;
  rep.config = cfg;
  rep.figure_note =
      "per-instance plots are emitted for every problem id; overlay.svg stacks "
      "all instances with one color per setting";

  const int n_inst = cfg.n_problems;
  const int n_set = static_cast<int>(settings.size());
  std::vector<SingleRunOutput> outputs(static_cast<std::size_t>(n_inst * n_set));

  parallel_for_indexed(n_inst, cfg.threads, [&](int i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const LassoProblem problem = gen_instance(cfg.n_x, cfg.m, cfg.tau, cfg.rho, seed);
    const NnqpProblem nnqp = build_nnqp(problem);
    const OracleResult oracle = solve_prox(problem, 1e-10);
    std::vector<SvgSeries> series;
    for (int s = 0; s < n_set; ++s) {
      const double setting = settings[static_cast<std::size_t>(s)];
      const double t_p = settings_are_times ? setting : 1.0;
      const double scale = settings_are_times ? 1.0 : setting;
      const fs::path csv = dir / run_csv_name(tag, i, setting);
      auto out = run_one(problem, nnqp, oracle.x, i, seed, t_p, scale, cfg, csv);
      std::ostringstream label;
      label << tag << " = " << setting;
      series.push_back(SvgSeries{label.str(), out.sample_t, out.sample_err, "", 1.5});
      outputs[static_cast<std::size_t>(i * n_set + s)] = std::move(out);
    }
    if (cfg.write_plots) {
      SvgChartOptions opt;
      std::ostringstream title;
      title << name << ", instance " << i;
      opt.title = title.str();
      opt.y_label = "||x(t) - x*||_2 (log scale)";
      if (settings_are_times) opt.markers = settings;
      std::ostringstream fname;
      fname << "instance_" << i << ".svg";
      render_svg_chart(series, opt, plot_dir / fname.str());
    }
  });

  // deterministic merge ordered by (problem id, setting)
  rep.min_state_entry = std::numeric_limits<double>::infinity();
  for (auto& out : outputs) {
    const RunRecord& r = out.record;
    if (r.status != "ok") ++rep.n_failed;
    rep.max_final_error_inf = std::max(rep.max_final_error_inf, r.final_error_inf);
    if (r.settle_time) {
      rep.max_settle_time = std::max(rep.max_settle_time, *r.settle_time);
      rep.max_settle_mismatch = std::max(
          rep.max_settle_mismatch, std::abs(*r.settle_time - r.predicted_settle));
    }
    rep.min_state_entry = std::min({rep.min_state_entry, r.min_z, r.min_w});
    rep.runs.push_back(r);
  }

  if (cfg.write_plots) {
    std::vector<SvgSeries> overlay;
    for (int s = 0; s < n_set; ++s) {
      std::ostringstream label;
      label << tag << " = " << settings[static_cast<std::size_t>(s)];
      for (int i = 0; i < n_inst; ++i) {
        const auto& out = outputs[static_cast<std::size_t>(i * n_set + s)];
        overlay.push_back(SvgSeries{i == 0 ? label.str() : "", out.sample_t,
                                    out.sample_err, detail::palette(static_cast<std::size_t>(s)),
                                    0.6});
      }
    }
    SvgChartOptions opt;
    opt.title = std::string(name) + ", all instances";
    opt.y_label = "||x(t) - x*||_2 (log scale)";
    if (settings_are_times) opt.markers = settings;
    render_svg_chart(overlay, opt, plot_dir / "overlay.svg");
  }

  // pass/fail mirrors the aggregate thresholds the experiments are judged by:
  // every run settled within its T_p with final error <= 1e-6, predicted and
  // measured settle times within 1e-4, and states nonnegative to 1e-9.
  bool ok = rep.n_failed == 0 && rep.max_final_error_inf <= 1e-6 &&
            rep.min_state_entry >= -1e-9 && rep.max_settle_mismatch <= 1e-4;
  for (const auto& r : rep.runs)
    ok = ok && r.settle_time.has_value() && *r.settle_time <= r.t_p;
  rep.pass = ok;

  write_report_json(rep, dir / "report.json");
  return rep;
}

}  // namespace detail

/// Prescribed-settling-time sweep: every instance is integrated once per T_p
/// in config.t_p_list from the all-ones start.
inline ExperimentReport run_experiment_1(const ExperimentConfig& config) {
  return detail::run_batch(config, "prescribed_times", "tp", config.t_p_list, true);
}

/// Initial-condition sweep: every instance is integrated with T_p = 1 from
/// (z, w) = scale * ones for each scale in config.init_scales.
inline ExperimentReport run_experiment_2(const ExperimentConfig& config) {
  return detail::run_batch(config, "initial_conditions", "scale", config.init_scales,
                           false);
}

/// Flags take precedence over the JSON config file; this only fills fields
/// present in the file.
inline void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  if (j.contains("n_x")) cfg.n_x = j.at("n_x").get<int>();
  if (j.contains("m")) cfg.m = j.at("m").get<int>();
  if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
  if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
  if (j.contains("n_problems")) cfg.n_problems = j.at("n_problems").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("t_p_list")) cfg.t_p_list = j.at("t_p_list").get<std::vector<double>>();
  if (j.contains("init_scales"))
    cfg.init_scales = j.at("init_scales").get<std::vector<double>>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("rtol")) cfg.rtol = j.at("rtol").get<double>();
  if (j.contains("atol")) cfg.atol = j.at("atol").get<double>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  nlohmann::json j;
  in >> j;
  ExperimentConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

}  // namespace lassoflow
