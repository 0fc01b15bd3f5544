#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gvimp/core.hpp"
#include "gvimp/factors.hpp"
#include "gvimp/gp_prior.hpp"
#include "gvimp/gvi_solver.hpp"
#include "gvimp/map_baseline.hpp"
#include "gvimp/scenario.hpp"
#include "gvimp/sdf_io.hpp"
#include "gvimp/sparse_gaussian.hpp"

namespace gvimp {

/// -2 ln(1 - 0.997): squared Mahalanobis radius of the 0.997 region of a 2D Gaussian.
inline const double kEllipseChi2 = -2.0 * std::log(1.0 - 0.997);

/// Prior, map and factor graph built from a scenario.
struct PlanningProblem {
  std::shared_ptr<const SdfGrid> sdf;
  PriorSpec prior;
  FactorGraph graph;
};

inline PlanningProblem build_problem(const Scenario& s, std::shared_ptr<const SdfGrid> sdf) {
  PlanningProblem p;
  p.sdf = std::move(sdf);
  const Index d = s.state_dim();
  p.prior.model = LtiModel::constant_velocity(s.dof(), s.qc);
  p.prior.grid = TimeGrid::uniform(s.intervals, s.horizon);
  p.prior.mean = interpolate_states(s.start, s.goal, p.prior.grid);
  p.prior.k0_inv = s.boundary_precision * Matrix::Identity(d, d);
  p.prior.kN_inv = p.prior.k0_inv;
  auto model = std::make_shared<const CollisionModel>(CollisionModel{p.sdf, s.robot, s.collision});
  p.graph = build_planning_graph(p.prior, model);
  return p;
}

inline PlanningProblem build_problem(const Scenario& s) {
  return build_problem(s, std::make_shared<const SdfGrid>(load_sdf(s.sdf_path)));
}

/// Reads a trajectory in mean.csv layout (header, then `t, state...` per support state).
inline Vector read_trajectory_csv(std::istream& in, Index num_states, Index state_dim) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trajectory file is empty");
  Vector out(num_states * state_dim);
  Index row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    if (row >= num_states) throw ParseError("more rows than support states", line_no);
    const Vector v = detail::parse_vector(line, "trajectory", line_no);
    if (v.size() != state_dim + 1) {
      throw ParseError("expected " + std::to_string(state_dim + 1) + " columns, got " + std::to_string(v.size()), line_no);
    }
    out.segment(row * state_dim, state_dim) = v.tail(state_dim);
    ++row;
  }
  if (row != num_states) {
    throw ParseError("expected " + std::to_string(num_states) + " rows, got " + std::to_string(row));
  }
  return out;
}

inline Vector initial_mean(const Scenario& s, const PlanningProblem& p) {
  if (s.gvi.init == InitMode::linear_interpolation) return p.prior.mean;
  std::ifstream in(s.init_file);
  if (!in) throw IoError("cannot open init file '" + s.init_file + "'");
  try {
    return read_trajectory_csv(in, p.graph.num_states, p.graph.state_dim);
  } catch (const ParseError& e) {
    throw ParseError(s.init_file + ": " + e.what());
  }
}

/// One GVI solve with a name for the cost trace ("gvi", or "low"/"high" for two phases).
struct GviPhase {
  std::string name;
  double temperature = 1.0;
  GviResult result;
};

struct GviRun {
  std::vector<GviPhase> phases;
  const GviResult& final() const { return phases.back().result; }
};

inline GviRun run_gvi(const Scenario& s, const PlanningProblem& p) {
  const GaussianTrajectory init = GaussianTrajectory::isotropic(initial_mean(s, p), p.graph.state_dim, s.gvi.init_precision);
  GviRun run;
  if (!s.high_temperature) {
    run.phases.push_back({"gvi", s.gvi.temperature, optimize(p.graph, init, s.gvi)});
    return run;
  }
  SolverConfig high = s.gvi;
  high.temperature = *s.high_temperature;
  high.max_iterations = s.high_max_iterations;
  TwoPhaseResult two = two_phase_replan(p.graph, init, s.gvi, high, s.keep_precision);
  run.phases.push_back({"low", s.gvi.temperature, std::move(two.low)});
  run.phases.push_back({"high", high.temperature, std::move(two.high)});
  return run;
}

inline MapResult run_map(const Scenario& s, const PlanningProblem& p) {
  return gauss_newton_solve(p.graph, initial_mean(s, p), s.map);
}

/// sum_i ||h(mu_i)||^2 / (2 sigma_obs): deterministic collision cost of a trajectory.
inline double collision_cost_at(const FactorGraph& graph, const Vector& x) { return map_cost_breakdown(graph, x).collision; }

/// Center, semi-axes and major-axis angle of the 0.997 region of a 2x2 covariance.
struct Ellipse {
  Vector2 center;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double angle = 0.0;  // radians, major axis from the +x axis
};

inline Ellipse confidence_ellipse(const Vector2& center, const Matrix2& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix2> eig(0.5 * (cov + cov.transpose()));
  const Vector2 values = eig.eigenvalues().cwiseMax(0.0);  // ascending
  const Vector2 major = eig.eigenvectors().col(1);
  return {center, std::sqrt(kEllipseChi2 * values(1)), std::sqrt(kEllipseChi2 * values(0)),
          std::atan2(major.y(), major.x())};
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline std::string state_header(Index dof) {
  std::string h;
  for (Index k = 0; k < dof; ++k) h += ",q" + std::to_string(k);
  for (Index k = 0; k < dof; ++k) h += ",dq" + std::to_string(k);
  return h;
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& out, const TimeGrid& grid, const Vector& x, Index state_dim) {
  out << "t" << detail::state_header(state_dim / 2) << "\n";
  for (Index i = 0; i < grid.num_states(); ++i) {
    out << detail::fmt(grid.at(i));
    for (Index k = 0; k < state_dim; ++k) out << "," << detail::fmt(x(i * state_dim + k));
    out << "\n";
  }
}

inline void write_covariance_csv(std::ostream& out, const PartialCovariance& cov) {
  const Index d = cov.blocks.block_dim();
  out << "state";
  for (Index r = 0; r < d; ++r) {
    for (Index c = 0; c < d; ++c) out << ",c" << r << "_" << c;
  }
  out << "\n";
  for (Index i = 0; i < cov.num_blocks(); ++i) {
    out << i;
    for (Index r = 0; r < d; ++r) {
      for (Index c = 0; c < d; ++c) out << "," << detail::fmt(cov.diag(i)(r, c));
    }
    out << "\n";
  }
}

inline void write_ellipses_csv(std::ostream& out, const Vector& mean, const PartialCovariance& cov) {
  const Index d = cov.blocks.block_dim();
  out << "state,cx,cy,semi_major,semi_minor,angle\n";
  for (Index i = 0; i < cov.num_blocks(); ++i) {
    const Ellipse e = confidence_ellipse(mean.segment<2>(i * d), cov.diag(i).topLeftCorner<2, 2>());
    out << i << "," << detail::fmt(e.center.x()) << "," << detail::fmt(e.center.y()) << "," << detail::fmt(e.semi_major)
        << "," << detail::fmt(e.semi_minor) << "," << detail::fmt(e.angle) << "\n";
  }
}

/// `count` draws from N(mean, precision^{-1}), one row per (sample, support state).
inline void write_samples_csv(std::ostream& out, const TimeGrid& grid, const GaussianTrajectory& traj, int count,
                              unsigned long long seed) {
  const Index d = traj.precision.block_dim();
  const LdlFactorization ldl = ldl_decompose(traj.precision);
  std::mt19937_64 rng(seed);
  out << "sample,state,t" << detail::state_header(d / 2) << "\n";
  for (int m = 0; m < count; ++m) {
    const Vector x = sample_gaussian(ldl, traj.mean, rng);
    for (Index i = 0; i < grid.num_states(); ++i) {
      out << m << "," << i << "," << detail::fmt(grid.at(i));
      for (Index k = 0; k < d; ++k) out << "," << detail::fmt(x(i * d + k));
      out << "\n";
    }
  }
}

inline void write_costs_csv(std::ostream& out, const std::vector<GviPhase>& phases) {
  out << "phase,iteration,prior,collision,entropy,total,R\n";
  for (const GviPhase& ph : phases) {
    for (std::size_t it = 0; it < ph.result.history.size(); ++it) {
      const CostReport& c = ph.result.history[it];
      out << ph.name << "," << it << "," << detail::fmt(c.prior) << "," << detail::fmt(c.collision) << ","
          << detail::fmt(c.entropy) << "," << detail::fmt(c.total) << "," << c.exponent << "\n";
    }
  }
}

inline void write_map_costs_csv(std::ostream& out, const MapResult& r) {
  out << "iteration,prior,collision,total,R\n";
  for (std::size_t it = 0; it < r.history.size(); ++it) {
    const MapCost& c = r.history[it];
    out << it << "," << detail::fmt(c.prior) << "," << detail::fmt(c.collision) << "," << detail::fmt(c.total()) << ","
        << r.exponents[it] << "\n";
  }
}

/// Final costs of a run, one `key = value` per line under `[gvi]` / `[map]` headings.
/// MP = Prior + Collision, Total = MP + Entropy; `collision_at_mean` is the
/// deterministic hinge cost at the mean with T = 1.
inline void write_summary(std::ostream& out, const PlanningProblem& p, const GviRun* gvi, const MapResult* map) {
  if (gvi) {
    const CostReport& c = gvi->final().history.back();
    const double mp = c.prior + c.collision;
    out << "[gvi]\n";
    out << "Prior = " << detail::fmt(c.prior) << "\n";
    out << "Collision = " << detail::fmt(c.collision) << "\n";
    out << "MP = " << detail::fmt(mp) << "\n";
    out << "Entropy = " << detail::fmt(c.entropy) << "\n";
    out << "Total = " << detail::fmt(mp + c.entropy) << "\n";
    out << "temperature = " << detail::fmt(gvi->phases.back().temperature) << "\n";
    out << "collision_at_mean = " << detail::fmt(collision_cost_at(p.graph, gvi->final().trajectory.mean)) << "\n";
    out << "status = " << to_string(gvi->final().status) << "\n";
    out << "iterations = " << gvi->final().iterations << "\n";
  }
  if (map) {
    const MapCost& c = map->history.back();
    out << "[map]\n";
    out << "Prior = " << detail::fmt(c.prior) << "\n";
    out << "Collision = " << detail::fmt(c.collision) << "\n";
    out << "MP = " << detail::fmt(c.total()) << "\n";
    out << "status = " << to_string(map->status) << "\n";
    out << "iterations = " << map->iterations << "\n";
  }
}

/// summary.txt as section -> key -> value text.
using Summary = std::map<std::string, std::map<std::string, std::string>>;

inline Summary parse_summary(std::istream& in) {
  Summary out;
  std::string section, line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("summary: expected `key = value`: " + line);
    out[section][detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

struct RunOptions {
  std::string out_dir = ".";
  std::optional<RunMode> mode = std::nullopt;
  std::optional<int> samples = std::nullopt;
  std::optional<unsigned long long> seed = std::nullopt;
};

struct RunOutcome {
  int exit_code = 0;
  std::optional<GviRun> gvi;
  std::optional<MapResult> map;
};

/// Solves the scenario and writes the result files. Exit code 2 when a solver
/// stopped because no backtracking step decreased the cost.
inline RunOutcome run_scenario(Scenario s, const RunOptions& opt, std::ostream& log) {
  if (opt.mode) s.mode = *opt.mode;
  if (opt.samples) s.samples = *opt.samples;
  if (opt.seed) s.seed = *opt.seed;
  s.validate();
  const PlanningProblem p = build_problem(s);
  const bool want_gvi = s.mode != RunMode::map;
  const bool want_map = s.mode != RunMode::gvi;

  RunOutcome outcome;
  if (want_gvi && want_map) {
    // The two solvers share only read-only inputs.
    auto map_future = std::async(std::launch::async, [&] { return run_map(s, p); });
    outcome.gvi = run_gvi(s, p);
    outcome.map = map_future.get();
  } else if (want_gvi) {
    outcome.gvi = run_gvi(s, p);
  } else {
    outcome.map = run_map(s, p);
  }

  const std::filesystem::path dir(opt.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  if (outcome.gvi) {
    const GaussianTrajectory& traj = outcome.gvi->final().trajectory;
    const PartialCovariance cov = partial_inverse(ldl_decompose(traj.precision));
    auto mean_out = detail::open_output(dir / "mean.csv");
    write_trajectory_csv(mean_out, p.prior.grid, traj.mean, p.graph.state_dim);
    auto cov_out = detail::open_output(dir / "cov.csv");
    write_covariance_csv(cov_out, cov);
    auto ell_out = detail::open_output(dir / "ellipses.csv");
    write_ellipses_csv(ell_out, traj.mean, cov);
    auto samples_out = detail::open_output(dir / "samples.csv");
    write_samples_csv(samples_out, p.prior.grid, traj, s.samples, s.seed);
    auto costs_out = detail::open_output(dir / "costs.csv");
    write_costs_csv(costs_out, outcome.gvi->phases);
    for (const GviPhase& ph : outcome.gvi->phases) {
      log << "gvi[" << ph.name << "]: " << to_string(ph.result.status) << " after " << ph.result.iterations
          << " iterations, total " << detail::fmt(ph.result.history.back().total) << "\n";
      if (ph.result.status == SolverStatus::no_progress) outcome.exit_code = 2;
    }
  }
  if (outcome.map) {
    auto mean_out = detail::open_output(dir / "map_mean.csv");
    write_trajectory_csv(mean_out, p.prior.grid, outcome.map->x, p.graph.state_dim);
    auto costs_out = detail::open_output(dir / "map_costs.csv");
    write_map_costs_csv(costs_out, *outcome.map);
    log << "map: " << to_string(outcome.map->status) << " after " << outcome.map->iterations << " iterations, cost "
        << detail::fmt(outcome.map->history.back().total()) << "\n";
    if (outcome.map->status == SolverStatus::no_progress) outcome.exit_code = 2;
  }
  auto summary_out = detail::open_output(dir / "summary.txt");
  write_summary(summary_out, p, outcome.gvi ? &*outcome.gvi : nullptr, outcome.map ? &*outcome.map : nullptr);
  if (outcome.exit_code == 2) log << "error: solver made no progress (no backtracking step decreased the cost)\n";
  return outcome;
}

}  // namespace gvimp
