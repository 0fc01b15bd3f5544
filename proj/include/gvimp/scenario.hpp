#pragma once

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gvimp/core.hpp"
#include "gvimp/environment.hpp"
#include "gvimp/gvi_solver.hpp"
#include "gvimp/sdf_io.hpp"

namespace gvimp {

enum class RunMode { gvi, map, both };

/// One planning problem as described by a scenario file.
///
/// Scenario files are flat `key = value` lines; `#` starts a comment, vectors are
/// comma-separated, relative paths resolve against the scenario file's directory.
struct Scenario {
  RobotModel robot = RobotModel::point(0.5);
  std::string sdf_path;
  Vector start;
  Vector goal;
  Index intervals = 14;  // support states = intervals + 1
  double horizon = 14.0;  // defaults to `intervals` (unit time step) when not given
  double qc = 0.8;
  double boundary_precision = 1e6;
  CollisionSpec collision;
  SolverConfig gvi;
  std::optional<double> high_temperature;
  int high_max_iterations = 100;
  bool keep_precision = false;
  SolverConfig map = SolverConfig{.min_backtrack = 0, .max_backtrack = 100};
  RunMode mode = RunMode::gvi;
  unsigned long long seed = 0;
  int samples = 100;
  std::string init_file;

  Index dof() const { return robot.dof(); }
  Index state_dim() const { return 2 * dof(); }

  void validate() const {
    robot.validate();
    collision.validate();
    gvi.validate();
    map.validate();
    if (start.size() != state_dim() || goal.size() != state_dim()) {
      throw ParseError("start and goal must have " + std::to_string(state_dim()) + " components");
    }
    if (intervals < 1) throw ParseError("intervals must be at least 1");
    if (!(horizon > 0.0)) throw ParseError("horizon must be positive");
    if (!(qc > 0.0)) throw ParseError("qc must be positive");
    if (!(boundary_precision > 0.0)) throw ParseError("boundary_precision must be positive");
    if (high_temperature && !(*high_temperature > 0.0)) throw ParseError("high_temperature must be positive");
    if (gvi.init == InitMode::from_file && init_file.empty()) throw ParseError("init = file needs init_file");
    if (samples < 0) throw ParseError("samples must be non-negative");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& text, const std::string& key, std::size_t line) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("'" + key + "': empty number", line);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw ParseError("'" + key + "': cannot parse '" + t + "' as a number", line);
  }
  return v;
}

inline long long parse_integer(const std::string& text, const std::string& key, std::size_t line) {
  const double v = parse_number(text, key, line);
  if (v != std::floor(v)) throw ParseError("'" + key + "': expected an integer, got '" + trim(text) + "'", line);
  return static_cast<long long>(v);
}

inline Vector parse_vector(const std::string& text, const std::string& key, std::size_t line) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(parse_number(item, key, line));
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace detail

/// Parses scenario text. `base_dir` resolves relative sdf/init paths.
inline Scenario parse_scenario(std::istream& in, const std::filesystem::path& base_dir = {}) {
  Scenario s;
  std::string robot_kind = "point2d";
  std::vector<double> link_lengths = {1.0, 1.0};
  std::vector<double> check_fractions = {0.25, 0.5, 0.75, 1.0};
  Vector base = Vector::Zero(2);
  double radius = 0.5;
  bool have_start = false, have_goal = false, have_sdf = false, have_horizon = false;

  std::string raw;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected `key = value`", line_no);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key before '='", line_no);
    if (seen.count(key)) throw ParseError("duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")", line_no);
    seen[key] = line_no;

    auto num = [&] { return detail::parse_number(value, key, line_no); };
    auto integer = [&] { return detail::parse_integer(value, key, line_no); };
    auto vec = [&] { return detail::parse_vector(value, key, line_no); };
    auto path = [&] {
      std::filesystem::path p(value);
      return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
    };

    if (key == "robot") {
      if (value != "point2d" && value != "two_link_arm") throw ParseError("robot must be point2d or two_link_arm", line_no);
      robot_kind = value;
    } else if (key == "link_lengths") {
      const Vector v = vec();
      link_lengths.assign(v.data(), v.data() + v.size());
    } else if (key == "check_fractions") {
      const Vector v = vec();
      check_fractions.assign(v.data(), v.data() + v.size());
    } else if (key == "base") {
      base = vec();
      if (base.size() != 2) throw ParseError("base must have 2 components", line_no);
    } else if (key == "radius") {
      radius = num();
    } else if (key == "sdf") {
      s.sdf_path = path();
      have_sdf = true;
    } else if (key == "start") {
      s.start = vec();
      have_start = true;
    } else if (key == "goal") {
      s.goal = vec();
      have_goal = true;
    } else if (key == "intervals") {
      s.intervals = static_cast<Index>(integer());
    } else if (key == "horizon") {
      s.horizon = num();
      have_horizon = true;
    } else if (key == "qc") {
      s.qc = num();
    } else if (key == "boundary_precision") {
      s.boundary_precision = num();
    } else if (key == "epsilon") {
      s.collision.epsilon = num();
    } else if (key == "sigma_obs") {
      s.collision.sigma_obs = num();
    } else if (key == "temperature") {
      s.gvi.temperature = num();
    } else if (key == "high_temperature") {
      s.high_temperature = num();
    } else if (key == "high_max_iterations") {
      s.high_max_iterations = static_cast<int>(integer());
    } else if (key == "keep_precision") {
      if (value != "true" && value != "false") throw ParseError("keep_precision must be true or false", line_no);
      s.keep_precision = value == "true";
    } else if (key == "step_base") {
      s.gvi.step_base = s.map.step_base = num();
    } else if (key == "max_backtrack") {
      s.gvi.max_backtrack = static_cast<int>(integer());
    } else if (key == "map_max_backtrack") {
      s.map.max_backtrack = static_cast<int>(integer());
    } else if (key == "tolerance") {
      s.gvi.tolerance = s.map.tolerance = num();
    } else if (key == "max_iterations") {
      s.gvi.max_iterations = static_cast<int>(integer());
    } else if (key == "map_max_iterations") {
      s.map.max_iterations = static_cast<int>(integer());
    } else if (key == "quadrature_degree") {
      s.gvi.quadrature_degree = static_cast<int>(integer());
    } else if (key == "init_precision") {
      s.gvi.init_precision = num();
    } else if (key == "init") {
      if (value == "linear") {
        s.gvi.init = InitMode::linear_interpolation;
      } else if (value == "file") {
        s.gvi.init = InitMode::from_file;
      } else {
        throw ParseError("init must be linear or file", line_no);
      }
    } else if (key == "init_file") {
      s.init_file = path();
    } else if (key == "mode") {
      if (value == "gvi") {
        s.mode = RunMode::gvi;
      } else if (value == "map") {
        s.mode = RunMode::map;
      } else if (value == "both") {
        s.mode = RunMode::both;
      } else {
        throw ParseError("mode must be gvi, map or both", line_no);
      }
    } else if (key == "seed") {
      s.seed = static_cast<unsigned long long>(integer());
    } else if (key == "samples") {
      s.samples = static_cast<int>(integer());
    } else {
      throw ParseError("unknown key '" + key + "'", line_no);
    }
  }
  if (!have_sdf) throw ParseError("missing required key 'sdf'");
  if (!have_start) throw ParseError("missing required key 'start'");
  if (!have_goal) throw ParseError("missing required key 'goal'");
  if (!have_horizon) s.horizon = static_cast<double>(s.intervals);

  if (robot_kind == "point2d") {
    s.robot = RobotModel::point(radius);
  } else {
    s.robot = RobotModel{};
    s.robot.kind = RobotKind::two_link_arm;
    s.robot.link_lengths = link_lengths;
    s.robot.radius = radius;
    s.robot.base = Vector2(base(0), base(1));
    for (Index link = 0; link < 2; ++link) {
      for (double f : check_fractions) s.robot.check_points.push_back({link, f});
    }
  }
  s.map.temperature = 1.0;
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  try {
    return parse_scenario(in, std::filesystem::path(path).parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Obstacle description for make-sdf: `rows`, `cols`, `origin = x,y`, `cell_size`,
/// and any number of `rect = xmin,ymin,xmax,ymax` lines.
struct ObstacleSpec {
  Index rows = 0;
  Index cols = 0;
  Vector2 origin = Vector2::Zero();
  double cell_size = 0.0;
  std::vector<Rectangle> rects;
};

inline ObstacleSpec parse_obstacle_spec(std::istream& in) {
  ObstacleSpec spec;
  bool have_rows = false, have_cols = false, have_cell = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected `key = value`", line_no);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "rows") {
      spec.rows = static_cast<Index>(detail::parse_integer(value, key, line_no));
      have_rows = true;
    } else if (key == "cols") {
      spec.cols = static_cast<Index>(detail::parse_integer(value, key, line_no));
      have_cols = true;
    } else if (key == "origin") {
      const Vector v = detail::parse_vector(value, key, line_no);
      if (v.size() != 2) throw ParseError("origin must have 2 components", line_no);
      spec.origin = Vector2(v(0), v(1));
    } else if (key == "cell_size") {
      spec.cell_size = detail::parse_number(value, key, line_no);
      have_cell = true;
    } else if (key == "rect") {
      const Vector v = detail::parse_vector(value, key, line_no);
      if (v.size() != 4) throw ParseError("rect must be xmin,ymin,xmax,ymax", line_no);
      spec.rects.push_back({v(0), v(1), v(2), v(3)});
    } else {
      throw ParseError("unknown key '" + key + "'", line_no);
    }
  }
  if (!have_rows || !have_cols || !have_cell) throw ParseError("obstacle spec needs rows, cols and cell_size");
  return spec;
}

inline SdfGrid make_sdf(const ObstacleSpec& spec) {
  return rasterize_rectangles(spec.rows, spec.cols, spec.origin, spec.cell_size, spec.rects);
}

}  // namespace gvimp
