#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gvimp/core.hpp"

namespace gvimp {

/// 2D signed-distance field sampled on a regular grid.
///
/// Node (row i, col j) sits at origin + cell_size * (j, i); row 0 is the lowest y.
/// Values are signed distances in meters: positive outside obstacles, negative inside.
/// Immutable once built.
class SdfGrid {
 public:
  SdfGrid(Vector2 origin, double cell_size, Index rows, Index cols, std::vector<double> values)
      : origin_(origin), cell_size_(cell_size), rows_(rows), cols_(cols), values_(std::move(values)) {
    if (!(cell_size_ > 0.0)) throw DomainError("SdfGrid: cell_size must be positive");
    if (rows_ < 2 || cols_ < 2) throw DomainError("SdfGrid: need at least 2x2 nodes");
    if (static_cast<Index>(values_.size()) != rows_ * cols_) {
      throw ShapeError("SdfGrid: rows * cols != number of values");
    }
  }

  const Vector2& origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

  double value(Index row, Index col) const {
    return values_.at(static_cast<std::size_t>(row * cols_ + col));
  }

  Vector2 node_position(Index row, Index col) const {
    return origin_ + cell_size_ * Vector2(static_cast<double>(col), static_cast<double>(row));
  }

  Vector2 upper_corner() const { return node_position(rows_ - 1, cols_ - 1); }

  bool contains(const Vector2& p) const {
    const Vector2 hi = upper_corner();
    return p.x() >= origin_.x() && p.y() >= origin_.y() && p.x() <= hi.x() && p.y() <= hi.y();
  }

 private:
  Vector2 origin_;
  double cell_size_;
  Index rows_;
  Index cols_;
  std::vector<double> values_;
};

struct SdfSample {
  double distance = 0.0;
  Vector2 gradient = Vector2::Zero();
};

/// Bilinear interpolation of the field and the exact gradient of the bilinear patch.
inline SdfSample sdf_query(const SdfGrid& grid, const Vector2& p) {
  if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || !grid.contains(p)) {
    std::ostringstream msg;
    msg << "sdf_query: point (" << p.x() << ", " << p.y() << ") lies outside the grid";
    throw OutOfBoundsError(msg.str(), p);
  }
  const double fx = (p.x() - grid.origin().x()) / grid.cell_size();
  const double fy = (p.y() - grid.origin().y()) / grid.cell_size();
  const Index col = std::clamp<Index>(static_cast<Index>(std::floor(fx)), 0, grid.cols() - 2);
  const Index row = std::clamp<Index>(static_cast<Index>(std::floor(fy)), 0, grid.rows() - 2);
  const double tx = fx - static_cast<double>(col);
  const double ty = fy - static_cast<double>(row);

  const double v00 = grid.value(row, col);
  const double v01 = grid.value(row, col + 1);
  const double v10 = grid.value(row + 1, col);
  const double v11 = grid.value(row + 1, col + 1);

  SdfSample s;
  s.distance = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v01 + (1 - tx) * ty * v10 + tx * ty * v11;
  s.gradient.x() = ((1 - ty) * (v01 - v00) + ty * (v11 - v10)) / grid.cell_size();
  s.gradient.y() = ((1 - tx) * (v10 - v00) + tx * (v11 - v01)) / grid.cell_size();
  return s;
}

/// Hinge loss: 0 when y >= eps, eps - y below the margin.
inline double hinge(double y, double eps) { return y >= eps ? 0.0 : eps - y; }

/// d hinge / dy, with the kink y == eps assigned to the flat branch.
inline double hinge_slope(double y, double eps) { return y >= eps ? 0.0 : -1.0; }

enum class RobotKind { point2d, two_link_arm };

/// A collision ball on link `link` (0-based) at `fraction` of its length.
struct CheckPoint {
  Index link = 0;
  double fraction = 1.0;
};

/// Planar robot covered by balls of a common radius.
struct RobotModel {
  RobotKind kind = RobotKind::point2d;
  std::vector<double> link_lengths;  // two_link_arm only
  std::vector<CheckPoint> check_points;
  double radius = 0.5;
  Vector2 base = Vector2::Zero();

  static RobotModel point(double radius) {
    RobotModel m;
    m.kind = RobotKind::point2d;
    m.radius = radius;
    return m;
  }

  /// Two-link arm with `balls_per_link` balls spread evenly up to each link's tip.
  static RobotModel two_link_arm(double l1, double l2, double radius, Index balls_per_link,
                                 Vector2 base = Vector2::Zero()) {
    RobotModel m;
    m.kind = RobotKind::two_link_arm;
    m.link_lengths = {l1, l2};
    m.radius = radius;
    m.base = base;
    for (Index link = 0; link < 2; ++link) {
      for (Index b = 1; b <= balls_per_link; ++b) {
        m.check_points.push_back({link, static_cast<double>(b) / static_cast<double>(balls_per_link)});
      }
    }
    return m;
  }

  /// Configuration dimension (= dof of the GP prior).
  Index dof() const { return 2; }
  Index num_balls() const { return kind == RobotKind::point2d ? 1 : static_cast<Index>(check_points.size()); }

  void validate() const {
    if (!(radius > 0.0)) throw DomainError("RobotModel: radius must be positive");
    if (kind == RobotKind::two_link_arm) {
      if (link_lengths.size() != 2) throw ShapeError("RobotModel: two_link_arm needs two link lengths");
      for (double l : link_lengths) {
        if (!(l > 0.0)) throw DomainError("RobotModel: link lengths must be positive");
      }
      if (check_points.empty()) throw DomainError("RobotModel: two_link_arm needs check points");
      for (const auto& c : check_points) {
        if (c.link < 0 || c.link > 1) throw DomainError("RobotModel: check point link out of range");
        if (c.fraction < 0.0 || c.fraction > 1.0) throw DomainError("RobotModel: check fraction outside [0, 1]");
      }
    }
  }
};

/// Ball centers and d(center)/d(configuration) for each ball.
struct Kinematics {
  std::vector<Vector2> centers;
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> jacobians;
};

inline Kinematics forward_kinematics_with_jacobian(const RobotModel& model, const Vector& config) {
  if (config.size() != model.dof()) {
    throw ShapeError("forward_kinematics: configuration has size " + std::to_string(config.size()) +
                     ", expected " + std::to_string(model.dof()));
  }
  Kinematics k;
  if (model.kind == RobotKind::point2d) {
    k.centers.emplace_back(config(0), config(1));
    k.jacobians.push_back(Eigen::Matrix<double, 2, Eigen::Dynamic>::Identity(2, 2));
    return k;
  }
  // Joint angles are counterclockwise from +x; the second is relative to link 1.
  const double a1 = config(0);
  const double a12 = config(0) + config(1);
  const Vector2 u1(std::cos(a1), std::sin(a1));
  const Vector2 n1(-std::sin(a1), std::cos(a1));
  const Vector2 u2(std::cos(a12), std::sin(a12));
  const Vector2 n2(-std::sin(a12), std::cos(a12));
  const double l1 = model.link_lengths[0];
  const double l2 = model.link_lengths[1];
  for (const auto& c : model.check_points) {
    Eigen::Matrix<double, 2, Eigen::Dynamic> j(2, 2);
    if (c.link == 0) {
      k.centers.push_back(model.base + c.fraction * l1 * u1);
      j.col(0) = c.fraction * l1 * n1;
      j.col(1).setZero();
    } else {
      k.centers.push_back(model.base + l1 * u1 + c.fraction * l2 * u2);
      j.col(0) = l1 * n1 + c.fraction * l2 * n2;
      j.col(1) = c.fraction * l2 * n2;
    }
    k.jacobians.push_back(j);
  }
  return k;
}

inline std::vector<Vector2> forward_kinematics(const RobotModel& model, const Vector& config) {
  return forward_kinematics_with_jacobian(model, config).centers;
}

/// Safety margin eps and isotropic observation covariance sigma_obs * I.
struct CollisionSpec {
  double epsilon = 0.7;
  double sigma_obs = 0.004;

  void validate() const {
    if (!(epsilon >= 0.0)) throw DomainError("CollisionSpec: epsilon must be non-negative");
    if (!(sigma_obs > 0.0)) throw DomainError("CollisionSpec: sigma_obs must be positive");
  }
};

struct CollisionResult {
  Vector h;         // one entry per ball
  Matrix jacobian;  // balls x state_dim; velocity columns are zero
};

/// h(x) = hinge(d(FK(x)) - r, eps) per ball for one full support state x = [q; q_dot].
inline CollisionResult collision_vector(const SdfGrid& grid, const RobotModel& model,
                                        const CollisionSpec& spec, const Vector& state) {
  const Index dof = model.dof();
  if (state.size() != 2 * dof) throw ShapeError("collision_vector: state must have size 2 * dof");
  const Kinematics k = forward_kinematics_with_jacobian(model, state.head(dof));
  const Index m = static_cast<Index>(k.centers.size());
  CollisionResult out{Vector::Zero(m), Matrix::Zero(m, 2 * dof)};
  for (Index b = 0; b < m; ++b) {
    const SdfSample s = sdf_query(grid, k.centers[static_cast<std::size_t>(b)]);
    const double clearance = s.distance - model.radius;
    out.h(b) = hinge(clearance, spec.epsilon);
    const double slope = hinge_slope(clearance, spec.epsilon);
    if (slope != 0.0) {
      out.jacobian.row(b).head(dof) = slope * s.gradient.transpose() * k.jacobians[static_cast<std::size_t>(b)];
    }
  }
  return out;
}

/// Collision hinge values only, skipping the Jacobian.
inline Vector collision_hinge(const SdfGrid& grid, const RobotModel& model, const CollisionSpec& spec,
                              const Vector& state) {
  const Index dof = model.dof();
  if (state.size() != 2 * dof) throw ShapeError("collision_hinge: state must have size 2 * dof");
  if (model.kind == RobotKind::point2d) {
    Vector h(1);
    h(0) = hinge(sdf_query(grid, Vector2(state(0), state(1))).distance - model.radius, spec.epsilon);
    return h;
  }
  const auto centers = forward_kinematics(model, state.head(dof));
  Vector h(static_cast<Index>(centers.size()));
  for (std::size_t b = 0; b < centers.size(); ++b) {
    h(static_cast<Index>(b)) = hinge(sdf_query(grid, centers[b]).distance - model.radius, spec.epsilon);
  }
  return h;
}

}  // namespace gvimp
