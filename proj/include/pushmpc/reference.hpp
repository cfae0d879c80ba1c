#pragma once

// Reference trajectory generation: C1 planar pose paths (position plus
// heading tangent), arc-length parametrized at constant speed and rigidly
// placed so the trajectory starts at a given pose. Shapes: straight line,
// constant-curvature arc (radius 0.4 m), and a Gerono lemniscate scaled to a
// 0.5 m x 0.25 m box (closed, traversed periodically).

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "pushmpc/planar.hpp"

namespace pushmpc {

enum class PathKind { Line, Curve, Eight };

inline const char* to_string(PathKind k) {
  switch (k) {
    case PathKind::Line: return "line";
    case PathKind::Curve: return "curve";
    case PathKind::Eight: return "eight";
  }
  return "?";
}

class ReferenceTrajectory {
 public:
  /// Pose (x, y, theta) at time t; t clamps to [0, duration], theta is
  /// continuous (unwrapped along the path).
  Eigen::Vector3d sample(double t) const {
    const double tc = std::min(std::max(t, 0.0), duration_);
    const double u = tc / dt_;
    const std::size_t i = std::min(static_cast<std::size_t>(u), poses_.size() - 2);
    const double a = u - static_cast<double>(i);
    return (1.0 - a) * poses_[i] + a * poses_[i + 1];
  }

  double duration() const { return duration_; }
  double dt() const { return dt_; }
  const std::vector<Eigen::Vector3d>& samples() const { return poses_; }

  static ReferenceTrajectory generate(PathKind kind, double mean_velocity, double duration,
                                      const PlanarPose& start, double sample_dt = 1e-3);

 private:
  std::vector<Eigen::Vector3d> poses_;
  double dt_{1e-3};
  double duration_{0.0};
};

namespace detail {

struct CurvePoint {
  Eigen::Vector2d p;
  double heading;
};

/// Canonical-frame point at arc length s.
inline CurvePoint canonical_point(PathKind kind, double s, double total_needed,
                                  const std::vector<double>* eight_s,
                                  const std::vector<Eigen::Vector2d>* eight_p,
                                  const std::vector<double>* eight_h) {
  switch (kind) {
    case PathKind::Line:
      return {{s, 0.0}, 0.0};
    case PathKind::Curve: {
      const double R = 0.4;
      const double a = s / R;
      return {{R * std::sin(a), R * (1.0 - std::cos(a))}, a};
    }
    case PathKind::Eight: {
      const double S = eight_s->back();
      double sw = std::fmod(s, S);
      if (sw < 0) sw += S;
      const int loops = static_cast<int>(std::floor(s / S));
      const auto it = std::upper_bound(eight_s->begin(), eight_s->end(), sw);
      std::size_t i = std::min<std::size_t>(
          std::max<std::ptrdiff_t>(it - eight_s->begin() - 1, 0), eight_s->size() - 2);
      const double seg = (*eight_s)[i + 1] - (*eight_s)[i];
      const double a = seg > 0 ? (sw - (*eight_s)[i]) / seg : 0.0;
      Eigen::Vector2d p = (1.0 - a) * (*eight_p)[i] + a * (*eight_p)[i + 1];
      const double h0 = (*eight_h)[i];
      const double h1 = unwrap_near((*eight_h)[i + 1], h0);
      (void)total_needed;
      (void)loops;  // net heading winding of a figure eight is zero
      return {p, (1.0 - a) * h0 + a * h1};
    }
  }
  return {{0, 0}, 0};
}

}  // namespace detail

inline ReferenceTrajectory ReferenceTrajectory::generate(PathKind kind, double mean_velocity,
                                                         double duration, const PlanarPose& start,
                                                         double sample_dt) {
  if (!(mean_velocity > 0.0)) throw std::invalid_argument("reference: mean_velocity > 0");
  if (!(duration > 0.0)) throw std::invalid_argument("reference: duration > 0");

  // Tabulate the lemniscate once in its canonical frame, starting at the
  // center crossing. Gerono: (A cos u, A sin u cos u), box 2A x A.
  std::vector<double> es;
  std::vector<Eigen::Vector2d> ep;
  std::vector<double> eh;
  if (kind == PathKind::Eight) {
    const double A = 0.25;
    const int n = 40000;
    es.reserve(n + 1);
    ep.reserve(n + 1);
    eh.reserve(n + 1);
    double acc = 0.0;
    Eigen::Vector2d prev;
    double prev_h = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double u = kPi / 2.0 + 2.0 * kPi * i / n;
      const Eigen::Vector2d p(A * std::cos(u), A * std::sin(u) * std::cos(u));
      const Eigen::Vector2d d(-A * std::sin(u), A * std::cos(2.0 * u));
      double h = std::atan2(d.y(), d.x());
      if (i > 0) {
        acc += (p - prev).norm();
        h = unwrap_near(h, prev_h);
      }
      es.push_back(acc);
      ep.push_back(p);
      eh.push_back(h);
      prev = p;
      prev_h = h;
    }
  }

  // Rigid transform mapping the canonical start (point + heading) onto the
  // requested start pose.
  const detail::CurvePoint c0 =
      detail::canonical_point(kind, 0.0, 0.0, &es, &ep, &eh);
  const double rot = start.theta - c0.heading;
  const Eigen::Matrix2d R = rot2(rot);
  const Eigen::Vector2d off = start.position() - R * c0.p;

  ReferenceTrajectory out;
  out.dt_ = sample_dt;
  out.duration_ = duration;
  const int steps = static_cast<int>(std::ceil(duration / sample_dt)) + 1;
  out.poses_.reserve(steps + 1);
  double prev_heading = start.theta;
  for (int i = 0; i <= steps; ++i) {
    const double s = mean_velocity * sample_dt * i;
    const auto cp = detail::canonical_point(kind, s, 0.0, &es, &ep, &eh);
    const Eigen::Vector2d p = R * cp.p + off;
    double heading = unwrap_near(cp.heading + rot, prev_heading);
    prev_heading = heading;
    out.poses_.push_back(Eigen::Vector3d(p.x(), p.y(), heading));
  }

  // Feasibility guard: constant-speed parametrization can only be violated by
  // interpolation artifacts; check the sample-to-sample speed anyway.
  for (std::size_t i = 0; i + 1 < out.poses_.size(); ++i) {
    const double v =
        (out.poses_[i + 1].head<2>() - out.poses_[i].head<2>()).norm() / sample_dt;
    if (v > 2.0 * mean_velocity) {
      throw std::logic_error("reference: instantaneous speed exceeds 2x mean velocity");
    }
  }
  return out;
}

}  // namespace pushmpc
