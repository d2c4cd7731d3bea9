#include "cuboidtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace ct {

namespace {

bool finite(double v) { return std::isfinite(v); }

void require_axis_aligned(const Cuboid& c, const char* op) {
  if (!c.rotation.is_zero()) {
    fail(ErrorKind::invalid_argument,
         std::string(op) + ": cuboid rotation must be zero; gravity_align it first");
  }
}

}  // namespace

bool is_finite(const Vec3& v) {
  return finite(v.x) && finite(v.y) && finite(v.z);
}

Vec3 component_min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

Vec3 component_max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

std::ostream& operator<<(std::ostream& os, const Vec3& v) {
  return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}

Interval::Interval(double start_, double length_) : start(start_), length(length_) {
  if (!finite(start) || !finite(length)) {
    fail(ErrorKind::invalid_argument, "interval start/length must be finite");
  }
  if (length <= 0.0) {
    std::ostringstream msg;
    msg << "interval length must be positive (got " << length << ")";
    fail(ErrorKind::invalid_argument, msg.str());
  }
}

double interval_intersection(const Interval& a, const Interval& b) {
  // identical slabs overlap by exactly their length; the general formula can
  // be off by one ulp because start + length rounds
  if (a.start == b.start && a.length == b.length) return a.length;
  const double lo = std::max(a.start, b.start);
  const double hi = std::min(a.end(), b.end());
  // clamp to the exact mathematical bound: no overlap exceeds either length
  const double overlap = std::min(std::min(hi - lo, a.length), b.length);
  return std::max(0.0, overlap);
}

double interval_union(const Interval& a, const Interval& b) {
  return a.length + b.length - interval_intersection(a, b);
}

RotationEuler::RotationEuler(double rx_, double ry_, double rz_)
    : rx(rx_), ry(ry_), rz(rz_) {
  constexpr double pi = std::numbers::pi;
  for (double v : {rx, ry, rz}) {
    if (!finite(v) || v < -pi || v > pi) {
      fail(ErrorKind::invalid_argument,
           "euler angles must be finite and within [-pi, pi]");
    }
  }
}

Vec3 Mat3::apply(const Vec3& v) const {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
          m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
      r(i, j) = s;
    }
  }
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
  return r;
}

double Mat3::determinant() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) -
         m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 euler_zyx_matrix(const RotationEuler& r) {
  const double cx = std::cos(r.rx), sx = std::sin(r.rx);
  const double cy = std::cos(r.ry), sy = std::sin(r.ry);
  const double cz = std::cos(r.rz), sz = std::sin(r.rz);
  Mat3 rx, ry, rz;
  rx.m = {1, 0, 0, 0, cx, -sx, 0, sx, cx};
  ry.m = {cy, 0, sy, 0, 1, 0, -sy, 0, cy};
  rz.m = {cz, -sz, 0, sz, cz, 0, 0, 0, 1};
  return rz * ry * rx;
}

Cuboid::Cuboid(const Vec3& anchor_, const Vec3& extents_,
               const RotationEuler& rotation_)
    : anchor(anchor_), extents(extents_), rotation(rotation_) {
  if (!is_finite(anchor)) {
    fail(ErrorKind::invalid_argument, "cuboid anchor must be finite");
  }
  if (!is_finite(extents)) {
    fail(ErrorKind::invalid_argument, "cuboid extents must be finite");
  }
  for (int axis = 0; axis < 3; ++axis) {
    if (extents[axis] <= 0.0) {
      std::ostringstream msg;
      msg << "cuboid extent " << "lwh"[axis] << " must be positive (got "
          << extents[axis] << ")";
      fail(ErrorKind::invalid_argument, msg.str());
    }
  }
  constexpr double pi = std::numbers::pi;
  for (double v : {rotation.rx, rotation.ry, rotation.rz}) {
    if (!finite(v) || v < -pi || v > pi) {
      fail(ErrorKind::invalid_argument,
           "cuboid rotation angles must be finite and within [-pi, pi]");
    }
  }
}

std::array<Vec3, 8> Cuboid::corners() const {
  const Vec3 lo = anchor;
  const Vec3 hi = max_corner();
  return {{{lo.x, lo.y, lo.z},
           {hi.x, lo.y, lo.z},
           {lo.x, hi.y, lo.z},
           {hi.x, hi.y, lo.z},
           {lo.x, lo.y, hi.z},
           {hi.x, lo.y, hi.z},
           {lo.x, hi.y, hi.z},
           {hi.x, hi.y, hi.z}}};
}

std::ostream& operator<<(std::ostream& os, const Cuboid& c) {
  return os << "Cuboid{anchor=" << c.anchor << ", extents=" << c.extents
            << ", rot=(" << c.rotation.rx << ", " << c.rotation.ry << ", "
            << c.rotation.rz << ")}";
}

Pose::Pose(const Mat3& rotation_, const Vec3& translation_)
    : rotation(rotation_), translation(translation_) {
  if (!is_finite(translation)) {
    fail(ErrorKind::invalid_argument, "pose translation must be finite");
  }
  for (double v : rotation.m) {
    if (!finite(v)) {
      fail(ErrorKind::invalid_argument, "pose rotation must be finite");
    }
  }
  constexpr double tol = 1e-6;
  const Mat3 rtr = rotation.transposed() * rotation;
  const Mat3 eye = Mat3::identity();
  for (int i = 0; i < 9; ++i) {
    if (std::abs(rtr.m[i] - eye.m[i]) > tol) {
      fail(ErrorKind::invalid_argument,
           "pose rotation must be orthonormal (R^T R != I)");
    }
  }
  if (std::abs(rotation.determinant() - 1.0) > tol) {
    fail(ErrorKind::invalid_argument,
         "pose rotation must have determinant +1");
  }
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation.transposed();
  return Pose(rt, rt.apply(translation) * -1.0);
}

Pose compose(const Pose& outer, const Pose& inner) {
  return Pose(outer.rotation * inner.rotation,
              outer.rotation.apply(inner.translation) + outer.translation);
}

Intrinsics::Intrinsics(double fx_, double fy_, double cx_, double cy_)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
  if (!finite(fx) || !finite(fy) || !finite(cx) || !finite(cy)) {
    fail(ErrorKind::invalid_argument, "intrinsics must be finite");
  }
  if (fx <= 0.0 || fy <= 0.0) {
    fail(ErrorKind::invalid_argument, "focal lengths must be positive");
  }
}

double cuboid_intersection_volume(const Cuboid& a, const Cuboid& b) {
  require_axis_aligned(a, "cuboid_intersection_volume");
  require_axis_aligned(b, "cuboid_intersection_volume");
  double volume = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    volume *= interval_intersection(a.axis_interval(axis), b.axis_interval(axis));
  }
  return volume;
}

double cuboid_union_volume(const Cuboid& a, const Cuboid& b, UnionMode mode) {
  require_axis_aligned(a, "cuboid_union_volume");
  require_axis_aligned(b, "cuboid_union_volume");
  if (mode == UnionMode::axis_product) {
    double volume = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
      volume *= interval_union(a.axis_interval(axis), b.axis_interval(axis));
    }
    return volume;
  }
  return a.volume() + b.volume() - cuboid_intersection_volume(a, b);
}

double iou3d(const Cuboid& a, const Cuboid& b, UnionMode mode) {
  const double inter = cuboid_intersection_volume(a, b);
  if (inter == 0.0) return 0.0;
  return inter / cuboid_union_volume(a, b, mode);
}

Cuboid gravity_align(const Cuboid& c) {
  if (c.rotation.is_zero()) return c;
  const Mat3 rot = euler_zyx_matrix(c.rotation);
  const Vec3 center = c.centroid();
  Vec3 lo{std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = lo * -1.0;
  for (const Vec3& corner : c.corners()) {
    const Vec3 q = rot.apply(corner - center) + center;
    lo = component_min(lo, q);
    hi = component_max(hi, q);
  }
  return Cuboid(lo, hi - lo);
}

Cuboid transform_to_global(const Cuboid& c, const Pose& pose) {
  const Cuboid aligned = c.rotation.is_zero() ? c : gravity_align(c);
  if (pose == Pose{}) return aligned;
  Vec3 lo{std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = lo * -1.0;
  for (const Vec3& corner : aligned.corners()) {
    const Vec3 q = pose.apply(corner);
    lo = component_min(lo, q);
    hi = component_max(hi, q);
  }
  return Cuboid(lo, hi - lo);
}

Vec3 backproject(double u, double v, double z, const Intrinsics& k) {
  if (!finite(u) || !finite(v) || !finite(z)) {
    fail(ErrorKind::invalid_argument, "backproject inputs must be finite");
  }
  if (z <= 0.0) {
    std::ostringstream msg;
    msg << "depth must be positive (got " << z << ")";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

Pixel project(const Vec3& camera_point, const Intrinsics& k) {
  if (!is_finite(camera_point)) {
    fail(ErrorKind::invalid_argument, "project input must be finite");
  }
  if (camera_point.z <= 0.0) {
    fail(ErrorKind::invalid_argument, "project requires positive depth");
  }
  return {k.fx * camera_point.x / camera_point.z + k.cx,
          k.fy * camera_point.y / camera_point.z + k.cy};
}

}  // namespace ct
