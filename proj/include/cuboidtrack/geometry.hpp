#pragma once

#include <array>
#include <iosfwd>

#include "cuboidtrack/error.hpp"

namespace ct {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int axis) const {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3&) const = default;
};

bool is_finite(const Vec3& v);
Vec3 component_min(const Vec3& a, const Vec3& b);
Vec3 component_max(const Vec3& a, const Vec3& b);
std::ostream& operator<<(std::ostream& os, const Vec3& v);

/// Half-open slab [start, start + length) on one axis. Length is strictly
/// positive; degenerate slabs are rejected at construction.
struct Interval {
  double start;
  double length;

  Interval(double start_, double length_);
  double end() const { return start + length; }
};

/// Overlap length of two slabs; 0 when they are disjoint (or merely touch).
double interval_intersection(const Interval& a, const Interval& b);

/// Combined covered length: a.length + b.length - overlap. Equals the plain
/// sum when the slabs are disjoint.
double interval_union(const Interval& a, const Interval& b);

/// Euler angles in radians, each within [-pi, pi], applied in intrinsic
/// Z*Y*X order about the cuboid centroid.
struct RotationEuler {
  double rx = 0.0;
  double ry = 0.0;
  double rz = 0.0;

  RotationEuler() = default;
  RotationEuler(double rx_, double ry_, double rz_);

  bool is_zero() const { return rx == 0.0 && ry == 0.0 && rz == 0.0; }
  bool operator==(const RotationEuler&) const = default;
};

/// Row-major 3x3 matrix, just enough linear algebra for rigid transforms.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }
  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }
  Vec3 apply(const Vec3& v) const;
  Mat3 operator*(const Mat3& o) const;
  Mat3 transposed() const;
  double determinant() const;
  bool operator==(const Mat3&) const = default;
};

Mat3 euler_zyx_matrix(const RotationEuler& r);

/// 9-DOF box: minimum-corner anchor, strictly positive extents along the
/// +x/+y/+z axes, and an Euler rotation about the centroid. A zero rotation
/// means the box is axis-aligned as stored.
struct Cuboid {
  Vec3 anchor;
  Vec3 extents;
  RotationEuler rotation;

  Cuboid(const Vec3& anchor_, const Vec3& extents_,
         const RotationEuler& rotation_ = RotationEuler{});

  Vec3 max_corner() const { return anchor + extents; }
  Vec3 centroid() const { return anchor + extents * 0.5; }
  double volume() const { return extents.x * extents.y * extents.z; }
  Interval axis_interval(int axis) const {
    return Interval(anchor[axis], extents[axis]);
  }
  /// Corners of the stored axis-aligned body; rotation is not applied.
  std::array<Vec3, 8> corners() const;
  bool operator==(const Cuboid&) const = default;
};

std::ostream& operator<<(std::ostream& os, const Cuboid& c);

/// Rigid camera-to-world transform. The rotation must be orthonormal with
/// determinant +1 within 1e-6; checked at construction.
struct Pose {
  Mat3 rotation;
  Vec3 translation;

  Pose() = default;
  Pose(const Mat3& rotation_, const Vec3& translation_);

  Vec3 apply(const Vec3& p) const { return rotation.apply(p) + translation; }
  Pose inverse() const;
  bool operator==(const Pose&) const = default;
};

/// compose(outer, inner) maps x to outer(inner(x)).
Pose compose(const Pose& outer, const Pose& inner);

struct Intrinsics {
  double fx;
  double fy;
  double cx;
  double cy;

  Intrinsics(double fx_, double fy_, double cx_, double cy_);
  bool operator==(const Intrinsics&) const = default;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

enum class UnionMode {
  axis_product,         // per-axis union lengths multiplied together
  inclusion_exclusion,  // vol(a) + vol(b) - vol(a n b)
};

/// Overlap volume of two axis-aligned cuboids (rotations must be zero;
/// gravity_align first). Product of the three per-axis overlaps.
double cuboid_intersection_volume(const Cuboid& a, const Cuboid& b);

double cuboid_union_volume(const Cuboid& a, const Cuboid& b,
                           UnionMode mode = UnionMode::axis_product);

/// Intersection-over-union of two axis-aligned cuboids, in [0, 1].
/// Symmetric; 0 when the boxes are disjoint on any axis; 1 iff identical.
double iou3d(const Cuboid& a, const Cuboid& b,
             UnionMode mode = UnionMode::axis_product);

/// Applies the stored rotation to the corners about the centroid and returns
/// the axis-aligned bounding cuboid of the result, with rotation zeroed.
/// Identity on boxes whose rotation is already zero.
Cuboid gravity_align(const Cuboid& c);

/// Maps the (gravity-aligned) box corners through the pose and returns their
/// axis-aligned hull in the target frame. A non-zero rotation is aligned
/// first.
Cuboid transform_to_global(const Cuboid& c, const Pose& pose);

/// Pinhole back-projection of pixel (u, v) at depth z into the camera frame.
Vec3 backproject(double u, double v, double z, const Intrinsics& k);

/// Forward pinhole projection of a camera-frame point with positive depth.
Pixel project(const Vec3& camera_point, const Intrinsics& k);

}  // namespace ct
