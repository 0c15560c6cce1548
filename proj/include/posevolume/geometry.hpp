#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace posevolume {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics shared by both views. Image size is (width x height).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidArgument unless fx, fy > 0 and the principal point lies
  /// strictly inside the image.
  void validate() const;

  /// Intrinsics of the same camera resampled to a (width x height) image.
  CameraIntrinsics scaled_to(int new_width, int new_height) const;
};

/// A rigid motion x -> R x + t. Rotation is checked on construction.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;

  /// (this * rhs)(p) == this(rhs(p))
  RigidTransform operator*(const RigidTransform& rhs) const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

Mat3 rot_x(double radians);
Mat3 rot_y(double radians);
Mat3 rot_z(double radians);
Mat3 axis_angle(const Vec3& axis, double radians);

/// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Two calibrated views of the same scene. World -> camera extrinsics.
class ViewPair {
 public:
  ViewPair(CameraIntrinsics intrinsics, RigidTransform ref_from_world,
           RigidTransform query_from_world);

  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const RigidTransform& ref_from_world() const { return ref_from_world_; }
  const RigidTransform& query_from_world() const { return query_from_world_; }
  double baseline_m() const { return baseline_m_; }

  Vec3 ref_center() const;
  Vec3 query_center() const;

 private:
  CameraIntrinsics intrinsics_;
  RigidTransform ref_from_world_;
  RigidTransform query_from_world_;
  double baseline_m_ = 0.0;
};

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

/// Pinhole projection of a camera-frame point. Throws NonPositiveDepth for z <= 0.
PixelDepth project_point(const Vec3& p_camera, const CameraIntrinsics& k);

/// Inverse of project_point at a known depth.
Vec3 unproject_pixel(double u, double v, double depth, const CameraIntrinsics& k);

inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) { return t.apply(p); }

/// Minimum ray angle (radians) accepted by triangulate().
inline constexpr double kDegenerateRayAngle = 1e-6;

/// Midpoint of the common perpendicular between the back-projected rays of
/// a ref/query pixel correspondence, in world coordinates.
Vec3 triangulate(const Vec2& uv_ref, const Vec2& uv_query, const ViewPair& pair,
                 double min_ray_angle = kDegenerateRayAngle);

}  // namespace posevolume
