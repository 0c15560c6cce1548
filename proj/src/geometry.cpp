#include "posevolume/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "posevolume/error.hpp"

namespace posevolume {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateRays: return "DegenerateRays";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::KeypointOutsideGrid: return "KeypointOutsideGrid";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::TooFewModelPoints: return "TooFewModelPoints";
    case ErrorCode::Unplaceable: return "Unplaceable";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
  }
  return "Unknown";
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  }
  if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point must lie inside the image");
  }
}

CameraIntrinsics CameraIntrinsics::scaled_to(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  // Pixel centers sit at integer coordinates, so the resampled principal
  // point maps (c + 0.5) * s - 0.5.
  return {fx * sx, fy * sy, (cx + 0.5) * sx - 0.5, (cy + 0.5) * sy - 0.5, new_width, new_height};
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!(ortho <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9) || !translation.allFinite()) {
    std::ostringstream os;
    os << "not a proper rotation (|R^T R - I| = " << ortho << ", det = " << det << ")";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

Mat3 rot_x(double radians) { return axis_angle(Vec3::UnitX(), radians); }
Mat3 rot_y(double radians) { return axis_angle(Vec3::UnitY(), radians); }
Mat3 rot_z(double radians) { return axis_angle(Vec3::UnitZ(), radians); }

Mat3 axis_angle(const Vec3& axis, double radians) {
  return Eigen::AngleAxisd(radians, axis.normalized()).toRotationMatrix();
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a * b.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

ViewPair::ViewPair(CameraIntrinsics intrinsics, RigidTransform ref_from_world,
                   RigidTransform query_from_world)
    : intrinsics_(intrinsics),
      ref_from_world_(std::move(ref_from_world)),
      query_from_world_(std::move(query_from_world)) {
  intrinsics_.validate();
  baseline_m_ = (ref_center() - query_center()).norm();
}

Vec3 ViewPair::ref_center() const { return ref_from_world_.inverse().translation(); }
Vec3 ViewPair::query_center() const { return query_from_world_.inverse().translation(); }

PixelDepth project_point(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "point is not in front of the camera");
  }
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy, p.z()};
}

Vec3 unproject_pixel(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::NonPositiveDepth, "unprojection depth must be positive");
  }
  return {(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth};
}

Vec3 triangulate(const Vec2& uv_ref, const Vec2& uv_query, const ViewPair& pair,
                 double min_ray_angle) {
  const CameraIntrinsics& k = pair.intrinsics();
  const RigidTransform world_from_ref = pair.ref_from_world().inverse();
  const RigidTransform world_from_query = pair.query_from_world().inverse();

  const Vec3 o1 = world_from_ref.translation();
  const Vec3 o2 = world_from_query.translation();
  const Vec3 d1 = (world_from_ref.rotation() * unproject_pixel(uv_ref.x(), uv_ref.y(), 1.0, k)).normalized();
  const Vec3 d2 =
      (world_from_query.rotation() * unproject_pixel(uv_query.x(), uv_query.y(), 1.0, k)).normalized();

  const double cos_angle = std::clamp(d1.dot(d2), -1.0, 1.0);
  const double angle = std::acos(std::abs(cos_angle));
  // Coincident centers give no parallax even when the pixels differ.
  if (angle < min_ray_angle || (o1 - o2).norm() < 1e-15) {
    throw Error(ErrorCode::DegenerateRays, "rays are parallel or share an origin");
  }

  // Closest points o1 + s d1, o2 + r d2 on the two rays.
  const Vec3 w = o1 - o2;
  const double b = d1.dot(d2);
  const double d = d1.dot(w);
  const double e = d2.dot(w);
  const double denom = 1.0 - b * b;
  const double s = (b * e - d) / denom;
  const double r = (e - b * d) / denom;
  return 0.5 * ((o1 + s * d1) + (o2 + r * d2));
}

}  // namespace posevolume
