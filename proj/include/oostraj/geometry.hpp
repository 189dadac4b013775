#pragma once

// Pinhole projection and camera-matrix estimation.
//
// World frame: meters, z up. Camera frame: x right, y down, z forward.
// A CameraMatrix maps homogeneous world points to homogeneous pixels; pixel
// coordinates come from dividing by the third component.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace oostraj::geometry {

/// Homogeneous depths at or below this are rejected by project_point.
inline constexpr double kEpsilonDepth = 1e-6;

struct WorldPoint {
  double x = 0.0, y = 0.0, z = 0.0;
  Eigen::Vector3d vec() const { return {x, y, z}; }
  friend bool operator==(const WorldPoint&, const WorldPoint&) = default;
};

struct PixelPoint {
  double u = 0.0, v = 0.0;
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct CameraIntrinsics {
  double fx = 500.0, fy = 500.0;
  double cx = 320.0, cy = 240.0;
  double skew = 0.0;

  /// Upper-triangular K with K(2,2) = 1. Throws InvalidConfig on non-positive focal lengths.
  Eigen::Matrix3d matrix() const;
};

struct ExtrinsicPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();   // meters

  /// Throws InvalidPose unless R^T R = I and det R = 1 within 1e-9.
  void validate() const;

  /// Camera at `eye` looking at `target`, image "up" aligned with world +z.
  static ExtrinsicPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);
};

struct CameraMatrix {
  Eigen::Matrix<double, 3, 4> m = Eigen::Matrix<double, 3, 4>::Zero();

  std::array<double, 12> row_major() const;
  static CameraMatrix from_row_major(std::span<const double> v);
};

using CameraMatrixSequence = std::vector<CameraMatrix>;

enum class ProjectionMode {
  Divide,    // (h0/h2, h1/h2), the physical pinhole
  NoDivide,  // (h0, h1), the literal linear form
};

/// w * K * [R | t]
CameraMatrix compose_matrix(double w, const CameraIntrinsics& k, const ExtrinsicPose& rt);

/// Throws DepthError (index 0) when the homogeneous depth is <= kEpsilonDepth in Divide mode.
PixelPoint project_point(const CameraMatrix& m, const WorldPoint& p, ProjectionMode mode = ProjectionMode::Divide);

/// Timestamp-matched projection. Throws LengthMismatch, or DepthError carrying the timestamp.
std::vector<PixelPoint> project_trajectory(const CameraMatrixSequence& ms, std::span<const WorldPoint> traj,
                                           ProjectionMode mode = ProjectionMode::Divide);

struct Correspondence {
  WorldPoint world;
  PixelPoint pixel;
};

/// Normalized DLT. The result is scaled so its third row has unit norm, with
/// the sign chosen to give the correspondences positive mean depth.
/// Throws InsufficientCorrespondences (< 6) or DegenerateConfiguration when
/// the design matrix has rank < 11 (relative singular value below 1e-8).
CameraMatrix dlt_estimate(std::span<const Correspondence> correspondences);

/// Mean pixel distance between projected and observed points. Throws
/// EmptyInput on an empty list; DepthError propagates.
double reprojection_error(const CameraMatrix& m, std::span<const Correspondence> correspondences);

}  // namespace oostraj::geometry
