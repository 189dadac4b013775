#include "oostraj/geometry.hpp"

#include <cmath>

#include "oostraj/error.hpp"

namespace oostraj::geometry {

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(Errc::InvalidConfig, "focal lengths must be positive");
  Eigen::Matrix3d k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void ExtrinsicPose::validate() const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= 1e-9)) throw Error(Errc::InvalidPose, "rotation is not orthonormal (max |R^T R - I| = " + std::to_string(ortho) + ")");
  const double det = rotation.determinant();
  if (!(std::abs(det - 1.0) <= 1e-9)) throw Error(Errc::InvalidPose, "rotation determinant " + std::to_string(det) + " != 1");
  if (!translation.allFinite()) throw Error(Errc::InvalidPose, "translation is not finite");
}

ExtrinsicPose ExtrinsicPose::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  ExtrinsicPose pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * eye;
  return pose;
}

std::array<double, 12> CameraMatrix::row_major() const {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(r * 4 + c)] = m(r, c);
  return out;
}

CameraMatrix CameraMatrix::from_row_major(std::span<const double> v) {
  if (v.size() != 12) throw Error(Errc::ShapeMismatch, "camera matrix needs 12 values, got " + std::to_string(v.size()));
  CameraMatrix out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) out.m(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
  return out;
}

CameraMatrix compose_matrix(double w, const CameraIntrinsics& k, const ExtrinsicPose& rt) {
  if (!(w > 0.0)) throw Error(Errc::InvalidConfig, "scale w must be positive");
  rt.validate();
  Eigen::Matrix<double, 3, 4> ext;
  ext.leftCols<3>() = rt.rotation;
  ext.col(3) = rt.translation;
  return {w * k.matrix() * ext};
}

PixelPoint project_point(const CameraMatrix& m, const WorldPoint& p, ProjectionMode mode) {
  const Eigen::Vector3d h = m.m * Eigen::Vector4d(p.x, p.y, p.z, 1.0);
  if (mode == ProjectionMode::NoDivide) return {h.x(), h.y()};
  if (!(h.z() > kEpsilonDepth)) throw DepthError(0, "homogeneous depth " + std::to_string(h.z()) + " <= epsilon");
  return {h.x() / h.z(), h.y() / h.z()};
}

std::vector<PixelPoint> project_trajectory(const CameraMatrixSequence& ms, std::span<const WorldPoint> traj,
                                           ProjectionMode mode) {
  if (ms.size() != traj.size())
    throw Error(Errc::LengthMismatch,
                std::to_string(ms.size()) + " camera matrices for " + std::to_string(traj.size()) + " points");
  std::vector<PixelPoint> out;
  out.reserve(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    try {
      out.push_back(project_point(ms[t], traj[t], mode));
    } catch (const DepthError&) {
      throw DepthError(t, "point behind camera");
    }
  }
  return out;
}

namespace {

/// Similarity transform moving the centroid to the origin and the mean
/// distance from it to sqrt(dim).
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> hartley_transform(const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  Eigen::Matrix<double, Dim, 1> c = Eigen::Matrix<double, Dim, 1>::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(static_cast<double>(Dim)) / mean_dist : 1.0;
  Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  t.template topLeftCorner<Dim, Dim>() *= s;
  t.template topRightCorner<Dim, 1>() = -s * c;
  return t;
}

}  // namespace

CameraMatrix dlt_estimate(std::span<const Correspondence> correspondences) {
  const std::size_t n = correspondences.size();
  if (n < 6)
    throw Error(Errc::InsufficientCorrespondences, "need at least 6 correspondences, got " + std::to_string(n));

  std::vector<Eigen::Vector3d> world;
  std::vector<Eigen::Vector2d> pixel;
  for (const auto& c : correspondences) {
    world.push_back(c.world.vec());
    pixel.emplace_back(c.pixel.u, c.pixel.v);
  }
  const Eigen::Matrix4d tw = hartley_transform<3>(world);
  const Eigen::Matrix3d tp = hartley_transform<2>(pixel);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d X = tw * world[i].homogeneous();
    const Eigen::Vector3d x = tp * pixel[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.block<1, 4>(r, 0) = X.transpose();
    a.block<1, 4>(r, 8) = -x.x() * X.transpose();
    a.block<1, 4>(r + 1, 4) = X.transpose();
    a.block<1, 4>(r + 1, 8) = -x.y() * X.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 12 || !(sv(10) > 1e-8 * sv(0)))
    throw Error(Errc::DegenerateConfiguration, "design matrix rank < 11 (sigma_10 / sigma_0 = " +
                                                   std::to_string(sv.size() > 10 ? sv(10) / sv(0) : 0.0) + ")");

  const Eigen::VectorXd h = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> mn;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) mn(r, c) = h(r * 4 + c);

  CameraMatrix out{tp.inverse() * mn * tw};
  out.m /= out.m.row(2).norm();
  double depth = 0.0;
  for (const auto& w : world) depth += out.m.row(2).dot(w.homogeneous());
  if (depth < 0.0) out.m = -out.m;
  return out;
}

double reprojection_error(const CameraMatrix& m, std::span<const Correspondence> correspondences) {
  if (correspondences.empty()) throw Error(Errc::EmptyInput, "no correspondences");
  double total = 0.0;
  for (std::size_t i = 0; i < correspondences.size(); ++i) {
    PixelPoint p;
    try {
      p = project_point(m, correspondences[i].world);
    } catch (const DepthError&) {
      throw DepthError(i, "correspondence behind camera");
    }
    total += std::hypot(p.u - correspondences[i].pixel.u, p.v - correspondences[i].pixel.v);
  }
  return total / static_cast<double>(correspondences.size());
}

}  // namespace oostraj::geometry
