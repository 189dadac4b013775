#include <cmath>

#include "camera_fixtures.hpp"
#include "doctest.h"
#include "oostraj/error.hpp"
#include "oostraj/geometry.hpp"

using namespace oostraj;
using namespace oostraj::geometry;
using oostraj::testing::point_in_front;
using oostraj::testing::random_camera;

namespace {

template <class F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    FAIL("expected ", errc_name(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

CameraMatrix identity_camera() {
  CameraMatrix m;
  m.m.leftCols<3>().setIdentity();
  return m;
}

}  // namespace

TEST_CASE("compose_matrix") {
  SUBCASE("identity") {
    CameraIntrinsics k{1, 1, 0, 0, 0};
    const CameraMatrix m = compose_matrix(1.0, k, {});
    CHECK(m.m.isApprox(identity_camera().m, 0.0));
  }
  SUBCASE("linear in w") {
    Rng rng(1);
    const auto c = random_camera(rng);
    const CameraMatrix m1 = compose_matrix(1.0, c.k, c.rt);
    const CameraMatrix m2 = compose_matrix(2.0, c.k, c.rt);
    CHECK((m2.m - 2.0 * m1.m).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("direct multiplication oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const auto c = random_camera(rng);
      const CameraMatrix m = compose_matrix(c.w, c.k, c.rt);
      const double K[3][3] = {{c.k.fx, c.k.skew, c.k.cx}, {0, c.k.fy, c.k.cy}, {0, 0, 1}};
      double Rt[3][4];
      for (int r = 0; r < 3; ++r) {
        for (int col = 0; col < 3; ++col) Rt[r][col] = c.rt.rotation(r, col);
        Rt[r][3] = c.rt.translation(r);
      }
      for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 4; ++col) {
          double s = 0.0;
          for (int i = 0; i < 3; ++i) s += K[r][i] * Rt[i][col];
          CHECK(std::abs(m.m(r, col) - c.w * s) <= 1e-12 * std::max(1.0, std::abs(c.w * s)));
        }
    }
  }
  SUBCASE("rejects non-orthonormal rotation") {
    ExtrinsicPose bad;
    bad.rotation(0, 1) = 0.1;
    expect_errc(Errc::InvalidPose, [&] { compose_matrix(1.0, {}, bad); });
    ExtrinsicPose mirror;
    mirror.rotation(2, 2) = -1.0;
    expect_errc(Errc::InvalidPose, [&] { compose_matrix(1.0, {}, mirror); });
  }
}

TEST_CASE("project_point") {
  SUBCASE("optical axis") {
    const PixelPoint p = project_point(identity_camera(), {0, 0, 1});
    CHECK(p.u == 0.0);
    CHECK(p.v == 0.0);
  }
  SUBCASE("hand pinhole arithmetic") {
    CameraIntrinsics k{500, 500, 320, 240, 0};
    const PixelPoint p = project_point(compose_matrix(1.0, k, {}), {1, 0, 2});
    CHECK(p.u == doctest::Approx(570.0).epsilon(1e-15));
    CHECK(p.v == doctest::Approx(240.0).epsilon(1e-15));
  }
  SUBCASE("degenerate depth") {
    expect_errc(Errc::DepthNonPositive, [] { project_point(identity_camera(), {0, 0, 0}); });
    expect_errc(Errc::DepthNonPositive, [] { project_point(identity_camera(), {0, 0, -3}); });
  }
  SUBCASE("no-divide mode returns the linear image") {
    const PixelPoint p = project_point(identity_camera(), {2, 3, 4}, ProjectionMode::NoDivide);
    CHECK(p.u == 2.0);
    CHECK(p.v == 3.0);
  }
  SUBCASE("projective scale invariance") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      const auto c = random_camera(rng);
      const CameraMatrix m = compose_matrix(c.w, c.k, c.rt);
      const double lambda = std::exp(rng.uniform(-5.0, 5.0));
      const WorldPoint p = point_in_front(c.rt, rng);
      const PixelPoint a = project_point(m, p);
      const PixelPoint b = project_point({lambda * m.m}, p);
      CHECK(std::abs(a.u - b.u) < 1e-9);
      CHECK(std::abs(a.v - b.v) < 1e-9);
    }
  }
  SUBCASE("compose-then-project equals K(RP+t) with perspective division") {
    Rng rng(10);
    for (int trial = 0; trial < 100; ++trial) {
      const auto c = random_camera(rng);
      const WorldPoint p = point_in_front(c.rt, rng);
      const PixelPoint a = project_point(compose_matrix(c.w, c.k, c.rt), p);
      const Eigen::Vector3d cam = c.rt.rotation * p.vec() + c.rt.translation;
      const double u = (c.k.fx * cam.x() + c.k.skew * cam.y()) / cam.z() + c.k.cx;
      const double v = c.k.fy * cam.y() / cam.z() + c.k.cy;
      CHECK(std::abs(a.u - u) < 1e-10);
      CHECK(std::abs(a.v - v) < 1e-10);
    }
  }
}

TEST_CASE("project_trajectory") {
  Rng rng(4);
  const auto c = random_camera(rng);
  const CameraMatrix m = compose_matrix(c.w, c.k, c.rt);
  std::vector<WorldPoint> traj;
  for (int i = 0; i < 5; ++i) traj.push_back(point_in_front(c.rt, rng));

  SUBCASE("single timestamp reduces to project_point") {
    const auto out = project_trajectory({m}, std::span(traj).first(1));
    CHECK(out.at(0) == project_point(m, traj[0]));
  }
  SUBCASE("static camera maps each point under one matrix") {
    const auto out = project_trajectory(CameraMatrixSequence(5, m), traj);
    for (std::size_t t = 0; t < 5; ++t) CHECK(out[t] == project_point(m, traj[t]));
  }
  SUBCASE("length mismatch") {
    expect_errc(Errc::LengthMismatch, [&] { project_trajectory(CameraMatrixSequence(4, m), traj); });
  }
  SUBCASE("depth failure names the timestamp") {
    CameraMatrixSequence ms(5, identity_camera());
    std::vector<WorldPoint> pts{{0, 0, 1}, {0, 0, 2}, {0, 0, -1}, {0, 0, 1}, {0, 0, 1}};
    try {
      project_trajectory(ms, pts);
      FAIL("expected DepthNonPositive");
    } catch (const DepthError& e) {
      CHECK(e.index() == 2);
    }
  }
}

TEST_CASE("dlt_estimate") {
  Rng rng(20);
  SUBCASE("exact correspondences round trip") {
    for (int trial = 0; trial < 50; ++trial) {
      const auto c = random_camera(rng);
      const CameraMatrix m = compose_matrix(c.w, c.k, c.rt);
      std::vector<Correspondence> cs;
      for (int i = 0; i < 20; ++i) {
        const WorldPoint p = point_in_front(c.rt, rng);
        cs.push_back({p, project_point(m, p)});
      }
      const CameraMatrix est = dlt_estimate(cs);
      CHECK(reprojection_error(est, cs) < 1e-9);
      // Proportional: compare after applying the same normalization to m.
      Eigen::Matrix<double, 3, 4> ref = m.m / m.m.row(2).norm();
      CHECK((est.m - ref).cwiseAbs().maxCoeff() < 1e-9 * ref.cwiseAbs().maxCoeff());
      CHECK(std::abs(est.m.row(2).norm() - 1.0) < 1e-12);
    }
  }
  SUBCASE("five correspondences are not enough") {
    std::vector<Correspondence> cs(5);
    expect_errc(Errc::InsufficientCorrespondences, [&] { dlt_estimate(cs); });
  }
  SUBCASE("coplanar world points are degenerate") {
    const auto c = random_camera(rng);
    const CameraMatrix m = compose_matrix(c.w, c.k, c.rt);
    // Plane through three in-front points: p0 + a (p1 - p0) + b (p2 - p0).
    const Eigen::Vector3d p0 = point_in_front(c.rt, rng).vec();
    const Eigen::Vector3d p1 = point_in_front(c.rt, rng).vec();
    const Eigen::Vector3d p2 = point_in_front(c.rt, rng).vec();
    std::vector<Correspondence> cs;
    for (int i = 0; i < 12; ++i) {
      const double a = rng.uniform(0.0, 0.5), b = rng.uniform(0.0, 0.5);
      const Eigen::Vector3d x = p0 + a * (p1 - p0) + b * (p2 - p0);
      const WorldPoint wp{x.x(), x.y(), x.z()};
      cs.push_back({wp, project_point(m, wp)});
    }
    expect_errc(Errc::DegenerateConfiguration, [&] { dlt_estimate(cs); });
  }
  SUBCASE("half-pixel noise on 50 correspondences stays under a pixel on average") {
    double total = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto c = random_camera(rng);
      const CameraMatrix m = compose_matrix(c.w, c.k, c.rt);
      std::vector<Correspondence> noisy, clean;
      for (int i = 0; i < 50; ++i) {
        const WorldPoint p = point_in_front(c.rt, rng);
        const PixelPoint px = project_point(m, p);
        clean.push_back({p, px});
        noisy.push_back({p, {px.u + rng.normal(0.0, 0.5), px.v + rng.normal(0.0, 0.5)}});
      }
      total += reprojection_error(dlt_estimate(noisy), noisy);
    }
    CHECK(total / 100.0 < 1.0);
  }
}

TEST_CASE("reprojection_error") {
  Rng rng(30);
  const auto c = random_camera(rng);
  const CameraMatrix m = compose_matrix(c.w, c.k, c.rt);
  std::vector<Correspondence> cs;
  for (int i = 0; i < 10; ++i) {
    const WorldPoint p = point_in_front(c.rt, rng);
    cs.push_back({p, project_point(m, p)});
  }
  CHECK(reprojection_error(m, cs) < 1e-9);
  for (auto& x : cs) {
    x.pixel.u += 3.0;
    x.pixel.v += 4.0;
  }
  CHECK(reprojection_error(m, cs) == doctest::Approx(5.0).epsilon(1e-12));
  expect_errc(Errc::EmptyInput, [&] { reprojection_error(m, std::vector<Correspondence>{}); });
}
