#include <doctest.h>

#include "photoloss/geometry.hpp"
#include "test_support.hpp"

using namespace photoloss;
using namespace testsupport;

namespace {

Intrinsics small_k(int size = 8) {
  return {double(size), double(size), (size - 1) / 2.0, (size - 1) / 2.0, size, size};
}

}  // namespace

TEST_CASE("axis_angle_to_matrix: zero rotation is the identity") {
  CHECK(axis_angle_to_matrix(Eigen::Vector3d::Zero())
            .isApprox(Eigen::Matrix3d::Identity(), 1e-15));
}

TEST_CASE("axis_angle_to_matrix: quarter turn about z maps x to y") {
  const Eigen::Matrix3d R =
      axis_angle_to_matrix(Eigen::Vector3d(0, 0, M_PI / 2.0));
  const Eigen::Vector3d mapped = R * Eigen::Vector3d(1, 0, 0);
  CHECK(mapped.isApprox(Eigen::Vector3d(0, 1, 0), 1e-12));
}

TEST_CASE("axis_angle_to_matrix: matches the quaternion route") {
  const Eigen::Vector3d r(0.3, -0.2, 0.1);
  const Eigen::Matrix3d R = axis_angle_to_matrix(r);
  CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((R - quaternion_rotation_oracle(r)).cwiseAbs().maxCoeff() < 1e-12);

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Eigen::Vector3d rr = rng.normal3();
    CHECK((axis_angle_to_matrix(rr) - quaternion_rotation_oracle(rr))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("axis_angle_to_matrix: orthonormal up to norm 3") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    Eigen::Vector3d r = rng.normal3();
    r = r / r.norm() * rng.uniform(0.0, 3.0);
    const Eigen::Matrix3d R = axis_angle_to_matrix(r);
    CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-9);
    CHECK(std::abs(R.determinant() - 1.0) < 1e-9);
  }
}

TEST_CASE("axis_angle_to_matrix: small-angle branch stays consistent") {
  const Eigen::Vector3d r(3e-9, -2e-9, 1e-9);
  const Eigen::Matrix3d R = axis_angle_to_matrix(r);
  CHECK((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
        1e-15);
  // matches the quaternion route at full precision
  CHECK((R - quaternion_rotation_oracle(r)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(
      axis_angle_to_matrix(Eigen::Vector3d(std::nan(""), 0, 0)),
      std::invalid_argument);
}

TEST_CASE("matrix_to_axis_angle: round trips, including near pi") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng(seed);
    Eigen::Vector3d axis = rng.normal3().normalized();
    for (double theta : {1e-9, 1e-5, 0.3, 1.5, 3.0, M_PI - 1e-4, M_PI - 1e-8}) {
      const Eigen::Vector3d r = theta * axis;
      const Eigen::Matrix3d R = axis_angle_to_matrix(r);
      const Eigen::Matrix3d back = axis_angle_to_matrix(matrix_to_axis_angle(R));
      CHECK((back - R).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("rotation_jacobians: match finite differences") {
  const double h = 1e-6;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Eigen::Vector3d r = 0.5 * rng.normal3();
    const auto jac = rotation_jacobians(r);
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d rp = r, rm = r;
      rp[i] += h;
      rm[i] -= h;
      const Eigen::Matrix3d fd =
          (axis_angle_to_matrix(rp) - axis_angle_to_matrix(rm)) / (2.0 * h);
      CHECK((jac[size_t(i)] - fd).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
}

TEST_CASE("compose/inverse: algebraic identities") {
  const Pose a = random_pose(3);
  const Pose b = random_pose(4);

  const Pose ainv_a = compose(a, inverse(a));
  CHECK(ainv_a.rotation.norm() < 1e-12);
  CHECK(ainv_a.translation.norm() < 1e-12);

  const Pose id_b = compose(Pose::identity(), b);
  CHECK((id_b.rotation - b.rotation).norm() < 1e-12);
  CHECK((id_b.translation - b.translation).norm() < 1e-12);
}

TEST_CASE("compose: matches the 4x4 matrix product") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Pose a = random_pose(seed);
    const Pose b = random_pose(seed + 1000);
    const Eigen::Matrix4d expect = a.matrix() * b.matrix();
    CHECK((compose(a, b).matrix() - expect).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::Matrix4d inv_expect = a.matrix().inverse();
    CHECK((inverse(a).matrix() - inv_expect).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("pose validation rejects out-of-range axis-angle") {
  Pose p;
  p.rotation = Eigen::Vector3d(4.0, 0.0, 0.0);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("project: identity pose maps the grid to itself, all valid") {
  const Intrinsics K = small_k();
  const DepthMap depth(random_grid(K.height, K.width, 5, 1.0, 3.0));
  const FlowField flow = project(depth, Pose::identity(), K);
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u) {
      CHECK(flow.u(v, u) == double(u));
      CHECK(flow.v(v, u) == double(v));
      CHECK(flow.valid(v, u));
    }
}

TEST_CASE("project: fronto-parallel plane under x-translation shifts uniformly") {
  Intrinsics K{100.0, 100.0, 15.5, 15.5, 32, 32};
  const DepthMap depth(Grid::Constant(32, 32, 2.0));
  Pose pose;
  pose.translation = Eigen::Vector3d(0.1, 0.0, 0.0);
  const FlowField flow = project(depth, pose, K);
  // shift = fx * tx / depth = 100 * 0.1 / 2 = 5 px
  for (int v = 0; v < 32; ++v)
    for (int u = 0; u < 32; ++u) {
      CHECK(flow.u(v, u) == doctest::Approx(u + 5.0).epsilon(1e-12));
      CHECK(flow.v(v, u) == doctest::Approx(double(v)).epsilon(1e-12));
    }
  // cross-check one pixel against the scalar oracle
  const Eigen::Vector2d expect = project_pixel_oracle(7, 9, 2.0, pose, K);
  CHECK(flow.u(9, 7) == doctest::Approx(expect.x()).epsilon(1e-14));
  CHECK(flow.v(9, 7) == doctest::Approx(expect.y()).epsilon(1e-14));
}

TEST_CASE("project: camera translated past the plane invalidates everything") {
  const Intrinsics K = small_k();
  const DepthMap depth(Grid::Constant(K.height, K.width, 2.0));
  Pose pose;
  pose.translation = Eigen::Vector3d(0.0, 0.0, -3.0);  // points land behind
  const FlowField flow = project(depth, pose, K);
  CHECK_FALSE(flow.valid.any());
}

TEST_CASE("project: dimension mismatch is rejected") {
  const Intrinsics K = small_k();
  const DepthMap depth(Grid::Constant(4, 4, 2.0));
  CHECK_THROWS_AS(project(depth, Pose::identity(), K), std::invalid_argument);
}

TEST_CASE("project/back-project round trip at identity") {
  // back-projection is implicit in project; identity pose returns each
  // pixel to itself within 1e-9
  const Intrinsics K{73.0, 91.0, 3.1, 2.7, 8, 8};
  const DepthMap depth(random_grid(8, 8, 11, 0.5, 4.0));
  const FlowField flow = project(depth, Pose::identity(), K);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      CHECK(std::abs(flow.u(v, u) - u) < 1e-9);
      CHECK(std::abs(flow.v(v, u) - v) < 1e-9);
    }
}

TEST_CASE("bilinear_sample: identity grid reproduces the image bitwise") {
  const Intrinsics K = small_k();
  const Image src = random_image(K.height, K.width, 3, 21);
  const DepthMap depth(Grid::Constant(K.height, K.width, 2.0));
  const FlowField flow = project(depth, Pose::identity(), K);
  const auto [out, mask] = bilinear_sample(src, flow);
  for (int c = 0; c < 3; ++c)
    CHECK((out.plane(c) == src.plane(c)).all());
  CHECK(mask.all());
}

TEST_CASE("bilinear_sample: integer coordinates pick exact pixels") {
  const Image src = random_image(6, 6, 1, 33);
  FlowField flow;
  flow.u = Grid::Constant(6, 6, 3.0);
  flow.v = Grid::Constant(6, 6, 2.0);
  flow.valid = BoolGrid::Constant(6, 6, true);
  const auto [out, mask] = bilinear_sample(src, flow);
  CHECK((out.plane(0) == src.plane(0)(2, 3)).all());
}

TEST_CASE("bilinear_sample: matches the double-loop oracle") {
  const Image src = random_image(8, 8, 1, 44);
  Rng rng(55);
  FlowField flow;
  flow.u.resize(8, 8);
  flow.v.resize(8, 8);
  flow.valid = BoolGrid::Constant(8, 8, true);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      flow.u(v, u) = rng.uniform(-1.0, 8.0);  // includes out-of-range clamping
      flow.v(v, u) = rng.uniform(-1.0, 8.0);
    }
  const auto [out, mask] = bilinear_sample(src, flow);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u)
      CHECK(out.plane(0)(v, u) ==
            doctest::Approx(bilinear_oracle(src.plane(0), flow.u(v, u), flow.v(v, u)))
                .epsilon(1e-12));

  // 4-neighbour average at a half-integer position
  FlowField center;
  center.u = Grid::Constant(8, 8, 1.5);
  center.v = Grid::Constant(8, 8, 2.5);
  center.valid = BoolGrid::Constant(8, 8, true);
  const auto [cout, cmask] = bilinear_sample(src, center);
  const Grid& s = src.plane(0);
  const double expect = 0.25 * (s(2, 1) + s(2, 2) + s(3, 1) + s(3, 2));
  CHECK(cout.plane(0)(0, 0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("warp: identity pose reproduces the source bitwise") {
  const Intrinsics K = small_k(16);
  const Image src = random_image(16, 16, 1, 66);
  const DepthMap depth(random_grid(16, 16, 67, 0.5, 3.0));
  const auto [out, mask] = warp(src, depth, Pose::identity(), K);
  CHECK((out.plane(0) == src.plane(0)).all());
  CHECK(mask.all());
}

TEST_CASE("warp: true depth and pose reproduce the rendered target") {
  const SceneSpec spec = default_plane_scene(48);
  const auto triplets = render_scene(spec);
  REQUIRE(triplets.size() == 1);
  const FrameTriplet& t = triplets[0];

  for (size_t j = 0; j < t.sources.size(); ++j) {
    const auto [warped, mask] =
        warp(t.sources[j], t.target_depth, t.rel_poses[j], spec.intrinsics);
    double err = 0.0;
    int count = 0;
    for (int v = 0; v < 48; ++v)
      for (int u = 0; u < 48; ++u)
        if (mask(v, u)) {
          err += std::abs(warped.plane(0)(v, u) - t.target.plane(0)(v, u));
          ++count;
        }
    REQUIRE(count > 0);
    CHECK(err / count < 0.01);
  }
}

TEST_CASE("warp: doubling the depth strictly increases the error") {
  const SceneSpec spec = default_plane_scene(48);
  const auto triplets = render_scene(spec);
  const FrameTriplet& t = triplets[0];

  const auto mae = [&](const DepthMap& depth) {
    const auto [warped, mask] =
        warp(t.sources[1], depth, t.rel_poses[1], spec.intrinsics);
    double err = 0.0;
    int count = 0;
    for (int v = 0; v < 48; ++v)
      for (int u = 0; u < 48; ++u)
        if (mask(v, u)) {
          err += std::abs(warped.plane(0)(v, u) - t.target.plane(0)(v, u));
          ++count;
        }
    return err / count;
  };

  const double err_true = mae(t.target_depth);
  const double err_wrong = mae(DepthMap(2.0 * t.target_depth.values));
  CHECK(err_wrong > err_true);
}

TEST_CASE("warp: analytic coordinate Jacobians match finite differences") {
  // perturb depth and pose entries; the projected coordinates move as the
  // closed-form derivatives predict
  const Intrinsics K = small_k(8);
  Pose pose = random_pose(71, 0.05, 0.05);
  pose.translation.z() = 0.0;
  const Grid depth0 = random_grid(8, 8, 72, 1.5, 2.5);
  const double h = 1e-4;

  const auto flow_at = [&](const Grid& d, const Pose& p) {
    return project(DepthMap(d), p, K);
  };
  const FlowField base = flow_at(depth0, pose);

  // depth derivative at an interior pixel
  Grid dplus = depth0, dminus = depth0;
  dplus(4, 4) += h;
  dminus(4, 4) -= h;
  const double du_fd =
      (flow_at(dplus, pose).u(4, 4) - flow_at(dminus, pose).u(4, 4)) / (2 * h);

  const Eigen::Vector3d ray((4 - K.cx) / K.fx, (4 - K.cy) / K.fy, 1.0);
  const Eigen::Matrix3d R = pose.rotation_matrix();
  const Eigen::Vector3d q = R * ray;
  const Eigen::Vector3d pt = depth0(4, 4) * q + pose.translation;
  const Eigen::Vector3d du_dp(K.fx / pt.z(), 0.0,
                              -K.fx * pt.x() / (pt.z() * pt.z()));
  CHECK(du_fd == doctest::Approx(du_dp.dot(q)).epsilon(1e-6));
  CHECK(base.valid(4, 4));
}
