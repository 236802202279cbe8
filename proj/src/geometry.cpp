#include "photoloss/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

#include "photoloss/parallel.hpp"

namespace photoloss {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTinyAngle = 1e-8;

void check_finite3(const Eigen::Vector3d& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite");
}

}  // namespace

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw std::invalid_argument("Intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("Intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("Intrinsics: principal point outside image");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& r) {
  check_finite3(r, "axis_angle_to_matrix");
  const double theta = r.norm();
  const Eigen::Matrix3d rx = skew(r);
  if (theta < kTinyAngle) {
    // I + [r]x + [r]x^2 / 2, exact to O(theta^3)
    return Eigen::Matrix3d::Identity() + rx + 0.5 * rx * rx;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * rx + b * rx * rx;
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& R) {
  const Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double sin_theta = 0.5 * w.norm();
  const double cos_theta = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  // atan2 keeps full precision at both ends of the angle range
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < 1e-7) {
    // w = 2 sin(theta) * axis ~= 2 r for small angles
    return 0.5 * w;
  }
  if (theta < kPi - 1e-6) {
    return (theta / (2.0 * sin_theta)) * w;
  }

  // Near pi the vee part loses the axis; recover it from the symmetric part
  // R + R^T = 2 cos(theta) I + 2 (1 - cos(theta)) a a^T.
  const Eigen::Matrix3d S = 0.5 * (R + R.transpose());
  Eigen::Vector3d axis;
  const double one_minus_cos = 1.0 - cos_theta;
  for (int i = 0; i < 3; ++i)
    axis[i] = std::sqrt(std::max(0.0, (S(i, i) - cos_theta) / one_minus_cos));
  // Fix relative signs using the largest component as reference.
  int k = 0;
  axis.cwiseAbs().maxCoeff(&k);
  for (int i = 0; i < 3; ++i) {
    if (i == k) continue;
    const double prod = 0.5 * (R(i, k) + R(k, i)) / one_minus_cos;
    axis[i] = std::copysign(axis[i], prod * axis[k]);
  }
  // Overall sign from the antisymmetric part when it is still usable,
  // otherwise pick the canonical representative.
  if (w.norm() > 1e-12) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

std::array<Eigen::Matrix3d, 3> rotation_jacobians(const Eigen::Vector3d& r) {
  check_finite3(r, "rotation_jacobians");
  std::array<Eigen::Matrix3d, 3> jac;
  const double theta2 = r.squaredNorm();
  if (theta2 < kTinyAngle * kTinyAngle) {
    for (int i = 0; i < 3; ++i) jac[size_t(i)] = skew(Eigen::Vector3d::Unit(i));
    return jac;
  }
  const Eigen::Matrix3d R = axis_angle_to_matrix(r);
  const Eigen::Matrix3d eye_minus_R = Eigen::Matrix3d::Identity() - R;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d e = Eigen::Vector3d::Unit(i);
    jac[size_t(i)] =
        ((r[i] * skew(r) + skew(r.cross(eye_minus_R * e))) / theta2) * R;
  }
  return jac;
}

Eigen::Matrix3d Pose::rotation_matrix() const { return axis_angle_to_matrix(rotation); }

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

void Pose::validate() const {
  check_finite3(rotation, "Pose.rotation");
  check_finite3(translation, "Pose.translation");
  if (rotation.norm() > kPi + 1e-9)
    throw std::invalid_argument("Pose: axis-angle norm exceeds pi");
}

Pose compose(const Pose& a, const Pose& b) {
  a.validate();
  b.validate();
  const Eigen::Matrix3d Ra = a.rotation_matrix();
  const Eigen::Matrix3d Rb = b.rotation_matrix();
  Pose out;
  out.rotation = matrix_to_axis_angle(Ra * Rb);
  out.translation = Ra * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& a) {
  a.validate();
  const Eigen::Matrix3d Rt = a.rotation_matrix().transpose();
  Pose out;
  out.rotation = -a.rotation;
  out.translation = -(Rt * a.translation);
  return out;
}

Pose pose_from_matrix(const Eigen::Matrix4d& m) {
  Pose out;
  out.rotation = matrix_to_axis_angle(m.topLeftCorner<3, 3>());
  out.translation = m.topRightCorner<3, 1>();
  return out;
}

FlowField project(const DepthMap& depth, const Pose& pose, const Intrinsics& K) {
  K.validate();
  pose.validate();
  if (depth.height() != K.height || depth.width() != K.width)
    throw std::invalid_argument("project: depth dimensions do not match intrinsics");

  const int h = K.height;
  const int w = K.width;
  FlowField flow;
  flow.u.resize(h, w);
  flow.v.resize(h, w);
  flow.valid.resize(h, w);

  if (pose.is_identity()) {
    // The identity transform maps the pixel grid to itself; skip the
    // round trip so the coordinates stay exact.
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        flow.u(v, u) = double(u);
        flow.v(v, u) = double(v);
        flow.valid(v, u) = true;
      }
    return flow;
  }

  const Eigen::Matrix3d R = pose.rotation_matrix();
  const Eigen::Vector3d t = pose.translation;
  parallel_for(h, [&](int v0, int v1) {
    for (int v = v0; v < v1; ++v) {
      for (int u = 0; u < w; ++u) {
        const double d = depth.values(v, u);
        const Eigen::Vector3d ray((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
        const Eigen::Vector3d p = R * (d * ray) + t;
        if (p.z() > 0.0) {
          const double su = K.fx * p.x() / p.z() + K.cx;
          const double sv = K.fy * p.y() / p.z() + K.cy;
          flow.u(v, u) = su;
          flow.v(v, u) = sv;
          flow.valid(v, u) = su >= 0.0 && su <= w - 1.0 && sv >= 0.0 && sv <= h - 1.0;
        } else {
          flow.u(v, u) = 0.0;
          flow.v(v, u) = 0.0;
          flow.valid(v, u) = false;
        }
      }
    }
  });
  return flow;
}

std::pair<Image, BoolGrid> bilinear_sample(const Image& src, const FlowField& flow) {
  if (src.height() != flow.height() || src.width() != flow.width())
    throw std::invalid_argument("bilinear_sample: src dimensions do not match flow");

  const int h = src.height();
  const int w = src.width();
  std::vector<Grid> planes(size_t(src.channels()), Grid(h, w));
  parallel_for(h, [&](int v0, int v1) {
    for (int v = v0; v < v1; ++v) {
      for (int u = 0; u < w; ++u) {
        const double x = std::clamp(flow.u(v, u), 0.0, double(w - 1));
        const double y = std::clamp(flow.v(v, u), 0.0, double(h - 1));
        const int x0 = int(std::floor(x));
        const int y0 = int(std::floor(y));
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wx = x - x0;
        const double wy = y - y0;
        for (int c = 0; c < src.channels(); ++c) {
          const Grid& s = src.plane(c);
          const double top = (1.0 - wx) * s(y0, x0) + wx * s(y0, x1);
          const double bot = (1.0 - wx) * s(y1, x0) + wx * s(y1, x1);
          double out = (1.0 - wy) * top + wy * bot;
          planes[size_t(c)](v, u) = std::clamp(out, 0.0, 1.0);
        }
      }
    }
  });
  return {Image(std::move(planes)), flow.valid};
}

std::pair<Image, BoolGrid> warp(const Image& src, const DepthMap& depth,
                                const Pose& pose, const Intrinsics& K) {
  if (src.height() != K.height || src.width() != K.width)
    throw std::invalid_argument("warp: src dimensions do not match intrinsics");
  return bilinear_sample(src, project(depth, pose, K));
}

}  // namespace photoloss
