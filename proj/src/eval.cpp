#include "photoloss/eval.hpp"

#include <Eigen/SVD>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace photoloss {

namespace {

double median_of(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + long(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + long(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

void check_sequences(const std::vector<DepthMap>& pred,
                     const std::vector<DepthMap>& ref) {
  if (pred.empty() || pred.size() != ref.size())
    throw std::invalid_argument("depth sequences empty or of different length");
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i].height() != ref[i].height() || pred[i].width() != ref[i].width())
      throw std::invalid_argument("depth sequences: frame shapes differ");
}

double scale_for(const DepthMap& pred, const DepthMap& ref) {
  double num = 0.0, den = 0.0;
  const double* p = pred.values.data();
  const double* r = ref.values.data();
  for (Eigen::Index i = 0; i < pred.values.size(); ++i) {
    num += r[i] * p[i];
    den += p[i] * p[i];
  }
  return num / den;
}

}  // namespace

double align_depth_scale(const std::vector<DepthMap>& pred,
                         const std::vector<DepthMap>& ref) {
  check_sequences(pred, ref);
  double num = 0.0, den = 0.0;
  for (size_t f = 0; f < pred.size(); ++f) {
    const double* p = pred[f].values.data();
    const double* r = ref[f].values.data();
    for (Eigen::Index i = 0; i < pred[f].values.size(); ++i) {
      num += r[i] * p[i];
      den += p[i] * p[i];
    }
  }
  return num / den;
}

DepthMetrics depth_metrics(const std::vector<DepthMap>& pred,
                           const std::vector<DepthMap>& ref,
                           ScaleAlignment mode) {
  check_sequences(pred, ref);
  DepthMetrics m;
  const double global_scale =
      mode == ScaleAlignment::kGlobal ? align_depth_scale(pred, ref) : 1.0;

  std::vector<double> rels;
  double rel_sum = 0.0;
  std::array<std::int64_t, 3> acc_count = {0, 0, 0};
  std::int64_t total = 0;
  double scale_sum = 0.0;

  for (size_t f = 0; f < pred.size(); ++f) {
    const double s = mode == ScaleAlignment::kPerFrame ? scale_for(pred[f], ref[f])
                                                       : global_scale;
    scale_sum += s;
    const double* p = pred[f].values.data();
    const double* r = ref[f].values.data();
    for (Eigen::Index i = 0; i < pred[f].values.size(); ++i) {
      const double sp = s * p[i];
      const double rel = std::abs(sp - r[i]) / r[i];
      rels.push_back(rel);
      rel_sum += rel;
      m.rel_max = std::max(m.rel_max, rel);
      const double delta = std::max(r[i] / sp, sp / r[i]);
      for (int k = 0; k < 3; ++k)
        if (delta < std::pow(1.25, k + 1)) ++acc_count[size_t(k)];
      ++total;
    }
  }

  m.rel_mean = rel_sum / double(total);
  m.rel_median = median_of(rels);
  for (int k = 0; k < 3; ++k) m.acc[size_t(k)] = double(acc_count[size_t(k)]) / double(total);
  m.scale = mode == ScaleAlignment::kPerFrame ? scale_sum / double(pred.size())
                                              : global_scale;
  m.degenerate = !(m.rel_median <= m.rel_mean + 1e-12 && m.rel_mean <= m.rel_max + 1e-12);
  return m;
}

SimilarityTransform umeyama_align(const Trajectory& pred, const Trajectory& ref,
                                  bool with_scale) {
  if (pred.size() != ref.size())
    throw std::invalid_argument("umeyama_align: trajectory lengths differ");
  const auto n = Eigen::Index(pred.size());
  if (n < 3)
    throw std::invalid_argument("umeyama_align: needs at least 3 poses");
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i].index != ref[i].index)
      throw std::invalid_argument("umeyama_align: frame indices differ");

  Eigen::Matrix3Xd x(3, n), y(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.col(i) = pred[size_t(i)].pose.translation;
    y.col(i) = ref[size_t(i)].pose.translation;
  }
  const Eigen::Vector3d mx = x.rowwise().mean();
  const Eigen::Vector3d my = y.rowwise().mean();
  x.colwise() -= mx;
  y.colwise() -= my;

  const double var_x = x.squaredNorm() / double(n);
  const Eigen::Matrix3d sigma = y * x.transpose() / double(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  if (!(d(0) > 0.0) || d(1) <= 1e-12 * d(0))
    throw std::invalid_argument("umeyama_align: degenerate (collinear) positions");

  Eigen::Vector3d signs = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0)
    signs(2) = -1.0;

  SimilarityTransform out;
  out.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? d.dot(signs) / var_x : 1.0;
  out.translation = my - out.scale * (out.rotation * mx);
  return out;
}

ApeMetrics ape(const Trajectory& pred, const Trajectory& ref,
               const ApeOptions& opts) {
  if (pred.size() != ref.size())
    throw std::invalid_argument("ape: trajectory lengths differ");
  if (pred.empty()) throw std::invalid_argument("ape: empty trajectories");
  if (opts.segment_len < 3)
    throw std::invalid_argument("ape: segment length must be >= 3");

  std::vector<double> rot_errs, trans_errs;
  const size_t n = pred.size();
  for (size_t start = 0; start < n; start += size_t(opts.segment_len)) {
    const size_t len = std::min(size_t(opts.segment_len), n - start);
    if (len < 3 && start > 0) break;  // drop a too-short remainder
    if (len < 3)
      throw std::invalid_argument("ape: fewer than 3 frames");

    const Trajectory seg_pred(pred.begin() + long(start), pred.begin() + long(start + len));
    const Trajectory seg_ref(ref.begin() + long(start), ref.begin() + long(start + len));
    SimilarityTransform align;
    if (opts.align) align = umeyama_align(seg_pred, seg_ref, opts.with_scale);

    for (size_t i = 0; i < len; ++i) {
      const Eigen::Matrix3d r_pred =
          align.rotation * seg_pred[i].pose.rotation_matrix();
      const Eigen::Vector3d t_pred = align.apply(seg_pred[i].pose.translation);
      const Eigen::Matrix3d r_ref = seg_ref[i].pose.rotation_matrix();
      const Eigen::Vector3d t_ref = seg_ref[i].pose.translation;

      const Eigen::Matrix3d rot_e = r_ref.transpose() * r_pred;
      rot_errs.push_back((rot_e - Eigen::Matrix3d::Identity()).norm());
      trans_errs.push_back((t_pred - t_ref).norm());
    }
  }

  ApeMetrics m;
  double rot_sum = 0.0, trans_sum = 0.0;
  for (double e : rot_errs) {
    rot_sum += e;
    m.rot_max = std::max(m.rot_max, e);
  }
  for (double e : trans_errs) {
    trans_sum += e;
    m.trans_max = std::max(m.trans_max, e);
  }
  m.rot_mean = rot_sum / double(rot_errs.size());
  m.trans_mean = trans_sum / double(trans_errs.size());
  m.rot_median = median_of(rot_errs);
  m.trans_median = median_of(trans_errs);
  return m;
}

}  // namespace photoloss
