#include "photoloss/loss_grad.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "photo_detail.hpp"

namespace photoloss {

namespace detail {

SmoothnessTape smoothness_forward(const Grid& inv_depth, const Image& target) {
  const int h = int(inv_depth.rows());
  const int w = int(inv_depth.cols());
  SmoothnessTape tape;
  tape.mean_inv_depth = inv_depth.mean();
  tape.ax = Grid::Ones(h, w);
  tape.ay = Grid::Ones(h, w);

  const double inv_c = 1.0 / double(target.channels());
  Grid gx_img = Grid::Zero(h, w);
  Grid gy_img = Grid::Zero(h, w);
  for (int c = 0; c < target.channels(); ++c) {
    const Grid& img = target.plane(c);
    gx_img.leftCols(w - 1) += (img.rightCols(w - 1) - img.leftCols(w - 1)).abs();
    gy_img.topRows(h - 1) += (img.bottomRows(h - 1) - img.topRows(h - 1)).abs();
  }
  tape.ax = (-gx_img * inv_c).exp();
  tape.ay = (-gy_img * inv_c).exp();

  const double m = tape.mean_inv_depth;
  tape.values = Grid::Zero(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double val = 0.0;
      if (u < w - 1)
        val += std::abs(inv_depth(v, u + 1) - inv_depth(v, u)) / m * tape.ax(v, u);
      if (v < h - 1)
        val += std::abs(inv_depth(v + 1, u) - inv_depth(v, u)) / m * tape.ay(v, u);
      tape.values(v, u) = val;
    }
  return tape;
}

void smoothness_backward(const Grid& inv_depth, const SmoothnessTape& tape,
                         const Grid& upstream, Grid& g_inv_depth) {
  const int h = int(inv_depth.rows());
  const int w = int(inv_depth.cols());
  const double m = tape.mean_inv_depth;
  const double n = double(inv_depth.size());

  double total = 0.0;  // sum of upstream * values, for the mean-normalization term
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double up = upstream(v, u);
      if (up != 0.0) total += up * tape.values(v, u);
      if (up == 0.0) continue;
      if (u < w - 1) {
        const double d = inv_depth(v, u + 1) - inv_depth(v, u);
        const double s = up * tape.ax(v, u) * double((d > 0.0) - (d < 0.0)) / m;
        g_inv_depth(v, u + 1) += s;
        g_inv_depth(v, u) -= s;
      }
      if (v < h - 1) {
        const double d = inv_depth(v + 1, u) - inv_depth(v, u);
        const double s = up * tape.ay(v, u) * double((d > 0.0) - (d < 0.0)) / m;
        g_inv_depth(v + 1, u) += s;
        g_inv_depth(v, u) -= s;
      }
    }
  g_inv_depth -= total / (m * n);
}

MinMaxState joint_min_max(const Grid& pred, const Grid& ref) {
  MinMaxState s;
  s.lo = kInf;
  s.hi = -kInf;
  const auto scan = [&s](const Grid& g, bool is_pred) {
    const double* data = g.data();
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (data[i] < s.lo) {
        s.lo = data[i];
        s.lo_in_pred = is_pred;
        s.lo_index = i;
      }
      if (data[i] > s.hi) {
        s.hi = data[i];
        s.hi_in_pred = is_pred;
        s.hi_index = i;
      }
    }
  };
  scan(pred, true);
  scan(ref, false);
  return s;
}

DepthSupTape depth_supervision_forward(const Grid& pred, const Grid& ref,
                                       const SsimParams& p) {
  DepthSupTape tape;
  tape.mm = joint_min_max(pred, ref);
  const double span = tape.mm.hi - tape.mm.lo;
  if (span > 0.0) {
    tape.na = (pred - tape.mm.lo) / span;
    tape.nb = (ref - tape.mm.lo) / span;
  } else {
    tape.na = Grid::Zero(pred.rows(), pred.cols());
    tape.nb = tape.na;
  }
  tape.af = box_fields(tape.na, p.window);
  tape.ssim = ssim_channel(tape.na, tape.af, tape.nb, p, &tape.pf);

  const int h = int(pred.rows());
  const int w = int(pred.cols());
  double sum = 0.0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double e = pred(v, u) - ref(v, u);
      double val = 0.1 * std::abs(e);
      if (u < w - 1)
        val += std::abs((pred(v, u + 1) - ref(v, u + 1)) - e);
      if (v < h - 1)
        val += std::abs((pred(v + 1, u) - ref(v + 1, u)) - e);
      val += (1.0 - tape.ssim(v, u)) / 2.0;
      sum += val;
    }
  tape.value = sum / double(pred.size());
  return tape;
}

void depth_supervision_backward(const Grid& pred, const Grid& ref,
                                const DepthSupTape& tape, const SsimParams& p,
                                double scale, Grid& g_pred) {
  const int h = int(pred.rows());
  const int w = int(pred.cols());
  const double inv_n = scale / double(pred.size());

  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double e = pred(v, u) - ref(v, u);
      g_pred(v, u) += inv_n * 0.1 * double((e > 0.0) - (e < 0.0));
      if (u < w - 1) {
        const double d = (pred(v, u + 1) - ref(v, u + 1)) - e;
        const double s = inv_n * double((d > 0.0) - (d < 0.0));
        g_pred(v, u + 1) += s;
        g_pred(v, u) -= s;
      }
      if (v < h - 1) {
        const double d = (pred(v + 1, u) - ref(v + 1, u)) - e;
        const double s = inv_n * double((d > 0.0) - (d < 0.0));
        g_pred(v + 1, u) += s;
        g_pred(v, u) -= s;
      }
    }

  const double span = tape.mm.hi - tape.mm.lo;
  if (span <= 0.0) return;  // SSIM term flat at a fully degenerate pair

  const Grid g_ssim = Grid::Constant(h, w, -inv_n / 2.0);
  Grid g_na = Grid::Zero(h, w);
  Grid g_nb = Grid::Zero(h, w);
  ssim_channel_backward(tape.na, tape.af, tape.nb, tape.pf, p, g_ssim, &g_na, &g_nb);

  g_pred += g_na / span;

  // The joint normalization couples both maps to the extrema of pred.
  const double inv_s2 = 1.0 / (span * span);
  double g_lo = 0.0, g_hi = 0.0;
  {
    const double* na = g_na.data();
    const double* nb = g_nb.data();
    const double* a = pred.data();
    const double* b = ref.data();
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      g_lo += na[i] * (a[i] - tape.mm.hi) * inv_s2 + nb[i] * (b[i] - tape.mm.hi) * inv_s2;
      g_hi += na[i] * (tape.mm.lo - a[i]) * inv_s2 + nb[i] * (tape.mm.lo - b[i]) * inv_s2;
    }
  }
  if (tape.mm.lo_in_pred) g_pred.data()[tape.mm.lo_index] += g_lo;
  if (tape.mm.hi_in_pred) g_pred.data()[tape.mm.hi_index] += g_hi;
}

void warp_pe_branch_backward(const Image& target, const TargetCache& tc,
                             const Image& source, const Grid& depth,
                             const Pose& pose, const Intrinsics& K,
                             const LossWeights& w, const SsimParams& p,
                             const WarpBranch& branch, const Grid& upstream,
                             Grid* g_depth, Eigen::Matrix<double, 6, 1>* g_pose) {
  const int h = target.height();
  const int w_ = target.width();
  const int channels = target.channels();

  // pe -> warped image
  std::vector<Grid> g_warped(size_t(channels), Grid::Zero(h, w_));
  const Grid g_ssim = upstream * (-w.alpha / (2.0 * channels));
  const double l1_scale = (1.0 - w.alpha) / channels;
  for (int c = 0; c < channels; ++c) {
    ssim_channel_backward(target.plane(c), tc.fields[size_t(c)],
                          branch.warped.plane(c), branch.pair_fields[size_t(c)], p,
                          g_ssim, nullptr, &g_warped[size_t(c)]);
    const Grid diff = branch.warped.plane(c) - target.plane(c);
    g_warped[size_t(c)] +=
        upstream * l1_scale *
        ((diff > 0.0).cast<double>() - (diff < 0.0).cast<double>());
  }

  // warped image -> flow coordinates (clamped coordinates saturate)
  Grid g_x = Grid::Zero(h, w_);
  Grid g_y = Grid::Zero(h, w_);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w_; ++u) {
      const double xf = branch.flow.u(v, u);
      const double yf = branch.flow.v(v, u);
      const bool in_x = xf > 0.0 && xf < double(w_ - 1);
      const bool in_y = yf > 0.0 && yf < double(h - 1);
      if (!in_x && !in_y) continue;
      const double x = std::clamp(xf, 0.0, double(w_ - 1));
      const double y = std::clamp(yf, 0.0, double(h - 1));
      const int x0 = int(std::floor(x));
      const int y0 = int(std::floor(y));
      const int x1 = std::min(x0 + 1, w_ - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double wx = x - x0;
      const double wy = y - y0;
      double gx = 0.0, gy = 0.0;
      for (int c = 0; c < channels; ++c) {
        const double g = g_warped[size_t(c)](v, u);
        if (g == 0.0) continue;
        const Grid& s = source.plane(c);
        gx += g * ((1.0 - wy) * (s(y0, x1) - s(y0, x0)) +
                   wy * (s(y1, x1) - s(y1, x0)));
        gy += g * ((1.0 - wx) * (s(y1, x0) - s(y0, x0)) +
                   wx * (s(y1, x1) - s(y0, x1)));
      }
      if (in_x) g_x(v, u) = gx;
      if (in_y) g_y(v, u) = gy;
    }

  // flow coordinates -> depth and pose
  const Eigen::Matrix3d R = pose.rotation_matrix();
  const Eigen::Vector3d t = pose.translation;
  std::array<Eigen::Matrix3d, 3> jac;
  if (g_pose) jac = rotation_jacobians(pose.rotation);
  Eigen::Vector3d acc_r = Eigen::Vector3d::Zero();
  Eigen::Vector3d acc_t = Eigen::Vector3d::Zero();
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w_; ++u) {
      const double gx = g_x(v, u);
      const double gy = g_y(v, u);
      if (gx == 0.0 && gy == 0.0) continue;
      const double d = depth(v, u);
      const Eigen::Vector3d ray((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d q = R * ray;
      const Eigen::Vector3d pt = d * q + t;
      const double z = pt.z();
      if (z <= 0.0) continue;  // forward produced constant coordinates here
      const double inv_z = 1.0 / z;
      Eigen::Vector3d g_pt(gx * K.fx * inv_z, gy * K.fy * inv_z,
                           -(gx * K.fx * pt.x() + gy * K.fy * pt.y()) * inv_z * inv_z);
      if (g_depth) (*g_depth)(v, u) += g_pt.dot(q);
      if (g_pose) {
        acc_t += g_pt;
        const Eigen::Vector3d u3 = d * ray;
        for (int i = 0; i < 3; ++i) acc_r[i] += g_pt.dot(jac[size_t(i)] * u3);
      }
    }
  if (g_pose) {
    g_pose->segment<3>(0) += acc_r;
    g_pose->segment<3>(3) += acc_t;
  }
}

void StateHasher::add(const void* data, std::size_t n) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}

void StateHasher::add_u64(std::uint64_t v) { add(&v, sizeof(v)); }

}  // namespace detail

namespace {

using detail::kInf;

struct PhotoTerm {
  std::vector<detail::WarpBranch> branches;
  detail::MinPe mp;
  BoolGrid mask;  // reliability mask; false where no branch is valid
  double masked_sum = 0.0;
};

PhotoTerm photo_term(const Image& target, const detail::TargetCache& tc,
                     const std::vector<Image>& sources, const Grid& depth,
                     const std::vector<Pose>& poses, const Intrinsics& K,
                     const LossWeights& w, const SsimParams& p,
                     const Grid& id_min) {
  PhotoTerm term;
  term.branches.reserve(sources.size());
  for (size_t j = 0; j < sources.size(); ++j)
    term.branches.push_back(
        detail::warp_pe_branch(target, tc, sources[j], depth, poses[j], K, w, p));
  term.mp = detail::min_over_branches(term.branches);
  term.mask = (term.mp.argmin >= 0) && (term.mp.values < id_min);
  const int h = target.height();
  const int w_ = target.width();
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w_; ++u)
      if (term.mask(v, u)) term.masked_sum += term.mp.values(v, u);
  return term;
}

void hash_photo_term(detail::StateHasher& hs, const PhotoTerm& term) {
  hs.add(term.mp.argmin.data(), sizeof(int) * size_t(term.mp.argmin.size()));
  hs.add(term.mask.data(), size_t(term.mask.size()));
  for (const auto& br : term.branches)
    hs.add(br.flow.valid.data(), size_t(br.flow.valid.size()));
}

/// Routes per-pixel upstream weight through the min and the mask, then
/// runs the branch backward passes.
void photo_term_backward(const Image& target, const detail::TargetCache& tc,
                         const std::vector<Image>& sources, const Grid& depth,
                         const std::vector<Pose>& poses, const Intrinsics& K,
                         const LossWeights& w, const SsimParams& p,
                         const PhotoTerm& term, double weight, Grid* g_depth,
                         std::vector<PoseGrad>* g_poses) {
  const int h = target.height();
  const int w_ = target.width();
  for (size_t j = 0; j < sources.size(); ++j) {
    Grid upstream = Grid::Zero(h, w_);
    bool any = false;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w_; ++u)
        if (term.mask(v, u) && term.mp.argmin(v, u) == int(j)) {
          upstream(v, u) = weight;
          any = true;
        }
    if (!any) continue;
    detail::warp_pe_branch_backward(target, tc, sources[j], depth, poses[j], K, w,
                                    p, term.branches[j], upstream, g_depth,
                                    g_poses ? &(*g_poses)[j] : nullptr);
  }
}

struct RegimeForward {
  detail::TargetCache tc;
  Grid id_min;
  Grid pred_depth;
  Grid ref_depth;
  std::optional<PhotoTerm> term_p;   // predicted depth, predicted poses
  std::optional<PhotoTerm> term_dp;  // predicted depth, reference poses
  std::optional<PhotoTerm> term_rp;  // reference depth, predicted poses
  std::optional<detail::SmoothnessTape> smooth;
  std::optional<detail::DepthSupTape> depth_sup;
  double value = 0.0;
};

void check_regime_args(Regime regime, const Image& target,
                       const std::vector<Image>& sources,
                       const InverseDepthMap& pred_inv_depth,
                       const std::vector<Pose>& pred_poses,
                       const InverseDepthMap& ref_inv_depth,
                       const std::vector<Pose>& ref_poses, const Intrinsics& K) {
  if (sources.empty()) throw std::invalid_argument("regime_loss: no sources");
  if (sources.size() != pred_poses.size())
    throw std::invalid_argument("regime_loss: one predicted pose per source");
  if (target.height() != K.height || target.width() != K.width)
    throw std::invalid_argument("regime_loss: target does not match intrinsics");
  if (pred_inv_depth.height() != K.height || pred_inv_depth.width() != K.width)
    throw std::invalid_argument("regime_loss: depth does not match intrinsics");
  if (regime != Regime::kSelfSupervised) {
    if (ref_poses.size() != pred_poses.size())
      throw std::invalid_argument("regime_loss: one reference pose per source");
    if (ref_inv_depth.height() != K.height || ref_inv_depth.width() != K.width)
      throw std::invalid_argument("regime_loss: reference depth shape");
  }
}

RegimeForward build_regime_forward(Regime regime, const Image& target,
                                   const std::vector<Image>& sources,
                                   const InverseDepthMap& pred_inv_depth,
                                   const std::vector<Pose>& pred_poses,
                                   const InverseDepthMap& ref_inv_depth,
                                   const std::vector<Pose>& ref_poses,
                                   const Intrinsics& K, const LossWeights& w,
                                   const SsimParams& p) {
  check_regime_args(regime, target, sources, pred_inv_depth, pred_poses,
                    ref_inv_depth, ref_poses, K);
  w.validate();
  p.validate();

  RegimeForward f;
  f.tc = detail::make_target_cache(target, p);
  f.id_min = detail::identity_pe_min(target, f.tc, sources, w, p);
  f.pred_depth = pred_inv_depth.values.inverse();
  const double n = double(target.height()) * double(target.width());

  switch (regime) {
    case Regime::kSelfSupervised: {
      f.term_p = photo_term(target, f.tc, sources, f.pred_depth, pred_poses, K, w,
                            p, f.id_min);
      f.smooth = detail::smoothness_forward(pred_inv_depth.values, target);
      f.value = f.term_p->masked_sum / n + w.lambda * f.smooth->values.sum() / n;
      break;
    }
    case Regime::kDirect: {
      f.term_p = photo_term(target, f.tc, sources, f.pred_depth, pred_poses, K, w,
                            p, f.id_min);
      f.depth_sup = detail::depth_supervision_forward(pred_inv_depth.values,
                                                      ref_inv_depth.values, p);
      f.value = w.psi * f.term_p->masked_sum / n + w.gamma * f.depth_sup->value;
      for (size_t j = 0; j < pred_poses.size(); ++j)
        f.value += pose_supervision_loss(pred_poses[j], ref_poses[j], w);
      break;
    }
    case Regime::kGeneralized: {
      f.ref_depth = ref_inv_depth.values.inverse();
      f.term_dp = photo_term(target, f.tc, sources, f.pred_depth, ref_poses, K, w,
                             p, f.id_min);
      f.term_rp = photo_term(target, f.tc, sources, f.ref_depth, pred_poses, K, w,
                             p, f.id_min);
      f.term_p = photo_term(target, f.tc, sources, f.pred_depth, pred_poses, K, w,
                            p, f.id_min);
      f.smooth = detail::smoothness_forward(pred_inv_depth.values, target);
      f.value = (f.term_dp->masked_sum + f.term_rp->masked_sum +
                 f.term_p->masked_sum) /
                    n +
                w.lambda * f.smooth->values.sum() / n;
      break;
    }
  }
  return f;
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kSelfSupervised: return "self_supervised";
    case Regime::kDirect: return "direct";
    case Regime::kGeneralized: return "generalized";
  }
  return "unknown";
}

std::optional<Regime> regime_from_name(const std::string& name) {
  if (name == "self_supervised") return Regime::kSelfSupervised;
  if (name == "direct") return Regime::kDirect;
  if (name == "generalized") return Regime::kGeneralized;
  return std::nullopt;
}

double regime_loss(Regime regime, const Image& target,
                   const std::vector<Image>& sources,
                   const InverseDepthMap& pred_inv_depth,
                   const std::vector<Pose>& pred_poses,
                   const InverseDepthMap& ref_inv_depth,
                   const std::vector<Pose>& ref_poses, const Intrinsics& K,
                   const LossWeights& w, const SsimParams& p,
                   std::uint64_t* state) {
  const RegimeForward f =
      build_regime_forward(regime, target, sources, pred_inv_depth, pred_poses,
                           ref_inv_depth, ref_poses, K, w, p);
  if (state) {
    detail::StateHasher hs;
    if (f.term_p) hash_photo_term(hs, *f.term_p);
    if (f.term_dp) hash_photo_term(hs, *f.term_dp);
    if (f.term_rp) hash_photo_term(hs, *f.term_rp);
    if (f.depth_sup) {
      const auto& mm = f.depth_sup->mm;
      hs.add_u64(std::uint64_t(mm.lo_in_pred) | (std::uint64_t(mm.hi_in_pred) << 1));
      hs.add_u64(std::uint64_t(mm.lo_index));
      hs.add_u64(std::uint64_t(mm.hi_index));
    }
    *state = hs.h;
  }
  return f.value;
}

LossGradients regime_loss_gradient(Regime regime, const Image& target,
                                   const std::vector<Image>& sources,
                                   const InverseDepthMap& pred_inv_depth,
                                   const std::vector<Pose>& pred_poses,
                                   const InverseDepthMap& ref_inv_depth,
                                   const std::vector<Pose>& ref_poses,
                                   const Intrinsics& K, const LossWeights& w,
                                   const SsimParams& p, bool wrt_depth,
                                   bool wrt_poses) {
  if (!wrt_depth && !wrt_poses)
    throw std::invalid_argument("regime_loss_gradient: nothing requested");
  const RegimeForward f =
      build_regime_forward(regime, target, sources, pred_inv_depth, pred_poses,
                           ref_inv_depth, ref_poses, K, w, p);

  const int h = target.height();
  const int w_ = target.width();
  const double n = double(h) * double(w_);

  LossGradients out;
  out.value = f.value;
  Grid g_depth = Grid::Zero(h, w_);      // d(loss)/d(depth values)
  Grid g_inv = Grid::Zero(h, w_);        // d(loss)/d(inverse depth), direct paths
  std::vector<PoseGrad> g_poses(pred_poses.size(), PoseGrad::Zero());

  Grid* gd = wrt_depth ? &g_depth : nullptr;
  std::vector<PoseGrad>* gp = wrt_poses ? &g_poses : nullptr;

  switch (regime) {
    case Regime::kSelfSupervised: {
      photo_term_backward(target, f.tc, sources, f.pred_depth, pred_poses, K, w, p,
                          *f.term_p, 1.0 / n, gd, gp);
      if (wrt_depth) {
        const Grid upstream = Grid::Constant(h, w_, w.lambda / n);
        detail::smoothness_backward(pred_inv_depth.values, *f.smooth, upstream, g_inv);
      }
      break;
    }
    case Regime::kDirect: {
      photo_term_backward(target, f.tc, sources, f.pred_depth, pred_poses, K, w, p,
                          *f.term_p, w.psi / n, gd, gp);
      if (wrt_depth)
        detail::depth_supervision_backward(pred_inv_depth.values,
                                           ref_inv_depth.values, *f.depth_sup, p,
                                           w.gamma, g_inv);
      if (wrt_poses) {
        for (size_t j = 0; j < pred_poses.size(); ++j) {
          const Eigen::Vector3d dx = pred_poses[j].translation - ref_poses[j].translation;
          const Eigen::Vector3d dr = pred_poses[j].rotation - ref_poses[j].rotation;
          const double nx = dx.norm();
          const double nr = dr.norm();
          if (nx > 0.0) g_poses[j].segment<3>(3) += w.zeta * dx / nx;
          if (nr > 0.0) g_poses[j].segment<3>(0) += w.theta * dr / nr;
        }
      }
      break;
    }
    case Regime::kGeneralized: {
      // depth term: predicted depth, reference poses (poses are constants)
      photo_term_backward(target, f.tc, sources, f.pred_depth, ref_poses, K, w, p,
                          *f.term_dp, 1.0 / n, gd, nullptr);
      // pose term: reference depth (constant), predicted poses
      photo_term_backward(target, f.tc, sources, f.ref_depth, pred_poses, K, w, p,
                          *f.term_rp, 1.0 / n, nullptr, gp);
      photo_term_backward(target, f.tc, sources, f.pred_depth, pred_poses, K, w, p,
                          *f.term_p, 1.0 / n, gd, gp);
      if (wrt_depth) {
        const Grid upstream = Grid::Constant(h, w_, w.lambda / n);
        detail::smoothness_backward(pred_inv_depth.values, *f.smooth, upstream, g_inv);
      }
      break;
    }
  }

  if (wrt_depth) {
    // chain d(depth)/d(inverse depth) = -depth^2
    out.wrt_inv_depth = g_inv - g_depth * f.pred_depth * f.pred_depth;
  }
  if (wrt_poses) out.wrt_poses = std::move(g_poses);
  return out;
}

}  // namespace photoloss
