#include "photoloss/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "photo_detail.hpp"
#include "photoloss/parallel.hpp"

namespace photoloss {

using detail::kInf;

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("LossWeights: alpha must be in [0, 1]");
  for (double v : {lambda, psi, gamma, zeta, theta})
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("LossWeights: weights must be >= 0");
}

void SsimParams::validate() const {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("SsimParams: window must be odd and >= 3");
  if (!(c1 > 0.0) || !(c2 > 0.0))
    throw std::invalid_argument("SsimParams: c1 and c2 must be positive");
}

double PixelLossMap::mean_over_all_pixels() const {
  const auto n = values.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < values.cols(); ++j)
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      if (weight_mask(i, j)) sum += values(i, j);
  return sum / double(n);
}

namespace detail {

Grid box_filter(const Grid& g, int window) {
  const int h = int(g.rows());
  const int w = int(g.cols());
  const int k = window / 2;
  const double inv_area = 1.0 / double(window * window);
  Grid out(h, w);
  parallel_for(h, [&](int v0, int v1) {
    for (int v = v0; v < v1; ++v)
      for (int u = 0; u < w; ++u) {
        double acc = 0.0;
        for (int dv = -k; dv <= k; ++dv) {
          const int sv = std::clamp(v + dv, 0, h - 1);
          for (int du = -k; du <= k; ++du)
            acc += g(sv, std::clamp(u + du, 0, w - 1));
        }
        out(v, u) = acc * inv_area;
      }
  });
  return out;
}

Grid box_scatter(const Grid& g, int window) {
  const int h = int(g.rows());
  const int w = int(g.cols());
  const int k = window / 2;
  const double inv_area = 1.0 / double(window * window);
  Grid out = Grid::Zero(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const double val = g(v, u) * inv_area;
      if (val == 0.0) continue;
      for (int dv = -k; dv <= k; ++dv) {
        const int sv = std::clamp(v + dv, 0, h - 1);
        for (int du = -k; du <= k; ++du)
          out(sv, std::clamp(u + du, 0, w - 1)) += val;
      }
    }
  return out;
}

BoxFields box_fields(const Grid& g, int window) {
  return BoxFields{box_filter(g, window), box_filter(g * g, window)};
}

Grid ssim_channel(const Grid& a, const BoxFields& af, const Grid& b,
                  const SsimParams& p, PairFields* tape) {
  Grid mb = box_filter(b, p.window);
  Grid mbb = box_filter(b * b, p.window);
  Grid mab = box_filter(a * b, p.window);

  const Grid va = af.mm - af.m * af.m;
  const Grid vb = mbb - mb * mb;
  const Grid vab = mab - af.m * mb;

  const Grid num = (2.0 * (af.m * mb) + p.c1) * (2.0 * vab + p.c2);
  const Grid den = (af.m * af.m + mb * mb + p.c1) * (va + vb + p.c2);
  Grid s = num / den;

  if (tape) {
    tape->mb = std::move(mb);
    tape->mbb = std::move(mbb);
    tape->mab = std::move(mab);
  }
  return s;
}

void ssim_channel_backward(const Grid& a, const BoxFields& af, const Grid& b,
                           const PairFields& tape, const SsimParams& p,
                           const Grid& g_ssim, Grid* g_a, Grid* g_b) {
  const Grid& ma = af.m;
  const Grid& mb = tape.mb;
  const Grid va = af.mm - ma * ma;
  const Grid vb = tape.mbb - mb * mb;
  const Grid vab = tape.mab - ma * mb;

  const Grid A = 2.0 * (ma * mb) + p.c1;
  const Grid B = 2.0 * vab + p.c2;
  const Grid C = ma * ma + mb * mb + p.c1;
  const Grid D = va + vb + p.c2;
  const Grid inv_cd = (C * D).inverse();
  const Grid s = A * B * inv_cd;

  const Grid dA = B * inv_cd;   // dS/dA
  const Grid dB = A * inv_cd;   // dS/dB
  const Grid dC = -s / C;       // dS/dC
  const Grid dD = -s / D;       // dS/dD

  // Chain to the five box fields; maa and mbb share dS/dD, mab shares 2*dS/dB.
  const Grid g_ma = g_ssim * (2.0 * mb * (dA - dB) + 2.0 * ma * (dC - dD));
  const Grid g_mb = g_ssim * (2.0 * ma * (dA - dB) + 2.0 * mb * (dC - dD));
  const Grid p_d = box_scatter(g_ssim * dD, p.window);
  const Grid p_ab = box_scatter(g_ssim * (2.0 * dB), p.window);

  if (g_a) *g_a += box_scatter(g_ma, p.window) + 2.0 * a * p_d + b * p_ab;
  if (g_b) *g_b += box_scatter(g_mb, p.window) + 2.0 * b * p_d + a * p_ab;
}

TargetCache make_target_cache(const Image& target, const SsimParams& p) {
  TargetCache tc;
  tc.fields.reserve(size_t(target.channels()));
  for (int c = 0; c < target.channels(); ++c)
    tc.fields.push_back(box_fields(target.plane(c), p.window));
  return tc;
}

Grid pe_against_target(const Image& target, const TargetCache& tc,
                       const Image& b, const LossWeights& w,
                       const SsimParams& p, std::vector<PairFields>* tapes) {
  const int channels = target.channels();
  Grid ssim_sum = Grid::Zero(target.height(), target.width());
  Grid l1_sum = Grid::Zero(target.height(), target.width());
  if (tapes) tapes->resize(size_t(channels));
  for (int c = 0; c < channels; ++c) {
    PairFields* tape = tapes ? &(*tapes)[size_t(c)] : nullptr;
    ssim_sum += ssim_channel(target.plane(c), tc.fields[size_t(c)], b.plane(c), p, tape);
    l1_sum += (target.plane(c) - b.plane(c)).abs();
  }
  const double inv_c = 1.0 / double(channels);
  return (w.alpha / 2.0) * (1.0 - ssim_sum * inv_c) +
         (1.0 - w.alpha) * (l1_sum * inv_c);
}

WarpBranch warp_pe_branch(const Image& target, const TargetCache& tc,
                          const Image& source, const Grid& depth,
                          const Pose& pose, const Intrinsics& K,
                          const LossWeights& w, const SsimParams& p) {
  WarpBranch br;
  br.flow = project(DepthMap(depth), pose, K);
  auto [warped, mask] = bilinear_sample(source, br.flow);
  br.warped = std::move(warped);
  br.pe = pe_against_target(target, tc, br.warped, w, p, &br.pair_fields);
  return br;
}

MinPe min_over_branches(const std::vector<WarpBranch>& branches) {
  const int h = int(branches[0].pe.rows());
  const int w = int(branches[0].pe.cols());
  MinPe out;
  out.values = Grid::Constant(h, w, kInf);
  out.argmin = IndexGrid::Constant(h, w, -1);
  for (int j = 0; j < int(branches.size()); ++j) {
    const WarpBranch& br = branches[size_t(j)];
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!br.flow.valid(v, u)) continue;
        if (br.pe(v, u) < out.values(v, u)) {
          out.values(v, u) = br.pe(v, u);
          out.argmin(v, u) = j;
        }
      }
  }
  return out;
}

Grid identity_pe_min(const Image& target, const TargetCache& tc,
                     const std::vector<Image>& sources, const LossWeights& w,
                     const SsimParams& p) {
  Grid best = Grid::Constant(target.height(), target.width(), kInf);
  for (const Image& src : sources)
    best = best.min(pe_against_target(target, tc, src, w, p, nullptr));
  return best;
}

}  // namespace detail

namespace {

void check_pair(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": image shapes differ");
}

void check_photometric_args(const Image& target, const std::vector<Image>& sources,
                            const Grid& depth, const std::vector<Pose>& poses,
                            const Intrinsics& K, const char* what) {
  if (sources.empty())
    throw std::invalid_argument(std::string(what) + ": source list is empty");
  if (sources.size() != poses.size())
    throw std::invalid_argument(std::string(what) + ": one pose per source required");
  for (const Image& s : sources) check_pair(target, s, what);
  if (target.height() != K.height || target.width() != K.width)
    throw std::invalid_argument(std::string(what) + ": target does not match intrinsics");
  if (int(depth.rows()) != K.height || int(depth.cols()) != K.width)
    throw std::invalid_argument(std::string(what) + ": depth does not match intrinsics");
}

/// Shared body of the three photometric terms: per-pixel min over valid
/// warped sources plus its reliability mask.
PixelLossMap masked_min_pe(const Image& target, const std::vector<Image>& sources,
                           const Grid& depth, const std::vector<Pose>& poses,
                           const Intrinsics& K, const LossWeights& w,
                           const SsimParams& p) {
  const detail::TargetCache tc = detail::make_target_cache(target, p);
  std::vector<detail::WarpBranch> branches;
  branches.reserve(sources.size());
  for (size_t j = 0; j < sources.size(); ++j)
    branches.push_back(detail::warp_pe_branch(target, tc, sources[j], depth, poses[j], K, w, p));
  const detail::MinPe mp = detail::min_over_branches(branches);
  const Grid id_min = detail::identity_pe_min(target, tc, sources, w, p);

  PixelLossMap out;
  out.values = (mp.argmin >= 0).select(mp.values, 0.0);
  out.weight_mask = (mp.argmin >= 0) && (mp.values < id_min);
  return out;
}

}  // namespace

Grid ssim_map(const Image& a, const Image& b, const SsimParams& p) {
  check_pair(a, b, "ssim_map");
  p.validate();
  Grid sum = Grid::Zero(a.height(), a.width());
  for (int c = 0; c < a.channels(); ++c) {
    const detail::BoxFields af = detail::box_fields(a.plane(c), p.window);
    sum += detail::ssim_channel(a.plane(c), af, b.plane(c), p, nullptr);
  }
  return sum / double(a.channels());
}

PixelLossMap pe(const Image& a, const Image& b, const LossWeights& w,
                const SsimParams& p) {
  check_pair(a, b, "pe");
  w.validate();
  p.validate();
  const detail::TargetCache tc = detail::make_target_cache(a, p);
  PixelLossMap out;
  out.values = detail::pe_against_target(a, tc, b, w, p, nullptr);
  out.weight_mask = BoolGrid::Constant(a.height(), a.width(), true);
  return out;
}

PixelLossMap reprojection_loss(const Image& target,
                               const std::vector<Image>& sources,
                               const DepthMap& depth,
                               const std::vector<Pose>& poses,
                               const Intrinsics& K, const LossWeights& w,
                               const SsimParams& p) {
  check_photometric_args(target, sources, depth.values, poses, K, "reprojection_loss");
  w.validate();
  p.validate();
  const detail::TargetCache tc = detail::make_target_cache(target, p);
  std::vector<detail::WarpBranch> branches;
  for (size_t j = 0; j < sources.size(); ++j)
    branches.push_back(
        detail::warp_pe_branch(target, tc, sources[j], depth.values, poses[j], K, w, p));
  const detail::MinPe mp = detail::min_over_branches(branches);
  PixelLossMap out;
  out.values = (mp.argmin >= 0).select(mp.values, 0.0);
  out.weight_mask = mp.argmin >= 0;
  return out;
}

BoolGrid automask(const Image& target, const std::vector<Image>& sources,
                  const std::vector<Image>& warped, const LossWeights& w,
                  const SsimParams& p, const std::vector<BoolGrid>* valid) {
  if (sources.empty() || sources.size() != warped.size())
    throw std::invalid_argument("automask: sources and warped must pair up");
  for (const Image& s : sources) check_pair(target, s, "automask");
  for (const Image& s : warped) check_pair(target, s, "automask");
  if (valid && valid->size() != warped.size())
    throw std::invalid_argument("automask: one valid mask per warped image");

  const detail::TargetCache tc = detail::make_target_cache(target, p);
  const int h = target.height();
  const int w_ = target.width();
  Grid warped_min = Grid::Constant(h, w_, kInf);
  for (size_t j = 0; j < warped.size(); ++j) {
    const Grid pe_j = detail::pe_against_target(target, tc, warped[j], w, p, nullptr);
    if (valid) {
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w_; ++u)
          if ((*valid)[j](v, u)) warped_min(v, u) = std::min(warped_min(v, u), pe_j(v, u));
    } else {
      warped_min = warped_min.min(pe_j);
    }
  }
  const Grid id_min = detail::identity_pe_min(target, tc, sources, w, p);
  return warped_min < id_min;
}

PixelLossMap smoothness_loss(const InverseDepthMap& inv_depth, const Image& target) {
  if (inv_depth.height() != target.height() || inv_depth.width() != target.width())
    throw std::invalid_argument("smoothness_loss: shapes differ");
  const detail::SmoothnessTape tape =
      detail::smoothness_forward(inv_depth.values, target);
  PixelLossMap out;
  out.values = tape.values;
  out.weight_mask = BoolGrid::Constant(target.height(), target.width(), true);
  return out;
}

double self_supervised_total(const Image& target, const std::vector<Image>& sources,
                             const InverseDepthMap& inv_depth,
                             const std::vector<Pose>& poses, const Intrinsics& K,
                             const LossWeights& w, const SsimParams& p) {
  check_photometric_args(target, sources, inv_depth.values, poses, K,
                         "self_supervised_total");
  w.validate();
  p.validate();
  const Grid depth = inv_depth.values.inverse();
  const PixelLossMap photo = masked_min_pe(target, sources, depth, poses, K, w, p);
  const PixelLossMap smooth = smoothness_loss(inv_depth, target);
  return photo.mean_over_all_pixels() + w.lambda * smooth.mean_over_all_pixels();
}

double depth_supervision_loss(const InverseDepthMap& pred,
                              const InverseDepthMap& ref, const SsimParams& p) {
  if (pred.height() != ref.height() || pred.width() != ref.width())
    throw std::invalid_argument("depth_supervision_loss: shapes differ");
  p.validate();
  return detail::depth_supervision_forward(pred.values, ref.values, p).value;
}

double pose_supervision_loss(const Pose& pred, const Pose& ref,
                             const LossWeights& w) {
  pred.validate();
  ref.validate();
  w.validate();
  return w.zeta * (pred.translation - ref.translation).norm() +
         w.theta * (pred.rotation - ref.rotation).norm();
}

double direct_supervised_total(const Image& target, const std::vector<Image>& sources,
                               const InverseDepthMap& pred_inv_depth,
                               const std::vector<Pose>& pred_poses,
                               const InverseDepthMap& ref_inv_depth,
                               const std::vector<Pose>& ref_poses,
                               const Intrinsics& K, const LossWeights& w,
                               const SsimParams& p) {
  check_photometric_args(target, sources, pred_inv_depth.values, pred_poses, K,
                         "direct_supervised_total");
  if (ref_poses.size() != pred_poses.size())
    throw std::invalid_argument("direct_supervised_total: reference pose count");
  w.validate();
  p.validate();

  const Grid depth = pred_inv_depth.values.inverse();
  const PixelLossMap photo = masked_min_pe(target, sources, depth, pred_poses, K, w, p);
  double total = w.psi * photo.mean_over_all_pixels();
  total += w.gamma * depth_supervision_loss(pred_inv_depth, ref_inv_depth, p);
  for (size_t j = 0; j < pred_poses.size(); ++j)
    total += pose_supervision_loss(pred_poses[j], ref_poses[j], w);
  return total;
}

PixelLossMap gen_depth_loss(const Image& target, const std::vector<Image>& sources,
                            const DepthMap& pred_depth,
                            const std::vector<Pose>& ref_poses, const Intrinsics& K,
                            const LossWeights& w, const SsimParams& p) {
  check_photometric_args(target, sources, pred_depth.values, ref_poses, K,
                         "gen_depth_loss");
  w.validate();
  p.validate();
  return masked_min_pe(target, sources, pred_depth.values, ref_poses, K, w, p);
}

PixelLossMap gen_pose_loss(const Image& target, const std::vector<Image>& sources,
                           const DepthMap& ref_depth,
                           const std::vector<Pose>& pred_poses, const Intrinsics& K,
                           const LossWeights& w, const SsimParams& p) {
  check_photometric_args(target, sources, ref_depth.values, pred_poses, K,
                         "gen_pose_loss");
  w.validate();
  p.validate();
  return masked_min_pe(target, sources, ref_depth.values, pred_poses, K, w, p);
}

double generalized_total(const Image& target, const std::vector<Image>& sources,
                         const InverseDepthMap& pred_inv_depth,
                         const std::vector<Pose>& pred_poses,
                         const InverseDepthMap& ref_inv_depth,
                         const std::vector<Pose>& ref_poses, const Intrinsics& K,
                         const LossWeights& w, const SsimParams& p) {
  check_photometric_args(target, sources, pred_inv_depth.values, pred_poses, K,
                         "generalized_total");
  if (ref_poses.size() != pred_poses.size())
    throw std::invalid_argument("generalized_total: reference pose count");
  w.validate();
  p.validate();

  const Grid pred_depth = pred_inv_depth.values.inverse();
  const Grid ref_depth = ref_inv_depth.values.inverse();
  const PixelLossMap term_dp =
      masked_min_pe(target, sources, pred_depth, ref_poses, K, w, p);
  const PixelLossMap term_rp =
      masked_min_pe(target, sources, ref_depth, pred_poses, K, w, p);
  const PixelLossMap term_p =
      masked_min_pe(target, sources, pred_depth, pred_poses, K, w, p);
  const PixelLossMap smooth = smoothness_loss(pred_inv_depth, target);
  return term_dp.mean_over_all_pixels() + term_rp.mean_over_all_pixels() +
         term_p.mean_over_all_pixels() + w.lambda * smooth.mean_over_all_pixels();
}

}  // namespace photoloss
