// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gicd/error.hpp"
#include "gicd/signal.hpp"

namespace gicd {

struct MetricReport {
  double mae_hu = 0.0;
  double ssim = 0.0;
  double psnr_db = 0.0;  // +infinity when the inputs are identical
  long mask_voxels = 0;
  double dynamic_range = 0.0;
};

struct BodyMask {
  VolumeGrid grid;
  std::vector<std::uint8_t> inside;
  long count = 0;
};

/// Threshold at threshold_hu then keep the largest 6-connected component.
template <typename Scalar>
BodyMask body_mask(const Volume<Scalar>& truth, double threshold_hu = -500.0) {
  require(truth.units == VolumeUnits::Hu, "body_mask: volume must be in HU");
  truth.validate();
  const VolumeGrid& g = truth.grid;
  const long n = g.voxels();
  std::vector<std::uint8_t> above(n, 0);
  long n_above = 0;
  for (long i = 0; i < n; ++i) {
    if (static_cast<double>(truth.data[i]) > threshold_hu) {
      above[i] = 1;
      ++n_above;
    }
  }
  require(n_above > 0, "body_mask: no voxels above ", threshold_hu, " HU");

  // Flood fill per component, remember the largest.
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::vector<std::int32_t> label(n, -1);
  std::vector<long> stack;
  long best_count = 0;
  std::int32_t best_label = -1, next_label = 0;
  for (long seed = 0; seed < n; ++seed) {
    if (!above[seed] || label[seed] >= 0) continue;
    const std::int32_t cur = next_label++;
    long count = 0;
    stack.push_back(seed);
    label[seed] = cur;
    while (!stack.empty()) {
      const long v = stack.back();
      stack.pop_back();
      ++count;
      const int i = static_cast<int>(v % nx);
      const int j = static_cast<int>((v / nx) % ny);
      const int k = static_cast<int>(v / (static_cast<long>(nx) * ny));
      const int di[6] = {1, -1, 0, 0, 0, 0};
      const int dj[6] = {0, 0, 1, -1, 0, 0};
      const int dk[6] = {0, 0, 0, 0, 1, -1};
      for (int d = 0; d < 6; ++d) {
        const int ii = i + di[d], jj = j + dj[d], kk = k + dk[d];
        if (ii < 0 || ii >= nx || jj < 0 || jj >= ny || kk < 0 || kk >= nz)
          continue;
        const long w = g.index(ii, jj, kk);
        if (above[w] && label[w] < 0) {
          label[w] = cur;
          stack.push_back(w);
        }
      }
    }
    if (count > best_count) {
      best_count = count;
      best_label = cur;
    }
  }

  BodyMask m;
  m.grid = g;
  m.inside.assign(n, 0);
  m.count = best_count;
  for (long i = 0; i < n; ++i)
    if (label[i] == best_label) m.inside[i] = 1;
  return m;
}

template <typename Scalar>
double mae_hu(const Volume<Scalar>& recon, const Volume<Scalar>& truth,
              const BodyMask& mask) {
  require(recon.grid == truth.grid && recon.grid == mask.grid,
          "mae_hu: grid mismatch");
  require(recon.units == VolumeUnits::Hu && truth.units == VolumeUnits::Hu,
          "mae_hu: volumes must be in HU");
  require(mask.count > 0, "mae_hu: empty mask");
  double acc = 0.0;
  for (long i = 0; i < recon.data.size(); ++i)
    if (mask.inside[i])
      acc += std::abs(static_cast<double>(recon.data[i]) -
                      static_cast<double>(truth.data[i]));
  return acc / mask.count;
}

struct SsimOptions {
  int window = 11;
  double k1 = 0.01;
  double k2 = 0.03;
  std::optional<double> dynamic_range;     // default: max - min of truth
  const BodyMask* mask = nullptr;          // restrict to window centers in mask
};

namespace detail {

// SSIM of one window pair with uniform weights (biased moments, the
// conventional formulation).
inline double ssim_window(const double* x, const double* y, int n, double c1,
                          double c2) {
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (int i = 0; i < n; ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cov += (x[i] - mx) * (y[i] - my);
  }
  vx /= n;
  vy /= n;
  cov /= n;
  return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
         ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace detail

/// Mean SSIM over uniform window x window patches of every axial slice
/// (per-slice mean, then mean across slices). C1 = (k1 L)^2, C2 = (k2 L)^2.
template <typename Scalar>
double ssim(const Volume<Scalar>& recon, const Volume<Scalar>& truth,
            const SsimOptions& opt = {}) {
  require(recon.grid == truth.grid, "ssim: grid mismatch");
  const VolumeGrid& g = recon.grid;
  const int w = opt.window;
  require(g.dims[0] >= w && g.dims[1] >= w, "ssim: slice ", g.dims[0], "x",
          g.dims[1], " smaller than the ", w, "x", w, " window");
  const double range =
      opt.dynamic_range
          ? *opt.dynamic_range
          : static_cast<double>(truth.data.maxCoeff() - truth.data.minCoeff());
  require(range > 0.0, "ssim: dynamic range must be positive");
  const double c1 = (opt.k1 * range) * (opt.k1 * range);
  const double c2 = (opt.k2 * range) * (opt.k2 * range);
  if (opt.mask != nullptr)
    require(opt.mask->grid == g, "ssim: mask grid mismatch");

  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::vector<double> bx(w * w), by(w * w);
  double slice_sum = 0.0;
  int slice_n = 0;
  for (int k = 0; k < nz; ++k) {
    double win_sum = 0.0;
    long win_n = 0;
    for (int j0 = 0; j0 + w <= ny; ++j0) {
      for (int i0 = 0; i0 + w <= nx; ++i0) {
        if (opt.mask != nullptr) {
          const long center =
              g.index(i0 + w / 2, j0 + w / 2, k);
          if (!opt.mask->inside[center]) continue;
        }
        for (int j = 0; j < w; ++j) {
          for (int i = 0; i < w; ++i) {
            const long idx = g.index(i0 + i, j0 + j, k);
            bx[j * w + i] = static_cast<double>(recon.data[idx]);
            by[j * w + i] = static_cast<double>(truth.data[idx]);
          }
        }
        win_sum += detail::ssim_window(bx.data(), by.data(), w * w, c1, c2);
        ++win_n;
      }
    }
    if (win_n > 0) {
      slice_sum += win_sum / win_n;
      ++slice_n;
    }
  }
  require(slice_n > 0, "ssim: no windows evaluated");
  return slice_sum / slice_n;
}

/// 20 log10(L / RMSE); +infinity when the inputs match exactly. RMSE runs
/// over the full volume unless a mask is supplied.
template <typename Scalar>
double psnr_db(const Volume<Scalar>& recon, const Volume<Scalar>& truth,
               std::optional<double> dynamic_range = std::nullopt,
               const BodyMask* mask = nullptr) {
  require(recon.grid == truth.grid, "psnr_db: grid mismatch");
  const double range =
      dynamic_range
          ? *dynamic_range
          : static_cast<double>(truth.data.maxCoeff() - truth.data.minCoeff());
  require(range > 0.0, "psnr_db: dynamic range must be positive");
  double acc = 0.0;
  long n = 0;
  for (long i = 0; i < recon.data.size(); ++i) {
    if (mask != nullptr && !mask->inside[i]) continue;
    const double d = static_cast<double>(recon.data[i]) -
                     static_cast<double>(truth.data[i]);
    acc += d * d;
    ++n;
  }
  require(n > 0, "psnr_db: empty selection");
  const double rmse = std::sqrt(acc / n);
  if (rmse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(range / rmse);
}

/// Convenience bundle: MAE over the body mask, global SSIM and PSNR, all on
/// HU volumes with L = max - min of the truth.
template <typename Scalar>
MetricReport evaluate_metrics(const Volume<Scalar>& recon,
                              const Volume<Scalar>& truth,
                              double mask_threshold_hu = -500.0,
                              bool masked_psnr = false) {
  const BodyMask mask = body_mask(truth, mask_threshold_hu);
  MetricReport r;
  r.dynamic_range =
      static_cast<double>(truth.data.maxCoeff() - truth.data.minCoeff());
  r.mask_voxels = mask.count;
  r.mae_hu = mae_hu(recon, truth, mask);
  SsimOptions opt;
  opt.dynamic_range = r.dynamic_range;
  r.ssim = ssim(recon, truth, opt);
  r.psnr_db = psnr_db(recon, truth, r.dynamic_range,
                      masked_psnr ? &mask : nullptr);
  return r;
}

}  // namespace gicd
