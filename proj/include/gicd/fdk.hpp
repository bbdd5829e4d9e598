// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gicd/geometry.hpp"
#include "gicd/signal.hpp"

namespace gicd {

struct RampFilterSpec {
  double cutoff = 1.0;  // fraction of Nyquist

  void validate() const {
    require(cutoff > 0.0 && cutoff <= 1.0,
            "ramp filter: cutoff must be in (0,1], got ", cutoff);
  }
};

/// Feldkamp pre-weight: pixel times sdd / sqrt(sdd^2 + u^2 + v^2) with (u,v)
/// the signed panel offsets in mm.
template <typename Scalar>
Sinogram<Scalar> cosine_weight(const Sinogram<Scalar>& sino) {
  require(sino.units == SinoUnits::LineIntegral,
          "cosine_weight: sinogram must be in line_integral units");
  const ConeBeamGeometry& g = sino.geom;
  Sinogram<Scalar> out = sino;
  const double sdd2 = g.sdd_mm * g.sdd_mm;
  for (int r = 0; r < g.det_rows; ++r) {
    for (int c = 0; c < g.det_cols; ++c) {
      const auto [u, v] = detector_offsets(g, r, c);
      const Scalar w =
          static_cast<Scalar>(g.sdd_mm / std::sqrt(sdd2 + u * u + v * v));
      for (int view = 0; view < g.views(); ++view)
        out.at(view, r, c) *= w;
    }
  }
  return out;
}

/// Band-limited ramp kernel sampled at integer lags of pitch du. At
/// cutoff = 1 this is the classic discrete ramp: h[0] = 1/(4 du^2),
/// h[n] = -1/(pi^2 n^2 du^2) for odd n, 0 for even n != 0. For cutoff < 1
/// the ideal low-pass at cutoff * Nyquist folds into the closed form.
inline std::vector<double> ramp_kernel(int max_lag, double du, double cutoff) {
  std::vector<double> h(2 * max_lag + 1, 0.0);
  if (cutoff == 1.0) {
    h[max_lag] = 1.0 / (4.0 * du * du);
    for (int n = 1; n <= max_lag; ++n) {
      const double v = (n % 2 == 1) ? -1.0 / (kPi * kPi * n * n * du * du) : 0.0;
      h[max_lag + n] = v;
      h[max_lag - n] = v;
    }
    return h;
  }
  const double w = cutoff / (2.0 * du);  // band edge in cycles/mm
  h[max_lag] = w * w;
  for (int n = 1; n <= max_lag; ++n) {
    const double x = n * du;
    const double v = w * std::sin(2.0 * kPi * w * x) / (kPi * x) +
                     (std::cos(2.0 * kPi * w * x) - 1.0) /
                         (2.0 * kPi * kPi * x * x);
    h[max_lag + n] = v;
    h[max_lag - n] = v;
  }
  return h;
}

/// Convolves every detector row (fixed view and v-row, varying u) with the
/// ramp kernel, zero-padded at the boundaries:
///   out[j] = du * sum_k in[k] h[j - k].
/// The kernel pitch du is the column pitch rescaled to the isocenter plane
/// (det_spacing_u * sid/sdd), which keeps the backprojection in absolute
/// attenuation units.
template <typename Scalar>
Sinogram<Scalar> ramp_filter_rows(const Sinogram<Scalar>& sino,
                                  const RampFilterSpec& spec) {
  spec.validate();
  const ConeBeamGeometry& g = sino.geom;
  const double du = g.det_spacing_u_mm * g.sid_mm / g.sdd_mm;
  const int cols = g.det_cols;
  const std::vector<double> h = ramp_kernel(cols - 1, du, spec.cutoff);
  const double* hc = h.data() + (cols - 1);  // h centered at lag 0
  Sinogram<Scalar> out = Sinogram<Scalar>::zeros(g, sino.units);
  out.norm_range = sino.norm_range;
  const long per_view = sino.pixels_per_view();
  const int views = g.views();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < views; ++v) {
    for (int r = 0; r < g.det_rows; ++r) {
      const Scalar* in =
          sino.data.data() + static_cast<long>(v) * per_view +
          static_cast<long>(r) * cols;
      Scalar* o = out.data.data() + static_cast<long>(v) * per_view +
                  static_cast<long>(r) * cols;
      for (int j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (int k = 0; k < cols; ++k)
          acc += static_cast<double>(in[k]) * hc[j - k];
        o[j] = static_cast<Scalar>(acc * du);
      }
    }
  }
  return out;
}

inline double mean_angular_spacing_rad(const ConeBeamGeometry& g) {
  require(g.views() >= 2, "fdk: need at least two views");
  double sum = 0.0;
  for (int i = 1; i < g.views(); ++i)
    sum += std::abs(g.angles_deg[i] - g.angles_deg[i - 1]);
  return deg_to_rad(sum / (g.views() - 1));
}

/// Voxel-driven Feldkamp backprojection of an already weighted and filtered
/// sinogram. Each voxel projects onto the panel (isocenter-plane
/// coordinates), samples it bilinearly (zero outside), weighs by (sid/U)^2
/// with U the source distance along the central ray, and scales by half the
/// angular spacing. Bit-identical for any thread count (voxels accumulate
/// privately in fixed view order).
template <typename Scalar>
Volume<Scalar> fdk_backproject(const Sinogram<Scalar>& filtered,
                               const VolumeGrid& grid) {
  filtered.validate();
  grid.validate();
  const ConeBeamGeometry& g = filtered.geom;
  const double dbeta = mean_angular_spacing_rad(g);
  const double du = g.det_spacing_u_mm * g.sid_mm / g.sdd_mm;
  const double dv = g.det_spacing_v_mm * g.sid_mm / g.sdd_mm;
  const double cu = 0.5 * (g.det_cols - 1);
  const double cv = 0.5 * (g.det_rows - 1);
  const int views = g.views();
  const long per_view = filtered.pixels_per_view();

  struct View {
    Eigen::Vector3d u_hat, c_hat;
    const Scalar* data;
  };
  std::vector<View> vs(views);
  for (int v = 0; v < views; ++v) {
    const ViewFrame f = view_frame(g, g.angles_deg[v]);
    vs[v] = {f.u_hat, f.c_hat,
             filtered.data.data() + static_cast<long>(v) * per_view};
  }

  Volume<Scalar> vol = Volume<Scalar>::zeros(grid, VolumeUnits::MuPerMm);
  Scalar* out = vol.data.data();
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const int rows = g.det_rows, cols = g.det_cols;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nz; ++k) {
    const double z = grid.origin_mm[2] + k * grid.spacing_mm[2];
    for (int j = 0; j < ny; ++j) {
      const double y = grid.origin_mm[1] + j * grid.spacing_mm[1];
      for (int i = 0; i < nx; ++i) {
        const double x = grid.origin_mm[0] + i * grid.spacing_mm[0];
        double acc = 0.0;
        for (const View& view : vs) {
          const double big_u =
              g.sid_mm + x * view.c_hat[0] + y * view.c_hat[1];
          if (big_u < 1e-6) continue;
          const double ratio = g.sid_mm / big_u;
          const double ui = ratio * (x * view.u_hat[0] + y * view.u_hat[1]);
          const double vi = ratio * z;
          const double cc = ui / du + cu;
          const double rr = vi / dv + cv;
          const int c0 = static_cast<int>(std::floor(cc));
          const int r0 = static_cast<int>(std::floor(rr));
          if (c0 < -1 || c0 >= cols || r0 < -1 || r0 >= rows) continue;
          const double fc = cc - c0, fr = rr - r0;
          auto px = [&](int r, int c) -> double {
            if (r < 0 || r >= rows || c < 0 || c >= cols) return 0.0;
            return static_cast<double>(
                view.data[static_cast<long>(r) * cols + c]);
          };
          const double val =
              (1.0 - fr) * ((1.0 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
              fr * ((1.0 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
          acc += ratio * ratio * val;
        }
        out[grid.index(i, j, k)] = static_cast<Scalar>(acc * dbeta * 0.5);
      }
    }
  }
  return vol;
}

/// Full FDK chain: cosine weighting, row-wise ramp filtering, weighted
/// backprojection. Output is in mu_per_mm.
template <typename Scalar>
Volume<Scalar> fdk_reconstruct(const Sinogram<Scalar>& sino,
                               const VolumeGrid& grid,
                               const RampFilterSpec& spec) {
  return fdk_backproject(ramp_filter_rows(cosine_weight(sino), spec), grid);
}

}  // namespace gicd
