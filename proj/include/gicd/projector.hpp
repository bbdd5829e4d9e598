// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gicd/geometry.hpp"
#include "gicd/rng.hpp"
#include "gicd/signal.hpp"

namespace gicd {

namespace detail {

// Per-ray sampling pattern shared verbatim by the forward and adjoint
// kernels, expressed in grid coordinates (voxel units, origin at voxel
// (0,0,0)). n = ceil(len/step) samples at t = t0 + (k+0.5)h, h = len/n, so
// the physical weights sum exactly to the clipped chord length.
struct RayTrace {
  double g0[3];      // grid coords of the first sample
  double dg[3];      // grid-space advance per sample
  double h = 0.0;    // physical step length (mm)
  int n = 0;
  bool interior = false;  // every trilinear corner in range, no checks
};

struct GridMap {
  int dims[3];
  double origin[3];
  double inv_spacing[3];
  long sy, sz;

  explicit GridMap(const VolumeGrid& g) {
    for (int a = 0; a < 3; ++a) {
      dims[a] = g.dims[a];
      origin[a] = g.origin_mm[a];
      inv_spacing[a] = 1.0 / g.spacing_mm[a];
    }
    sy = g.dims[0];
    sz = static_cast<long>(g.dims[0]) * g.dims[1];
  }
};

// Clips the ray to the voxel-volume hull (half a voxel beyond the outermost
// centers) and lays out the samples. Returns n = 0 on a miss.
inline RayTrace trace_ray(const GridMap& g, const Eigen::Vector3d& src,
                          const Eigen::Vector3d& dir_unit, double t_far,
                          double step_mm) {
  RayTrace tr;
  double t0 = 0.0, t1 = t_far;
  for (int a = 0; a < 3; ++a) {
    const double half = 0.5 / g.inv_spacing[a];
    const double lo = g.origin[a] - half;
    const double hi = g.origin[a] + (g.dims[a] - 1) / g.inv_spacing[a] + half;
    if (std::abs(dir_unit[a]) < 1e-12) {
      if (src[a] < lo || src[a] > hi) return tr;
      continue;
    }
    double ta = (lo - src[a]) / dir_unit[a];
    double tb = (hi - src[a]) / dir_unit[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 <= t0) return tr;
  const double len = t1 - t0;
  tr.n = static_cast<int>(std::ceil(len / step_mm));
  if (tr.n <= 0) return tr;
  tr.h = len / tr.n;

  tr.interior = true;
  const double inv_n1 = tr.n > 1 ? 1.0 / (tr.n - 1) : 0.0;
  const double t_first = t0 + 0.5 * tr.h;
  const double t_last = t0 + (tr.n - 0.5) * tr.h;
  for (int a = 0; a < 3; ++a) {
    const double first =
        (src[a] + t_first * dir_unit[a] - g.origin[a]) * g.inv_spacing[a];
    const double last =
        (src[a] + t_last * dir_unit[a] - g.origin[a]) * g.inv_spacing[a];
    tr.g0[a] = first;
    tr.dg[a] = (last - first) * inv_n1;
    // Grid coordinates move linearly, so endpoint bounds cover all samples;
    // the margin absorbs incremental rounding drift along the ray.
    const double lo = std::min(first, last);
    const double hi = std::max(first, last);
    if (!(lo >= 0.0 && hi < static_cast<double>(g.dims[a] - 1) - 1e-6))
      tr.interior = false;
  }
  return tr;
}

// Gather along the trace. Interior rays skip all bounds handling; boundary
// rays fall back to corner-checked zero extension.
template <typename Scalar>
inline double trace_gather(const GridMap& g, const RayTrace& tr,
                           const Scalar* f) {
  double gx = tr.g0[0], gy = tr.g0[1], gz = tr.g0[2];
  double acc = 0.0;
  if (tr.interior) {
    for (int k = 0; k < tr.n; ++k) {
      const int ix = static_cast<int>(gx);
      const int iy = static_cast<int>(gy);
      const int iz = static_cast<int>(gz);
      const double fx = gx - ix, fy = gy - iy, fz = gz - iz;
      const Scalar* base = f + iz * g.sz + iy * g.sy + ix;
      const double x00 = base[0] + fx * (base[1] - base[0]);
      const double x10 = base[g.sy] + fx * (base[g.sy + 1] - base[g.sy]);
      const double x01 = base[g.sz] + fx * (base[g.sz + 1] - base[g.sz]);
      const double x11 =
          base[g.sz + g.sy] + fx * (base[g.sz + g.sy + 1] - base[g.sz + g.sy]);
      const double y0 = x00 + fy * (x10 - x00);
      const double y1 = x01 + fy * (x11 - x01);
      acc += y0 + fz * (y1 - y0);
      gx += tr.dg[0];
      gy += tr.dg[1];
      gz += tr.dg[2];
    }
    return acc * tr.h;
  }
  for (int k = 0; k < tr.n; ++k) {
    const int ix = static_cast<int>(std::floor(gx));
    const int iy = static_cast<int>(std::floor(gy));
    const int iz = static_cast<int>(std::floor(gz));
    const double fx = gx - ix, fy = gy - iy, fz = gz - iz;
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    const double wz[2] = {1.0 - fz, fz};
    double val = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const int x = ix + dx, y = iy + dy, z = iz + dz;
      if (x < 0 || x >= g.dims[0] || y < 0 || y >= g.dims[1] || z < 0 ||
          z >= g.dims[2])
        continue;
      val += wx[dx] * wy[dy] * wz[dz] *
             static_cast<double>(f[z * g.sz + y * g.sy + x]);
    }
    acc += val;
    gx += tr.dg[0];
    gy += tr.dg[1];
    gz += tr.dg[2];
  }
  return acc * tr.h;
}

// Scatter: the exact transpose of trace_gather, splatting value * h with
// the same trilinear weights.
template <typename Scalar>
inline void trace_scatter(const GridMap& g, const RayTrace& tr, double value,
                          Scalar* f) {
  const double vh = value * tr.h;
  double gx = tr.g0[0], gy = tr.g0[1], gz = tr.g0[2];
  if (tr.interior) {
    for (int k = 0; k < tr.n; ++k) {
      const int ix = static_cast<int>(gx);
      const int iy = static_cast<int>(gy);
      const int iz = static_cast<int>(gz);
      const double fx = gx - ix, fy = gy - iy, fz = gz - iz;
      Scalar* base = f + iz * g.sz + iy * g.sy + ix;
      const double wz0 = vh * (1.0 - fz), wz1 = vh * fz;
      const double w00 = wz0 * (1.0 - fy), w10 = wz0 * fy;
      const double w01 = wz1 * (1.0 - fy), w11 = wz1 * fy;
      base[0] += static_cast<Scalar>(w00 * (1.0 - fx));
      base[1] += static_cast<Scalar>(w00 * fx);
      base[g.sy] += static_cast<Scalar>(w10 * (1.0 - fx));
      base[g.sy + 1] += static_cast<Scalar>(w10 * fx);
      base[g.sz] += static_cast<Scalar>(w01 * (1.0 - fx));
      base[g.sz + 1] += static_cast<Scalar>(w01 * fx);
      base[g.sz + g.sy] += static_cast<Scalar>(w11 * (1.0 - fx));
      base[g.sz + g.sy + 1] += static_cast<Scalar>(w11 * fx);
      gx += tr.dg[0];
      gy += tr.dg[1];
      gz += tr.dg[2];
    }
    return;
  }
  for (int k = 0; k < tr.n; ++k) {
    const int ix = static_cast<int>(std::floor(gx));
    const int iy = static_cast<int>(std::floor(gy));
    const int iz = static_cast<int>(std::floor(gz));
    const double fx = gx - ix, fy = gy - iy, fz = gz - iz;
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    const double wz[2] = {1.0 - fz, fz};
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const int x = ix + dx, y = iy + dy, z = iz + dz;
      if (x < 0 || x >= g.dims[0] || y < 0 || y >= g.dims[1] || z < 0 ||
          z >= g.dims[2])
        continue;
      f[z * g.sz + y * g.sy + x] +=
          static_cast<Scalar>(vh * wx[dx] * wy[dy] * wz[dz]);
    }
    gx += tr.dg[0];
    gy += tr.dg[1];
    gz += tr.dg[2];
  }
}

}  // namespace detail

/// Ray-driven cone-beam forward projection with trilinear interpolation;
/// zero outside the grid. Deterministic and bit-identical for any thread
/// count (each pixel is computed independently).
template <typename Scalar>
Sinogram<Scalar> forward_project(const Volume<Scalar>& vol,
                                 const ConeBeamGeometry& geom, double step_mm) {
  require(vol.units == VolumeUnits::MuPerMm,
          "forward_project: volume must be in mu_per_mm units, got ",
          to_string(vol.units));
  require(step_mm > 0.0, "forward_project: step_mm must be positive");
  vol.validate();
  geom.validate();
  Sinogram<Scalar> sino = Sinogram<Scalar>::zeros(geom);
  const detail::GridMap g(vol.grid);
  const Scalar* f = vol.data.data();
  const long per_view = sino.pixels_per_view();
  const int views = geom.views();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < views; ++v) {
    const ViewFrame fr = view_frame(geom, geom.angles_deg[v]);
    Scalar* out = sino.data.data() + static_cast<long>(v) * per_view;
    for (int r = 0; r < geom.det_rows; ++r) {
      const auto [u0, w0] = detector_offsets(geom, r, 0);
      const Eigen::Vector3d row_base =
          fr.panel_center + u0 * fr.u_hat + w0 * fr.v_hat;
      const Eigen::Vector3d du = geom.det_spacing_u_mm * fr.u_hat;
      for (int c = 0; c < geom.det_cols; ++c) {
        Eigen::Vector3d dir = row_base + static_cast<double>(c) * du - fr.source;
        const double t_far = dir.norm();
        dir *= 1.0 / t_far;
        const detail::RayTrace tr =
            detail::trace_ray(g, fr.source, dir, t_far, step_mm);
        out[static_cast<long>(r) * geom.det_cols + c] =
            tr.n > 0 ? static_cast<Scalar>(detail::trace_gather(g, tr, f))
                     : Scalar(0);
      }
    }
  }
  return sino;
}

/// Exact linear transpose of forward_project: the same rays, sample
/// positions, and trilinear weights, splatted instead of gathered. This is
/// an adjoint, not a reconstruction. Views are processed in a fixed chunk
/// partition whose partial volumes merge in chunk order, so the result is
/// bit-identical for any thread count.
template <typename Scalar>
Volume<Scalar> adjoint_backproject(const Sinogram<Scalar>& sino,
                                   const VolumeGrid& grid, double step_mm) {
  require(sino.units == SinoUnits::LineIntegral,
          "adjoint_backproject: sinogram must be in line_integral units, got ",
          to_string(sino.units));
  require(step_mm > 0.0, "adjoint_backproject: step_mm must be positive");
  sino.validate();
  grid.validate();
  const ConeBeamGeometry& geom = sino.geom;
  const detail::GridMap g(grid);
  const int views = geom.views();
  const long per_view = sino.pixels_per_view();
  const int chunks = std::min(16, views);
  std::vector<ArrayX<Scalar>> partial(chunks,
                                      ArrayX<Scalar>::Zero(grid.voxels()));
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < chunks; ++ch) {
    Scalar* acc = partial[ch].data();
    const int v_begin = static_cast<int>(static_cast<long>(ch) * views / chunks);
    const int v_end =
        static_cast<int>(static_cast<long>(ch + 1) * views / chunks);
    for (int v = v_begin; v < v_end; ++v) {
      const ViewFrame fr = view_frame(geom, geom.angles_deg[v]);
      const Scalar* in = sino.data.data() + static_cast<long>(v) * per_view;
      for (int r = 0; r < geom.det_rows; ++r) {
        const auto [u0, w0] = detector_offsets(geom, r, 0);
        const Eigen::Vector3d row_base =
            fr.panel_center + u0 * fr.u_hat + w0 * fr.v_hat;
        const Eigen::Vector3d du = geom.det_spacing_u_mm * fr.u_hat;
        for (int c = 0; c < geom.det_cols; ++c) {
          const double y =
              static_cast<double>(in[static_cast<long>(r) * geom.det_cols + c]);
          if (y == 0.0) continue;
          Eigen::Vector3d dir =
              row_base + static_cast<double>(c) * du - fr.source;
          const double t_far = dir.norm();
          dir *= 1.0 / t_far;
          const detail::RayTrace tr =
              detail::trace_ray(g, fr.source, dir, t_far, step_mm);
          if (tr.n > 0) detail::trace_scatter(g, tr, y, acc);
        }
      }
    }
  }
  Volume<Scalar> vol = Volume<Scalar>::zeros(grid, VolumeUnits::MuPerMm);
  for (int ch = 0; ch < chunks; ++ch) vol.data += partial[ch];
  return vol;
}

/// |<Ax,y> - <x,A'y>| / (|Ax| |y|) for seeded random x, y; 0 for degenerate
/// inputs. The pair is an exact transpose at any step, so the default uses a
/// coarse four-voxel step to keep verification cheap.
template <typename Scalar = double>
double dot_product_test(const ConeBeamGeometry& geom, const VolumeGrid& grid,
                        std::uint64_t seed, double step_mm = 0.0) {
  if (step_mm <= 0.0) step_mm = 4.0 * grid.min_spacing();
  const CounterRng rng(seed);
  Volume<Scalar> x = Volume<Scalar>::zeros(grid, VolumeUnits::MuPerMm);
  x.data = rng.uniforms(0, grid.voxels()).template cast<Scalar>();
  Sinogram<Scalar> y = Sinogram<Scalar>::zeros(geom, SinoUnits::LineIntegral);
  y.data = rng.uniforms(1, y.data.size()).template cast<Scalar>();

  const Sinogram<Scalar> ax = forward_project(x, geom, step_mm);
  const Volume<Scalar> aty = adjoint_backproject(y, grid, step_mm);
  const double lhs = (ax.data.template cast<double>() *
                      y.data.template cast<double>()).sum();
  const double rhs = (x.data.template cast<double>() *
                      aty.data.template cast<double>()).sum();
  const double denom = std::sqrt(ax.data.template cast<double>().square().sum()) *
                       std::sqrt(y.data.template cast<double>().square().sum());
  if (denom == 0.0) return 0.0;
  return std::abs(lhs - rhs) / denom;
}

}  // namespace gicd
