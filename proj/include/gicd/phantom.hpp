// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gicd/geometry.hpp"
#include "gicd/signal.hpp"

namespace gicd {

/// Constant-density ellipsoid; overlapping ellipsoids add, so densities are
/// additive contributions in mm^-1.
struct Ellipsoid {
  Eigen::Vector3d center_mm;
  Eigen::Vector3d semi_axes_mm;
  double z_rotation_deg = 0.0;
  double density = 0.0;

  void validate() const {
    require(semi_axes_mm.minCoeff() > 0.0,
            "ellipsoid: semi-axes must be positive");
    require(std::isfinite(density), "ellipsoid: density must be finite");
  }

  Eigen::Matrix3d rotation() const {
    return Eigen::AngleAxisd(deg_to_rad(z_rotation_deg),
                             Eigen::Vector3d::UnitZ())
        .toRotationMatrix();
  }

  bool contains(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d q =
        (rotation().transpose() * (p - center_mm)).cwiseQuotient(semi_axes_mm);
    return q.squaredNorm() <= 1.0;
  }
};

struct PhantomSpec {
  std::vector<Ellipsoid> ellipsoids;

  void validate() const {
    for (const auto& e : ellipsoids) e.validate();
  }

  double density_at(const Eigen::Vector3d& p) const {
    double d = 0.0;
    for (const auto& e : ellipsoids)
      if (e.contains(p)) d += e.density;
    return d;
  }
};

/// Length of the ray segment inside the ellipsoid. The ellipsoid is mapped
/// affinely onto the unit sphere; the quadratic's parameter interval maps
/// straight back because the ray parameter is kept in original mm.
inline double chord_length(const Ellipsoid& e, const Eigen::Vector3d& origin,
                           const Eigen::Vector3d& dir) {
  require(std::abs(dir.norm() - 1.0) < 1e-9,
          "chord_length: direction must be unit length, |d| = ", dir.norm());
  const Eigen::Matrix3d rt = e.rotation().transpose();
  const Eigen::Vector3d o = (rt * (origin - e.center_mm)).cwiseQuotient(e.semi_axes_mm);
  const Eigen::Vector3d d = (rt * dir).cwiseQuotient(e.semi_axes_mm);
  const double a = d.squaredNorm();
  const double b = 2.0 * o.dot(d);
  const double c = o.squaredNorm() - 1.0;
  const double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return 0.0;
  return std::sqrt(disc) / a;  // t1 - t0 of the quadratic roots
}

/// Closed-form cone-beam projection: each pixel is the sum over ellipsoids of
/// density times the chord along the source-to-pixel ray.
template <typename Scalar = double>
Sinogram<Scalar> analytic_project(const PhantomSpec& phantom,
                                  const ConeBeamGeometry& geom) {
  phantom.validate();
  geom.validate();
  Sinogram<Scalar> sino = Sinogram<Scalar>::zeros(geom);
  const long per_view = sino.pixels_per_view();
  const int views = geom.views();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < views; ++v) {
    const ViewFrame f = view_frame(geom, geom.angles_deg[v]);
    Scalar* out = sino.data.data() + static_cast<long>(v) * per_view;
    for (int r = 0; r < geom.det_rows; ++r) {
      for (int c = 0; c < geom.det_cols; ++c) {
        const auto [u, w] = detector_offsets(geom, r, c);
        const Eigen::Vector3d pix = f.panel_center + u * f.u_hat + w * f.v_hat;
        const Eigen::Vector3d dir = (pix - f.source).normalized();
        double val = 0.0;
        for (const auto& e : phantom.ellipsoids)
          val += e.density * chord_length(e, f.source, dir);
        out[static_cast<long>(r) * geom.det_cols + c] = static_cast<Scalar>(val);
      }
    }
  }
  return sino;
}

/// Voxelizes the phantom: each voxel is the mean density over
/// supersample^3 uniformly placed sub-points.
template <typename Scalar = double>
Volume<Scalar> rasterize(const PhantomSpec& phantom, const VolumeGrid& grid,
                         int supersample = 2) {
  phantom.validate();
  grid.validate();
  require(supersample >= 1, "rasterize: supersample must be >= 1, got ",
          supersample);
  Volume<Scalar> vol = Volume<Scalar>::zeros(grid, VolumeUnits::MuPerMm);
  const int s = supersample;
  const double inv = 1.0 / (static_cast<double>(s) * s * s);
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
#pragma omp parallel for schedule(static)
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const Eigen::Vector3d c = grid.voxel_center(i, j, k);
        double acc = 0.0;
        for (int a = 0; a < s; ++a) {
          const double dx = ((a + 0.5) / s - 0.5) * grid.spacing_mm[0];
          for (int b = 0; b < s; ++b) {
            const double dy = ((b + 0.5) / s - 0.5) * grid.spacing_mm[1];
            for (int d = 0; d < s; ++d) {
              const double dz = ((d + 0.5) / s - 0.5) * grid.spacing_mm[2];
              acc += phantom.density_at(c + Eigen::Vector3d(dx, dy, dz));
            }
          }
        }
        vol.data[grid.index(i, j, k)] = static_cast<Scalar>(acc * inv);
      }
    }
  }
  return vol;
}

// Pelvis-like test phantom, additive densities in mm^-1. The HU column is
// the total inside the body (water 0.02 => 0 HU).
//
//   part          center (mm)        semi-axes (mm)   added mu    HU
//   body          (0, 0, 0)          (180, 140, 100)  0.0200        0
//   bone L        (-95, 20, 0)       (30, 50, 65)     0.0160     +800
//   bone R        (95, 20, 0)        (30, 50, 65)     0.0160     +800
//   soft blob     (0, -70, 20)       (28, 24, 26)     0.0008      +40
//   soft blob     (-50, 55, -15)     (22, 20, 24)     -0.0008     -40
//   applicator    (10, 65, 0)        (6, 6, 55)       0.0400    +2000
//
// Everything stays inside a 198 mm radius (80% of the 495 mm reconstruction
// diameter) and the central 40 mm ball is uniform body density.
inline PhantomSpec make_pelvis_like_phantom() {
  PhantomSpec p;
  p.ellipsoids = {
      {{0.0, 0.0, 0.0}, {180.0, 140.0, 100.0}, 0.0, 0.0200},
      {{-95.0, 20.0, 0.0}, {30.0, 50.0, 65.0}, 15.0, 0.0160},
      {{95.0, 20.0, 0.0}, {30.0, 50.0, 65.0}, -15.0, 0.0160},
      {{0.0, -70.0, 20.0}, {28.0, 24.0, 26.0}, 0.0, 0.0008},
      {{-50.0, 55.0, -15.0}, {22.0, 20.0, 24.0}, 30.0, -0.0008},
      {{10.0, 65.0, 0.0}, {6.0, 6.0, 55.0}, 0.0, 0.0400},
  };
  p.validate();
  return p;
}

/// Single centered sphere, handy as a projector/FDK oracle target.
inline PhantomSpec make_sphere_phantom(double radius_mm = 80.0,
                                       double density = kMuWaterPerMm) {
  PhantomSpec p;
  p.ellipsoids = {
      {{0.0, 0.0, 0.0}, {radius_mm, radius_mm, radius_mm}, 0.0, density}};
  return p;
}

}  // namespace gicd
