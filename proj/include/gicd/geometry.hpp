// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gicd/error.hpp"

namespace gicd {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

enum class RotationSense { Clockwise, Counterclockwise };

/// Circular-trajectory cone-beam scanner: flat panel at distance sdd_mm from
/// the source, source orbiting the isocenter at radius sid_mm in the z=0
/// plane. View angle 0 puts the source on the +y axis; a clockwise sense
/// decreases the mathematical angle (seen from +z) as the view angle grows.
struct ConeBeamGeometry {
  double sdd_mm = 0.0;
  double sid_mm = 0.0;
  int det_rows = 0;
  int det_cols = 0;
  double det_spacing_u_mm = 0.0;  // column pitch (transaxial)
  double det_spacing_v_mm = 0.0;  // row pitch (axial)
  std::vector<double> angles_deg;
  RotationSense rotation_sense = RotationSense::Clockwise;

  int views() const { return static_cast<int>(angles_deg.size()); }
  double magnification() const { return sdd_mm / sid_mm; }

  void validate() const {
    require(sid_mm > 0.0 && sdd_mm > sid_mm,
            "geometry: need sdd_mm > sid_mm > 0, got sdd=", sdd_mm,
            " sid=", sid_mm);
    require(det_rows >= 1 && det_cols >= 1, "geometry: detector grid must be",
            " at least 1x1, got ", det_rows, "x", det_cols);
    require(det_spacing_u_mm > 0.0 && det_spacing_v_mm > 0.0,
            "geometry: detector spacings must be positive");
    require(!angles_deg.empty(), "geometry: angle list is empty");
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
      require(angles_deg[i] >= 0.0 && angles_deg[i] < 360.0,
              "geometry: angle ", angles_deg[i], " outside [0,360)");
      require(i == 0 || angles_deg[i] > angles_deg[i - 1],
              "geometry: angles must be strictly increasing");
    }
  }
};

/// Regular voxel grid; origin_mm is the center of voxel (0,0,0).
struct VolumeGrid {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing_mm{0.0, 0.0, 0.0};
  std::array<double, 3> origin_mm{0.0, 0.0, 0.0};

  long voxels() const {
    return static_cast<long>(dims[0]) * dims[1] * dims[2];
  }

  /// Grid of given size centered on the isocenter.
  static VolumeGrid centered(std::array<int, 3> dims,
                             std::array<double, 3> spacing_mm) {
    VolumeGrid g;
    g.dims = dims;
    g.spacing_mm = spacing_mm;
    for (int a = 0; a < 3; ++a)
      g.origin_mm[a] = -0.5 * (dims[a] - 1) * spacing_mm[a];
    g.validate();
    return g;
  }

  static VolumeGrid cube(int n, double extent_mm) {
    const double s = extent_mm / n;
    return centered({n, n, n}, {s, s, s});
  }

  Eigen::Vector3d voxel_center(int i, int j, int k) const {
    return {origin_mm[0] + i * spacing_mm[0], origin_mm[1] + j * spacing_mm[1],
            origin_mm[2] + k * spacing_mm[2]};
  }

  long index(int i, int j, int k) const {
    return i + static_cast<long>(dims[0]) * (j + static_cast<long>(dims[1]) * k);
  }

  double min_spacing() const {
    return std::min({spacing_mm[0], spacing_mm[1], spacing_mm[2]});
  }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      require(dims[a] >= 1, "grid: dims must be >= 1");
      require(spacing_mm[a] > 0.0, "grid: spacings must be positive");
    }
  }

  bool operator==(const VolumeGrid& o) const {
    return dims == o.dims && spacing_mm == o.spacing_mm &&
           origin_mm == o.origin_mm;
  }
};

inline std::vector<double> uniform_angles(double start_deg, double step_deg,
                                          int count) {
  std::vector<double> a(count);
  for (int i = 0; i < count; ++i) a[i] = start_deg + i * step_deg;
  return a;
}

/// Named presets. "paper" is the full clinical-scale geometry; "desk" scales
/// the detector 8x coarser at the same magnification so tests stay fast.
inline ConeBeamGeometry make_geometry(const std::string& preset) {
  ConeBeamGeometry g;
  if (preset == "paper") {
    g.sdd_mm = 1500.0;
    g.sid_mm = 1000.0;
    g.det_rows = 768;
    g.det_cols = 1024;
    g.det_spacing_u_mm = 0.78;
    g.det_spacing_v_mm = 0.78;
    g.angles_deg = uniform_angles(0.0, 1.0, 360);
  } else if (preset == "desk") {
    g.sdd_mm = 1500.0;
    g.sid_mm = 1000.0;
    g.det_rows = 96;
    g.det_cols = 128;
    g.det_spacing_u_mm = 6.24;
    g.det_spacing_v_mm = 6.24;
    g.angles_deg = uniform_angles(0.0, 2.0, 180);
  } else {
    fail("make_geometry: unknown preset '", preset, "'");
  }
  g.rotation_sense = RotationSense::Clockwise;
  g.validate();
  return g;
}

inline ConeBeamGeometry make_geometry(const ConeBeamGeometry& params) {
  params.validate();
  return params;
}

/// Mathematical angle (radians, from +x toward +y) of the source for a given
/// view angle. Angle 0 is on the +y axis; clockwise decreases it.
inline double source_phase_rad(const ConeBeamGeometry& g, double angle_deg) {
  const double sign =
      g.rotation_sense == RotationSense::Clockwise ? -1.0 : 1.0;
  return deg_to_rad(90.0 + sign * angle_deg);
}

inline Eigen::Vector3d source_position(const ConeBeamGeometry& g,
                                       double angle_deg) {
  const double phi = source_phase_rad(g, angle_deg);
  return {g.sid_mm * std::cos(phi), g.sid_mm * std::sin(phi), 0.0};
}

/// Per-view frame: source, panel center, and the panel axes. u_hat follows
/// detector columns (transaxial), v_hat follows rows (+z), c_hat is the
/// central-ray direction from source through the isocenter.
struct ViewFrame {
  Eigen::Vector3d source;
  Eigen::Vector3d panel_center;
  Eigen::Vector3d u_hat;
  Eigen::Vector3d v_hat;
  Eigen::Vector3d c_hat;
};

inline ViewFrame view_frame(const ConeBeamGeometry& g, double angle_deg) {
  ViewFrame f;
  const double phi = source_phase_rad(g, angle_deg);
  const Eigen::Vector3d r_hat{std::cos(phi), std::sin(phi), 0.0};
  f.source = g.sid_mm * r_hat;
  f.c_hat = -r_hat;
  f.v_hat = Eigen::Vector3d::UnitZ();
  f.u_hat = f.v_hat.cross(f.c_hat);
  f.panel_center = f.source + g.sdd_mm * f.c_hat;
  return f;
}

/// Signed panel offsets of pixel (row, col) from the panel center, in mm.
inline std::pair<double, double> detector_offsets(const ConeBeamGeometry& g,
                                                  int row, int col) {
  const double u = (col - 0.5 * (g.det_cols - 1)) * g.det_spacing_u_mm;
  const double v = (row - 0.5 * (g.det_rows - 1)) * g.det_spacing_v_mm;
  return {u, v};
}

inline Eigen::Vector3d detector_pixel_position(const ConeBeamGeometry& g,
                                               double angle_deg, int row,
                                               int col) {
  require(row >= 0 && row < g.det_rows && col >= 0 && col < g.det_cols,
          "detector_pixel_position: pixel (", row, ",", col,
          ") outside detector ", g.det_rows, "x", g.det_cols);
  const ViewFrame f = view_frame(g, angle_deg);
  const auto [u, v] = detector_offsets(g, row, col);
  return f.panel_center + u * f.u_hat + v * f.v_hat;
}

/// View indices whose angle lands in the half-open arc [start, end).
/// Errors if the selection is empty or the arc reaches outside the coverage
/// of the angle list.
inline std::vector<int> select_arc_indices(const std::vector<double>& angles,
                                           double start_deg, double end_deg) {
  require(start_deg < end_deg, "select_arc: need start < end, got [",
          start_deg, ", ", end_deg, ")");
  require(!angles.empty(), "select_arc: no views");
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(angles.size()); ++i)
    if (angles[i] >= start_deg && angles[i] < end_deg) idx.push_back(i);
  require(!idx.empty(), "select_arc: no views inside [", start_deg, ", ",
          end_deg, ")");
  // Coverage: the arc must not extend past the sampled range; one nominal
  // spacing beyond either end counts as covered, which keeps selection
  // idempotent on already selected arcs.
  double gap = 0.0;
  for (std::size_t i = 1; i < angles.size(); ++i)
    gap = std::max(gap, angles[i] - angles[i - 1]);
  const double tol = 1e-9;
  require(start_deg >= angles.front() - gap - tol &&
              end_deg <= angles.back() + gap + tol,
          "select_arc: arc [", start_deg, ", ", end_deg,
          ") not covered by views [", angles.front(), ", ", angles.back(),
          "]");
  return idx;
}

inline ConeBeamGeometry arc_geometry(const ConeBeamGeometry& g,
                                     const std::vector<int>& view_indices) {
  ConeBeamGeometry out = g;
  out.angles_deg.clear();
  out.angles_deg.reserve(view_indices.size());
  for (int i : view_indices) out.angles_deg.push_back(g.angles_deg[i]);
  return out;
}

}  // namespace gicd
