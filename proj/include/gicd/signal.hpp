// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "gicd/error.hpp"
#include "gicd/geometry.hpp"

namespace gicd {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

enum class VolumeUnits { MuPerMm, Hu, Normalized };
enum class SinoUnits { LineIntegral, Normalized };

/// Water attenuation used for the HU scale: HU = 1000 (mu - mu_w) / mu_w.
inline constexpr double kMuWaterPerMm = 0.02;

inline double hu_from_mu(double mu) {
  return 1000.0 * (mu - kMuWaterPerMm) / kMuWaterPerMm;
}
inline double mu_from_hu(double hu) {
  return kMuWaterPerMm * (1.0 + hu / 1000.0);
}

/// 3D scalar field on a regular grid. Storage order: x fastest, then y,
/// then z (matching the file payload).
template <typename Scalar>
struct Volume {
  VolumeGrid grid;
  VolumeUnits units = VolumeUnits::MuPerMm;
  std::optional<std::array<double, 2>> norm_range;  // set when normalized
  ArrayX<Scalar> data;

  static Volume zeros(const VolumeGrid& g,
                      VolumeUnits u = VolumeUnits::MuPerMm) {
    Volume v;
    v.grid = g;
    v.units = u;
    v.data = ArrayX<Scalar>::Zero(g.voxels());
    return v;
  }

  Scalar& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
  Scalar at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }

  void validate() const {
    grid.validate();
    require(data.size() == grid.voxels(), "volume: data length ", data.size(),
            " != nx*ny*nz = ", grid.voxels());
    require(data.isFinite().all(), "volume: non-finite values");
  }
};

/// Stack of detector images, one per view. Storage order: column fastest,
/// then row, then view (matching the file payload).
template <typename Scalar>
struct Sinogram {
  ConeBeamGeometry geom;
  SinoUnits units = SinoUnits::LineIntegral;
  std::optional<std::array<double, 2>> norm_range;
  ArrayX<Scalar> data;

  int views() const { return geom.views(); }
  int rows() const { return geom.det_rows; }
  int cols() const { return geom.det_cols; }
  long pixels_per_view() const {
    return static_cast<long>(rows()) * cols();
  }

  static Sinogram zeros(const ConeBeamGeometry& g,
                        SinoUnits u = SinoUnits::LineIntegral) {
    Sinogram s;
    s.geom = g;
    s.units = u;
    s.data = ArrayX<Scalar>::Zero(static_cast<long>(g.views()) * g.det_rows *
                                  g.det_cols);
    return s;
  }

  long index(int view, int row, int col) const {
    return col + static_cast<long>(cols()) *
                     (row + static_cast<long>(rows()) * view);
  }
  Scalar& at(int view, int row, int col) { return data[index(view, row, col)]; }
  Scalar at(int view, int row, int col) const {
    return data[index(view, row, col)];
  }

  void validate() const {
    geom.validate();
    require(data.size() == static_cast<long>(views()) * rows() * cols(),
            "sinogram: data length ", data.size(), " != views*rows*cols = ",
            static_cast<long>(views()) * rows() * cols());
    require(data.isFinite().all(), "sinogram: non-finite values");
  }
};

using Volumed = Volume<double>;
using Sinogramd = Sinogram<double>;

/// Views whose angle lies in [start_deg, end_deg), order preserved; the
/// geometry's angle list follows the selection.
template <typename Scalar>
Sinogram<Scalar> select_arc(const Sinogram<Scalar>& sino, double start_deg,
                            double end_deg) {
  const std::vector<int> idx =
      select_arc_indices(sino.geom.angles_deg, start_deg, end_deg);
  Sinogram<Scalar> out;
  out.geom = arc_geometry(sino.geom, idx);
  out.units = sino.units;
  out.norm_range = sino.norm_range;
  const long per_view = sino.pixels_per_view();
  out.data.resize(static_cast<long>(idx.size()) * per_view);
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.data.segment(static_cast<long>(k) * per_view, per_view) =
        sino.data.segment(static_cast<long>(idx[k]) * per_view, per_view);
  return out;
}

inline std::string to_string(VolumeUnits u) {
  switch (u) {
    case VolumeUnits::MuPerMm: return "mu_per_mm";
    case VolumeUnits::Hu: return "hu";
    case VolumeUnits::Normalized: return "normalized";
  }
  fail("bad VolumeUnits");
}

inline std::string to_string(SinoUnits u) {
  switch (u) {
    case SinoUnits::LineIntegral: return "line_integral";
    case SinoUnits::Normalized: return "normalized";
  }
  fail("bad SinoUnits");
}

inline VolumeUnits volume_units_from_string(const std::string& s) {
  if (s == "mu_per_mm") return VolumeUnits::MuPerMm;
  if (s == "hu") return VolumeUnits::Hu;
  if (s == "normalized") return VolumeUnits::Normalized;
  fail("unknown volume units tag '", s, "'");
}

inline SinoUnits sino_units_from_string(const std::string& s) {
  if (s == "line_integral") return SinoUnits::LineIntegral;
  if (s == "normalized") return SinoUnits::Normalized;
  fail("unknown sinogram units tag '", s, "'");
}

/// Converts a volume between mu_per_mm and hu in place.
template <typename Scalar>
Volume<Scalar> to_hu(const Volume<Scalar>& v) {
  if (v.units == VolumeUnits::Hu) return v;
  require(v.units == VolumeUnits::MuPerMm,
          "to_hu: expected mu_per_mm or hu units");
  Volume<Scalar> out = v;
  out.units = VolumeUnits::Hu;
  out.data = 1000.0 * (v.data - Scalar(kMuWaterPerMm)) / Scalar(kMuWaterPerMm);
  return out;
}

template <typename Scalar>
Volume<Scalar> to_mu(const Volume<Scalar>& v) {
  if (v.units == VolumeUnits::MuPerMm) return v;
  require(v.units == VolumeUnits::Hu, "to_mu: expected hu or mu_per_mm units");
  Volume<Scalar> out = v;
  out.units = VolumeUnits::MuPerMm;
  out.data = Scalar(kMuWaterPerMm) * (1.0 + v.data / 1000.0);
  return out;
}

}  // namespace gicd
