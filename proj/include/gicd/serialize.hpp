// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gicd/fdk.hpp"
#include "gicd/geometry.hpp"
#include "gicd/metrics.hpp"
#include "gicd/phantom.hpp"

namespace gicd {

using json = nlohmann::json;

inline json to_json(const ConeBeamGeometry& g) {
  return json{{"sdd_mm", g.sdd_mm},
              {"sid_mm", g.sid_mm},
              {"det_rows", g.det_rows},
              {"det_cols", g.det_cols},
              {"det_spacing_u_mm", g.det_spacing_u_mm},
              {"det_spacing_v_mm", g.det_spacing_v_mm},
              {"angles_deg", g.angles_deg},
              {"rotation_sense", g.rotation_sense == RotationSense::Clockwise
                                     ? "clockwise"
                                     : "counterclockwise"}};
}

inline ConeBeamGeometry geometry_from_json(const json& j) {
  ConeBeamGeometry g;
  g.sdd_mm = j.at("sdd_mm").get<double>();
  g.sid_mm = j.at("sid_mm").get<double>();
  g.det_rows = j.at("det_rows").get<int>();
  g.det_cols = j.at("det_cols").get<int>();
  g.det_spacing_u_mm = j.at("det_spacing_u_mm").get<double>();
  g.det_spacing_v_mm = j.at("det_spacing_v_mm").get<double>();
  g.angles_deg = j.at("angles_deg").get<std::vector<double>>();
  const std::string sense = j.at("rotation_sense").get<std::string>();
  if (sense == "clockwise")
    g.rotation_sense = RotationSense::Clockwise;
  else if (sense == "counterclockwise")
    g.rotation_sense = RotationSense::Counterclockwise;
  else
    fail("geometry: unknown rotation_sense '", sense, "'");
  g.validate();
  return g;
}

inline json to_json(const VolumeGrid& g) {
  return json{{"dims", g.dims},
              {"spacing_mm", g.spacing_mm},
              {"origin_mm", g.origin_mm}};
}

inline VolumeGrid grid_from_json(const json& j) {
  VolumeGrid g;
  g.dims = j.at("dims").get<std::array<int, 3>>();
  g.spacing_mm = j.at("spacing_mm").get<std::array<double, 3>>();
  if (j.contains("origin_mm")) {
    g.origin_mm = j.at("origin_mm").get<std::array<double, 3>>();
  } else {
    for (int a = 0; a < 3; ++a)
      g.origin_mm[a] = -0.5 * (g.dims[a] - 1) * g.spacing_mm[a];
  }
  g.validate();
  return g;
}

inline json to_json(const PhantomSpec& p) {
  json ellipsoids = json::array();
  for (const auto& e : p.ellipsoids) {
    ellipsoids.push_back(
        {{"center_mm", {e.center_mm[0], e.center_mm[1], e.center_mm[2]}},
         {"semi_axes_mm",
          {e.semi_axes_mm[0], e.semi_axes_mm[1], e.semi_axes_mm[2]}},
         {"z_rotation_deg", e.z_rotation_deg},
         {"density", e.density}});
  }
  return json{{"ellipsoids", ellipsoids}};
}

inline PhantomSpec phantom_from_json(const json& j) {
  PhantomSpec p;
  for (const auto& je : j.at("ellipsoids")) {
    Ellipsoid e;
    const auto c = je.at("center_mm").get<std::array<double, 3>>();
    const auto a = je.at("semi_axes_mm").get<std::array<double, 3>>();
    e.center_mm = {c[0], c[1], c[2]};
    e.semi_axes_mm = {a[0], a[1], a[2]};
    e.z_rotation_deg = je.at("z_rotation_deg").get<double>();
    e.density = je.at("density").get<double>();
    p.ellipsoids.push_back(e);
  }
  p.validate();
  return p;
}

inline json to_json(const RampFilterSpec& f) { return json{{"cutoff", f.cutoff}}; }

inline RampFilterSpec filter_from_json(const json& j) {
  RampFilterSpec f;
  f.cutoff = j.at("cutoff").get<double>();
  f.validate();
  return f;
}

/// psnr_db serializes as null when infinite (identical inputs).
inline json to_json(const MetricReport& r) {
  json j{{"mae_hu", r.mae_hu},
         {"ssim", r.ssim},
         {"mask_voxels", r.mask_voxels},
         {"dynamic_range", r.dynamic_range}};
  if (std::isinf(r.psnr_db))
    j["psnr_db"] = nullptr;
  else
    j["psnr_db"] = r.psnr_db;
  return j;
}

}  // namespace gicd
