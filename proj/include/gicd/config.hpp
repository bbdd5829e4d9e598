// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <string>

#include "gicd/io.hpp"
#include "gicd/pipeline.hpp"
#include "gicd/serialize.hpp"

namespace gicd {

// Pipeline configuration document. Field names mirror GicdConfig:
//
// {
//   "sched": {"kind": "cosine", "T": 1000},
//   "n_steps": 50, "eta": 0.0,
//   "proj_denoiser": {"kind": "oracle", "reference": "full.sino"},
//   "img_denoiser":  {"kind": "gaussian_posterior", "mean": 0.0,
//                     "variance": 0.04},
//   "gamma1": 0.05, "gamma2": 0.5, "gamma3": 0.5,
//   "arc": [135.0, 225.0],
//   "grid": {"dims": [64,64,64], "spacing_mm": [7.73,7.73,7.73]},
//   "filter": {"cutoff": 1.0},
//   "seed": 7,
//   "full_geometry": "desk" | {geometry object},
//   "proj_norm_range": [0.0, 8.0],
//   "vol_norm_range": [-1000.0, 2000.0]
// }
//
// External denoisers use {"kind": "external", "command": "...",
// "workdir": "."}. Oracle references are volume/sinogram files; raw units
// are normalized with the config's ranges before use.

enum class DenoiserStage { Projection, Image };

inline Denoiser denoiser_from_json(const json& j, DenoiserStage stage,
                                   const std::array<double, 2>& proj_range,
                                   const std::array<double, 2>& vol_range) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "oracle") {
    const std::string path = j.at("reference").get<std::string>();
    OracleDenoiser d;
    if (stage == DenoiserStage::Projection) {
      Sinogramd s = read_sinogram(path);
      if (s.units == SinoUnits::LineIntegral)
        s = normalize_sinogram(s, proj_range);
      d.reference = s.data;
    } else {
      Volumed v = read_volume(path);
      if (v.units != VolumeUnits::Normalized)
        v = normalize_volume(to_hu(v), vol_range);
      d.reference = v.data;
    }
    return d;
  }
  if (kind == "gaussian_posterior") {
    GaussianPosteriorDenoiser d;
    d.mean = Eigen::ArrayXd::Constant(1, j.at("mean").get<double>());
    d.var = Eigen::ArrayXd::Constant(1, j.at("variance").get<double>());
    require(d.var[0] > 0.0, "gaussian_posterior: variance must be positive");
    return d;
  }
  if (kind == "external") {
    ExternalDenoiser d;
    d.command = j.at("command").get<std::string>();
    d.workdir = j.value("workdir", ".");
    require(!d.command.empty(), "external denoiser: empty command");
    return d;
  }
  fail("unknown denoiser kind '", kind, "'");
}

inline ConeBeamGeometry geometry_from_json_or_preset(const json& j) {
  if (j.is_string()) return make_geometry(j.get<std::string>());
  return geometry_from_json(j);
}

inline GicdConfig config_from_json(const json& j) {
  GicdConfig cfg;
  const json& sched = j.at("sched");
  const std::string kind = sched.at("kind").get<std::string>();
  require(kind == "cosine", "config: unknown schedule kind '", kind, "'");
  cfg.sched = cosine_schedule(sched.at("T").get<int>());
  cfg.n_steps = j.at("n_steps").get<int>();
  cfg.eta = j.value("eta", 0.0);
  cfg.gamma1 = j.value("gamma1", 0.05);
  cfg.gamma2 = j.value("gamma2", 0.5);
  cfg.gamma3 = j.value("gamma3", 0.5);
  require(cfg.gamma1 >= 0.0 && cfg.gamma2 >= 0.0 && cfg.gamma3 >= 0.0,
          "config: loss weights must be non-negative");
  cfg.arc = j.at("arc").get<std::array<double, 2>>();
  cfg.grid = grid_from_json(j.at("grid"));
  if (j.contains("filter")) cfg.filter = filter_from_json(j.at("filter"));
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.full_geom = geometry_from_json_or_preset(j.at("full_geometry"));
  cfg.proj_norm_range = j.at("proj_norm_range").get<std::array<double, 2>>();
  cfg.vol_norm_range = j.value("vol_norm_range",
                               std::array<double, 2>{-1000.0, 2000.0});
  cfg.proj_denoiser =
      denoiser_from_json(j.at("proj_denoiser"), DenoiserStage::Projection,
                         cfg.proj_norm_range, cfg.vol_norm_range);
  cfg.img_denoiser =
      denoiser_from_json(j.at("img_denoiser"), DenoiserStage::Image,
                         cfg.proj_norm_range, cfg.vol_norm_range);
  cfg.validate();
  return cfg;
}

inline GicdConfig load_config(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "cannot open config '", path, "'");
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    fail("config '", path, "': bad JSON at byte ", e.byte, ": ", e.what());
  }
  return config_from_json(j);
}

}  // namespace gicd
