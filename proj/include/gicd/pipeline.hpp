// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "gicd/diffusion.hpp"
#include "gicd/fdk.hpp"
#include "gicd/metrics.hpp"
#include "gicd/signal.hpp"

namespace gicd {

// ---------------------------------------------------------------------------
// Normalization: affine map of [lo, hi] onto [-1, 1], no clamping, so the
// round trip is exact for out-of-range values too.

inline void check_range(const std::array<double, 2>& r) {
  require(r[1] > r[0], "normalize: need hi > lo, got [", r[0], ", ", r[1],
          "]");
}

template <class D>
typename D::PlainObject normalize(const Eigen::ArrayBase<D>& x,
                                  const std::array<double, 2>& range) {
  check_range(range);
  return 2.0 * (x.derived() - range[0]) / (range[1] - range[0]) - 1.0;
}

template <class D>
typename D::PlainObject denormalize(const Eigen::ArrayBase<D>& y,
                                    const std::array<double, 2>& range) {
  check_range(range);
  return range[0] + (y.derived() + 1.0) * 0.5 * (range[1] - range[0]);
}

inline double normalize(double x, const std::array<double, 2>& r) {
  check_range(r);
  return 2.0 * (x - r[0]) / (r[1] - r[0]) - 1.0;
}
inline double denormalize(double y, const std::array<double, 2>& r) {
  check_range(r);
  return r[0] + (y + 1.0) * 0.5 * (r[1] - r[0]);
}

/// HU volume -> normalized volume over the given HU range.
template <typename Scalar>
Volume<Scalar> normalize_volume(const Volume<Scalar>& v,
                                const std::array<double, 2>& range) {
  require(v.units == VolumeUnits::Hu, "normalize_volume: expected HU input");
  Volume<Scalar> out = v;
  out.units = VolumeUnits::Normalized;
  out.norm_range = range;
  out.data =
      normalize(v.data.template cast<double>(), range).template cast<Scalar>();
  return out;
}

template <typename Scalar>
Volume<Scalar> denormalize_volume(const Volume<Scalar>& v) {
  require(v.units == VolumeUnits::Normalized && v.norm_range,
          "denormalize_volume: input is not normalized or lacks norm_range");
  Volume<Scalar> out = v;
  out.units = VolumeUnits::Hu;
  out.data =
      denormalize(v.data.template cast<double>(), *v.norm_range)
          .template cast<Scalar>();
  out.norm_range.reset();
  return out;
}

template <typename Scalar>
Sinogram<Scalar> normalize_sinogram(const Sinogram<Scalar>& s,
                                    const std::array<double, 2>& range) {
  require(s.units == SinoUnits::LineIntegral,
          "normalize_sinogram: expected line_integral input");
  Sinogram<Scalar> out = s;
  out.units = SinoUnits::Normalized;
  out.norm_range = range;
  out.data =
      normalize(s.data.template cast<double>(), range).template cast<Scalar>();
  return out;
}

template <typename Scalar>
Sinogram<Scalar> denormalize_sinogram(const Sinogram<Scalar>& s) {
  require(s.units == SinoUnits::Normalized && s.norm_range,
          "denormalize_sinogram: input is not normalized or lacks norm_range");
  Sinogram<Scalar> out = s;
  out.units = SinoUnits::LineIntegral;
  out.data =
      denormalize(s.data.template cast<double>(), *s.norm_range)
          .template cast<Scalar>();
  out.norm_range.reset();
  return out;
}

// ---------------------------------------------------------------------------
// Configuration and results

struct GicdConfig {
  NoiseSchedule sched;
  int n_steps = 50;
  double eta = 0.0;
  Denoiser proj_denoiser;
  Denoiser img_denoiser;
  double gamma1 = 0.05;
  double gamma2 = 0.5;
  double gamma3 = 0.5;
  std::array<double, 2> arc{135.0, 225.0};
  VolumeGrid grid;
  RampFilterSpec filter;
  std::uint64_t seed = 0;
  // The full-view geometry the projection stage completes toward, and the
  // normalization ranges for each domain (projections in line-integral
  // units, volumes in HU).
  ConeBeamGeometry full_geom;
  std::array<double, 2> proj_norm_range{0.0, 1.0};
  std::array<double, 2> vol_norm_range{-1000.0, 2000.0};

  void validate() const {
    sched.validate();
    require(n_steps >= 1 && n_steps <= sched.steps(),
            "config: n_steps must be in [1, T]");
    require(eta >= 0.0 && eta <= 1.0, "config: eta must be in [0,1]");
    require(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma3 >= 0.0,
            "config: loss weights must be non-negative");
    grid.validate();
    filter.validate();
    full_geom.validate();
    check_range(proj_norm_range);
    check_range(vol_norm_range);
    select_arc_indices(full_geom.angles_deg, arc[0], arc[1]);
  }
};

struct LossReport {
  std::optional<double> l_mu;        // network mean loss, when reported
  std::optional<double> l_sigma;     // network variance loss, when reported
  std::optional<double> l_ct_rec;    // requires ground truth
  std::optional<double> l_ct_cycle;  // requires ground truth
  double total = 0.0;                // absent terms enter as zero
};

struct MetricsInput {
  Volumed truth_hu;       // ground-truth volume in HU
  Sinogramd full_sino;    // ground-truth full-view sinogram, line integrals
};

struct GicdResult {
  Sinogramd sino_completed;
  Volumed vol_intermediate;
  Volumed vol_final;
  LossReport losses;
  std::optional<MetricReport> metrics;
};

// ---------------------------------------------------------------------------
// Losses

template <typename Scalar>
double ct_rec_loss(const Volume<Scalar>& i_real_rec,
                   const Volume<Scalar>& i_rec) {
  require(i_real_rec.grid == i_rec.grid, "ct_rec_loss: grid mismatch");
  return (i_real_rec.data.template cast<double>() -
          i_rec.data.template cast<double>())
      .abs()
      .mean();
}

template <typename Scalar>
double ct_cycle_loss(const Volume<Scalar>& i_real,
                     const Volume<Scalar>& i_cycle) {
  require(i_real.grid == i_cycle.grid, "ct_cycle_loss: grid mismatch");
  return (i_real.data.template cast<double>() -
          i_cycle.data.template cast<double>())
      .abs()
      .mean();
}

/// total = l_mu + gamma1 l_sigma + gamma2 l_rec + gamma3 l_cycle, with
/// absent components contributing zero.
inline LossReport total_loss(std::optional<double> l_mu,
                             std::optional<double> l_sigma,
                             std::optional<double> l_rec,
                             std::optional<double> l_cycle,
                             const GicdConfig& cfg) {
  require(cfg.gamma1 >= 0.0 && cfg.gamma2 >= 0.0 && cfg.gamma3 >= 0.0,
          "total_loss: negative weights");
  LossReport r;
  r.l_mu = l_mu;
  r.l_sigma = l_sigma;
  r.l_ct_rec = l_rec;
  r.l_ct_cycle = l_cycle;
  r.total = l_mu.value_or(0.0) + cfg.gamma1 * l_sigma.value_or(0.0) +
            cfg.gamma2 * l_rec.value_or(0.0) +
            cfg.gamma3 * l_cycle.value_or(0.0);
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline stages

namespace detail {
inline std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
  return mix64(seed ^ mix64(stage + 1));
}
}  // namespace detail

/// Index of each limited view inside the full angle list; errors when a view
/// is missing (the limited arc must be a subset of the full scan).
inline std::vector<int> measured_view_indices(
    const ConeBeamGeometry& limited, const ConeBeamGeometry& full) {
  std::vector<int> map(limited.views(), -1);
  for (int i = 0; i < limited.views(); ++i) {
    for (int j = 0; j < full.views(); ++j) {
      if (std::abs(limited.angles_deg[i] - full.angles_deg[j]) < 1e-9) {
        map[i] = j;
        break;
      }
    }
    require(map[i] >= 0, "measured view at ", limited.angles_deg[i],
            " deg is not part of the full-view geometry");
  }
  return map;
}

/// Projection completion: conditional reverse diffusion in the projection
/// domain, then a hard overwrite of the measured-arc views with the input so
/// measured data pass through bit-identically.
inline Sinogramd complete_projections(const Sinogramd& limited,
                                      const ConeBeamGeometry& full_geom,
                                      const GicdConfig& cfg) {
  require(limited.units == SinoUnits::Normalized,
          "complete_projections: limited sinogram must be normalized");
  require(limited.geom.det_rows == full_geom.det_rows &&
              limited.geom.det_cols == full_geom.det_cols,
          "complete_projections: detector grids differ");
  const std::vector<int> where = measured_view_indices(limited.geom, full_geom);

  const std::vector<long> shape{full_geom.views(), full_geom.det_rows,
                                full_geom.det_cols};
  Sinogramd out = Sinogramd::zeros(full_geom, SinoUnits::Normalized);
  out.norm_range = limited.norm_range;
  out.data = sample(cfg.proj_denoiser, limited.data.cast<double>(), shape,
                    cfg.sched, cfg.n_steps, cfg.eta,
                    detail::stage_seed(cfg.seed, 0));

  const long per_view = out.pixels_per_view();
  for (int i = 0; i < limited.views(); ++i)
    out.data.segment(static_cast<long>(where[i]) * per_view, per_view) =
        limited.data.segment(static_cast<long>(i) * per_view, per_view);
  return out;
}

/// GTM hand-off: denormalize the completed sinogram, run FDK, express the
/// result in HU and re-normalize.
inline Volumed gtm_reconstruct(const Sinogramd& sino, const GicdConfig& cfg) {
  Sinogramd s = sino;
  if (!s.norm_range) s.norm_range = cfg.proj_norm_range;
  const Sinogramd raw = denormalize_sinogram(s);
  const Volumed mu = fdk_reconstruct(raw, cfg.grid, cfg.filter);
  return normalize_volume(to_hu(mu), cfg.vol_norm_range);
}

/// Image-domain refinement: reverse diffusion conditioned on the
/// intermediate volume.
inline Volumed refine_volume(const Volumed& vol_intermediate,
                             const GicdConfig& cfg) {
  require(vol_intermediate.units == VolumeUnits::Normalized,
          "refine_volume: input must be normalized");
  const VolumeGrid& g = vol_intermediate.grid;
  const std::vector<long> shape{g.dims[0], g.dims[1], g.dims[2]};
  Volumed out = Volumed::zeros(g, VolumeUnits::Normalized);
  out.norm_range = vol_intermediate.norm_range;
  out.data = sample(cfg.img_denoiser, vol_intermediate.data.cast<double>(),
                    shape, cfg.sched, cfg.n_steps, cfg.eta,
                    detail::stage_seed(cfg.seed, 1));
  return out;
}

/// The full cascade: complete projections, reconstruct through the GTM,
/// refine. With ground truth supplied, the cycle-domain losses and the HU
/// metrics are evaluated as well.
inline GicdResult run_pipeline(const Sinogramd& limited, const GicdConfig& cfg,
                               const std::optional<MetricsInput>& truth = {}) {
  cfg.validate();
  Sinogramd lim = limited;
  if (lim.units == SinoUnits::LineIntegral) {
    lim = normalize_sinogram(lim, cfg.proj_norm_range);
  } else if (lim.norm_range && *lim.norm_range != cfg.proj_norm_range) {
    fail("pipeline: input sinogram was normalized over [",
         (*lim.norm_range)[0], ", ", (*lim.norm_range)[1],
         "] but the config expects [", cfg.proj_norm_range[0], ", ",
         cfg.proj_norm_range[1], "]");
  }

  GicdResult res;
  try {
    res.sino_completed = complete_projections(lim, cfg.full_geom, cfg);
  } catch (const Error& e) {
    fail("pipeline stage projection-completion: ", e.what());
  }
  try {
    res.vol_intermediate = gtm_reconstruct(res.sino_completed, cfg);
  } catch (const Error& e) {
    fail("pipeline stage gtm-reconstruction: ", e.what());
  }
  try {
    res.vol_final = refine_volume(res.vol_intermediate, cfg);
  } catch (const Error& e) {
    fail("pipeline stage volume-refinement: ", e.what());
  }

  std::optional<double> l_rec, l_cycle;
  if (truth) {
    const Sinogramd full_norm =
        normalize_sinogram(truth->full_sino, cfg.proj_norm_range);
    const Volumed i_real_rec = gtm_reconstruct(full_norm, cfg);
    l_rec = ct_rec_loss(i_real_rec, res.vol_intermediate);
    const Volumed i_real =
        normalize_volume(to_hu(truth->truth_hu), cfg.vol_norm_range);
    l_cycle = ct_cycle_loss(i_real, res.vol_final);
    res.metrics = evaluate_metrics(denormalize_volume(res.vol_final),
                                   to_hu(truth->truth_hu));
  }
  // l_mu / l_sigma are training-time quantities; they stay unset unless a
  // denoiser reports per-step residuals.
  res.losses = total_loss(std::nullopt, std::nullopt, l_rec, l_cycle, cfg);
  return res;
}

/// Population standard deviation across a stack of equally sized arrays.
inline Eigen::ArrayXd population_std(const std::vector<Eigen::ArrayXd>& stack) {
  require(stack.size() >= 2, "population_std: need at least two arrays");
  const long n = stack[0].size();
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(n);
  Eigen::ArrayXd sumsq = Eigen::ArrayXd::Zero(n);
  for (const auto& a : stack) {
    require(a.size() == n, "population_std: size mismatch");
    sum += a;
    sumsq += a.square();
  }
  const double k = static_cast<double>(stack.size());
  return ((sumsq / k) - (sum / k).square()).max(0.0).sqrt();
}

/// Voxel-wise standard deviation (population convention) of the final volume
/// across k pipeline runs with distinct seeds.
inline Volumed uncertainty_map(const Sinogramd& limited, const GicdConfig& cfg,
                               int k_runs,
                               const std::vector<std::uint64_t>& seeds) {
  require(k_runs >= 2, "uncertainty_map: need k_runs >= 2");
  require(static_cast<int>(seeds.size()) == k_runs,
          "uncertainty_map: need exactly k_runs seeds");
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() ==
              seeds.size(),
          "uncertainty_map: duplicate seeds would understate the variance");
  std::vector<Eigen::ArrayXd> finals;
  finals.reserve(seeds.size());
  for (int i = 0; i < k_runs; ++i) {
    GicdConfig c = cfg;
    c.seed = seeds[i];
    finals.push_back(run_pipeline(limited, c).vol_final.data);
  }
  Volumed out = Volumed::zeros(cfg.grid, VolumeUnits::Normalized);
  out.norm_range = cfg.vol_norm_range;
  out.data = population_std(finals);
  return out;
}

}  // namespace gicd
