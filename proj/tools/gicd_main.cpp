// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface for the limited-angle CBCT toolkit. stdout carries
// one machine-readable JSON document per invocation; logs go to stderr.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gicd/config.hpp"
#include "gicd/io.hpp"
#include "gicd/phantom.hpp"
#include "gicd/pipeline.hpp"
#include "gicd/projector.hpp"

namespace {

using gicd::json;

gicd::ConeBeamGeometry geometry_from_arg(const std::string& arg) {
  if (arg == "desk" || arg == "paper") return gicd::make_geometry(arg);
  std::ifstream is(arg);
  gicd::require(is.good(), "cannot open geometry file '", arg, "'");
  json j;
  is >> j;
  return gicd::geometry_from_json(j);
}

void emit(const json& j) { std::cout << j.dump() << "\n"; }

struct PhantomArgs {
  std::string geometry = "desk";
  std::string spec_in;
  int grid_n = 64;
  double extent_mm = 495.0;
  int supersample = 2;
  double step_mm = 0.0;
  std::string out_spec, out_volume, out_sinogram;
};

int run_phantom(const PhantomArgs& a) {
  gicd::PhantomSpec spec;
  if (a.spec_in.empty()) {
    spec = gicd::make_pelvis_like_phantom();
  } else {
    std::ifstream is(a.spec_in);
    gicd::require(is.good(), "cannot open phantom spec '", a.spec_in, "'");
    json j;
    is >> j;
    spec = gicd::phantom_from_json(j);
  }
  const gicd::ConeBeamGeometry geom = geometry_from_arg(a.geometry);
  const gicd::VolumeGrid grid = gicd::VolumeGrid::cube(a.grid_n, a.extent_mm);
  json out{{"phantom", a.spec_in.empty() ? "pelvis_like" : a.spec_in}};
  if (!a.out_spec.empty()) {
    std::ofstream os(a.out_spec);
    os << gicd::to_json(spec).dump(2) << "\n";
    out["spec"] = a.out_spec;
  }
  if (!a.out_volume.empty()) {
    const gicd::Volumed vol = gicd::rasterize(spec, grid, a.supersample);
    gicd::write_volume(vol, a.out_volume);
    out["volume"] = a.out_volume;
  }
  if (!a.out_sinogram.empty()) {
    const gicd::Sinogramd sino = gicd::analytic_project(spec, geom);
    gicd::write_sinogram(sino, a.out_sinogram);
    out["sinogram"] = a.out_sinogram;
    out["max_line_integral"] = sino.data.maxCoeff();
  }
  emit(out);
  return 0;
}

int run_project(const std::string& vol_path, const std::string& geom_arg,
                double step_mm, const std::string& out_path) {
  const gicd::Volumed vol = gicd::read_volume(vol_path);
  const gicd::ConeBeamGeometry geom = geometry_from_arg(geom_arg);
  const double step = step_mm > 0.0 ? step_mm : 0.5 * vol.grid.min_spacing();
  const gicd::Sinogramd sino = gicd::forward_project(vol, geom, step);
  gicd::write_sinogram(sino, out_path);
  emit(json{{"sinogram", out_path},
            {"views", sino.views()},
            {"step_mm", step}});
  return 0;
}

int run_arc(const std::string& in_path, double start_deg, double end_deg,
            const std::string& out_path) {
  const gicd::Sinogramd sino = gicd::read_sinogram(in_path);
  const gicd::Sinogramd arc = gicd::select_arc(sino, start_deg, end_deg);
  gicd::write_sinogram(arc, out_path);
  emit(json{{"sinogram", out_path}, {"views", arc.views()}});
  return 0;
}

int run_fdk(const std::string& in_path, int grid_n, double extent_mm,
            double cutoff, bool hu, const std::string& out_path) {
  const gicd::Sinogramd sino = gicd::read_sinogram(in_path);
  const gicd::VolumeGrid grid = gicd::VolumeGrid::cube(grid_n, extent_mm);
  gicd::RampFilterSpec spec;
  spec.cutoff = cutoff;
  gicd::Volumed vol = gicd::fdk_reconstruct(sino, grid, spec);
  if (hu) vol = gicd::to_hu(vol);
  gicd::write_volume(vol, out_path);
  emit(json{{"volume", out_path}, {"units", gicd::to_string(vol.units)}});
  return 0;
}

int run_pipeline_cmd(const std::string& config_path,
                     const std::string& limited_path, std::uint64_t seed,
                     const std::string& out_sino, const std::string& out_mid,
                     const std::string& out_final,
                     const std::string& truth_vol_path,
                     const std::string& truth_sino_path) {
  gicd::GicdConfig cfg = gicd::load_config(config_path);
  cfg.seed = seed;
  const gicd::Sinogramd limited = gicd::read_sinogram(limited_path);
  std::optional<gicd::MetricsInput> truth;
  if (!truth_vol_path.empty()) {
    gicd::require(!truth_sino_path.empty(),
                  "--truth-sinogram is required with --truth-volume");
    truth = gicd::MetricsInput{gicd::to_hu(gicd::read_volume(truth_vol_path)),
                               gicd::read_sinogram(truth_sino_path)};
  }
  const gicd::GicdResult res = gicd::run_pipeline(limited, cfg, truth);
  if (!out_sino.empty()) gicd::write_sinogram(res.sino_completed, out_sino);
  if (!out_mid.empty()) gicd::write_volume(res.vol_intermediate, out_mid);
  if (!out_final.empty()) gicd::write_volume(res.vol_final, out_final);

  json losses{{"total", res.losses.total}};
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v)
      losses[key] = *v;
    else
      losses[key] = nullptr;  // not applicable for this run
  };
  put("l_mu", res.losses.l_mu);
  put("l_sigma", res.losses.l_sigma);
  put("l_ct_rec", res.losses.l_ct_rec);
  put("l_ct_cycle", res.losses.l_ct_cycle);
  json out{{"seed", seed}, {"losses", losses}};
  if (!out_sino.empty()) out["sino_completed"] = out_sino;
  if (!out_mid.empty()) out["vol_intermediate"] = out_mid;
  if (!out_final.empty()) out["vol_final"] = out_final;
  if (res.metrics) out["metrics"] = gicd::to_json(*res.metrics);
  emit(out);
  return 0;
}

int run_uncertainty(const std::string& config_path,
                    const std::string& limited_path,
                    const std::vector<std::uint64_t>& seeds,
                    const std::string& out_path) {
  const gicd::GicdConfig cfg = gicd::load_config(config_path);
  const gicd::Sinogramd limited = gicd::read_sinogram(limited_path);
  const gicd::Volumed std_map = gicd::uncertainty_map(
      limited, cfg, static_cast<int>(seeds.size()), seeds);
  gicd::write_volume(std_map, out_path);
  emit(json{{"uncertainty", out_path},
            {"runs", seeds.size()},
            {"max_std", std_map.data.maxCoeff()}});
  return 0;
}

int run_metrics(const std::string& recon_path, const std::string& truth_path,
                double threshold_hu, bool masked_psnr) {
  const gicd::Volumed recon = gicd::to_hu(gicd::read_volume(recon_path));
  const gicd::Volumed truth = gicd::to_hu(gicd::read_volume(truth_path));
  const gicd::MetricReport r =
      gicd::evaluate_metrics(recon, truth, threshold_hu, masked_psnr);
  emit(gicd::to_json(r));
  return 0;
}

int run_export_slice(const std::string& vol_path, const std::string& axis,
                     int index, double center, double width,
                     const std::string& out_path) {
  const gicd::Volumed vol = gicd::read_volume(vol_path);
  gicd::export_slice_png(vol, gicd::slice_axis_from_string(axis), index,
                         center, width, out_path);
  emit(json{{"png", out_path}});
  return 0;
}

int run_adjoint_test(const std::string& geom_arg, int grid_n,
                     double extent_mm, std::uint64_t seed, double step_mm) {
  const gicd::ConeBeamGeometry geom = geometry_from_arg(geom_arg);
  const gicd::VolumeGrid grid = gicd::VolumeGrid::cube(grid_n, extent_mm);
  const double d = gicd::dot_product_test(geom, grid, seed, step_mm);
  emit(json{{"relative_discrepancy", d}, {"seed", seed}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-angle cone-beam CT toolkit: analytic phantoms, "
               "projection/FDK operators, dual-domain diffusion pipeline, "
               "image metrics"};
  app.require_subcommand(1);

  PhantomArgs ph;
  auto* c_ph = app.add_subcommand(
      "phantom", "Emit a phantom spec, rasterized volume and sinogram");
  c_ph->add_option("--geometry", ph.geometry, "desk, paper or a JSON file");
  c_ph->add_option("--spec", ph.spec_in,
                   "phantom spec JSON (default: built-in pelvis-like)");
  c_ph->add_option("--grid-n", ph.grid_n, "cubic grid size");
  c_ph->add_option("--grid-extent", ph.extent_mm, "grid extent in mm");
  c_ph->add_option("--supersample", ph.supersample, "sub-points per axis");
  c_ph->add_option("--out-spec", ph.out_spec);
  c_ph->add_option("--out-volume", ph.out_volume);
  c_ph->add_option("--out-sinogram", ph.out_sinogram);

  std::string vol_path, geom_arg = "desk", out_path, in_path;
  double step_mm = 0.0;
  auto* c_pr = app.add_subcommand("project", "Forward-project a volume file");
  c_pr->add_option("--volume", vol_path)->required();
  c_pr->add_option("--geometry", geom_arg);
  c_pr->add_option("--step", step_mm, "ray sampling step in mm");
  c_pr->add_option("--out", out_path)->required();

  double arc_start = 135.0, arc_end = 225.0;
  auto* c_arc = app.add_subcommand("arc", "Select a half-open view arc");
  c_arc->add_option("--input", in_path)->required();
  c_arc->add_option("--start", arc_start)->required();
  c_arc->add_option("--end", arc_end)->required();
  c_arc->add_option("--out", out_path)->required();

  int grid_n = 64;
  double extent_mm = 495.0, cutoff = 1.0;
  bool as_hu = false;
  auto* c_fdk = app.add_subcommand("fdk", "FDK reconstruction of a sinogram");
  c_fdk->add_option("--input", in_path)->required();
  c_fdk->add_option("--grid-n", grid_n);
  c_fdk->add_option("--grid-extent", extent_mm);
  c_fdk->add_option("--cutoff", cutoff, "ramp cutoff as fraction of Nyquist");
  c_fdk->add_flag("--hu", as_hu, "convert the output to HU");
  c_fdk->add_option("--out", out_path)->required();

  std::string config_path, limited_path, out_sino, out_mid, out_final;
  std::string truth_vol_path, truth_sino_path;
  std::uint64_t seed = 0;
  auto* c_pl = app.add_subcommand("pipeline",
                                  "Run the full dual-domain reconstruction");
  c_pl->add_option("--config", config_path)->required();
  c_pl->add_option("--limited", limited_path)->required();
  c_pl->add_option("--seed", seed)->required();
  c_pl->add_option("--out-sinogram", out_sino);
  c_pl->add_option("--out-intermediate", out_mid);
  c_pl->add_option("--out-final", out_final);
  c_pl->add_option("--truth-volume", truth_vol_path);
  c_pl->add_option("--truth-sinogram", truth_sino_path);

  std::vector<std::uint64_t> seeds;
  auto* c_un = app.add_subcommand(
      "uncertainty", "Voxel-wise std across repeated reconstructions");
  c_un->add_option("--config", config_path)->required();
  c_un->add_option("--limited", limited_path)->required();
  c_un->add_option("--seeds", seeds, "distinct seeds, comma separated")
      ->required()
      ->delimiter(',');
  c_un->add_option("--out", out_path)->required();

  std::string recon_path, truth_path;
  double threshold_hu = -500.0;
  bool masked_psnr = false;
  auto* c_me = app.add_subcommand("metrics", "MAE/SSIM/PSNR of two volumes");
  c_me->add_option("--recon", recon_path)->required();
  c_me->add_option("--truth", truth_path)->required();
  c_me->add_option("--mask-threshold", threshold_hu, "body mask HU threshold");
  c_me->add_flag("--masked-psnr", masked_psnr, "restrict PSNR to the mask");

  std::string axis = "axial";
  int slice_index = 0;
  double wc = 0.0, ww = 2000.0;
  auto* c_ex = app.add_subcommand("export-slice",
                                  "Write one slice as 8-bit grayscale PNG");
  c_ex->add_option("--volume", vol_path)->required();
  c_ex->add_option("--axis", axis, "axial, coronal or sagittal");
  c_ex->add_option("--index", slice_index)->required();
  c_ex->add_option("--window-center", wc);
  c_ex->add_option("--window-width", ww);
  c_ex->add_option("--out", out_path)->required();

  auto* c_ad = app.add_subcommand("adjoint-test",
                                  "Forward/adjoint dot-product discrepancy");
  c_ad->add_option("--geometry", geom_arg);
  c_ad->add_option("--grid-n", grid_n);
  c_ad->add_option("--grid-extent", extent_mm);
  c_ad->add_option("--seed", seed)->required();
  c_ad->add_option("--step", step_mm, "sampling step in mm (0 = voxel pitch)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (c_ph->parsed()) return run_phantom(ph);
    if (c_pr->parsed()) return run_project(vol_path, geom_arg, step_mm, out_path);
    if (c_arc->parsed()) return run_arc(in_path, arc_start, arc_end, out_path);
    if (c_fdk->parsed())
      return run_fdk(in_path, grid_n, extent_mm, cutoff, as_hu, out_path);
    if (c_pl->parsed())
      return run_pipeline_cmd(config_path, limited_path, seed, out_sino,
                              out_mid, out_final, truth_vol_path,
                              truth_sino_path);
    if (c_un->parsed())
      return run_uncertainty(config_path, limited_path, seeds, out_path);
    if (c_me->parsed())
      return run_metrics(recon_path, truth_path, threshold_hu, masked_psnr);
    if (c_ex->parsed())
      return run_export_slice(vol_path, axis, slice_index, wc, ww, out_path);
    if (c_ad->parsed())
      return run_adjoint_test(geom_arg, grid_n, extent_mm, seed, step_mm);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
