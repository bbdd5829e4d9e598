// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gicd/geometry.hpp"
#include "gicd/rng.hpp"
#include "gicd/signal.hpp"

using namespace gicd;

namespace {

Sinogramd random_sinogram(const ConeBeamGeometry& g, std::uint64_t seed) {
  Sinogramd s = Sinogramd::zeros(g);
  s.data = CounterRng(seed).uniforms(0, s.data.size());
  return s;
}

}  // namespace

TEST_CASE("presets match the reference scanner") {
  const ConeBeamGeometry paper = make_geometry("paper");
  CHECK(paper.sdd_mm == 1500.0);
  CHECK(paper.sid_mm == 1000.0);
  CHECK(paper.det_rows == 768);
  CHECK(paper.det_cols == 1024);
  CHECK(paper.det_spacing_u_mm == 0.78);
  CHECK(paper.det_spacing_v_mm == 0.78);
  CHECK(paper.views() == 360);
  CHECK(paper.angles_deg.front() == 0.0);
  CHECK(paper.angles_deg.back() == 359.0);

  const ConeBeamGeometry desk = make_geometry("desk");
  CHECK(desk.sdd_mm == 1500.0);
  CHECK(desk.sid_mm == 1000.0);
  CHECK(desk.det_rows == 96);
  CHECK(desk.det_cols == 128);
  CHECK(desk.views() == 180);
  CHECK(desk.magnification() == doctest::Approx(1.5));
  CHECK(desk.magnification() == doctest::Approx(paper.magnification()));
}

TEST_CASE("non-physical parameters are rejected") {
  ConeBeamGeometry g = make_geometry("desk");
  g.sdd_mm = 1000.0;
  g.sid_mm = 1200.0;  // sdd < sid
  CHECK_THROWS_AS(make_geometry(g), Error);

  g = make_geometry("desk");
  g.det_spacing_u_mm = -1.0;
  CHECK_THROWS_AS(make_geometry(g), Error);

  g = make_geometry("desk");
  g.angles_deg = {10.0, 10.0};
  CHECK_THROWS_AS(make_geometry(g), Error);

  g = make_geometry("desk");
  g.angles_deg = {0.0, 360.0};
  CHECK_THROWS_AS(make_geometry(g), Error);

  CHECK_THROWS_AS(make_geometry("unknown"), Error);
}

TEST_CASE("source positions follow the clockwise convention") {
  const ConeBeamGeometry g = make_geometry("paper");
  const Eigen::Vector3d p0 = source_position(g, 0.0);
  CHECK(p0.isApprox(Eigen::Vector3d(0.0, 1000.0, 0.0), 1e-12));
  const Eigen::Vector3d p180 = source_position(g, 180.0);
  CHECK(p180.isApprox(Eigen::Vector3d(0.0, -1000.0, 0.0), 1e-12));
  const Eigen::Vector3d p90 = source_position(g, 90.0);
  CHECK(p90.isApprox(Eigen::Vector3d(1000.0, 0.0, 0.0), 1e-12));

  ConeBeamGeometry ccw = g;
  ccw.rotation_sense = RotationSense::Counterclockwise;
  CHECK(source_position(ccw, 90.0)
            .isApprox(Eigen::Vector3d(-1000.0, 0.0, 0.0), 1e-12));
}

TEST_CASE("source stays on the orbit for every view") {
  const ConeBeamGeometry g = make_geometry("desk");
  for (double a : g.angles_deg) {
    CHECK(source_position(g, a).norm() ==
          doctest::Approx(g.sid_mm).epsilon(1e-9));
  }
}

TEST_CASE("detector pixel positions") {
  // Odd detector so the central pixel sits exactly on the central ray.
  ConeBeamGeometry g = make_geometry("desk");
  g.det_rows = 3;
  g.det_cols = 5;
  g.validate();
  const int rc = 1, cc = 2;

  for (double a : {0.0, 37.0, 180.0, 271.5}) {
    const Eigen::Vector3d center = detector_pixel_position(g, a, rc, cc);
    const Eigen::Vector3d src = source_position(g, a);
    // Central pixel: isocenter + (sdd - sid) along the central ray.
    const Eigen::Vector3d c_hat = -src.normalized();
    CHECK(center.isApprox((g.sdd_mm - g.sid_mm) * c_hat, 1e-9));
    CHECK((center - src).norm() == doctest::Approx(g.sdd_mm).epsilon(1e-12));

    // Source, isocenter and central pixel are collinear.
    CHECK(src.cross(center).norm() < 1e-6);

    // One column over moves by the column pitch along u.
    const Eigen::Vector3d next = detector_pixel_position(g, a, rc, cc + 1);
    CHECK((next - center).norm() ==
          doctest::Approx(g.det_spacing_u_mm).epsilon(1e-12));
    CHECK(std::abs((next - center).dot(c_hat)) < 1e-9);

    // Corner pixel distance from the source is sqrt(sdd^2 + u^2 + v^2).
    const Eigen::Vector3d corner = detector_pixel_position(g, a, 0, 0);
    const auto [u, v] = detector_offsets(g, 0, 0);
    CHECK((corner - src).norm() ==
          doctest::Approx(std::sqrt(g.sdd_mm * g.sdd_mm + u * u + v * v))
              .epsilon(1e-12));
  }

  CHECK_THROWS_AS(detector_pixel_position(g, 0.0, 3, 0), Error);
  CHECK_THROWS_AS(detector_pixel_position(g, 0.0, 0, -1), Error);
}

TEST_CASE("arc selection counts") {
  const ConeBeamGeometry paper = make_geometry("paper");
  const Sinogramd full = random_sinogram(paper, 11);

  const Sinogramd arc = select_arc(full, 135.0, 225.0);
  CHECK(arc.views() == 90);
  CHECK(arc.geom.angles_deg.front() == 135.0);
  CHECK(arc.geom.angles_deg.back() == 224.0);

  const Sinogramd all = select_arc(full, 0.0, 360.0);
  CHECK(all.views() == full.views());
  CHECK((all.data == full.data).all());

  // 2 deg spacing: count the half-open hits independently.
  const ConeBeamGeometry desk = make_geometry("desk");
  int expected = 0;
  for (double a : desk.angles_deg)
    if (a >= 135.0 && a < 225.0) ++expected;
  CHECK(expected == 45);
  const Sinogramd desk_arc = select_arc(random_sinogram(desk, 3), 135.0, 225.0);
  CHECK(desk_arc.views() == expected);
}

TEST_CASE("arc selection errors") {
  const Sinogramd full = random_sinogram(make_geometry("desk"), 5);
  CHECK_THROWS_AS(select_arc(full, 225.0, 135.0), Error);   // inverted
  CHECK_THROWS_AS(select_arc(full, 400.0, 500.0), Error);   // empty
  CHECK_THROWS_AS(select_arc(full, -40.0, 20.0), Error);    // before coverage
  const Sinogramd part = select_arc(full, 0.0, 90.0);
  CHECK_THROWS_AS(select_arc(part, 45.0, 135.0), Error);    // past coverage
}

TEST_CASE("arc selection is idempotent") {
  const Sinogramd full = random_sinogram(make_geometry("desk"), 7);
  const Sinogramd once = select_arc(full, 135.0, 225.0);
  const Sinogramd twice = select_arc(once, 135.0, 225.0);
  CHECK(once.views() == twice.views());
  CHECK((once.data == twice.data).all());
}

TEST_CASE("arcs over a partition reproduce the full sinogram") {
  const Sinogramd full = random_sinogram(make_geometry("desk"), 9);
  const double cuts[] = {0.0, 45.0, 135.0, 225.0, 360.0};
  long view = 0;
  for (int p = 0; p + 1 < 5; ++p) {
    const Sinogramd part = select_arc(full, cuts[p], cuts[p + 1]);
    for (int v = 0; v < part.views(); ++v, ++view) {
      CHECK(part.geom.angles_deg[v] == full.geom.angles_deg[view]);
      const long n = full.pixels_per_view();
      CHECK((part.data.segment(v * n, n) == full.data.segment(view * n, n))
                .all());
    }
  }
  CHECK(view == full.views());
}
