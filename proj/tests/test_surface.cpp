#include <cmath>
#include <cstdio>
#include <fstream>

#include "conelab/surface.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

// Unique temp path per test process; cleaned up by the caller.
std::string temp_file(const std::string& stem) {
  return "/tmp/conelab_test_" + stem + "_" + std::to_string(::getpid());
}

}  // namespace

TEST_CASE("spherical caps sit on the sphere with inward data") {
  SolidCone sector = SolidCone::planar_sector(1.2, 0.3);
  double r = 2.0;
  DiscreteHypersurface cap = make_cap(sector, r, 48);
  CHECK(cap.backend == Backend::Parametric);
  CHECK(cap.info.kind == SurfaceInfo::Kind::Cap);
  CHECK(cap.info.radius == r);
  CHECK(cap.sample_count() >= 48);
  for (int i = 0; i < cap.sample_count(); ++i) {
    CHECK(cap.sample(i).norm() == doctest::Approx(r).epsilon(1e-13));
    CHECK(sector.contains(cap.sample(i), 1e-9));
  }
  CHECK(cap.min_radius() == doctest::Approx(r).epsilon(1e-13));
  CHECK_NOTHROW(validate_in_cone(cap, sector));

  // Endpoints rest on the two walls.
  CHECK(sector.boundary_distance(cap.sample(0)) < 1e-12);
  CHECK(sector.boundary_distance(cap.sample(cap.sample_count() - 1)) < 1e-12);

  // A cap built for one cone does not validate against a narrower one.
  SolidCone narrow = SolidCone::planar_sector(0.9, 0.3);
  CHECK_THROWS_AS(validate_in_cone(cap, narrow), Error);

  DiscreteHypersurface cap3 = make_cap(SolidCone::circular(make_vec3(0, 0, 1), 0.8), 1.5, 16);
  for (int i = 0; i < cap3.sample_count(); ++i) {
    CHECK(cap3.sample(i).norm() == doctest::Approx(1.5).epsilon(1e-13));
  }
  CHECK(make_cap(SolidCone::full_sphere(2), 1.0, 32).chart.periodic[0]);
  CHECK_THROWS_AS(make_cap(sector, -1.0, 32), Error);
  CHECK_THROWS_AS(make_cap(sector, 1.0, 4), Error);
}

TEST_CASE("dilation scales every sample and the recorded shape data") {
  DiscreteHypersurface cap = make_cap(SolidCone::planar_sector(1.0), 1.0, 32);
  DiscreteHypersurface big = cap.dilated(2.5);
  CHECK(big.info.radius == doctest::Approx(2.5));
  CHECK(big.min_radius() == doctest::Approx(2.5).epsilon(1e-13));
  for (int i = 0; i < cap.sample_count(); ++i) {
    CHECK((big.sample(i) - 2.5 * cap.sample(i)).norm() < 1e-12);
  }
  // The analytic jet scales along.
  ChartJet j0 = cap.chart.jet(cap.chart.lo[0], 0);
  ChartJet j1 = big.chart.jet(big.chart.lo[0], 0);
  CHECK((j1.d1[0] - 2.5 * j0.d1[0]).norm() < 1e-12);
  CHECK_THROWS_AS(cap.dilated(0.0), Error);
}

TEST_CASE("punctured spheres through the vertex") {
  Vec center = make_vec2(1.0, 0.0);
  DiscreteHypersurface s = make_sphere_through_origin(center, 64);
  CHECK(s.info.kind == SurfaceInfo::Kind::SphereThroughOrigin);
  CHECK(s.info.radius == doctest::Approx(1.0));
  CHECK(s.info.puncture_radius == doctest::Approx(1e-3));
  for (int i = 0; i < s.sample_count(); ++i) {
    CHECK((s.sample(i) - center).norm() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(s.sample(i).norm() >= s.info.puncture_radius * (1 - 1e-9));
  }
  CHECK(s.min_radius() == doctest::Approx(1e-3).epsilon(1e-6));

  // 3D version: the chart opens away from the vertex and stops at the puncture.
  DiscreteHypersurface s3 = make_sphere_through_origin(make_vec3(0, 0, 2), 12, 0.05);
  CHECK(s3.info.puncture_radius == doctest::Approx(0.05));
  CHECK(s3.min_radius() >= 0.05 * (1 - 1e-9));
  for (int i = 0; i < s3.sample_count(); ++i) {
    CHECK((s3.sample(i) - make_vec3(0, 0, 2)).norm() == doctest::Approx(2.0).epsilon(1e-13));
  }

  CHECK_THROWS_AS(make_sphere_through_origin(make_vec2(0, 0), 32), Error);
  CHECK_THROWS_AS(make_sphere_through_origin(center, 32, 2.0), Error);
}

TEST_CASE("a constant radial graph reproduces the cap") {
  SolidCone sector = SolidCone::planar_sector(1.4, -0.2);
  DiscreteHypersurface cap = make_cap(sector, 2.0, 40);
  DiscreteHypersurface graph =
      make_radial_graph(sector, [](double, double) { return 2.0; }, 40);
  REQUIRE(graph.sample_count() == cap.sample_count());
  for (int i = 0; i < cap.sample_count(); ++i) {
    CHECK((graph.sample(i) - cap.sample(i)).norm() < 1e-12);
  }
  // Graphs are honestly tabulated: no analytic jet survives.
  CHECK(!graph.chart.analytic());

  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.7);
  DiscreteHypersurface cap3 = make_cap(circ, 1.5, 12);
  DiscreteHypersurface graph3 =
      make_radial_graph(circ, [](double, double) { return 1.5; }, 12);
  REQUIRE(graph3.sample_count() == cap3.sample_count());
  for (int i = 0; i < cap3.sample_count(); ++i) {
    CHECK((graph3.sample(i) - cap3.sample(i)).norm() < 1e-12);
  }

  // A genuinely varying graph stays inside the cone and off the sphere.
  DiscreteHypersurface wavy = make_radial_graph(
      sector, [](double t, double) { return 1.0 + 0.1 * std::cos(3 * t); }, 48);
  CHECK_NOTHROW(validate_in_cone(wavy, sector));
  CHECK(wavy.min_radius() < 1.0);
}

TEST_CASE("ellipsoids satisfy their implicit equation") {
  DiscreteHypersurface e2 = make_ellipsoid(make_vec2(2.0, 0.5), 32);
  CHECK(e2.info.kind == SurfaceInfo::Kind::Ellipsoid);
  for (int i = 0; i < e2.sample_count(); ++i) {
    Vec p = e2.sample(i);
    double q = p[0] * p[0] / 4.0 + p[1] * p[1] / 0.25;
    CHECK(q == doctest::Approx(1.0).epsilon(1e-12));
  }
  DiscreteHypersurface e3 = make_ellipsoid(make_vec3(1.0, 2.0, 3.0), 10);
  for (int i = 0; i < e3.sample_count(); ++i) {
    Vec p = e3.sample(i);
    double q = p[0] * p[0] + p[1] * p[1] / 4.0 + p[2] * p[2] / 9.0;
    CHECK(q == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_ellipsoid(make_vec2(1.0, -1.0), 32), Error);
}

TEST_CASE("simplicial caps") {
  SolidCone sector = SolidCone::planar_sector(1.0, 0.0);
  DiscreteHypersurface m2 = mesh_cap(sector, 1.5, 20);
  CHECK(m2.backend == Backend::Simplicial);
  CHECK(m2.mesh.vertices.size() == 21);  // open arc: endpoints are distinct
  CHECK(m2.mesh.segments.size() == 20);
  CHECK(!m2.mesh.closed);
  for (const Vec& v : m2.mesh.vertices) {
    CHECK(v.norm() == doctest::Approx(1.5).epsilon(1e-13));
  }
  CHECK_NOTHROW(validate_in_cone(m2, sector));

  DiscreteHypersurface full = mesh_cap(SolidCone::full_sphere(2), 1.0, 16);
  CHECK(full.mesh.closed);
  CHECK(full.mesh.vertices.size() == 16);
  CHECK(full.mesh.segments.size() == 16);

  // 3D full sphere: pole fans at both ends, quad strips between.
  DiscreteHypersurface ball = mesh_cap(SolidCone::full_sphere(3), 1.0, 6);
  int rows = 6, cols = 12;
  CHECK(static_cast<int>(ball.mesh.vertices.size()) == 2 + (rows - 1) * cols);
  CHECK(static_cast<int>(ball.mesh.triangles.size()) == 2 * cols + 2 * cols * (rows - 2));
  for (const Vec& v : ball.mesh.vertices) {
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-13));
  }

  DiscreteHypersurface hemi = mesh_cap(SolidCone::half_space(make_vec3(0, 0, 1)), 2.0, 5);
  CHECK_NOTHROW(validate_in_cone(hemi, SolidCone::half_space(make_vec3(0, 0, 1))));
  CHECK_THROWS_AS(mesh_cap(sector, 1.0, 3), Error);
}

TEST_CASE("polyline import") {
  std::string path = temp_file("poly.csv");
  {
    std::ofstream out(path);
    out << "x,y\n";  // header row is tolerated
    out << "1,0\n0,1\n-1,0\n0,-1\n1,0\n";
  }
  DiscreteHypersurface s = import_polyline_csv(path);
  CHECK(s.backend == Backend::Simplicial);
  CHECK(s.ambient_dim == 2);
  CHECK(s.mesh.closed);  // first == last collapses to a loop
  CHECK(s.mesh.vertices.size() == 4);
  CHECK(s.mesh.segments.size() == 4);
  std::remove(path.c_str());

  {
    std::ofstream out(path);
    out << "0,0\n1,0\n1,1\n";
  }
  DiscreteHypersurface open_line = import_polyline_csv(path);
  CHECK(!open_line.mesh.closed);
  CHECK(open_line.mesh.segments.size() == 2);
  std::remove(path.c_str());

  {
    std::ofstream out(path);
    out << "1,0\n0,oops\n";
  }
  CHECK_THROWS_AS(import_polyline_csv(path), Error);
  std::remove(path.c_str());

  CHECK_THROWS_AS(import_polyline_csv("/nonexistent/nowhere.csv"), Error);
}

TEST_CASE("OBJ import") {
  std::string path = temp_file("mesh.obj");
  {
    std::ofstream out(path);
    out << "# tetrahedron\n";
    out << "v 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\n";
    out << "f 1 2 3\nf 1 3 4\nf 1 4 2\nf 2 4 3\n";
  }
  DiscreteHypersurface s = import_obj(path);
  CHECK(s.mesh.vertices.size() == 4);
  CHECK(s.mesh.triangles.size() == 4);
  std::remove(path.c_str());

  // Quads fan into triangles; v/vt/vn references keep the vertex index.
  {
    std::ofstream out(path);
    out << "v 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n";
    out << "f 1/1 2/2 3/3 4/4\n";
  }
  DiscreteHypersurface quad = import_obj(path);
  CHECK(quad.mesh.triangles.size() == 2);
  std::remove(path.c_str());

  {
    std::ofstream out(path);
    out << "v 0 0\n";
  }
  CHECK_THROWS_AS(import_obj(path), Error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(import_obj("/nonexistent/nowhere.obj"), Error);
}

TEST_CASE("subcharts restrict the parameter range") {
  SolidCone cone = SolidCone::circular(make_vec3(0, 0, 1), 0.9);
  DiscreteHypersurface cap = make_cap(cone, 1.0, 12);
  DiscreteHypersurface sub = cap.subchart(0.2, 0.5, 9);
  CHECK(sub.chart.lo[0] == doctest::Approx(0.2));
  CHECK(sub.chart.hi[0] == doctest::Approx(0.5));
  for (int i = 0; i < sub.sample_count(); ++i) {
    Vec p = sub.sample(i);
    CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-13));
    double th = std::acos(p[2]);
    CHECK(th >= 0.2 - 1e-12);
    CHECK(th <= 0.5 + 1e-12);
  }
  // Tabulated charts cannot be restricted.
  DiscreteHypersurface graph =
      make_radial_graph(SolidCone::planar_sector(1.0), [](double, double) { return 1.0; }, 16);
  CHECK_THROWS_AS(graph.subchart(0.1, 0.2, 8), Error);
}

TEST_CASE("deformations move samples as requested") {
  SolidCone sector = SolidCone::planar_sector(1.2);
  HomogeneousDensity density(1.0, DensityProfile::radial());
  DiscreteHypersurface cap = make_cap(sector, 1.0, 32);
  GeometryCache cache = geometry(cap, density, sector);

  VecX zero = VecX::Zero(cap.sample_count());
  DiscreteHypersurface still = deform_normal(cap, cache, zero, 0.1, sector);
  for (int i = 0; i < cap.sample_count(); ++i) {
    CHECK((still.sample(i) - cap.sample(i)).norm() < 1e-12);
  }

  // Unit normal speed moves interior samples by t along the inward normal.
  VecX one = VecX::Ones(cap.sample_count());
  double t = 0.05;
  DiscreteHypersurface inward = deform_normal(cap, cache, one, t, sector);
  int mid = cap.sample_count() / 2;
  CHECK(inward.sample(mid).norm() == doctest::Approx(1.0 - t).epsilon(1e-10));
  // Free-boundary samples slide back onto the wall.
  CHECK(sector.boundary_distance(inward.sample(0)) < 1e-9);

  // Ambient displacement by the position field is a dilation.
  DiscreteHypersurface stretched =
      deform_by(cap, [](const Vec& p) { return p; }, 0.5, sector);
  for (int i = 0; i < cap.sample_count(); ++i) {
    CHECK((stretched.sample(i) - 1.5 * cap.sample(i)).norm() < 1e-12);
  }
}

TEST_CASE("wall projection lands on the wall") {
  SolidCone sector = SolidCone::planar_sector(1.0, 0.2);
  Vec p = 2.0 * make_vec2(std::cos(0.35), std::sin(0.35));
  Vec w = project_to_wall(sector, p);
  CHECK(sector.boundary_distance(w) < 1e-12);
  CHECK(w.norm() == doctest::Approx(2.0).epsilon(1e-13));  // sector snap keeps the radius
  CHECK(std::atan2(w[1], w[0]) == doctest::Approx(0.2));

  SolidCone half = SolidCone::half_space(make_vec3(0, 0, 1));
  Vec q = project_to_wall(half, make_vec3(1, 2, 0.3));
  CHECK(q[2] == doctest::Approx(0.0));
  CHECK(q[0] == doctest::Approx(1.0));

  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.5);
  Vec c = project_to_wall(circ, make_vec3(0.2, 0, 1.0));
  CHECK(circ.boundary_distance(c) < 1e-12);
  CHECK(c.norm() == doctest::Approx(make_vec3(0.2, 0, 1.0).norm()).epsilon(1e-13));
  CHECK_THROWS_AS(project_to_wall(circ, make_vec3(0, 0, 1.0)), Error);
  CHECK_THROWS_AS(project_to_wall(SolidCone::full_sphere(2), make_vec2(1, 0)), Error);
}

TEST_CASE("axis rules: weights integrate, derivative matrices differentiate") {
  // Periodic: Fourier differentiation is exact below Nyquist.
  AxisRule per = make_axis_rule(0.0, 2 * M_PI, 16, true, true);
  CHECK(per.nodes == 16);
  VecX vals(16), dvals(16);
  for (int i = 0; i < 16; ++i) {
    double t = per.h * i;
    vals[i] = std::sin(3 * t);
    dvals[i] = 3 * std::cos(3 * t);
  }
  CHECK(((per.d1 * vals) - dvals).lpNorm<Eigen::Infinity>() < 1e-12);
  double wsum = 0;
  for (double w : per.weights) wsum += w;
  CHECK(wsum == doctest::Approx(2 * M_PI).epsilon(1e-14));

  // Odd periodic requests are rounded up to an even count.
  CHECK(make_axis_rule(0.0, 1.0, 15, true, false).nodes == 16);

  // Non-periodic Gregory weights integrate smooth functions to 4th order.
  AxisRule greg = make_axis_rule(0.0, 1.0, 41, false, false);
  KahanSum acc;
  for (int i = 0; i < greg.nodes; ++i) {
    double t = greg.h * i;
    acc.add(greg.weights[static_cast<size_t>(i)] * std::exp(t));
  }
  CHECK(acc.value() == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-8));
}
