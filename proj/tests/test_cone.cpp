#include <cmath>
#include <functional>
#include <limits>

#include "conelab/cone.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::IoError;  // sentinel: nothing was thrown
}

}  // namespace

TEST_CASE("constructor validation") {
  CHECK_NOTHROW(SolidCone::full_sphere(2));
  CHECK_NOTHROW(SolidCone::full_sphere(3));
  CHECK(kind_of([] { SolidCone::full_sphere(4); }) == ErrorKind::InvalidArgument);

  CHECK(kind_of([] { SolidCone::half_space(make_vec2(0, 0)); }) == ErrorKind::InvalidArgument);
  // The stored normal is unit length regardless of the input scale.
  SolidCone h = SolidCone::half_space(make_vec2(0, 5));
  CHECK(h.axis().norm() == doctest::Approx(1.0));

  CHECK(kind_of([] { SolidCone::circular(make_vec2(1, 0), 0.5); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { SolidCone::circular(make_vec3(0, 0, 1), 0.0); }) ==
        ErrorKind::InvalidArgument);
  CHECK(kind_of([] { SolidCone::circular(make_vec3(0, 0, 1), M_PI / 2 + 0.01); }) ==
        ErrorKind::InvalidArgument);
  CHECK_NOTHROW(SolidCone::circular(make_vec3(0, 0, 1), M_PI / 2));

  CHECK(kind_of([] { SolidCone::planar_sector(0.0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { SolidCone::planar_sector(2 * M_PI); }) == ErrorKind::InvalidArgument);
  SolidCone s = SolidCone::planar_sector(1.2);
  CHECK(s.sector_start() == doctest::Approx(-0.6));
  CHECK(s.sector_angle() == doctest::Approx(1.2));
}

TEST_CASE("membership is scale invariant and the vertex always belongs") {
  SolidCone sector = SolidCone::planar_sector(M_PI / 2);  // symmetric about +x
  CHECK(sector.contains(make_vec2(1, 0)));
  CHECK(sector.contains(make_vec2(1e-9, 0)));
  CHECK(sector.contains(make_vec2(1e9, 0)));
  CHECK(!sector.contains(make_vec2(0, 1)));
  CHECK(!sector.contains(make_vec2(-1, 0)));
  CHECK(sector.contains(make_vec2(0, 0)));
  // Points on the wall pass at the default tolerance.
  CHECK(sector.contains(make_vec2(std::cos(M_PI / 4), std::sin(M_PI / 4))));
  CHECK(!sector.contains(make_vec2(std::cos(M_PI / 4 + 1e-3), std::sin(M_PI / 4 + 1e-3))));

  SolidCone half = SolidCone::half_space(make_vec2(0, 1));
  CHECK(half.contains(make_vec2(3, 2)));
  CHECK(half.contains(make_vec2(5, 0)));
  CHECK(!half.contains(make_vec2(3, -0.1)));

  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), M_PI / 4);
  CHECK(circ.contains(make_vec3(0.1, 0, 1)));
  CHECK(circ.contains(make_vec3(1, 0, 1)));  // exactly on the wall
  CHECK(!circ.contains(make_vec3(1, 0, 0.9)));
  CHECK(circ.contains(make_vec3(200, 0, 200)));

  SolidCone full = SolidCone::full_sphere(3);
  CHECK(full.contains(make_vec3(-4, 2, -7)));
  CHECK(kind_of([&] { full.contains(make_vec2(1, 0)); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("convexity by region") {
  CHECK(SolidCone::full_sphere(2).convex());
  CHECK(SolidCone::half_space(make_vec3(1, 0, 0)).convex());
  CHECK(SolidCone::circular(make_vec3(0, 0, 1), M_PI / 2).convex());
  CHECK(SolidCone::planar_sector(M_PI).convex());
  CHECK(!SolidCone::planar_sector(M_PI + 0.01).convex());
  CHECK(!SolidCone::full_sphere(2).has_boundary());
  CHECK(SolidCone::planar_sector(1.0).has_boundary());
}

TEST_CASE("wall normals point into the cone") {
  SolidCone half = SolidCone::half_space(make_vec3(0, 1, 0));
  Vec n = half.boundary_inner_normal(make_vec3(2, 0, -1));
  CHECK(n[1] == doctest::Approx(1.0));

  // Circular cone: the normal is unit, orthogonal to the ruling, and a small
  // step along it stays inside.
  double alpha = 0.7;
  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), alpha);
  Vec p = 2.0 * make_vec3(std::sin(alpha), 0, std::cos(alpha));
  n = circ.boundary_inner_normal(p);
  CHECK(n.norm() == doctest::Approx(1.0));
  CHECK(n.dot(p) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n[0] == doctest::Approx(-std::cos(alpha)));
  CHECK(n[2] == doctest::Approx(std::sin(alpha)));
  CHECK(circ.contains(p + 1e-3 * n));

  SolidCone sector = SolidCone::planar_sector(1.2, 0.3);
  Vec start_pt = make_vec2(std::cos(0.3), std::sin(0.3));
  Vec end_pt = make_vec2(std::cos(1.5), std::sin(1.5));
  Vec ns = sector.boundary_inner_normal(start_pt);
  Vec ne = sector.boundary_inner_normal(end_pt);
  CHECK(ns.dot(make_vec2(-std::sin(0.3), std::cos(0.3))) == doctest::Approx(1.0));
  CHECK(ne.dot(make_vec2(std::sin(1.5), -std::cos(1.5))) == doctest::Approx(1.0));
  CHECK(sector.contains(start_pt + 1e-6 * ns));
  CHECK(sector.contains(end_pt + 1e-6 * ne));

  CHECK(kind_of([&] { sector.boundary_inner_normal(make_vec2(0, 0)); }) ==
        ErrorKind::VertexSingular);
  CHECK(kind_of([] {
          SolidCone::full_sphere(2).boundary_inner_normal(make_vec2(1, 0));
        }) == ErrorKind::InvalidArgument);
}

TEST_CASE("wall curvature: flat walls vanish, circular walls bend one direction") {
  SolidCone half = SolidCone::half_space(make_vec3(0, 0, 1));
  CHECK(half.boundary_II(make_vec3(1, 2, 0), make_vec3(3, -1, 0)) == 0.0);
  SolidCone sector = SolidCone::planar_sector(2.0);
  Vec wall = make_vec2(std::cos(1.0), std::sin(1.0));
  CHECK(sector.boundary_II(wall, wall) == 0.0);

  double alpha = 0.6, r = 3.0;
  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), alpha);
  Vec p = r * make_vec3(std::sin(alpha), 0, std::cos(alpha));
  // Circumferential direction at this wall point.
  Vec tau = make_vec3(0, 1, 0);
  double expected = std::cos(alpha) / (std::sin(alpha) * r);
  CHECK(circ.boundary_II(p, tau) == doctest::Approx(expected));
  // Ruling direction is flat; curvature scales with the squared tangential part.
  CHECK(circ.boundary_II(p, p / r) == doctest::Approx(0.0));
  CHECK(circ.boundary_II(p, 2.0 * tau) == doctest::Approx(4.0 * expected));
  CHECK(circ.boundary_II(p, tau) >= 0.0);  // convex wall

  CHECK(kind_of([&] { circ.boundary_II(make_vec3(0, 0, 0), tau); }) == ErrorKind::VertexSingular);
  CHECK(kind_of([&] { circ.boundary_II(make_vec3(0, 0, 1), tau); }) ==
        ErrorKind::ProjectionDegenerate);
}

TEST_CASE("boundary distance") {
  SolidCone half = SolidCone::half_space(make_vec2(0, 1));
  CHECK(half.boundary_distance(make_vec2(7, 2)) == doctest::Approx(2.0));

  SolidCone sector = SolidCone::planar_sector(1.0, 0.0);
  double r = 2.0, theta = 0.25;  // nearest wall is theta = 0
  Vec p = r * make_vec2(std::cos(theta), std::sin(theta));
  CHECK(sector.boundary_distance(p) == doctest::Approx(2 * r * std::sin(theta / 2)));

  CHECK(SolidCone::full_sphere(2).boundary_distance(make_vec2(1, 1)) ==
        std::numeric_limits<double>::infinity());

  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.5);
  CHECK(circ.boundary_distance(make_vec3(0, 0, 2)) == doctest::Approx(2 * 2 * std::sin(0.25)));
}

TEST_CASE("spherical sample grids stay inside the region") {
  double guard = 0.05;

  SolidCone sector = SolidCone::planar_sector(1.0, 0.0);
  auto pts = sector.sphere_samples(5, guard);
  CHECK(pts.size() == 5);
  CHECK(pts.front()[0] == doctest::Approx(std::cos(guard)));
  CHECK(pts.back()[1] == doctest::Approx(std::sin(1.0 - guard)));
  for (const Vec& q : pts) {
    CHECK(q.norm() == doctest::Approx(1.0));
    CHECK(sector.contains(q, 0.0));
  }

  // The full circle gets a periodic grid: no duplicated endpoint.
  auto circle = SolidCone::full_sphere(2).sphere_samples(8, 0.0);
  CHECK(circle.size() == 8);
  CHECK((circle.front() - circle.back()).norm() > 0.5);

  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.8);
  auto grid = circ.sphere_samples(4, guard);
  CHECK(grid.size() == 4 * 8);  // colatitude x azimuth
  for (const Vec& q : grid) {
    CHECK(q.norm() == doctest::Approx(1.0));
    CHECK(circ.contains(q, 0.0));
    CHECK(std::acos(q.dot(circ.axis())) <= 0.8 - guard + 1e-12);
  }

  CHECK(kind_of([&] { circ.sphere_samples(4, 1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("describe names the region") {
  CHECK(SolidCone::planar_sector(1.5).describe().find("planar_sector") != std::string::npos);
  CHECK(SolidCone::circular(make_vec3(0, 0, 1), 0.4).describe().find("circular") !=
        std::string::npos);
}
