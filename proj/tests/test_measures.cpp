#include <cmath>

#include "conelab/measures.hpp"
#include "conelab/oracles.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

struct CapSetup {
  SolidCone cone;
  HomogeneousDensity density;
  DiscreteHypersurface surface;
  GeometryCache cache;
};

CapSetup sector_cap(double angle, double k, double r, int res) {
  SolidCone cone = SolidCone::planar_sector(angle, 0.3);
  HomogeneousDensity density(k, DensityProfile::radial());
  DiscreteHypersurface surface = make_cap(cone, r, res);
  GeometryCache cache = geometry(surface, density, cone);
  return {cone, density, surface, cache};
}

}  // namespace

TEST_CASE("weighted area and oriented volume of caps in closed form") {
  double angle = 1.2, k = 1.0, r = 2.0;
  CapSetup s = sector_cap(angle, k, r, 96);
  double area = weighted_area(s.cache);
  CHECK(area == doctest::Approx(angle * r * r).epsilon(1e-10));
  // The cone overload of the closed-form reference agrees.
  auto ref = oracle::radial_integrals(1, k, r, s.cone);
  CHECK(area == doctest::Approx(ref.circle_area).epsilon(1e-10));
  double vol = oriented_volume(s.cache, s.density);
  CHECK(vol == doctest::Approx(r * area / 3.0).epsilon(1e-10));  // (n+k+1) = 3
  CHECK(vol == doctest::Approx(ref.oriented_volume).epsilon(1e-10));

  // 3D circular cone, fractional degree.
  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.8);
  HomogeneousDensity d3(0.5, DensityProfile::radial());
  GeometryCache c3 = geometry(make_cap(circ, 1.5, 48), d3, circ);
  double region = 2 * M_PI * (1 - std::cos(0.8));
  CHECK(weighted_area(c3) == doctest::Approx(region * std::pow(1.5, 2.5)).epsilon(1e-6));
  CHECK(oriented_volume(c3, d3) ==
        doctest::Approx(1.5 * region * std::pow(1.5, 2.5) / 3.5).epsilon(1e-6));

  // k = -(n+1) has no homogeneous volume.
  CapSetup crit = sector_cap(1.2, -2.0, 1.0, 48);
  CHECK_THROWS_AS(oriented_volume(crit.cache, crit.density), Error);
}

TEST_CASE("cap geometry fields match the round-sphere formulas") {
  double k = 1.5, r = 2.0;
  CapSetup s = sector_cap(1.0, k, r, 64);
  int n = s.cache.n;
  for (size_t i = 0; i < s.cache.position.size(); ++i) {
    if (s.cache.degenerate[i]) continue;
    CHECK(s.cache.H[i] == doctest::Approx(1.0 / r).epsilon(1e-10));
    CHECK(s.cache.Hf[i] == doctest::Approx((n + k) / r).epsilon(1e-10));
    CHECK(s.cache.support[i] == doctest::Approx(-r).epsilon(1e-12));
    CHECK(s.cache.sigma2[i] == doctest::Approx(n / (r * r)).epsilon(1e-10));
    // Inward normal of a centered sphere.
    CHECK((s.cache.normal[i] + s.cache.position[i] / r).norm() < 1e-12);
  }
  CHECK(s.cache.weighted_mean_Hf() == doctest::Approx((n + k) / r).epsilon(1e-10));
  CHECK(s.cache.weighted_std_Hf() < 1e-10);

  // Boundary data: orthogonal wall contact, flat sector walls, support -r.
  REQUIRE(s.cache.boundary.size() == 2);
  for (const BoundarySample& b : s.cache.boundary) {
    CHECK(std::abs(b.normal.dot(b.wall_normal)) < 1e-12);
    CHECK(b.II_NN == 0.0);
    CHECK(b.support == doctest::Approx(-r).epsilon(1e-12));
    CHECK(b.dl_weight == 1.0);  // counting measure on endpoint boundaries
    CHECK(b.f == doctest::Approx(std::pow(r, k)).epsilon(1e-12));
    // Orthogonal wall contact: the inward conormal coincides with the wall's
    // inner normal (both are tangent to the sphere at the contact point).
    CHECK((b.conormal - b.wall_normal).norm() < 1e-9);
  }

  // 3D: the boundary circle of a cap on a circular cone has length 2 pi r sin(alpha).
  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.8);
  HomogeneousDensity d3(1.0, DensityProfile::radial());
  GeometryCache c3 = geometry(make_cap(circ, 1.5, 48), d3, circ);
  KahanSum blen;
  for (const BoundarySample& b : c3.boundary) {
    blen.add(b.dl_weight);
    CHECK(std::abs(b.normal.dot(b.wall_normal)) < 1e-10);
    CHECK(b.II_NN >= 0.0);  // convex wall
  }
  CHECK(blen.value() == doctest::Approx(2 * M_PI * 1.5 * std::sin(0.8)).epsilon(1e-10));
}

TEST_CASE("weighted divergence of the position field is n + k everywhere") {
  // Pointwise identity div_Sigma p = n plus Euler's relation; holds on any
  // surface, not only on caps.
  CapSetup s = sector_cap(1.2, 1.0, 2.0, 64);
  std::vector<Vec> pos = s.cache.position;
  ScalarField div = surface_f_divergence(s.surface, s.cache, pos);
  for (size_t i = 0; i < div.size(); ++i) {
    if (s.cache.degenerate[i]) continue;
    CHECK(div[i] == doctest::Approx(2.0).epsilon(1e-6));  // n + k = 2
  }

  SolidCone sector = s.cone;
  DiscreteHypersurface wavy = make_radial_graph(
      sector, [](double t, double) { return 1.0 + 0.1 * std::cos(3 * t); }, 96);
  HomogeneousDensity d(0.5, DensityProfile::radial());
  GeometryCache wc = geometry(wavy, d, sector);
  ScalarField wdiv = surface_f_divergence(wavy, wc, wc.position);
  double worst = 0;
  for (size_t i = 0; i < wdiv.size(); ++i) {
    if (wc.degenerate[i]) continue;
    worst = std::max(worst, std::abs(wdiv[i] - 1.5));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("normal fields diverge with -u H_f") {
  CapSetup s = sector_cap(1.0, 0.7, 1.3, 64);
  std::vector<Vec> field(s.cache.position.size());
  std::vector<double> u(s.cache.position.size());
  for (size_t i = 0; i < field.size(); ++i) {
    double x = s.cache.position[i][0];
    u[i] = std::exp(0.3 * x);
    field[i] = u[i] * s.cache.normal[i];
  }
  ScalarField div = surface_f_divergence(s.surface, s.cache, field);
  for (size_t i = 0; i < div.size(); ++i) {
    if (s.cache.degenerate[i]) continue;
    CHECK(div[i] == doctest::Approx(-u[i] * s.cache.Hf[i]).epsilon(1e-7));
  }
}

TEST_CASE("tangential gradient and weighted Laplacian") {
  CapSetup s = sector_cap(1.2, 1.0, 2.0, 64);
  Vec a = make_vec2(0.4, -1.1);
  ScalarField lin(s.cache.position.size());
  for (size_t i = 0; i < lin.size(); ++i) lin[i] = a.dot(s.cache.position[i]);
  std::vector<Vec> grad = tangential_gradient(s.surface, s.cache, lin);
  for (size_t i = 0; i < grad.size(); ++i) {
    if (s.cache.degenerate[i]) continue;
    Vec expected = a - a.dot(s.cache.normal[i]) * s.cache.normal[i];
    CHECK((grad[i] - expected).norm() < 1e-6);
    CHECK(std::abs(grad[i].dot(s.cache.normal[i])) < 1e-7);
  }

  // The weighted Laplacian is the weighted divergence of the gradient.
  ScalarField lap = weighted_laplacian(s.surface, s.cache, lin);
  ScalarField div = surface_f_divergence(s.surface, s.cache, grad);
  for (size_t i = 0; i < lap.size(); ++i) {
    if (s.cache.degenerate[i]) continue;
    CHECK(lap[i] == doctest::Approx(div[i]).epsilon(1e-6));
  }
}

TEST_CASE("surface divergence theorem on caps and graphs") {
  CapSetup s = sector_cap(1.2, 1.0, 2.0, 96);
  double area = weighted_area(s.cache);
  CHECK(std::abs(verify_surface_divergence_theorem(s.surface, s.cache, position_field())) <
        1e-8 * (1 + area));
  CHECK(std::abs(verify_surface_divergence_theorem(s.surface, s.cache,
                                                   constant_field(make_vec2(0.3, 0.9)))) <
        1e-8 * (1 + area));

  DiscreteHypersurface wavy = make_radial_graph(
      s.cone, [](double t, double) { return 1.0 + 0.1 * std::cos(3 * t); }, 96);
  GeometryCache wc = geometry(wavy, s.density, s.cone);
  CHECK(std::abs(verify_surface_divergence_theorem(wavy, wc, position_field())) <
        1e-6 * (1 + weighted_area(wc)));

  // 3D circular-cone cap.
  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.8);
  HomogeneousDensity d3(1.0, DensityProfile::radial());
  DiscreteHypersurface cap3 = make_cap(circ, 1.5, 32);
  GeometryCache c3 = geometry(cap3, d3, circ);
  CHECK(std::abs(verify_surface_divergence_theorem(cap3, c3, position_field())) <
        1e-6 * (1 + weighted_area(c3)));
}

TEST_CASE("Minkowski identity: caps are stationary, ellipses are not") {
  CapSetup s = sector_cap(1.2, 1.0, 2.0, 96);
  MinkowskiReport rep = minkowski(s.cache, s.density);
  CHECK(rep.stationary);
  CHECK(!rep.critical_degree);
  CHECK(!rep.forced_zero_Hf);
  CHECK(rep.Hf_mean == doctest::Approx(1.0).epsilon(1e-10));  // (n+k)/r
  CHECK(rep.relative_residual < 1e-12);
  CHECK(rep.relative_gap < 1e-12);

  // Free sphere in R^3 with the trivial density.
  SolidCone space = SolidCone::full_sphere(3);
  HomogeneousDensity flat(0.0, DensityProfile::radial());
  GeometryCache sph = geometry(make_cap(space, 1.25, 48), flat, space);
  MinkowskiReport rs = minkowski(sph, flat);
  CHECK(rs.stationary);
  CHECK(rs.Hf_mean == doctest::Approx(2.0 / 1.25).epsilon(1e-9));
  CHECK(rs.relative_residual < 1e-10);
  CHECK(rs.relative_gap < 1e-10);

  // Ellipse: the pointwise identity integrates to zero, but constant-Hf
  // stationarity fails and the mean-curvature gap opens up.
  SolidCone plane = SolidCone::full_sphere(2);
  GeometryCache ell = geometry(make_ellipsoid(make_vec2(1.6, 0.9), 128), flat, plane);
  MinkowskiReport re = minkowski(ell, flat);
  CHECK(!re.stationary);
  CHECK(re.relative_residual < 1e-10);
  CHECK(re.relative_gap > 1e-3);
  CHECK(re.Hf_std > 1e-3);

  // Degree -n forces H_f = 0 on stationary surfaces.
  CapSetup zero = sector_cap(1.2, -1.0, 2.0, 96);
  MinkowskiReport rz = minkowski(zero.cache, zero.density);
  CHECK(rz.stationary);
  CHECK(rz.forced_zero_Hf);
  CHECK(std::abs(rz.Hf_mean) < 1e-12);

  // Critical degree: residual is still reported, the volume side is not.
  CapSetup crit = sector_cap(1.2, -2.0, 1.0, 96);
  MinkowskiReport rc = minkowski(crit.cache, crit.density);
  CHECK(rc.critical_degree);
  CHECK(rc.relative_residual < 1e-10);
  CHECK(std::isnan(rc.relative_gap));
}

TEST_CASE("Minkowski test field") {
  CapSetup s = sector_cap(1.0, 1.0, 2.0, 64);
  TestFieldResult tf = minkowski_test_field(s.cache, s.density);
  CHECK(tf.constant_Hf);
  CHECK(tf.Hf_used == doctest::Approx(1.0).epsilon(1e-10));
  // u = n + k + H_f g vanishes identically on a stationary cap.
  for (size_t i = 0; i < tf.values.size(); ++i) {
    if (s.cache.degenerate[i]) continue;
    CHECK(std::abs(tf.values[i]) < 1e-10);
  }

  SolidCone plane = SolidCone::full_sphere(2);
  HomogeneousDensity flat(0.0, DensityProfile::radial());
  GeometryCache ell = geometry(make_ellipsoid(make_vec2(1.6, 0.9), 96), flat, plane);
  TestFieldResult te = minkowski_test_field(ell, flat);
  CHECK(!te.constant_Hf);
}

TEST_CASE("dilation scaling exponents") {
  CapSetup s = sector_cap(1.2, 0.7, 1.0, 48);
  ScalingFit fit =
      scaling_exponents(s.surface, s.density, s.cone, {0.5, 1.0, 2.0, 4.0});
  CHECK(fit.area_slope == doctest::Approx(1.7).epsilon(1e-10));    // n + k
  CHECK(fit.volume_slope == doctest::Approx(2.7).epsilon(1e-10));  // n + k + 1
}

TEST_CASE("quadrature view") {
  CapSetup s = sector_cap(1.2, 1.0, 2.0, 64);
  QuadratureRule rule = quadrature_rule(s.cache);
  CHECK(rule.order == 4);
  CHECK(rule.nodes.size() == rule.weights.size());
  KahanSum unweighted;
  for (double w : rule.weights) unweighted.add(w);
  CHECK(unweighted.value() == doctest::Approx(1.2 * 2.0).epsilon(1e-12));  // arc length

  SolidCone plane = SolidCone::full_sphere(2);
  HomogeneousDensity flat(0.0, DensityProfile::radial());
  GeometryCache mesh = geometry(mesh_cap(plane, 1.0, 256), flat, plane);
  QuadratureRule mrule = quadrature_rule(mesh);
  CHECK(mrule.order == 2);
  KahanSum msum;
  for (double w : mrule.weights) msum.add(w);
  // Inscribed polygon perimeter: approaches 2 pi from below at 2nd order.
  CHECK(msum.value() == doctest::Approx(2 * M_PI).epsilon(1e-3));
}

TEST_CASE("ambient weighted divergence") {
  SolidCone plane = SolidCone::full_sphere(2);
  HomogeneousDensity d(1.5, DensityProfile::radial());
  Vec p = make_vec2(0.8, -0.3);
  // div p + <grad psi, p> = (n+1) + k.
  CHECK(f_divergence(d, plane, position_field(), p) == doctest::Approx(3.5).epsilon(1e-9));
  // Stripping the analytic divergence falls back to finite differences.
  AmbientField fd = position_field();
  fd.divergence = nullptr;
  CHECK(f_divergence(d, plane, fd, p) == doctest::Approx(3.5).epsilon(1e-7));
  CHECK(f_divergence(d, plane, constant_field(make_vec2(1.0, 0.0)), p) ==
        doctest::Approx(d.ambient_jet(plane, p).grad_psi[0]).epsilon(1e-9));
}
