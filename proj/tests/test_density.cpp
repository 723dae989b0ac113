#include <cmath>
#include <functional>

#include "conelab/density.hpp"
#include "conelab/oracles.hpp"
#include "doctest.h"

using namespace conelab;

namespace {

const SolidCone kPlane2 = SolidCone::full_sphere(2);
const SolidCone kQuadrant = SolidCone::planar_sector(M_PI / 2, 0.0);

double kind_check(const std::function<void()>& f, ErrorKind want) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == want ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace

TEST_CASE("evaluation and homogeneity") {
  HomogeneousDensity radial(1.5, DensityProfile::radial());
  Vec p = make_vec2(0.6, -0.8);
  CHECK(radial.evaluate(kPlane2, p) == doctest::Approx(1.0).epsilon(1e-13));
  for (double t : {0.5, 2.0, 37.0}) {
    CHECK(radial.evaluate(kPlane2, (t * p).eval()) ==
          doctest::Approx(std::pow(t, 1.5) * radial.evaluate(kPlane2, p)).epsilon(1e-12));
  }

  // f = x * y^2 realized as a monomial profile of degree 3.
  HomogeneousDensity mono(3.0, DensityProfile::monomial({1, 2}));
  CHECK(mono.evaluate(kQuadrant, make_vec2(2, 3)) == doctest::Approx(18.0).epsilon(1e-12));
  CHECK(kind_check([] { HomogeneousDensity(2.0, DensityProfile::monomial({1, 2})); },
                   ErrorKind::InvalidArgument) == 1.0);

  // f = y^2 via a linear power with k equal to the power.
  HomogeneousDensity lp(2.0, DensityProfile::linear_power(make_vec2(0, 1), 2.0));
  SolidCone upper = SolidCone::half_space(make_vec2(0, 1));
  CHECK(lp.evaluate(upper, make_vec2(3, 4)) == doctest::Approx(16.0).epsilon(1e-12));

  HomogeneousDensity pert(0.5, DensityProfile::perturbed_radial(make_vec2(1, 0), 0.8));
  CHECK(pert.evaluate(kPlane2, make_vec2(2, 0)) ==
        doctest::Approx(std::exp(0.8) * std::sqrt(2.0)).epsilon(1e-12));

  // Vertex: continuous zero for positive degree, singular otherwise.
  Vec origin = Vec::Zero(2);
  CHECK(radial.evaluate(kPlane2, origin) == 0.0);
  HomogeneousDensity neg(-1.0, DensityProfile::radial());
  CHECK(kind_check([&] { neg.evaluate(kPlane2, origin); }, ErrorKind::VertexSingular) == 1.0);
  HomogeneousDensity flat(0.0, DensityProfile::radial());
  CHECK(kind_check([&] { flat.evaluate(kPlane2, origin); }, ErrorKind::VertexSingular) == 1.0);

  CHECK(kind_check([&] { mono.evaluate(kQuadrant, make_vec2(-1, 1)); }, ErrorKind::OutsideCone) ==
        1.0);
}

TEST_CASE("ambient log-density jet matches raw finite differences") {
  struct Case {
    HomogeneousDensity density;
    SolidCone cone;
    Vec p;
  };
  std::vector<Case> cases;
  cases.push_back({HomogeneousDensity(1.3, DensityProfile::perturbed_radial(make_vec2(0.3, 0.7), 0.8)),
                   kPlane2, make_vec2(1.2, 0.5)});
  cases.push_back({HomogeneousDensity(3.0, DensityProfile::monomial({1, 2})), kQuadrant,
                   make_vec2(0.9, 1.4)});
  cases.push_back({HomogeneousDensity(2.5, DensityProfile::linear_power(make_vec3(0, 0, 1), 1.5)),
                   SolidCone::circular(make_vec3(0, 0, 1), 0.9), make_vec3(0.2, 0.1, 1.0)});

  for (const Case& c : cases) {
    AmbientJet jet = c.density.ambient_jet(c.cone, c.p);
    CHECK(jet.f_value == doctest::Approx(c.density.evaluate(c.cone, c.p)).epsilon(1e-12));
    // Euler's relation for a k-homogeneous density.
    CHECK(jet.grad_psi.dot(c.p) == doctest::Approx(c.density.degree()).epsilon(1e-11));

    auto psi = [&](const Vec& x) { return std::log(c.density.evaluate(c.cone, x)); };
    oracle::FdJet fd = oracle::fd_jet(psi, c.p, 1e-3);
    CHECK((jet.grad_psi - fd.grad).norm() < 1e-8);
    CHECK((jet.hess_psi - fd.hess).norm() < 1e-6);

    // Degree -2 scaling of the Hessian under dilations.
    AmbientJet scaled = c.density.ambient_jet(c.cone, (2.0 * c.p).eval());
    CHECK((scaled.hess_psi - 0.25 * jet.hess_psi).norm() < 1e-12);
  }
}

TEST_CASE("radial Bakry-Emery tensor in closed form") {
  double k = 1.7, r = 2.5;
  HomogeneousDensity density(k, DensityProfile::radial());
  Vec q = make_vec2(std::cos(0.4), std::sin(0.4));
  Vec p = r * q;
  Vec t = rotate90(q);
  CHECK(density.ric_f(kPlane2, p, q) == doctest::Approx(k / (r * r)).epsilon(1e-12));
  CHECK(density.ric_f(kPlane2, p, t) == doctest::Approx(-k / (r * r)).epsilon(1e-12));
  // The k-refined tensor vanishes along rays and keeps the tangent value.
  CHECK(density.ric_f_k(kPlane2, p, q) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(density.ric_f_k(kPlane2, p, t) == doctest::Approx(-k / (r * r)).epsilon(1e-12));

  HomogeneousDensity flat(0.0, DensityProfile::radial());
  CHECK(flat.ric_f(kPlane2, p, q) == doctest::Approx(0.0));
  CHECK(kind_check([&] { flat.ric_f_k(kPlane2, p, q); }, ErrorKind::DegreeZero) == 1.0);
}

TEST_CASE("expression profiles match their closed-form twins") {
  // 2D: eta = exp(0.5 cos(theta)) is the perturbed-radial profile in the +x
  // direction; theta is the polar angle.
  HomogeneousDensity closed2(1.0, DensityProfile::perturbed_radial(make_vec2(1, 0), 0.5));
  HomogeneousDensity expr2(1.0, DensityProfile::expression("exp(0.5*cos(theta))", 2));
  for (double a : {0.1, 1.0, 2.7, -2.0}) {
    Vec p = 1.7 * make_vec2(std::cos(a), std::sin(a));
    CHECK(expr2.evaluate(kPlane2, p) ==
          doctest::Approx(closed2.evaluate(kPlane2, p)).epsilon(1e-12));
    AmbientJet je = expr2.ambient_jet(kPlane2, p);
    AmbientJet jc = closed2.ambient_jet(kPlane2, p);
    CHECK((je.grad_psi - jc.grad_psi).norm() < 1e-9);
    CHECK((je.hess_psi - jc.hess_psi).norm() < 1e-6);
  }

  // 3D: cos(theta) is the z-coordinate of the unit vector (theta = colatitude).
  SolidCone space = SolidCone::full_sphere(3);
  HomogeneousDensity closed3(2.0, DensityProfile::perturbed_radial(make_vec3(0, 0, 1), 0.3));
  HomogeneousDensity expr3(2.0, DensityProfile::expression("exp(0.3*cos(theta))", 3));
  Vec p3 = make_vec3(0.7, -0.4, 1.1);
  CHECK(expr3.evaluate(space, p3) == doctest::Approx(closed3.evaluate(space, p3)).epsilon(1e-12));
  AmbientJet je3 = expr3.ambient_jet(space, p3);
  AmbientJet jc3 = closed3.ambient_jet(space, p3);
  CHECK((je3.grad_psi - jc3.grad_psi).norm() < 1e-9);
  CHECK((je3.hess_psi - jc3.hess_psi).norm() < 1e-6);
}

TEST_CASE("stencil spherical jets reproduce the analytic families") {
  DensityProfile lp = DensityProfile::linear_power(make_vec3(0.2, 0.1, 1.0), 1.5);
  Vec q = make_vec3(0.3, -0.2, 1.0).normalized();
  SphereJet an = lp.sphere_jet(q, DerivativeMode::Analytic, 1e-4);
  SphereJet fd = lp.sphere_jet(q, DerivativeMode::FiniteDifference, 1e-4);
  CHECK(an.mu == doctest::Approx(fd.mu).epsilon(1e-13));
  CHECK((an.grad - fd.grad).norm() < 1e-9);
  CHECK((an.hess - fd.hess).norm() < 1e-6);
  // Intrinsic objects live in the tangent space at q.
  CHECK(std::abs(an.grad.dot(q)) < 1e-12);
  CHECK((an.hess * q).norm() < 1e-12);

  DensityProfile mono = DensityProfile::monomial({1, 2});
  Vec q2 = make_vec2(std::cos(0.7), std::sin(0.7));
  SphereJet an2 = mono.sphere_jet(q2, DerivativeMode::Analytic, 1e-4);
  SphereJet fd2 = mono.sphere_jet(q2, DerivativeMode::FiniteDifference, 1e-4);
  CHECK((an2.grad - fd2.grad).norm() < 1e-9);
  CHECK((an2.hess - fd2.hess).norm() < 1e-6);
}

TEST_CASE("tangent frames are orthonormal") {
  Vec q = make_vec3(0.48, -0.6, 0.64).normalized();
  auto frame = tangent_frame(q);
  REQUIRE(frame.size() == 2);
  CHECK(std::abs(frame[0].dot(q)) < 1e-14);
  CHECK(std::abs(frame[1].dot(q)) < 1e-14);
  CHECK(std::abs(frame[0].dot(frame[1])) < 1e-14);
  CHECK(frame[0].norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(frame[1].norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("curvature-dimension certification") {
  SampleSpec spec;

  // Shrinking radial densities satisfy CD(0, n+1+k); the minimum of the
  // refined tensor is attained along rays and equals zero.
  HomogeneousDensity shrink(-1.5, DensityProfile::radial());
  CurvatureReport r1 = shrink.certify_cd(kPlane2, spec);
  CHECK(r1.cd_certified);
  CHECK(r1.methods_agree);
  CHECK(std::abs(r1.min_ric_f_k) < 1e-9);

  // Growing radial densities on the full space fail: tangent directions see
  // -k/r^2 < 0.
  HomogeneousDensity grow(2.0, DensityProfile::radial());
  CurvatureReport r2 = grow.certify_cd(SolidCone::full_sphere(3), spec);
  CHECK(!r2.cd_certified);
  CHECK(r2.methods_agree);
  CHECK(r2.min_ric_f_k == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(r2.witness.value == doctest::Approx(r2.min_ric_f_k));

  // A pure power of a linear form is the equality case: Ric_f^k = 0.
  HomogeneousDensity wall(1.5, DensityProfile::linear_power(make_vec2(0, 1), 1.5));
  CurvatureReport r3 = wall.certify_cd(SolidCone::half_space(make_vec2(0, 1)), spec);
  CHECK(r3.cd_certified);
  CHECK(r3.methods_agree);
  CHECK(std::abs(r3.min_ric_f_k) < 1e-9);

  HomogeneousDensity mono(2.0, DensityProfile::monomial({1, 1}));
  CurvatureReport r4 = mono.certify_cd(kQuadrant, spec);
  CHECK(r4.cd_certified);
  CHECK(r4.methods_agree);

  HomogeneousDensity flat(0.0, DensityProfile::radial());
  CHECK(kind_check([&] { flat.certify_cd(kPlane2, spec); }, ErrorKind::DegreeZero) == 1.0);
}

TEST_CASE("k-th root Hessian identity") {
  HomogeneousDensity radial(2.0, DensityProfile::radial());
  CHECK(radial.root_hessian_residual(kPlane2, make_vec2(1.1, 0.4)) < 1e-5);

  HomogeneousDensity wall(1.5, DensityProfile::linear_power(make_vec2(0, 1), 1.5));
  CHECK(wall.root_hessian_residual(SolidCone::half_space(make_vec2(0, 1)), make_vec2(0.3, 1.2)) <
        1e-5);

  HomogeneousDensity mono(3.0, DensityProfile::monomial({1, 2}));
  CHECK(mono.root_hessian_residual(kQuadrant, make_vec2(1.0, 1.3)) < 1e-5);

  HomogeneousDensity flat(0.0, DensityProfile::radial());
  CHECK(kind_check([&] { flat.root_hessian_residual(kPlane2, make_vec2(1, 0)); },
                   ErrorKind::DegreeZero) == 1.0);
}
