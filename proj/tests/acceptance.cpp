// Acceptance gate for the laboratory: ten end-to-end criteria with pinned
// tolerances, one pass/fail line each. Exits nonzero if any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conelab/oracles.hpp"
#include "conelab/stability.hpp"

using namespace conelab;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string num(double x) {
  std::ostringstream o;
  o.precision(6);
  o << x;
  return o.str();
}

ScalarField smooth_field(const GeometryCache& cache, std::uint64_t seed) {
  Rng rng(seed);
  ScalarField u(cache.position.size(), 0.0);
  for (int w = 0; w < 3; ++w) {
    double angle = rng.uniform(0.0, 2 * M_PI);
    double freq = rng.uniform(0.5, 2.0);
    double phase = rng.uniform(0.0, 2 * M_PI);
    double amp = rng.uniform(0.3, 1.0);
    Vec dir = cache.ambient_dim == 2
                  ? make_vec2(std::cos(angle), std::sin(angle))
                  : make_vec3(std::cos(angle), std::sin(angle), rng.uniform(-1.0, 1.0))
                        .normalized();
    for (size_t i = 0; i < u.size(); ++i) {
      u[i] += amp * std::cos(freq * dir.dot(cache.position[i]) + phase);
    }
  }
  return u;
}

ScalarField mean_zero(const GeometryCache& cache, ScalarField u) {
  KahanSum numer, denom;
  for (size_t i = 0; i < u.size(); ++i) {
    if (cache.degenerate[i]) continue;
    double w = cache.da_weight[i] * cache.f[i];
    numer.add(w * u[i]);
    denom.add(w);
  }
  double mean = numer.value() / denom.value();
  for (double& v : u) v -= mean;
  return u;
}

// 1. Caps carry constant weighted mean curvature (n+k)/r and satisfy the
//    weighted Minkowski identity across degrees, radii, and cone shapes.
void cap_closed_forms() {
  const double tol_hf = 1e-8;   // pointwise |H_f - (n+k)/r|
  const double tol_int = 1e-8;  // residual and gap, relative to the area
  const double ks[] = {-4.0, -3.0, -1.0, 0.0, 1.0, 2.0};
  const double rs[] = {0.5, 1.0, 2.0};
  for (int n : {1, 2}) {
    std::vector<SolidCone> cones;
    if (n == 1) {
      cones.push_back(SolidCone::full_sphere(2));
      cones.push_back(SolidCone::planar_sector(1.2, 0.3));
    } else {
      cones.push_back(SolidCone::full_sphere(3));
      cones.push_back(SolidCone::circular(make_vec3(0, 0, 1), 0.8));
    }
    for (const SolidCone& cone : cones) {
      for (double k : ks) {
        if (std::abs(k + n + 1.0) < 1e-12) continue;  // oriented volume undefined
        HomogeneousDensity density(k, DensityProfile::radial());
        for (double r : rs) {
          std::string tag = " (n=" + std::to_string(n) + ", k=" + num(k) + ", r=" + num(r) + ")";
          DiscreteHypersurface cap = make_cap(cone, r, 128);
          GeometryCache g = geometry(cap, density, cone);
          double expected = (n + k) / r;
          double worst = 0.0;
          for (size_t i = 0; i < g.Hf.size(); ++i) {
            if (g.degenerate[i]) continue;
            worst = std::max(worst, std::abs(g.Hf[i] - expected));
          }
          check(worst <= tol_hf, "H_f off by " + num(worst) + tag);
          MinkowskiReport m = minkowski(g, density, default_stationarity_tol(g));
          check(m.residual_integral <= tol_int * m.area,
                "Minkowski residual " + num(m.residual_integral) + tag);
          check(std::abs(m.identity_gap) <= tol_int * m.area,
                "identity gap " + num(m.identity_gap) + tag);
        }
      }
    }
  }
}

// 2. Weighted area and oriented volume scale as r^(n+k) and r^(n+k+1).
void dilation_scaling() {
  const double tol = 1e-6;
  struct Case {
    SolidCone cone;
    double k;
    int n;
    int res;
  };
  std::vector<Case> cases;
  cases.push_back({SolidCone::planar_sector(1.2, 0.3), 0.7, 1, 96});
  cases.push_back({SolidCone::circular(make_vec3(0, 0, 1), 0.8), -1.3, 2, 48});
  for (const Case& c : cases) {
    HomogeneousDensity density(c.k, DensityProfile::radial());
    DiscreteHypersurface base = make_cap(c.cone, 1.0, c.res);
    std::vector<double> lt, la, lv;
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      GeometryCache g = geometry(base.dilated(t), density, c.cone);
      lt.push_back(std::log(t));
      la.push_back(std::log(weighted_area(g)));
      lv.push_back(std::log(oriented_volume(g, density)));
    }
    double sa = fit_slope(lt, la);
    double sv = fit_slope(lt, lv);
    check(std::abs(sa - (c.n + c.k)) <= tol, "area slope " + num(sa) + " for k=" + num(c.k));
    check(std::abs(sv - (c.n + c.k + 1.0)) <= tol,
          "volume slope " + num(sv) + " for k=" + num(c.k));
  }
}

// 3. On the full circle the mean-zero spectral bottom is -k/r^2; the bottom of
//    the unconstrained spectrum changes sign at k = -1. FEM backend, >= 512 dofs.
void circle_spectrum_fem() {
  const double rel = 0.02;  // eigenvalue tolerance, relative
  const double dk = 0.05;   // bisection tolerance on the sign change
  SolidCone plane = SolidCone::full_sphere(2);
  DiscreteHypersurface mesh = mesh_cap(plane, 1.0, 512);
  check(mesh.sample_count() >= 512, "mesh too small");
  for (double k : {-3.0, -1.0, 1.0, 2.0}) {
    HomogeneousDensity density(k, DensityProfile::radial());
    WeightedOperators ops = assemble(mesh, density, plane);
    double lmz = stability_spectrum(ops, SpectrumMode::MeanZero).lambda_min;
    check(std::abs(lmz + k) <= rel * std::abs(k),
          "lambda_mz(k=" + num(k) + ") = " + num(lmz));
  }
  auto lambda_all = [&](double k) {
    HomogeneousDensity density(k, DensityProfile::radial());
    WeightedOperators ops = assemble(mesh, density, plane);
    return stability_spectrum(ops, SpectrumMode::All).lambda_min;
  };
  double lo = -1.4, hi = -0.6;
  check(lambda_all(lo) > 0.0 && lambda_all(hi) < 0.0, "sign change not bracketed");
  while (hi - lo > 2 * dk) {
    double mid = 0.5 * (lo + hi);
    (lambda_all(mid) > 0.0 ? lo : hi) = mid;
  }
  double root = 0.5 * (lo + hi);
  check(std::abs(root + 1.0) <= dk, "sign change located at k=" + num(root));
}

// 4. The discrete f-Jacobi action annihilates the support identity on caps and
//    the index form is symmetric.
void jacobi_and_symmetry() {
  const double tol_sym = 1e-6;
  SolidCone sector = SolidCone::planar_sector(1.2, 0.3);
  HomogeneousDensity density(1.0, DensityProfile::radial());
  DiscreteHypersurface cap = make_cap(sector, 2.0, 96);
  WeightedOperators ops = assemble(cap, density, sector);
  ScalarField g(ops.cache.support);
  ScalarField lg = jacobi_apply(ops, g);
  double bound = 10 * ops.cache.h_disc * ops.cache.h_disc;
  for (size_t i = 0; i < lg.size(); ++i) {
    if (ops.cache.degenerate[i]) continue;
    check(std::abs(lg[i] + ops.cache.Hf[i]) <= bound,
          "support identity residual " + num(std::abs(lg[i] + ops.cache.Hf[i])));
  }

  SolidCone circ = SolidCone::circular(make_vec3(0, 0, 1), 0.8);
  HomogeneousDensity d3(0.5, DensityProfile::radial());
  DiscreteHypersurface cap3 = make_cap(circ, 1.5, 32);
  WeightedOperators ops3 = assemble(cap3, d3, circ);
  ScalarField g3(ops3.cache.support);
  ScalarField lg3 = jacobi_apply(ops3, g3);
  double bound3 = 10 * ops3.cache.h_disc * ops3.cache.h_disc;
  for (size_t i = 0; i < lg3.size(); ++i) {
    if (ops3.cache.degenerate[i]) continue;
    check(std::abs(lg3[i] + ops3.cache.Hf[i]) <= bound3, "3d support identity residual");
  }

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ScalarField u = smooth_field(ops.cache, 2 * seed);
    ScalarField v = smooth_field(ops.cache, 2 * seed + 1);
    double uv = index_form(ops, u, v);
    double vu = index_form(ops, v, u);
    check(std::abs(uv - vu) <= tol_sym * (1.0 + std::abs(uv)),
          "index form asymmetry " + num(std::abs(uv - vu)));
  }
}

// 5. The stencil second variation of A_f - Hf_mean * V_f matches the index
//    form within 1% for mean-zero normal speeds on a stationary cap.
void second_variation_matches() {
  const double rel = 0.01;
  SolidCone sector = SolidCone::planar_sector(1.2, 0.3);
  HomogeneousDensity density(0.7, DensityProfile::radial());
  DiscreteHypersurface cap = make_cap(sector, 2.0, 48);
  GeometryCache g = geometry(cap, density, sector);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Variation var;
    var.kind = Variation::Kind::Normal;
    var.u = mean_zero(g, smooth_field(g, seed));
    VariationDiagnostics d = run_variation(cap, density, sector, var);
    check(d.richardson_ok, "richardson check failed at seed " + std::to_string(seed));
    check(std::abs(d.second_combined - d.index_form_value) <=
              rel * (1.0 + std::abs(d.index_form_value)),
          "second variation " + num(d.second_combined) + " vs index form " +
              num(d.index_form_value) + " at seed " + std::to_string(seed));
  }
}

// 6. The rescaled parallel flow preserves weighted volume along the sphere
//    through the origin (the self-shrinking configuration at k = 1, n = 2).
void rescaled_parallel_soliton() {
  HomogeneousDensity density(1.0, DensityProfile::radial());
  SolidCone space = SolidCone::full_sphere(3);
  DiscreteHypersurface sph = make_sphere_through_origin(make_vec3(0, 0, 1), 24);
  RescaledParallelReport rp = rescaled_parallel(sph, density, space);
  check(rp.stationary, "surface not recognized as stationary");
  check(rp.volume_drift <= 1e-8, "volume drift " + num(rp.volume_drift));
  check(rp.velocity_error <= 1e-4, "velocity error " + num(rp.velocity_error));
}

// 7. Curvature-dimension certification: exact equality case, certifying
//    families, and a certified failure.
void cd_certification() {
  const double tol = 1e-9;
  SampleSpec spec;

  SolidCone half = SolidCone::half_space(make_vec2(0, 1));
  HomogeneousDensity lp(1.5, DensityProfile::linear_power(make_vec2(0, 1), 1.5));
  CurvatureReport c1 = lp.certify_cd(half, spec);
  check(c1.cd_certified, "linear power density not certified");
  check(std::abs(c1.min_ric_f_k) <= tol, "equality case min " + num(c1.min_ric_f_k));

  HomogeneousDensity shrink(-1.5, DensityProfile::radial());
  CurvatureReport c2 = shrink.certify_cd(SolidCone::full_sphere(2), spec);
  check(c2.cd_certified, "radial k<0 not certified");

  HomogeneousDensity mono(2.0, DensityProfile::monomial({1.0, 1.0}));
  CurvatureReport c3 = mono.certify_cd(SolidCone::planar_sector(M_PI / 2, 0.0), spec);
  check(c3.cd_certified, "monomial on its quadrant not certified");

  HomogeneousDensity grow(2.0, DensityProfile::radial());
  CurvatureReport c4 = grow.certify_cd(SolidCone::full_sphere(3), spec);
  check(!c4.cd_certified, "radial k>0 must fail on the full space");
  check(c4.min_ric_f_k < -1e-3, "violation witness too small");
}

// 8. The umbilicity gap vanishes on caps and is detected on an off-center
//    circle under a linear density (imported as a polyline, not a chart).
void umbilicity_gap_detection() {
  SolidCone sector = SolidCone::planar_sector(1.2, 0.3);
  HomogeneousDensity radial(1.0, DensityProfile::radial());
  DiscreteHypersurface cap = make_cap(sector, 2.0, 96);
  UmbilicityReport ur = umbilicity_gap(cap, radial, sector);
  check(ur.max_gap <= 1e-8, "cap gap " + num(ur.max_gap));

  // Circle |p - (2,0)| = 0.5 under f = <(1,0), p>: not a cap, genuine gap
  // (closed form 1.28 at the far point (2.5, 0)).
  std::string path = "/tmp/conelab_accept_circle_" + std::to_string(::getpid()) + ".csv";
  {
    std::ofstream out(path);
    out << "x,y\n";
    const int m = 256;
    for (int i = 0; i <= m; ++i) {
      double t = 2 * M_PI * i / m;
      out << (2.0 + 0.5 * std::cos(t)) << ',' << (0.5 * std::sin(t)) << '\n';
    }
  }
  DiscreteHypersurface circle = import_polyline_csv(path);
  std::filesystem::remove(path);
  SolidCone halfx = SolidCone::half_space(make_vec2(1, 0));
  HomogeneousDensity linear(1.0, DensityProfile::linear_power(make_vec2(1, 0), 1.0));
  UmbilicityReport ue = umbilicity_gap(circle, linear, halfx);
  check(ue.max_gap >= 1e-3, "off-center gap not detected, max " + num(ue.max_gap));
}

// 9. Cutoff energies around the vertex decay with exponent n + k - 2.
void cutoff_decay_rate() {
  const double tol = 0.1;
  SolidCone space = SolidCone::full_sphere(3);
  DiscreteHypersurface sph = make_sphere_through_origin(make_vec3(0, 0, 1), 24);
  for (double k : {1.0, 2.0}) {
    HomogeneousDensity density(k, DensityProfile::radial());
    CutoffDecay cd = cutoff_energy_decay(sph, density, space, {0.4, 0.2, 0.1, 0.05});
    check(cd.expected == k, "expected exponent mismatch");  // n + k - 2 with n = 2
    check(cd.monotone, "cutoff energies not monotone for k=" + num(k));
    check(std::abs(cd.slope - cd.expected) <= tol,
          "decay slope " + num(cd.slope) + " for k=" + num(k));
  }
}

// 10. Degree window endpoint k = -n: caps are degenerate-stationary and
//     strongly stable. At k = 0, constants witness instability on convex cones.
void window_endpoints() {
  for (int n : {1, 2}) {
    SolidCone cone = SolidCone::full_sphere(n + 1);
    HomogeneousDensity density(-double(n), DensityProfile::radial());
    DiscreteHypersurface cap = make_cap(cone, 1.0, n == 1 ? 64 : 24);
    StabilityReport rep = stability_report(cap, density, cone);
    check(std::abs(rep.Hf_mean) <= rep.tol_stationary,
          "H_f mean " + num(rep.Hf_mean) + " at k=-" + std::to_string(n));
    check(rep.strongly_f_stable, "not strongly stable at k=-" + std::to_string(n));
  }

  struct Convex {
    SolidCone cone;
    int n;
    double r;
    int res;
  };
  std::vector<Convex> cases;
  cases.push_back({SolidCone::planar_sector(1.2, 0.3), 1, 1.5, 96});
  cases.push_back({SolidCone::circular(make_vec3(0, 0, 1), 0.8), 2, 1.0, 32});
  for (const Convex& c : cases) {
    HomogeneousDensity flat(0.0, DensityProfile::radial());
    DiscreteHypersurface cap = make_cap(c.cone, c.r, c.res);
    WeightedOperators ops = assemble(cap, flat, c.cone);
    ScalarField ones(static_cast<size_t>(cap.sample_count()), 1.0);
    double I = index_form(ops, ones);
    double area = weighted_area(ops.cache);
    double bound = -0.9 * (c.n / (c.r * c.r)) * area;
    check(I <= bound, "I(1,1) = " + num(I) + " above " + num(bound));
  }
}

struct Criterion {
  const char* label;
  double budget_s;
  void (*fn)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"cap closed forms across densities and cones", 10.0, cap_closed_forms},
      {"dilation scaling exponents", 1.0, dilation_scaling},
      {"full-circle spectrum on the fem backend", 30.0, circle_spectrum_fem},
      {"jacobi action and index-form symmetry", 30.0, jacobi_and_symmetry},
      {"second variation matches the index form", 60.0, second_variation_matches},
      {"rescaled parallel flow through the vertex", 30.0, rescaled_parallel_soliton},
      {"curvature-dimension certification", 10.0, cd_certification},
      {"umbilicity gap detection", 10.0, umbilicity_gap_detection},
      {"cutoff energy decay exponents", 30.0, cutoff_decay_rate},
      {"degree window endpoints and convex cones", 30.0, window_endpoints},
  };

  int failed = 0;
  int id = 0;
  for (const Criterion& c : criteria) {
    ++id;
    auto t0 = std::chrono::steady_clock::now();
    std::string verdict = "PASS";
    std::string detail;
    try {
      c.fn();
    } catch (const std::exception& e) {
      verdict = "FAIL";
      detail = e.what();
      ++failed;
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (verdict == "PASS" && dt > c.budget_s) {
      verdict = "FAIL";
      detail = "exceeded the " + num(c.budget_s) + "s budget";
      ++failed;
    }
    std::printf("%s %2d/10 %-45s (%.2fs)%s%s\n", verdict.c_str(), id, c.label, dt,
                detail.empty() ? "" : ": ", detail.c_str());
  }
  std::printf("acceptance: %d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
