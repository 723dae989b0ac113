#include "conelab/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace conelab::oracle {

const char* method_name(Method m) {
  switch (m) {
    case Method::ClosedForm: return "closed_form";
    case Method::PolarQuadrature: return "polar_quadrature";
    case Method::FourierModes: return "fourier_modes";
    case Method::FiniteDifference: return "finite_difference";
  }
  return "unknown";
}

FdJet fd_jet(const std::function<double(const Vec&)>& fun, const Vec& p, double h) {
  if (!(h > 0)) fail(ErrorKind::InvalidArgument, "fd_jet needs a positive step");
  int dim = static_cast<int>(p.size());
  FdJet jet;
  jet.value = fun(p);
  jet.grad = Vec::Zero(dim);
  jet.hess = Mat::Zero(dim, dim);

  auto shift = [&](int a, int sa, int b, int sb) {
    Vec x = p;
    x[a] += sa * h;
    if (b >= 0) x[b] += sb * h;
    return fun(x);
  };

  for (int a = 0; a < dim; ++a) {
    jet.grad[a] = (-shift(a, 2, -1, 0) + 8 * shift(a, 1, -1, 0) - 8 * shift(a, -1, -1, 0) +
                   shift(a, -2, -1, 0)) /
                  (12 * h);
    jet.hess(a, a) = (-shift(a, 2, -1, 0) + 16 * shift(a, 1, -1, 0) - 30 * jet.value +
                      16 * shift(a, -1, -1, 0) - shift(a, -2, -1, 0)) /
                     (12 * h * h);
  }
  // Mixed entries: compose two 4th-order first-derivative stencils.
  const int off[4] = {-2, -1, 1, 2};
  const double cf[4] = {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12};
  for (int a = 0; a < dim; ++a) {
    for (int b = a + 1; b < dim; ++b) {
      double acc = 0;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          acc += cf[i] * cf[j] * shift(a, off[i], b, off[j]);
        }
      }
      acc /= h * h;
      jet.hess(a, b) = acc;
      jet.hess(b, a) = acc;
    }
  }
  return jet;
}

double region_measure(const SolidCone& cone) {
  if (cone.ambient_dim() == 2) {
    switch (cone.region()) {
      case ConeRegion::FullSphere: return 2 * M_PI;
      case ConeRegion::HalfSpace: return M_PI;
      case ConeRegion::PlanarSector: return cone.sector_angle();
      default: break;
    }
  } else {
    switch (cone.region()) {
      case ConeRegion::FullSphere: return 4 * M_PI;
      case ConeRegion::HalfSpace: return 2 * M_PI;
      case ConeRegion::Circular: return 2 * M_PI * (1 - std::cos(cone.half_aperture()));
      default: break;
    }
  }
  fail(ErrorKind::InvalidArgument, "unsupported region");
}

CapReference cap_reference(int n, double k, double r, const SolidCone& cone,
                           bool require_spectrum) {
  if (n < 1 || n > 2) fail(ErrorKind::InvalidArgument, "surface dimension must be 1 or 2");
  if (cone.ambient_dim() != n + 1) fail(ErrorKind::InvalidArgument, "cone dimension mismatch");
  if (!(r > 0)) fail(ErrorKind::InvalidArgument, "radius must be positive");

  CapReference ref;
  ref.Hf = (n + k) / r;
  ref.potential = (n + k) / (r * r);
  ref.area_formula_check = region_measure(cone) * std::pow(r, n + k);

  bool separable = cone.region() == ConeRegion::FullSphere ||
                   (n == 1 && cone.region() == ConeRegion::HalfSpace);
  if (separable) {
    // Harmonic modes on the sphere (or Neumann cosine modes on the half
    // circle) both give -Delta eigenvalues l(l+n-1)/r^2; every mode above
    // l = 0 integrates to zero.
    double best_all = std::numeric_limits<double>::infinity();
    double best_mz = std::numeric_limits<double>::infinity();
    for (int l = 0; l <= 64; ++l) {
      double lam = (l * (l + n - 1.0) - (n + k)) / (r * r);
      best_all = std::min(best_all, lam);
      if (l >= 1) best_mz = std::min(best_mz, lam);
    }
    ref.min_eigen_all = best_all;
    ref.min_eigen_meanzero = best_mz;
    ref.has_spectrum = true;
  } else if (require_spectrum) {
    fail(ErrorKind::NoSpectralReference,
         "spectral reference needs separable harmonics (full sphere, full circle, or half "
         "circle on a half plane)");
  }

  ref.record.name = "cap_reference";
  ref.record.method = ref.has_spectrum ? Method::FourierModes : Method::ClosedForm;
  ref.record.detail = ref.has_spectrum ? "modes l <= 64; closed forms for H_f, area, potential"
                                       : "closed forms; no separable spectral basis";
  ref.record.values = {{"H_f", ref.Hf},
                       {"area_formula_check", ref.area_formula_check},
                       {"potential", ref.potential}};
  if (ref.has_spectrum) {
    ref.record.values.emplace_back("min_eigen_all", ref.min_eigen_all);
    ref.record.values.emplace_back("min_eigen_meanzero", ref.min_eigen_meanzero);
  }
  return ref;
}

RadialIntegrals radial_integrals(int n, double k, double r) {
  if (n < 1 || n > 2) fail(ErrorKind::InvalidArgument, "surface dimension must be 1 or 2");
  if (!(r > 0)) fail(ErrorKind::InvalidArgument, "radius must be positive");
  if (std::abs(n + k + 1.0) < 1e-12) {
    fail(ErrorKind::CriticalDegree, "oriented volume undefined at degree k = -(n+1)");
  }
  RadialIntegrals out;
  double sphere = n == 1 ? 2 * M_PI : 4 * M_PI;
  out.circle_area = sphere * std::pow(r, n + k);
  out.oriented_volume = out.circle_area * r / (n + k + 1.0);
  out.record.name = "radial_integrals";
  out.record.method = Method::ClosedForm;
  out.record.values = {{"circle_area", out.circle_area},
                       {"oriented_volume", out.oriented_volume}};
  return out;
}

RadialIntegrals radial_integrals(int n, double k, double r, const SolidCone& cone) {
  RadialIntegrals out = radial_integrals(n, k, r);
  double sphere = n == 1 ? 2 * M_PI : 4 * M_PI;
  double fraction = region_measure(cone) / sphere;
  out.circle_area *= fraction;
  out.oriented_volume *= fraction;
  out.record.values = {{"circle_area", out.circle_area},
                       {"oriented_volume", out.oriented_volume}};
  return out;
}

namespace {

// Composite Simpson weights on [a, b] with an even interval count.
std::vector<double> simpson_weights(double a, double b, int intervals) {
  int m = std::max(4, intervals);
  if (m % 2) ++m;
  double h = (b - a) / m;
  std::vector<double> w(static_cast<size_t>(m) + 1, 0.0);
  for (int i = 0; i <= m; ++i) {
    double c = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    w[static_cast<size_t>(i)] = c * h / 3.0;
  }
  return w;
}

std::vector<double> simpson_nodes(double a, double b, int count) {
  std::vector<double> x(static_cast<size_t>(count));
  double h = (b - a) / (count - 1);
  for (int i = 0; i < count; ++i) x[static_cast<size_t>(i)] = a + i * h;
  x.back() = b;
  return x;
}

Vec orthogonal_unit(const Vec& a) {
  int smallest = 0;
  for (int i = 1; i < a.size(); ++i) {
    if (std::abs(a[i]) < std::abs(a[smallest])) smallest = i;
  }
  Vec e = Vec::Zero(a.size());
  e[smallest] = 1.0;
  e -= e.dot(a) * a;
  return e.normalized();
}

void finalize_series(StencilSeries& s, const std::vector<double>& dt) {
  size_t m = s.estimate.size();
  if (m < 2) return;
  double rho = dt[m - 2] / dt[m - 1];
  s.extrapolated = (rho * rho * s.estimate[m - 1] - s.estimate[m - 2]) / (rho * rho - 1.0);
  if (m >= 3) {
    double num = std::abs(s.estimate[m - 3] - s.estimate[m - 2]);
    double den = std::abs(s.estimate[m - 2] - s.estimate[m - 1]);
    double floor = 1e-11 * (1.0 + std::abs(s.estimate[m - 1]));
    if (den <= floor && num <= floor * rho * rho) {
      s.ratio = rho * rho;  // converged past the stencil's resolution
      s.reliable = true;
    } else if (den <= floor) {
      s.ratio = std::numeric_limits<double>::infinity();
      s.reliable = true;
    } else {
      s.ratio = num / den;
      s.reliable = s.ratio >= 3.5;
    }
  }
}

struct FunctionalSamples {
  double area = 0.0;
  double volume = 0.0;
};

BruteVariation run_brute(const DiscreteHypersurface& surface, const HomogeneousDensity& density,
                         const SolidCone& cone, const std::vector<double>& dt_list,
                         const std::function<DiscreteHypersurface(double)>& deform,
                         const char* label) {
  if (dt_list.size() < 2) fail(ErrorKind::InvalidArgument, "need at least two step sizes");
  BruteVariation out;
  out.dt = dt_list;
  std::sort(out.dt.begin(), out.dt.end(), std::greater<double>());
  for (double t : out.dt) {
    if (!(t > 0)) fail(ErrorKind::InvalidArgument, "step sizes must be positive");
  }

  GeometryCache base = geometry(surface, density, cone);
  out.volume_defined = std::abs(base.n + density.degree() + 1.0) > 1e-12;
  double nan = std::numeric_limits<double>::quiet_NaN();
  FunctionalSamples f0;
  f0.area = weighted_area(base);
  f0.volume = out.volume_defined ? oriented_volume(base, density) : nan;

  auto eval = [&](double t) {
    DiscreteHypersurface moved = deform(t);
    GeometryCache g = geometry(moved, density, cone);
    FunctionalSamples f;
    f.area = weighted_area(g);
    f.volume = out.volume_defined ? oriented_volume(g, density) : nan;
    return f;
  };

  for (double h : out.dt) {
    FunctionalSamples fp = eval(h);
    FunctionalSamples fm = eval(-h);
    out.area_first.estimate.push_back((fp.area - fm.area) / (2 * h));
    out.area_second.estimate.push_back((fp.area - 2 * f0.area + fm.area) / (h * h));
    out.volume_first.estimate.push_back((fp.volume - fm.volume) / (2 * h));
    out.volume_second.estimate.push_back((fp.volume - 2 * f0.volume + fm.volume) / (h * h));
  }
  finalize_series(out.area_first, out.dt);
  finalize_series(out.area_second, out.dt);
  if (out.volume_defined) {
    finalize_series(out.volume_first, out.dt);
    finalize_series(out.volume_second, out.dt);
  } else {
    out.volume_first.reliable = false;
    out.volume_second.reliable = false;
  }

  out.record.name = label;
  out.record.method = Method::FiniteDifference;
  std::ostringstream detail;
  detail << "central 3-point stencils, steps";
  for (double h : out.dt) detail << ' ' << h;
  out.record.detail = detail.str();
  out.record.values = {{"area_first", out.area_first.extrapolated},
                       {"volume_first", out.volume_first.extrapolated},
                       {"area_second", out.area_second.extrapolated},
                       {"volume_second", out.volume_second.extrapolated},
                       {"area_first_ratio", out.area_first.ratio},
                       {"volume_first_ratio", out.volume_first.ratio}};
  return out;
}

}  // namespace

BruteVariation brute_variation(const DiscreteHypersurface& surface,
                               const HomogeneousDensity& density, const SolidCone& cone,
                               const ScalarField& u, const std::vector<double>& dt_list) {
  if (u.size() != static_cast<size_t>(surface.sample_count())) {
    fail(ErrorKind::InvalidArgument, "normal speed size mismatch");
  }
  GeometryCache base = geometry(surface, density, cone);
  VecX speed = Eigen::Map<const VecX>(u.data(), static_cast<Eigen::Index>(u.size()));
  auto deform = [&surface, &base, speed, &cone](double t) {
    return deform_normal(surface, base, speed, t, cone);
  };
  return run_brute(surface, density, cone, dt_list, deform, "brute_variation");
}

BruteVariation brute_dilation(const DiscreteHypersurface& surface,
                              const HomogeneousDensity& density, const SolidCone& cone,
                              const std::vector<double>& dt_list) {
  auto deform = [&surface](double t) { return surface.dilated(1.0 + t); };
  return run_brute(surface, density, cone, dt_list, deform, "brute_dilation");
}

ShellDivergence shell_divergence(const SolidCone& cone,
                                 const std::function<double(const Vec&)>& density,
                                 const AmbientField& field, double r1, double r2,
                                 int resolution) {
  if (!(0 < r1 && r1 < r2)) fail(ErrorKind::InvalidArgument, "need 0 < r1 < r2");
  int dim = cone.ambient_dim();

  // Divergence of the flattened field f X by plain central differences; the
  // density callback must extend smoothly slightly past the wall.
  auto div_fx = [&](const Vec& p) {
    double h = 1e-4 * std::max(1.0, p.norm());
    double acc = 0;
    for (int a = 0; a < dim; ++a) {
      Vec e = Vec::Zero(dim);
      e[a] = 1.0;
      auto g = [&](const Vec& x) { return density(x) * field.value(x)[a]; };
      acc += (-g(p + 2 * h * e) + 8 * g(p + h * e) - 8 * g(p - h * e) + g(p - 2 * h * e)) /
             (12 * h);
    }
    return acc;
  };
  auto flux_at = [&](const Vec& p, const Vec& n_out) {
    return density(p) * field.value(p).dot(n_out);
  };

  ShellDivergence out;
  std::vector<double> ws = simpson_weights(r1, r2, resolution);
  std::vector<double> xs = simpson_nodes(r1, r2, static_cast<int>(ws.size()));

  if (dim == 2) {
    double a0 = 0, a1 = 2 * M_PI;
    bool walls = false;
    if (cone.region() == ConeRegion::HalfSpace) {
      double beta = std::atan2(cone.axis()[1], cone.axis()[0]);
      a0 = beta - M_PI / 2;
      a1 = beta + M_PI / 2;
      walls = true;
    } else if (cone.region() == ConeRegion::PlanarSector) {
      a0 = cone.sector_start();
      a1 = a0 + cone.sector_angle();
      walls = true;
    }
    std::vector<double> wt = simpson_weights(a0, a1, resolution);
    std::vector<double> xt = simpson_nodes(a0, a1, static_cast<int>(wt.size()));

    double volume = 0, flux = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      for (size_t j = 0; j < xt.size(); ++j) {
        Vec q = make_vec2(std::cos(xt[j]), std::sin(xt[j]));
        volume += ws[i] * wt[j] * div_fx(xs[i] * q) * xs[i];
      }
    }
    for (size_t j = 0; j < xt.size(); ++j) {
      Vec q = make_vec2(std::cos(xt[j]), std::sin(xt[j]));
      flux += wt[j] * r2 * flux_at(r2 * q, q);
      flux -= wt[j] * r1 * flux_at(r1 * q, q);
    }
    if (walls) {
      Vec t0 = make_vec2(-std::sin(a0), std::cos(a0));
      Vec t1 = make_vec2(-std::sin(a1), std::cos(a1));
      Vec q0 = make_vec2(std::cos(a0), std::sin(a0));
      Vec q1 = make_vec2(std::cos(a1), std::sin(a1));
      for (size_t i = 0; i < xs.size(); ++i) {
        flux += ws[i] * flux_at(xs[i] * q0, (-t0).eval());
        flux += ws[i] * flux_at(xs[i] * q1, t1);
      }
    }
    out.volume_integral = volume;
    out.flux_integral = flux;
  } else {
    Vec axis = cone.region() == ConeRegion::FullSphere ? make_vec3(0, 0, 1) : cone.axis();
    Vec e1 = orthogonal_unit(axis);
    Vec e2 = cross3(axis, e1);
    double theta_max = M_PI;
    bool wall_band = false;
    if (cone.region() == ConeRegion::HalfSpace) {
      theta_max = M_PI / 2;
      wall_band = true;
    } else if (cone.region() == ConeRegion::Circular) {
      theta_max = cone.half_aperture();
      wall_band = true;
    }
    std::vector<double> wt = simpson_weights(0, theta_max, resolution);
    std::vector<double> xt = simpson_nodes(0, theta_max, static_cast<int>(wt.size()));
    std::vector<double> wp = simpson_weights(0, 2 * M_PI, 2 * resolution);
    std::vector<double> xp = simpson_nodes(0, 2 * M_PI, static_cast<int>(wp.size()));

    auto direction = [&](double theta, double phi) {
      Vec e = std::cos(phi) * e1 + std::sin(phi) * e2;
      return (std::cos(theta) * axis + std::sin(theta) * e).eval();
    };

    double volume = 0, flux = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      for (size_t j = 0; j < xt.size(); ++j) {
        double st = std::sin(xt[j]);
        for (size_t l = 0; l < xp.size(); ++l) {
          Vec q = direction(xt[j], xp[l]);
          volume += ws[i] * wt[j] * wp[l] * div_fx(xs[i] * q) * xs[i] * xs[i] * st;
        }
      }
    }
    for (size_t j = 0; j < xt.size(); ++j) {
      double st = std::sin(xt[j]);
      for (size_t l = 0; l < xp.size(); ++l) {
        Vec q = direction(xt[j], xp[l]);
        flux += wt[j] * wp[l] * r2 * r2 * st * flux_at(r2 * q, q);
        flux -= wt[j] * wp[l] * r1 * r1 * st * flux_at(r1 * q, q);
      }
    }
    if (wall_band) {
      double sa = std::sin(theta_max), ca = std::cos(theta_max);
      for (size_t i = 0; i < xs.size(); ++i) {
        for (size_t l = 0; l < xp.size(); ++l) {
          Vec e = std::cos(xp[l]) * e1 + std::sin(xp[l]) * e2;
          Vec p = xs[i] * (ca * axis + sa * e);
          Vec n_out = -sa * axis + ca * e;
          flux += ws[i] * wp[l] * xs[i] * sa * flux_at(p, n_out);
        }
      }
    }
    out.volume_integral = volume;
    out.flux_integral = flux;
  }

  out.residual = std::abs(out.volume_integral - out.flux_integral);
  out.record.name = "shell_divergence";
  out.record.method = Method::PolarQuadrature;
  std::ostringstream detail;
  detail << "composite Simpson, resolution " << resolution << ", shell [" << r1 << ", " << r2
         << "]";
  out.record.detail = detail.str();
  out.record.values = {{"volume_integral", out.volume_integral},
                       {"flux_integral", out.flux_integral},
                       {"residual", out.residual}};
  return out;
}

}  // namespace conelab::oracle
