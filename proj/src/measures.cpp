#include "conelab/measures.hpp"

#include <cmath>
#include <limits>

namespace conelab {

AmbientField position_field() {
  AmbientField f;
  f.value = [](const Vec& p) { return p; };
  f.divergence = [](const Vec& p) { return static_cast<double>(p.size()); };
  return f;
}

AmbientField constant_field(const Vec& direction) {
  AmbientField f;
  Vec d = direction;
  f.value = [d](const Vec&) { return d; };
  f.divergence = [](const Vec&) { return 0.0; };
  return f;
}

QuadratureRule quadrature_rule(const GeometryCache& cache) {
  QuadratureRule rule;
  rule.nodes = cache.position;
  rule.weights = cache.da_weight;
  rule.order = cache.backend == Backend::Parametric ? 4 : 2;
  rule.compensated = true;
  return rule;
}

double weighted_area(const GeometryCache& cache) { return cache.area_f(); }

double oriented_volume(const GeometryCache& cache, const HomogeneousDensity& density) {
  double nk1 = cache.n + density.degree() + 1.0;
  if (std::abs(nk1) < 1e-12) {
    fail(ErrorKind::CriticalDegree, "oriented volume undefined at degree k = -(n+1)");
  }
  KahanSum s;
  for (size_t i = 0; i < cache.da_weight.size(); ++i) {
    s.add(cache.da_weight[i] * cache.f[i] * cache.support[i]);
  }
  return -s.value() / nk1;
}

double f_divergence(const HomogeneousDensity& density, const SolidCone& cone,
                    const AmbientField& field, const Vec& p) {
  double div;
  if (field.divergence) {
    div = field.divergence(p);
  } else {
    double h = 1e-4 * std::max(1.0, p.norm());
    KahanSum acc;
    for (int a = 0; a < p.size(); ++a) {
      Vec e = Vec::Zero(p.size());
      e[a] = 1.0;
      double d = (-field.value(p + 2 * h * e)[a] + 8 * field.value(p + h * e)[a] -
                  8 * field.value(p - h * e)[a] + field.value(p - 2 * h * e)[a]) /
                 (12 * h);
      acc.add(d);
    }
    div = acc.value();
  }
  AmbientJet jet = density.ambient_jet(cone, p);
  return div + jet.grad_psi.dot(field.value(p));
}

namespace {

// Per-face P1 hat-function gradients of a triangle; rows are the gradients.
void p1_gradients(const Vec& x0, const Vec& x1, const Vec& x2, Vec grad[3], double& area,
                  Vec& unit_normal) {
  Vec raw = cross3(x1 - x0, x2 - x0);
  double a2 = raw.norm();
  area = 0.5 * a2;
  unit_normal = raw / a2;
  grad[0] = cross3(unit_normal, x2 - x1) / a2;
  grad[1] = cross3(unit_normal, x0 - x2) / a2;
  grad[2] = cross3(unit_normal, x1 - x0) / a2;
}

// Ordered neighbors of each polyline vertex (previous, next along segments).
struct CurveNeighbors {
  std::vector<std::array<int, 2>> nbr;  // -1 when absent
};

CurveNeighbors curve_neighbors(const SimplicialMesh& mesh) {
  CurveNeighbors out;
  out.nbr.assign(mesh.vertices.size(), {-1, -1});
  for (const auto& seg : mesh.segments) {
    out.nbr[static_cast<size_t>(seg[0])][1] = seg[1];
    out.nbr[static_cast<size_t>(seg[1])][0] = seg[0];
  }
  return out;
}

}  // namespace

std::vector<Vec> tangential_gradient(const DiscreteHypersurface& surface,
                                     const GeometryCache& cache, const ScalarField& values) {
  size_t nsamp = cache.position.size();
  if (values.size() != nsamp) fail(ErrorKind::InvalidArgument, "field size mismatch");
  std::vector<Vec> grad(nsamp, Vec::Zero(cache.ambient_dim));

  if (surface.backend == Backend::Parametric) {
    auto d = chart_scalar_d1(surface.chart, values);
    for (size_t i = 0; i < nsamp; ++i) {
      if (cache.degenerate[i]) continue;
      if (surface.chart.param_dim == 1) {
        grad[i] = cache.inv_g00[i] * d[0][i] * cache.d1u[i];
      } else {
        double c0 = cache.inv_g00[i] * d[0][i] + cache.inv_g01[i] * d[1][i];
        double c1 = cache.inv_g01[i] * d[0][i] + cache.inv_g11[i] * d[1][i];
        grad[i] = c0 * cache.d1u[i] + c1 * cache.d1v[i];
      }
    }
    return grad;
  }

  if (surface.mesh.ambient_dim == 2) {
    CurveNeighbors cn = curve_neighbors(surface.mesh);
    for (size_t i = 0; i < nsamp; ++i) {
      int a = cn.nbr[i][0], b = cn.nbr[i][1];
      if (a < 0 && b < 0) continue;
      int lo = a >= 0 ? a : static_cast<int>(i);
      int hi = b >= 0 ? b : static_cast<int>(i);
      Vec dp = cache.position[static_cast<size_t>(hi)] - cache.position[static_cast<size_t>(lo)];
      double ds = dp.norm();
      if (ds < 1e-300) continue;
      double dv = values[static_cast<size_t>(hi)] - values[static_cast<size_t>(lo)];
      grad[i] = (dv / ds) * (dp / ds);
    }
    return grad;
  }

  std::vector<double> area_sum(nsamp, 0.0);
  for (const auto& tri : surface.mesh.triangles) {
    Vec g[3], n;
    double area;
    p1_gradients(surface.mesh.vertices[static_cast<size_t>(tri[0])],
                 surface.mesh.vertices[static_cast<size_t>(tri[1])],
                 surface.mesh.vertices[static_cast<size_t>(tri[2])], g, area, n);
    if (!(area > 0)) continue;
    Vec gf = values[static_cast<size_t>(tri[0])] * g[0] +
             values[static_cast<size_t>(tri[1])] * g[1] +
             values[static_cast<size_t>(tri[2])] * g[2];
    for (int c = 0; c < 3; ++c) {
      grad[static_cast<size_t>(tri[c])] += area * gf;
      area_sum[static_cast<size_t>(tri[c])] += area;
    }
  }
  for (size_t i = 0; i < nsamp; ++i) {
    if (area_sum[i] > 0) {
      grad[i] /= area_sum[i];
      // Keep the vertex-level gradient tangential.
      grad[i] -= grad[i].dot(cache.normal[i]) * cache.normal[i];
    }
  }
  return grad;
}

ScalarField surface_f_divergence(const DiscreteHypersurface& surface, const GeometryCache& cache,
                                 const std::vector<Vec>& field) {
  size_t nsamp = cache.position.size();
  if (field.size() != nsamp) fail(ErrorKind::InvalidArgument, "field size mismatch");
  ScalarField div(nsamp, 0.0);

  if (surface.backend == Backend::Parametric) {
    int dim = cache.ambient_dim;
    // Differentiate each ambient component of the field along the chart.
    std::vector<std::array<std::vector<double>, 2>> comp_d(static_cast<size_t>(dim));
    for (int c = 0; c < dim; ++c) {
      std::vector<double> comp(nsamp);
      for (size_t i = 0; i < nsamp; ++i) comp[i] = field[i][c];
      comp_d[static_cast<size_t>(c)] = chart_scalar_d1(surface.chart, comp);
    }
    auto axis_derivative = [&](size_t i, int axis) {
      Vec d(dim);
      for (int c = 0; c < dim; ++c) d[c] = comp_d[static_cast<size_t>(c)][axis][i];
      return d;
    };
    for (size_t i = 0; i < nsamp; ++i) {
      if (cache.degenerate[i]) continue;
      double tangential;
      if (surface.chart.param_dim == 1) {
        tangential = cache.inv_g00[i] * axis_derivative(i, 0).dot(cache.d1u[i]);
      } else {
        Vec xu = axis_derivative(i, 0), xv = axis_derivative(i, 1);
        tangential = cache.inv_g00[i] * xu.dot(cache.d1u[i]) +
                     cache.inv_g01[i] * (xu.dot(cache.d1v[i]) + xv.dot(cache.d1u[i])) +
                     cache.inv_g11[i] * xv.dot(cache.d1v[i]);
      }
      div[i] = tangential + cache.grad_psi[i].dot(field[i]);
    }
    return div;
  }

  if (surface.mesh.ambient_dim == 2) {
    CurveNeighbors cn = curve_neighbors(surface.mesh);
    for (size_t i = 0; i < nsamp; ++i) {
      int a = cn.nbr[i][0], b = cn.nbr[i][1];
      if (a < 0 && b < 0) continue;
      int lo = a >= 0 ? a : static_cast<int>(i);
      int hi = b >= 0 ? b : static_cast<int>(i);
      Vec dp = cache.position[static_cast<size_t>(hi)] - cache.position[static_cast<size_t>(lo)];
      double ds = dp.norm();
      if (ds < 1e-300) continue;
      Vec dX = field[static_cast<size_t>(hi)] - field[static_cast<size_t>(lo)];
      div[i] = dX.dot(dp) / (ds * ds) + cache.grad_psi[i].dot(field[i]);
    }
    return div;
  }

  std::vector<double> area_sum(nsamp, 0.0);
  std::vector<double> face_acc(nsamp, 0.0);
  for (const auto& tri : surface.mesh.triangles) {
    Vec g[3], n;
    double area;
    p1_gradients(surface.mesh.vertices[static_cast<size_t>(tri[0])],
                 surface.mesh.vertices[static_cast<size_t>(tri[1])],
                 surface.mesh.vertices[static_cast<size_t>(tri[2])], g, area, n);
    if (!(area > 0)) continue;
    double face_div = 0;
    for (int c = 0; c < 3; ++c) {
      // Tangential part of the vertex field; the normal part contributes
      // curvature terms that P1 elements cannot see pointwise.
      const Vec& Xc = field[static_cast<size_t>(tri[c])];
      face_div += (Xc - Xc.dot(n) * n).dot(g[c]);
    }
    for (int c = 0; c < 3; ++c) {
      face_acc[static_cast<size_t>(tri[c])] += area * face_div;
      area_sum[static_cast<size_t>(tri[c])] += area;
    }
  }
  for (size_t i = 0; i < nsamp; ++i) {
    if (area_sum[i] > 0) div[i] = face_acc[i] / area_sum[i];
    div[i] += cache.grad_psi[i].dot(field[i]);
  }
  return div;
}

ScalarField weighted_laplacian(const DiscreteHypersurface& surface, const GeometryCache& cache,
                               const ScalarField& values) {
  if (surface.backend != Backend::Parametric) {
    fail(ErrorKind::InvalidArgument, "weighted laplacian needs the parametric backend");
  }
  size_t nsamp = cache.position.size();
  if (values.size() != nsamp) fail(ErrorKind::InvalidArgument, "field size mismatch");
  auto d = chart_scalar_d1(surface.chart, values);

  // Divergence form: (1/(f J)) sum_a D_a ( f J g^{ab} phi_b ), which carries
  // the weight term <grad_Sigma psi, grad_Sigma phi> automatically.
  std::vector<double> flux0(nsamp, 0.0), flux1;
  bool two = surface.chart.param_dim == 2;
  if (two) flux1.assign(nsamp, 0.0);
  for (size_t i = 0; i < nsamp; ++i) {
    double fj = cache.f[i] * cache.jac[i];
    if (two) {
      flux0[i] = fj * (cache.inv_g00[i] * d[0][i] + cache.inv_g01[i] * d[1][i]);
      flux1[i] = fj * (cache.inv_g01[i] * d[0][i] + cache.inv_g11[i] * d[1][i]);
    } else {
      flux0[i] = fj * cache.inv_g00[i] * d[0][i];
    }
  }
  auto df0 = chart_scalar_d1(surface.chart, flux0);
  ScalarField out(nsamp, 0.0);
  if (two) {
    auto df1 = chart_scalar_d1(surface.chart, flux1);
    for (size_t i = 0; i < nsamp; ++i) {
      double fj = cache.f[i] * cache.jac[i];
      if (cache.degenerate[i] || fj <= 0) continue;
      out[i] = (df0[0][i] + df1[1][i]) / fj;
    }
  } else {
    for (size_t i = 0; i < nsamp; ++i) {
      double fj = cache.f[i] * cache.jac[i];
      if (cache.degenerate[i] || fj <= 0) continue;
      out[i] = df0[0][i] / fj;
    }
  }
  return out;
}

double verify_surface_divergence_theorem(const DiscreteHypersurface& surface,
                                         const GeometryCache& cache, const AmbientField& field) {
  size_t nsamp = cache.position.size();
  std::vector<Vec> X(nsamp);
  for (size_t i = 0; i < nsamp; ++i) X[i] = field.value(cache.position[i]);
  ScalarField div = surface_f_divergence(surface, cache, X);

  KahanSum total;
  for (size_t i = 0; i < nsamp; ++i) {
    double w = cache.da_weight[i] * cache.f[i];
    total.add(w * div[i]);
    total.add(w * cache.Hf[i] * X[i].dot(cache.normal[i]));
  }
  for (const BoundarySample& b : cache.boundary) {
    total.add(b.dl_weight * b.f * field.value(b.p).dot(b.conormal));
  }
  return std::abs(total.value());
}

MinkowskiReport minkowski(const GeometryCache& cache, const HomogeneousDensity& density,
                          double tol_stationary) {
  MinkowskiReport rep;
  double k = density.degree();
  double n = cache.n;
  rep.area = cache.area_f();
  rep.Hf_mean = cache.weighted_mean_Hf();
  rep.Hf_std = cache.weighted_std_Hf();
  rep.stationary = rep.Hf_std <= tol_stationary * (1.0 + std::abs(rep.Hf_mean));
  rep.forced_zero_Hf = std::abs(k + n) < 1e-12;

  KahanSum residual;
  for (size_t i = 0; i < cache.da_weight.size(); ++i) {
    double w = cache.da_weight[i] * cache.f[i];
    residual.add(w * (n + k + cache.Hf[i] * cache.support[i]));
  }
  rep.residual_integral = residual.value();
  rep.relative_residual = rep.area > 0 ? std::abs(rep.residual_integral) / rep.area : 0.0;

  if (std::abs(n + k + 1.0) < 1e-12) {
    rep.critical_degree = true;
    rep.oriented_volume = std::numeric_limits<double>::quiet_NaN();
    rep.identity_gap = std::numeric_limits<double>::quiet_NaN();
    rep.relative_gap = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  rep.oriented_volume = oriented_volume(cache, density);
  rep.identity_gap = (n + k) * rep.area - (n + k + 1.0) * rep.Hf_mean * rep.oriented_volume;
  rep.relative_gap = rep.area > 0 ? std::abs(rep.identity_gap) / rep.area : 0.0;
  return rep;
}

TestFieldResult minkowski_test_field(const GeometryCache& cache,
                                     const HomogeneousDensity& density, double tol_stationary) {
  TestFieldResult result;
  double k = density.degree();
  double n = cache.n;
  double mean = cache.weighted_mean_Hf();
  double std_dev = cache.weighted_std_Hf();
  result.constant_Hf = std_dev <= tol_stationary * (1.0 + std::abs(mean));
  result.Hf_used = mean;
  result.values.resize(cache.position.size());
  for (size_t i = 0; i < cache.position.size(); ++i) {
    double h = result.constant_Hf ? mean : cache.Hf[i];
    result.values[i] = n + k + h * cache.support[i];
  }
  return result;
}

ScalingFit scaling_exponents(const DiscreteHypersurface& surface,
                             const HomogeneousDensity& density, const SolidCone& cone,
                             const std::vector<double>& factors) {
  if (factors.size() < 2) fail(ErrorKind::InvalidArgument, "need at least two dilation factors");
  std::vector<double> log_t, log_a, log_v;
  for (double t : factors) {
    DiscreteHypersurface st = surface.dilated(t);
    GeometryCache cache = geometry(st, density, cone);
    double a = weighted_area(cache);
    double v = std::abs(oriented_volume(cache, density));
    if (!(a > 0) || !(v > 0)) fail(ErrorKind::SingularMass, "vanishing area or volume in scaling fit");
    log_t.push_back(std::log(t));
    log_a.push_back(std::log(a));
    log_v.push_back(std::log(v));
  }
  ScalingFit fit;
  fit.area_slope = fit_slope(log_t, log_a);
  fit.volume_slope = fit_slope(log_t, log_v);
  return fit;
}

}  // namespace conelab
