#include "conelab/surface.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace conelab {

namespace {

// 4th-order Gregory end-corrected trapezoid weights.
std::vector<double> gregory_weights(int nodes, double h) {
  if (nodes < 8) fail(ErrorKind::InvalidArgument, "non-periodic axis needs >= 8 nodes");
  std::vector<double> w(static_cast<size_t>(nodes), h);
  const double c0 = 3.0 / 8.0, c1 = 7.0 / 6.0, c2 = 23.0 / 24.0;
  w[0] = c0 * h;
  w[1] = c1 * h;
  w[2] = c2 * h;
  w[static_cast<size_t>(nodes - 1)] = c0 * h;
  w[static_cast<size_t>(nodes - 2)] = c1 * h;
  w[static_cast<size_t>(nodes - 3)] = c2 * h;
  return w;
}

MatX fd_d1(int m, double h) {
  MatX D = MatX::Zero(m, m);
  auto row = [&](int i, std::initializer_list<double> coef, int start) {
    int j = start;
    for (double c : coef) D(i, j++) = c / (12 * h);
  };
  row(0, {-25, 48, -36, 16, -3}, 0);
  row(1, {-3, -10, 18, -6, 1}, 0);
  for (int i = 2; i < m - 2; ++i) row(i, {1, -8, 0, 8, -1}, i - 2);
  row(m - 2, {-1, 6, -18, 10, 3}, m - 5);
  row(m - 1, {3, -16, 36, -48, 25}, m - 5);
  return D;
}

MatX fd_d2(int m, double h) {
  MatX D = MatX::Zero(m, m);
  double hh = h * h;
  auto row = [&](int i, std::initializer_list<double> coef, int start) {
    int j = start;
    for (double c : coef) D(i, j++) = c / hh;
  };
  row(0, {15.0 / 4, -77.0 / 6, 107.0 / 6, -13.0, 61.0 / 12, -5.0 / 6}, 0);
  row(1, {5.0 / 6, -5.0 / 4, -1.0 / 3, 7.0 / 6, -1.0 / 2, 1.0 / 12}, 0);
  for (int i = 2; i < m - 2; ++i) {
    int j = i - 2;
    for (double c : {-1.0, 16.0, -30.0, 16.0, -1.0}) D(i, j++) = c / (12 * hh);
  }
  row(m - 2, {1.0 / 12, -1.0 / 2, 7.0 / 6, -1.0 / 3, -5.0 / 4, 5.0 / 6}, m - 6);
  row(m - 1, {-5.0 / 6, 61.0 / 12, -13.0, 107.0 / 6, -77.0 / 6, 15.0 / 4}, m - 6);
  return D;
}

MatX fourier_d1(int m, double length) {
  // Even node count; exact on trigonometric polynomials below Nyquist.
  MatX D = MatX::Zero(m, m);
  double scale = 2 * M_PI / length;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      int d = i - j;
      double sgn = (d % 2 == 0) ? 1.0 : -1.0;
      D(i, j) = scale * 0.5 * sgn / std::tan(M_PI * d / m);
    }
  }
  return D;
}

}  // namespace

AxisRule make_axis_rule(double lo, double hi, int nodes, bool periodic, bool with_derivatives) {
  AxisRule rule;
  rule.periodic = periodic;
  if (periodic) {
    if (nodes % 2) ++nodes;  // Fourier differentiation wants an even count
    rule.nodes = nodes;
    rule.h = (hi - lo) / nodes;
    rule.weights.assign(static_cast<size_t>(nodes), rule.h);
    if (with_derivatives) {
      rule.d1 = fourier_d1(nodes, hi - lo);
      rule.d2 = rule.d1 * rule.d1;
    }
  } else {
    rule.nodes = nodes;
    rule.h = (hi - lo) / (nodes - 1);
    rule.weights = gregory_weights(nodes, rule.h);
    if (with_derivatives) {
      rule.d1 = fd_d1(nodes, rule.h);
      rule.d2 = fd_d2(nodes, rule.h);
    }
  }
  return rule;
}

int DiscreteHypersurface::sample_count() const {
  if (backend == Backend::Parametric) return static_cast<int>(chart.table.size());
  return static_cast<int>(mesh.vertices.size());
}

Vec DiscreteHypersurface::sample(int index) const {
  if (backend == Backend::Parametric) return chart.table[static_cast<size_t>(index)];
  return mesh.vertices[static_cast<size_t>(index)];
}

double DiscreteHypersurface::min_radius() const {
  double r = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sample_count(); ++i) r = std::min(r, sample(i).norm());
  return r;
}

DiscreteHypersurface DiscreteHypersurface::dilated(double factor) const {
  if (!(factor > 0)) fail(ErrorKind::InvalidArgument, "dilation factor must be positive");
  DiscreteHypersurface out = *this;
  if (backend == Backend::Parametric) {
    for (Vec& p : out.chart.table) p *= factor;
    if (chart.pos) {
      auto base = chart.pos;
      out.chart.pos = [base, factor](double a, double b) { return (factor * base(a, b)).eval(); };
    }
    if (chart.jet) {
      auto base = chart.jet;
      out.chart.jet = [base, factor](double a, double b) {
        ChartJet j = base(a, b);
        j.p *= factor;
        for (auto& v : j.d1) {
          if (v.size()) v *= factor;
        }
        for (auto& v : j.d2) {
          if (v.size()) v *= factor;
        }
        return j;
      };
    }
  } else {
    for (Vec& p : out.mesh.vertices) p *= factor;
  }
  out.info.radius *= factor;
  out.info.puncture_radius *= factor;
  if (out.info.center.size()) out.info.center *= factor;
  return out;
}

DiscreteHypersurface DiscreteHypersurface::subchart(double lo0, double hi0, int nodes0) const {
  if (backend != Backend::Parametric || !chart.analytic()) {
    fail(ErrorKind::InvalidArgument, "subchart needs an analytic chart");
  }
  DiscreteHypersurface out = *this;
  out.chart.lo[0] = lo0;
  out.chart.hi[0] = hi0;
  out.chart.nodes[0] = nodes0;
  out.chart.periodic[0] = false;
  out.chart.face[out.chart.face_index(0, false)] = FaceKind::Puncture;
  out.chart.face[out.chart.face_index(0, true)] = FaceKind::Puncture;
  out.info.kind = SurfaceInfo::Kind::Generic;

  AxisRule r0 = make_axis_rule(lo0, hi0, nodes0, false, false);
  int m1 = out.chart.nodes[1];
  AxisRule r1;
  if (chart.param_dim == 2) {
    r1 = make_axis_rule(chart.lo[1], chart.hi[1], m1, chart.periodic[1], false);
    m1 = r1.nodes;
    out.chart.nodes[1] = m1;
  }
  out.chart.table.clear();
  for (int i = 0; i < r0.nodes; ++i) {
    double a = lo0 + i * r0.h;
    for (int j = 0; j < m1; ++j) {
      double b = chart.param_dim == 2 ? chart.lo[1] + j * r1.h : 0.0;
      out.chart.table.push_back(chart.pos(a, b));
    }
  }
  return out;
}

// --- constructors -----------------------------------------------------------

namespace {

void fill_table(ParametricChart& chart) {
  AxisRule r0 = make_axis_rule(chart.lo[0], chart.hi[0], chart.nodes[0], chart.periodic[0], false);
  chart.nodes[0] = r0.nodes;
  int m1 = 1;
  double h1 = 0.0;
  if (chart.param_dim == 2) {
    AxisRule r1 = make_axis_rule(chart.lo[1], chart.hi[1], chart.nodes[1], chart.periodic[1], false);
    chart.nodes[1] = r1.nodes;
    m1 = r1.nodes;
    h1 = r1.h;
  } else {
    chart.nodes[1] = 1;
  }
  chart.table.clear();
  chart.table.reserve(static_cast<size_t>(chart.nodes[0]) * static_cast<size_t>(m1));
  for (int i = 0; i < chart.nodes[0]; ++i) {
    double a = chart.lo[0] + i * r0.h;
    for (int j = 0; j < m1; ++j) {
      double b = chart.lo[1] + j * h1;
      chart.table.push_back(chart.pos(a, b));
    }
  }
}

// Orthonormal pair completing `axis` to a frame of R^3.
std::pair<Vec, Vec> complete_frame(const Vec& axis) {
  Vec e = std::abs(axis[0]) < 0.9 ? make_vec3(1, 0, 0) : make_vec3(0, 1, 0);
  Vec e1 = (e - e.dot(axis) * axis).normalized();
  Vec e2 = cross3(axis, e1);
  return {e1, e2};
}

// Arc of the circle |p| = r between polar angles [a0, a1] (or the full
// circle), with inward normal -p/r.
DiscreteHypersurface make_arc(double r, double a0, double a1, bool full_circle, int resolution) {
  DiscreteHypersurface s;
  s.backend = Backend::Parametric;
  s.ambient_dim = 2;
  s.info.kind = SurfaceInfo::Kind::Cap;
  s.info.center = make_vec2(0, 0);
  s.info.radius = r;
  ParametricChart& c = s.chart;
  c.param_dim = 1;
  c.lo = {a0, 0};
  c.hi = {full_circle ? a0 + 2 * M_PI : a1, 1};
  c.periodic = {full_circle, false};
  c.nodes = {resolution, 1};
  c.normal_sign = 1.0;  // rot90 of the tangent of a CCW circle points inward
  c.pos = [r](double t, double) { return make_vec2(r * std::cos(t), r * std::sin(t)); };
  c.jet = [r](double t, double) {
    ChartJet j;
    j.p = make_vec2(r * std::cos(t), r * std::sin(t));
    j.d1[0] = make_vec2(-r * std::sin(t), r * std::cos(t));
    j.d2[0] = (-j.p).eval();
    return j;
  };
  fill_table(c);
  return s;
}

// Spherical patch r * (cos(theta) axis + sin(theta) u(phi)) with theta in
// [t0, t1], phi periodic; inward normal.
DiscreteHypersurface make_patch(const Vec& axis, double r, double t0, double t1, int res_theta,
                                int res_phi) {
  auto [e1v, e2v] = complete_frame(axis);
  Vec a = axis, e1 = e1v, e2 = e2v;
  DiscreteHypersurface s;
  s.backend = Backend::Parametric;
  s.ambient_dim = 3;
  s.info.kind = SurfaceInfo::Kind::Cap;
  s.info.center = make_vec3(0, 0, 0);
  s.info.radius = r;
  ParametricChart& c = s.chart;
  c.param_dim = 2;
  c.lo = {t0, 0.0};
  c.hi = {t1, 2 * M_PI};
  c.periodic = {false, true};
  c.nodes = {res_theta, res_phi};
  c.normal_sign = -1.0;  // raw chart normal is outward
  c.pos = [=](double th, double ph) {
    Vec u = std::cos(ph) * e1 + std::sin(ph) * e2;
    return (r * (std::cos(th) * a + std::sin(th) * u)).eval();
  };
  c.jet = [=](double th, double ph) {
    Vec u = std::cos(ph) * e1 + std::sin(ph) * e2;
    Vec du = -std::sin(ph) * e1 + std::cos(ph) * e2;
    ChartJet j;
    j.p = r * (std::cos(th) * a + std::sin(th) * u);
    j.d1[0] = r * (-std::sin(th) * a + std::cos(th) * u);
    j.d1[1] = r * std::sin(th) * du;
    j.d2[0] = (-j.p).eval();
    j.d2[1] = r * std::cos(th) * du;
    j.d2[2] = -r * std::sin(th) * u;
    return j;
  };
  if (t0 < 1e-12) c.face[c.face_index(0, false)] = FaceKind::Degenerate;
  if (t1 > M_PI - 1e-12) c.face[c.face_index(0, true)] = FaceKind::Degenerate;
  fill_table(c);
  return s;
}

}  // namespace

DiscreteHypersurface make_cap(const SolidCone& cone, double radius, int resolution) {
  if (!(radius > 0)) fail(ErrorKind::InvalidArgument, "cap radius must be positive");
  if (resolution < 8) fail(ErrorKind::InvalidArgument, "cap resolution must be >= 8");
  if (cone.ambient_dim() == 2) {
    switch (cone.region()) {
      case ConeRegion::FullSphere:
        return make_arc(radius, 0.0, 0.0, true, resolution);
      case ConeRegion::HalfSpace: {
        double mid = std::atan2(cone.axis()[1], cone.axis()[0]);
        return make_arc(radius, mid - M_PI / 2, mid + M_PI / 2, false, resolution);
      }
      case ConeRegion::PlanarSector:
        return make_arc(radius, cone.sector_start(), cone.sector_start() + cone.sector_angle(),
                        false, resolution);
      default:
        fail(ErrorKind::InvalidArgument, "region/dimension mismatch");
    }
  }
  switch (cone.region()) {
    case ConeRegion::FullSphere:
      return make_patch(make_vec3(0, 0, 1), radius, 0.0, M_PI, resolution, 2 * resolution);
    case ConeRegion::HalfSpace:
      return make_patch(cone.axis(), radius, 0.0, M_PI / 2, resolution, 2 * resolution);
    case ConeRegion::Circular:
      return make_patch(cone.axis(), radius, 0.0, cone.half_aperture(), resolution,
                        2 * resolution);
    default:
      fail(ErrorKind::InvalidArgument, "region/dimension mismatch");
  }
}

DiscreteHypersurface make_sphere_through_origin(const Vec& center, int resolution,
                                                double puncture_radius) {
  double r = center.norm();
  if (r < 1e-14) fail(ErrorKind::InvalidArgument, "center must be away from the vertex");
  if (puncture_radius < 0) puncture_radius = 1e-3 * r;
  if (!(puncture_radius > 0) || puncture_radius >= r) {
    fail(ErrorKind::InvalidArgument, "puncture radius must lie in (0, radius)");
  }
  // Points p = center + r u; the vertex sits at u = -center/r. Chordal
  // distance |p| = 2 r cos(theta/2) with theta the colatitude from center/r.
  double cut = 2.0 * std::asin(std::min(1.0, puncture_radius / (2 * r)));

  if (center.size() == 2) {
    Vec w = center / r;
    double beta = std::atan2(w[1], w[0]);
    DiscreteHypersurface s;
    s.backend = Backend::Parametric;
    s.ambient_dim = 2;
    s.info.kind = SurfaceInfo::Kind::SphereThroughOrigin;
    s.info.center = center;
    s.info.radius = r;
    s.info.puncture_radius = puncture_radius;
    ParametricChart& c = s.chart;
    c.param_dim = 1;
    // Polar angle about the center; the vertex sits at beta +- pi, so the
    // puncture removes a symmetric angular band around that antipode.
    c.lo = {beta - M_PI + cut, 0};
    c.hi = {beta + M_PI - cut, 1};
    c.periodic = {false, false};
    c.nodes = {resolution, 1};
    c.normal_sign = 1.0;  // inward (toward center)
    Vec ctr = center;
    c.pos = [ctr, r](double t, double) {
      return (ctr + make_vec2(r * std::cos(t), r * std::sin(t))).eval();
    };
    c.jet = [ctr, r](double t, double) {
      ChartJet j;
      Vec u = make_vec2(std::cos(t), std::sin(t));
      j.p = ctr + r * u;
      j.d1[0] = make_vec2(-r * std::sin(t), r * std::cos(t));
      j.d2[0] = (-r * u).eval();
      return j;
    };
    c.face[c.face_index(0, false)] = FaceKind::Puncture;
    c.face[c.face_index(0, true)] = FaceKind::Puncture;
    fill_table(c);
    return s;
  }

  Vec w = center / r;
  auto [e1v, e2v] = complete_frame(w);
  Vec e1 = e1v, e2 = e2v, ctr = center;
  DiscreteHypersurface s;
  s.backend = Backend::Parametric;
  s.ambient_dim = 3;
  s.info.kind = SurfaceInfo::Kind::SphereThroughOrigin;
  s.info.center = center;
  s.info.radius = r;
  s.info.puncture_radius = puncture_radius;
  ParametricChart& c = s.chart;
  c.param_dim = 2;
  c.lo = {0.0, 0.0};
  c.hi = {M_PI - cut, 2 * M_PI};
  c.periodic = {false, true};
  c.nodes = {resolution, 2 * resolution};
  c.normal_sign = -1.0;  // raw normal is outward from the center
  c.pos = [=](double th, double ph) {
    Vec u = std::cos(ph) * e1 + std::sin(ph) * e2;
    return (ctr + r * (std::cos(th) * w + std::sin(th) * u)).eval();
  };
  c.jet = [=](double th, double ph) {
    Vec u = std::cos(ph) * e1 + std::sin(ph) * e2;
    Vec du = -std::sin(ph) * e1 + std::cos(ph) * e2;
    ChartJet j;
    Vec radial = std::cos(th) * w + std::sin(th) * u;
    j.p = ctr + r * radial;
    j.d1[0] = r * (-std::sin(th) * w + std::cos(th) * u);
    j.d1[1] = r * std::sin(th) * du;
    j.d2[0] = (-r * radial).eval();
    j.d2[1] = r * std::cos(th) * du;
    j.d2[2] = -r * std::sin(th) * u;
    return j;
  };
  c.face[c.face_index(0, false)] = FaceKind::Degenerate;
  c.face[c.face_index(0, true)] = FaceKind::Puncture;
  fill_table(c);
  return s;
}

DiscreteHypersurface make_ellipsoid(const Vec& semiaxes, int resolution) {
  for (int i = 0; i < semiaxes.size(); ++i) {
    if (!(semiaxes[i] > 0)) fail(ErrorKind::InvalidArgument, "semiaxes must be positive");
  }
  if (semiaxes.size() == 2) {
    double a = semiaxes[0], b = semiaxes[1];
    DiscreteHypersurface s;
    s.backend = Backend::Parametric;
    s.ambient_dim = 2;
    s.info.kind = SurfaceInfo::Kind::Ellipsoid;
    ParametricChart& c = s.chart;
    c.param_dim = 1;
    c.lo = {0.0, 0};
    c.hi = {2 * M_PI, 1};
    c.periodic = {true, false};
    c.nodes = {resolution, 1};
    c.normal_sign = 1.0;
    c.pos = [a, b](double t, double) { return make_vec2(a * std::cos(t), b * std::sin(t)); };
    c.jet = [a, b](double t, double) {
      ChartJet j;
      j.p = make_vec2(a * std::cos(t), b * std::sin(t));
      j.d1[0] = make_vec2(-a * std::sin(t), b * std::cos(t));
      j.d2[0] = (-j.p).eval();
      return j;
    };
    fill_table(c);
    return s;
  }
  double a = semiaxes[0], b = semiaxes[1], cc = semiaxes[2];
  DiscreteHypersurface s;
  s.backend = Backend::Parametric;
  s.ambient_dim = 3;
  s.info.kind = SurfaceInfo::Kind::Ellipsoid;
  ParametricChart& c = s.chart;
  c.param_dim = 2;
  c.lo = {0.0, 0.0};
  c.hi = {M_PI, 2 * M_PI};
  c.periodic = {false, true};
  c.nodes = {resolution, 2 * resolution};
  c.normal_sign = -1.0;
  c.pos = [=](double th, double ph) {
    return make_vec3(a * std::sin(th) * std::cos(ph), b * std::sin(th) * std::sin(ph),
                     cc * std::cos(th));
  };
  c.jet = [=](double th, double ph) {
    ChartJet j;
    j.p = make_vec3(a * std::sin(th) * std::cos(ph), b * std::sin(th) * std::sin(ph),
                    cc * std::cos(th));
    j.d1[0] = make_vec3(a * std::cos(th) * std::cos(ph), b * std::cos(th) * std::sin(ph),
                        -cc * std::sin(th));
    j.d1[1] = make_vec3(-a * std::sin(th) * std::sin(ph), b * std::sin(th) * std::cos(ph), 0.0);
    j.d2[0] = (-j.p).eval();
    j.d2[1] = make_vec3(-a * std::cos(th) * std::sin(ph), b * std::cos(th) * std::cos(ph), 0.0);
    j.d2[2] = make_vec3(-a * std::sin(th) * std::cos(ph), -b * std::sin(th) * std::sin(ph), 0.0);
    return j;
  };
  c.face[c.face_index(0, false)] = FaceKind::Degenerate;
  c.face[c.face_index(0, true)] = FaceKind::Degenerate;
  fill_table(c);
  return s;
}

DiscreteHypersurface make_radial_graph(const SolidCone& cone,
                                       const std::function<double(double, double)>& rho,
                                       int resolution) {
  // Tabulated chart: derivatives come from the differentiation matrices.
  DiscreteHypersurface s;
  s.backend = Backend::Parametric;
  s.ambient_dim = cone.ambient_dim();
  ParametricChart& c = s.chart;
  c.normal_sign = 1.0;
  if (cone.ambient_dim() == 2) {
    c.param_dim = 1;
    bool full = cone.region() == ConeRegion::FullSphere;
    double a0, a1;
    if (full) {
      a0 = 0;
      a1 = 2 * M_PI;
    } else if (cone.region() == ConeRegion::PlanarSector) {
      a0 = cone.sector_start();
      a1 = a0 + cone.sector_angle();
    } else {
      double mid = std::atan2(cone.axis()[1], cone.axis()[0]);
      a0 = mid - M_PI / 2;
      a1 = mid + M_PI / 2;
    }
    c.lo = {a0, 0};
    c.hi = {a1, 1};
    c.periodic = {full, false};
    c.nodes = {resolution, 1};
    c.pos = [rho](double t, double) {
      double r = rho(t, 0.0);
      return make_vec2(r * std::cos(t), r * std::sin(t));
    };
    fill_table(c);
    c.pos = nullptr;  // keep it honestly tabulated
    return s;
  }
  Vec axis = cone.region() == ConeRegion::FullSphere ? make_vec3(0, 0, 1) : cone.axis();
  auto [e1v, e2v] = complete_frame(axis);
  Vec e1 = e1v, e2 = e2v;
  double t1 = cone.region() == ConeRegion::Circular  ? cone.half_aperture()
              : cone.region() == ConeRegion::HalfSpace ? M_PI / 2
                                                       : M_PI;
  c.param_dim = 2;
  c.lo = {0.0, 0.0};
  c.hi = {t1, 2 * M_PI};
  c.periodic = {false, true};
  c.nodes = {resolution, 2 * resolution};
  c.normal_sign = -1.0;
  if (cone.region() == ConeRegion::FullSphere) c.face[c.face_index(0, true)] = FaceKind::Degenerate;
  c.face[c.face_index(0, false)] = FaceKind::Degenerate;
  c.pos = [=](double th, double ph) {
    Vec q = std::cos(th) * axis + std::sin(th) * (std::cos(ph) * e1 + std::sin(ph) * e2);
    return (rho(th, ph) * q).eval();
  };
  fill_table(c);
  c.pos = nullptr;
  return s;
}

// --- simplicial builders ----------------------------------------------------

DiscreteHypersurface mesh_cap(const SolidCone& cone, double radius, int resolution) {
  if (resolution < 4) fail(ErrorKind::InvalidArgument, "mesh resolution must be >= 4");
  DiscreteHypersurface s;
  s.backend = Backend::Simplicial;
  s.ambient_dim = cone.ambient_dim();
  s.info.kind = SurfaceInfo::Kind::Cap;
  s.info.radius = radius;
  SimplicialMesh& m = s.mesh;
  m.ambient_dim = cone.ambient_dim();
  if (cone.ambient_dim() == 2) {
    bool full = cone.region() == ConeRegion::FullSphere;
    double a0, a1;
    if (full) {
      a0 = 0;
      a1 = 2 * M_PI;
    } else if (cone.region() == ConeRegion::PlanarSector) {
      a0 = cone.sector_start();
      a1 = a0 + cone.sector_angle();
    } else if (cone.region() == ConeRegion::HalfSpace) {
      double mid = std::atan2(cone.axis()[1], cone.axis()[0]);
      a0 = mid - M_PI / 2;
      a1 = mid + M_PI / 2;
    } else {
      fail(ErrorKind::InvalidArgument, "region/dimension mismatch");
    }
    int nv = full ? resolution : resolution + 1;
    for (int i = 0; i < nv; ++i) {
      double t = full ? a0 + (a1 - a0) * i / resolution : a0 + (a1 - a0) * i / resolution;
      m.vertices.push_back(make_vec2(radius * std::cos(t), radius * std::sin(t)));
    }
    for (int i = 0; i + 1 < nv; ++i) m.segments.push_back({i, i + 1});
    if (full) m.segments.push_back({nv - 1, 0});
    m.closed = full;
    m.normal_sign = 1.0;  // CCW: rotated tangent points inward
    return s;
  }

  // UV-style cap triangulation with a fan at the axis pole.
  Vec axis;
  double t1;
  switch (cone.region()) {
    case ConeRegion::FullSphere:
      axis = make_vec3(0, 0, 1);
      t1 = M_PI;
      break;
    case ConeRegion::HalfSpace:
      axis = cone.axis();
      t1 = M_PI / 2;
      break;
    case ConeRegion::Circular:
      axis = cone.axis();
      t1 = cone.half_aperture();
      break;
    default:
      fail(ErrorKind::InvalidArgument, "region/dimension mismatch");
  }
  auto [e1, e2] = complete_frame(axis);
  int rows = resolution;
  int cols = 2 * resolution;
  bool south_pole = cone.region() == ConeRegion::FullSphere;
  int last_ring = south_pole ? rows - 1 : rows;
  m.vertices.push_back((radius * axis).eval());  // north pole
  auto ring_vertex = [&](int i, int j) { return 1 + (i - 1) * cols + (j % cols); };
  for (int i = 1; i <= last_ring; ++i) {
    double th = t1 * i / rows;
    for (int j = 0; j < cols; ++j) {
      double ph = 2 * M_PI * j / cols;
      Vec u = std::cos(ph) * e1 + std::sin(ph) * e2;
      m.vertices.push_back((radius * (std::cos(th) * axis + std::sin(th) * u)).eval());
    }
  }
  for (int j = 0; j < cols; ++j) {
    m.triangles.push_back({0, ring_vertex(1, j), ring_vertex(1, j + 1)});
  }
  for (int i = 1; i < last_ring; ++i) {
    for (int j = 0; j < cols; ++j) {
      int a = ring_vertex(i, j), b = ring_vertex(i, j + 1);
      int c2 = ring_vertex(i + 1, j), d = ring_vertex(i + 1, j + 1);
      m.triangles.push_back({a, c2, d});
      m.triangles.push_back({a, d, b});
    }
  }
  if (south_pole) {
    int south = static_cast<int>(m.vertices.size());
    m.vertices.push_back((-radius * axis).eval());
    for (int j = 0; j < cols; ++j) {
      m.triangles.push_back({ring_vertex(last_ring, j + 1), ring_vertex(last_ring, j), south});
    }
  }
  m.normal_sign = -1.0;  // winding above is outward; flip to inward normals
  return s;
}

DiscreteHypersurface mesh_ellipsoid(const Vec& semiaxes, int resolution) {
  SolidCone cone = SolidCone::full_sphere(static_cast<int>(semiaxes.size()));
  DiscreteHypersurface s = mesh_cap(cone, 1.0, resolution);
  for (Vec& v : s.mesh.vertices) {
    for (int i = 0; i < v.size(); ++i) v[i] *= semiaxes[i];
  }
  s.info.kind = SurfaceInfo::Kind::Ellipsoid;
  s.info.radius = 0.0;
  return s;
}

// --- imports ----------------------------------------------------------------

DiscreteHypersurface import_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path);
  DiscreteHypersurface s;
  s.backend = Backend::Simplicial;
  s.ambient_dim = 3;
  s.mesh.ambient_dim = 3;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) {
        fail(ErrorKind::IoError, "bad vertex at line " + std::to_string(lineno));
      }
      s.mesh.vertices.push_back(make_vec3(x, y, z));
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        size_t slash = tok.find('/');
        if (slash != std::string::npos) tok = tok.substr(0, slash);
        int v = std::stoi(tok);
        if (v < 0) v = static_cast<int>(s.mesh.vertices.size()) + v + 1;
        if (v < 1 || v > static_cast<int>(s.mesh.vertices.size())) {
          fail(ErrorKind::IoError, "face index out of range at line " + std::to_string(lineno));
        }
        idx.push_back(v - 1);
      }
      if (idx.size() < 3) fail(ErrorKind::IoError, "degenerate face at line " + std::to_string(lineno));
      for (size_t t = 1; t + 1 < idx.size(); ++t) {
        s.mesh.triangles.push_back({idx[0], idx[t], idx[t + 1]});
      }
    }
  }
  if (s.mesh.vertices.empty() || s.mesh.triangles.empty()) {
    fail(ErrorKind::IoError, "OBJ file has no usable geometry");
  }
  // Orient toward the centroid (inward) by majority vote.
  Vec centroid = Vec::Zero(3);
  for (const Vec& v : s.mesh.vertices) centroid += v;
  centroid /= static_cast<double>(s.mesh.vertices.size());
  double vote = 0;
  for (const auto& t : s.mesh.triangles) {
    Vec a = s.mesh.vertices[static_cast<size_t>(t[0])];
    Vec raw = cross3(s.mesh.vertices[static_cast<size_t>(t[1])] - a,
                     s.mesh.vertices[static_cast<size_t>(t[2])] - a);
    vote += raw.dot(a - centroid);
  }
  s.mesh.normal_sign = vote > 0 ? -1.0 : 1.0;
  return s;
}

DiscreteHypersurface import_polyline_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path);
  DiscreteHypersurface s;
  s.backend = Backend::Simplicial;
  s.ambient_dim = 2;
  s.mesh.ambient_dim = 2;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    for (char& ch : line) {
      if (ch == ',' || ch == ';') ch = ' ';
    }
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y)) {
      if (lineno == 1) continue;  // tolerate a header row
      fail(ErrorKind::IoError, "bad row at line " + std::to_string(lineno));
    }
    s.mesh.vertices.push_back(make_vec2(x, y));
  }
  if (s.mesh.vertices.size() < 3) fail(ErrorKind::IoError, "polyline needs >= 3 points");
  Vec first = s.mesh.vertices.front(), last = s.mesh.vertices.back();
  bool closed = (first - last).norm() < 1e-12 * (1 + first.norm());
  if (closed) s.mesh.vertices.pop_back();
  int nv = static_cast<int>(s.mesh.vertices.size());
  for (int i = 0; i + 1 < nv; ++i) s.mesh.segments.push_back({i, i + 1});
  if (closed) s.mesh.segments.push_back({nv - 1, 0});
  s.mesh.closed = closed;
  // CCW check via the signed area; inward normals need CCW ordering.
  double area2 = 0;
  for (int i = 0; i < nv; ++i) {
    const Vec& a = s.mesh.vertices[static_cast<size_t>(i)];
    const Vec& b = s.mesh.vertices[static_cast<size_t>((i + 1) % nv)];
    area2 += a[0] * b[1] - b[0] * a[1];
  }
  s.mesh.normal_sign = (closed && area2 < 0) ? -1.0 : 1.0;
  return s;
}

Vec project_to_wall(const SolidCone& cone, const Vec& p) {
  switch (cone.region()) {
    case ConeRegion::FullSphere:
      fail(ErrorKind::InvalidArgument, "full space has no wall");
    case ConeRegion::HalfSpace:
      return (p - p.dot(cone.axis()) * cone.axis()).eval();
    case ConeRegion::Circular: {
      double r = p.norm();
      if (r < 1e-300) return p;
      Vec q = p / r;
      double c = q.dot(cone.axis());
      Vec perp = q - c * cone.axis();
      double s = perp.norm();
      if (s < 1e-14) fail(ErrorKind::ProjectionDegenerate, "point on the cone axis");
      double al = cone.half_aperture();
      Vec qb = std::cos(al) * cone.axis() + std::sin(al) * (perp / s);
      return (r * qb).eval();
    }
    case ConeRegion::PlanarSector: {
      double r = p.norm();
      if (r < 1e-300) return p;
      double base = cone.sector_start() - M_PI + cone.sector_angle() / 2;
      double theta = std::fmod(std::atan2(p[1], p[0]) - base, 2 * M_PI);
      if (theta < 0) theta += 2 * M_PI;
      theta += base;
      double d0 = std::abs(theta - cone.sector_start());
      double d1 = std::abs(theta - (cone.sector_start() + cone.sector_angle()));
      double edge = d0 <= d1 ? cone.sector_start() : cone.sector_start() + cone.sector_angle();
      return make_vec2(r * std::cos(edge), r * std::sin(edge));
    }
  }
  fail(ErrorKind::InvalidArgument, "unreachable");
}

}  // namespace conelab
