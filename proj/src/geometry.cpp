#include "conelab/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace conelab {

namespace {

// Per-component differentiation of a tabulated chart via the axis matrices.
struct TableDerivatives {
  std::vector<Vec> d1[2];
  std::vector<Vec> d2[3];  // 0: axis0 twice, 1: mixed, 2: axis1 twice
};

TableDerivatives differentiate_table(const ParametricChart& chart, bool second_order) {
  TableDerivatives out;
  int m0 = chart.nodes[0];
  int m1 = chart.param_dim == 2 ? chart.nodes[1] : 1;
  int dim = static_cast<int>(chart.table.front().size());
  AxisRule r0 = make_axis_rule(chart.lo[0], chart.hi[0], m0, chart.periodic[0], true);
  AxisRule r1;
  if (chart.param_dim == 2) {
    r1 = make_axis_rule(chart.lo[1], chart.hi[1], m1, chart.periodic[1], true);
  }
  size_t n = chart.table.size();
  for (auto& v : out.d1) v.assign(n, Vec());
  for (auto& v : out.d2) v.assign(n, Vec());
  for (size_t i = 0; i < n; ++i) {
    out.d1[0][i] = Vec::Zero(dim);
    out.d1[1][i] = chart.param_dim == 2 ? Vec::Zero(dim) : Vec();
    if (second_order) {
      out.d2[0][i] = Vec::Zero(dim);
      if (chart.param_dim == 2) {
        out.d2[1][i] = Vec::Zero(dim);
        out.d2[2][i] = Vec::Zero(dim);
      }
    }
  }
  MatX comp(m0, m1);
  for (int c = 0; c < dim; ++c) {
    for (int i = 0; i < m0; ++i) {
      for (int j = 0; j < m1; ++j) comp(i, j) = chart.table[chart.index(i, j)][c];
    }
    MatX du = r0.d1 * comp;
    MatX duu = second_order ? MatX(r0.d2 * comp) : MatX();
    MatX dv, dvv, duv;
    if (chart.param_dim == 2) {
      dv = comp * r1.d1.transpose();
      if (second_order) {
        dvv = comp * r1.d2.transpose();
        duv = r0.d1 * comp * r1.d1.transpose();
      }
    }
    for (int i = 0; i < m0; ++i) {
      for (int j = 0; j < m1; ++j) {
        size_t idx = chart.index(i, j);
        out.d1[0][idx][c] = du(i, j);
        if (chart.param_dim == 2) out.d1[1][idx][c] = dv(i, j);
        if (second_order) {
          out.d2[0][idx][c] = duu(i, j);
          if (chart.param_dim == 2) {
            out.d2[1][idx][c] = duv(i, j);
            out.d2[2][idx][c] = dvv(i, j);
          }
        }
      }
    }
  }
  return out;
}

double chart_param(const ParametricChart& chart, int axis, int i) {
  int m = chart.nodes[axis];
  double h = chart.periodic[axis] ? (chart.hi[axis] - chart.lo[axis]) / m
                                  : (chart.hi[axis] - chart.lo[axis]) / (m - 1);
  return chart.lo[axis] + h * i;
}

}  // namespace

std::vector<ChartJet> chart_jets(const ParametricChart& chart, bool second_order) {
  std::vector<ChartJet> jets(chart.table.size());
  if (chart.analytic()) {
    int m1 = chart.param_dim == 2 ? chart.nodes[1] : 1;
    for (int i = 0; i < chart.nodes[0]; ++i) {
      double a = chart_param(chart, 0, i);
      for (int j = 0; j < m1; ++j) {
        double b = chart.param_dim == 2 ? chart_param(chart, 1, j) : 0.0;
        jets[chart.index(i, j)] = chart.jet(a, b);
      }
    }
    return jets;
  }
  TableDerivatives d = differentiate_table(chart, second_order);
  for (size_t idx = 0; idx < chart.table.size(); ++idx) {
    ChartJet& j = jets[idx];
    j.p = chart.table[idx];
    j.d1[0] = d.d1[0][idx];
    if (chart.param_dim == 2) j.d1[1] = d.d1[1][idx];
    if (second_order) {
      j.d2[0] = d.d2[0][idx];
      if (chart.param_dim == 2) {
        j.d2[1] = d.d2[1][idx];
        j.d2[2] = d.d2[2][idx];
      }
    }
  }
  return jets;
}

std::array<std::vector<double>, 2> chart_scalar_d1(const ParametricChart& chart,
                                                   const std::vector<double>& values) {
  int m0 = chart.nodes[0];
  int m1 = chart.param_dim == 2 ? chart.nodes[1] : 1;
  if (static_cast<int>(values.size()) != m0 * m1) {
    fail(ErrorKind::InvalidArgument, "scalar field size mismatch");
  }
  AxisRule r0 = make_axis_rule(chart.lo[0], chart.hi[0], m0, chart.periodic[0], true);
  MatX comp(m0, m1);
  for (int i = 0; i < m0; ++i) {
    for (int j = 0; j < m1; ++j) comp(i, j) = values[chart.index(i, j)];
  }
  MatX du = r0.d1 * comp;
  std::array<std::vector<double>, 2> out;
  out[0].assign(values.size(), 0.0);
  for (int i = 0; i < m0; ++i) {
    for (int j = 0; j < m1; ++j) out[0][chart.index(i, j)] = du(i, j);
  }
  if (chart.param_dim == 2) {
    AxisRule r1 = make_axis_rule(chart.lo[1], chart.hi[1], m1, chart.periodic[1], true);
    MatX dv = comp * r1.d1.transpose();
    out[1].assign(values.size(), 0.0);
    for (int i = 0; i < m0; ++i) {
      for (int j = 0; j < m1; ++j) out[1][chart.index(i, j)] = dv(i, j);
    }
  }
  return out;
}

namespace {

// Curvature data for one parametric node.
struct NodeGeometry {
  Vec normal;
  double jacobian = 0;
  double H = 0;
  double sigma2 = 0;
  bool degenerate = false;
};

NodeGeometry node_geometry_1d(const ChartJet& j, double sign, double scale) {
  NodeGeometry g;
  const Vec& t = j.d1[0];
  g.jacobian = t.norm();
  if (g.jacobian < kDegenerateJacobian * scale) {
    g.degenerate = true;
    g.normal = Vec::Zero(2);
    return g;
  }
  Vec tau = t / g.jacobian;
  g.normal = sign * rotate90(tau);
  if (j.d2[0].size()) {
    double cross = t[0] * j.d2[0][1] - t[1] * j.d2[0][0];
    g.H = sign * cross / (g.jacobian * g.jacobian * g.jacobian);
    g.sigma2 = g.H * g.H;
  }
  return g;
}

NodeGeometry node_geometry_2d(const ChartJet& j, double sign, double scale) {
  NodeGeometry g;
  const Vec& xu = j.d1[0];
  const Vec& xv = j.d1[1];
  Vec w = cross3(xu, xv);
  g.jacobian = w.norm();
  if (g.jacobian < kDegenerateJacobian * scale * scale) {
    g.degenerate = true;
    g.normal = Vec::Zero(3);
    return g;
  }
  g.normal = sign * (w / g.jacobian);
  if (j.d2[0].size()) {
    double E = xu.dot(xu), F = xu.dot(xv), G = xv.dot(xv);
    double e = j.d2[0].dot(g.normal);
    double f = j.d2[1].dot(g.normal);
    double gg = j.d2[2].dot(g.normal);
    double det = E * G - F * F;
    double tr = (e * G - 2 * f * F + gg * E) / det;
    double dets = (e * gg - f * f) / det;
    g.H = 0.5 * tr;
    g.sigma2 = tr * tr - 2 * dets;
  }
  return g;
}

void apply_density(GeometryCache& cache, const HomogeneousDensity& density, const SolidCone& cone,
                   int i) {
  const Vec& p = cache.position[static_cast<size_t>(i)];
  double f = density.evaluate(cone, p);
  cache.f[static_cast<size_t>(i)] = f;
  if (f > 0 && std::isfinite(f)) {
    AmbientJet jet = density.ambient_jet(cone, p);
    cache.grad_psi[static_cast<size_t>(i)] = jet.grad_psi;
    cache.Hf[static_cast<size_t>(i)] = cache.n * cache.H[static_cast<size_t>(i)] -
                                       jet.grad_psi.dot(cache.normal[static_cast<size_t>(i)]);
  } else {
    // Density vanishes (profile zero on the wall): weighted contributions
    // of this sample are zero, so H_f is reported unweighted.
    cache.grad_psi[static_cast<size_t>(i)] = Vec::Zero(cache.ambient_dim);
    cache.Hf[static_cast<size_t>(i)] = cache.n * cache.H[static_cast<size_t>(i)];
  }
  cache.support[static_cast<size_t>(i)] =
      cache.position[static_cast<size_t>(i)].dot(cache.normal[static_cast<size_t>(i)]);
}

void finish_scalars(GeometryCache& cache) {
  double rmin = std::numeric_limits<double>::infinity();
  for (const Vec& p : cache.position) rmin = std::min(rmin, p.norm());
  cache.min_radius = rmin;
}

void guard_vertex(const GeometryCache& cache, const HomogeneousDensity& density) {
  if (density.degree() >= 0) return;
  double rmax = 0;
  for (const Vec& p : cache.position) rmax = std::max(rmax, p.norm());
  if (cache.min_radius < 1e-12 * rmax) {
    fail(ErrorKind::VertexSingular,
         "surface reaches the vertex while the density degree is negative");
  }
}

void geometry_parametric(GeometryCache& cache, const DiscreteHypersurface& surface,
                         const HomogeneousDensity& density, const SolidCone& cone) {
  const ParametricChart& chart = surface.chart;
  if (chart.table.empty()) fail(ErrorKind::InvalidArgument, "chart has no table");
  int n_samples = static_cast<int>(chart.table.size());
  cache.resize(n_samples);
  cache.n = chart.param_dim;

  std::vector<ChartJet> jets = chart_jets(chart, true);
  double scale = 0;
  for (const Vec& p : chart.table) scale = std::max(scale, p.norm());
  if (scale <= 0) fail(ErrorKind::InvalidArgument, "chart table is all zeros");

  AxisRule r0 = make_axis_rule(chart.lo[0], chart.hi[0], chart.nodes[0], chart.periodic[0], false);
  AxisRule r1;
  int m1 = 1;
  if (chart.param_dim == 2) {
    r1 = make_axis_rule(chart.lo[1], chart.hi[1], chart.nodes[1], chart.periodic[1], false);
    m1 = r1.nodes;
  }

  double h_phys = 0;
  for (int i = 0; i < chart.nodes[0]; ++i) {
    for (int j = 0; j < m1; ++j) {
      size_t idx = chart.index(i, j);
      const ChartJet& jet = jets[idx];
      NodeGeometry g = chart.param_dim == 1 ? node_geometry_1d(jet, chart.normal_sign, scale)
                                            : node_geometry_2d(jet, chart.normal_sign, scale);
      cache.position[idx] = jet.p;
      cache.normal[idx] = g.normal;
      cache.H[idx] = g.H;
      cache.sigma2[idx] = g.sigma2;
      cache.degenerate[idx] = g.degenerate;
      cache.jac[idx] = g.jacobian;
      cache.d1u[idx] = jet.d1[0];
      if (chart.param_dim == 2) cache.d1v[idx] = jet.d1[1];
      double w = r0.weights[static_cast<size_t>(i)];
      if (chart.param_dim == 2) w *= r1.weights[static_cast<size_t>(j)];
      cache.da_weight[idx] = g.degenerate ? 0.0 : w * g.jacobian;
      if (!g.degenerate) {
        h_phys = std::max(h_phys, r0.h * jet.d1[0].norm());
        if (chart.param_dim == 2) h_phys = std::max(h_phys, r1.h * jet.d1[1].norm());
        if (chart.param_dim == 1) {
          cache.inv_g00[idx] = 1.0 / (g.jacobian * g.jacobian);
        } else {
          double E = jet.d1[0].dot(jet.d1[0]);
          double F = jet.d1[0].dot(jet.d1[1]);
          double G = jet.d1[1].dot(jet.d1[1]);
          double det = E * G - F * F;
          cache.inv_g00[idx] = G / det;
          cache.inv_g01[idx] = -F / det;
          cache.inv_g11[idx] = E / det;
        }
      }
    }
  }
  cache.h_disc = h_phys;

  // Degenerate nodes (chart poles): zero quadrature weight. Fill the normal
  // and curvatures from the sphere data when available, else copy a neighbor
  // so downstream consumers never see zeros.
  for (int i = 0; i < chart.nodes[0]; ++i) {
    for (int j = 0; j < m1; ++j) {
      size_t idx = chart.index(i, j);
      if (!cache.degenerate[idx]) continue;
      if (surface.info.kind == SurfaceInfo::Kind::Cap ||
          surface.info.kind == SurfaceInfo::Kind::SphereThroughOrigin) {
        Vec center = surface.info.center.size()
                         ? surface.info.center
                         : Vec(Vec::Zero(cache.ambient_dim));
        double r = surface.info.radius;
        cache.normal[idx] = (center - cache.position[idx]) / r;
        cache.H[idx] = 1.0 / r;
        cache.sigma2[idx] = cache.n / (r * r);
      } else {
        int ii = i == 0 ? 1 : (i == chart.nodes[0] - 1 ? chart.nodes[0] - 2 : i);
        size_t src = chart.index(ii, j);
        if (cache.degenerate[src]) continue;
        cache.normal[idx] = cache.normal[src];
        cache.H[idx] = cache.H[src];
        cache.sigma2[idx] = cache.sigma2[src];
      }
    }
  }

  for (int i = 0; i < n_samples; ++i) apply_density(cache, density, cone, i);

  // Boundary samples along FreeBoundary faces.
  auto add_boundary_row = [&](int axis, bool at_hi) {
    int edge_i = at_hi ? chart.nodes[axis] - 1 : 0;
    int other = 1 - axis;
    int count = chart.param_dim == 2 ? chart.nodes[other] : 1;
    const AxisRule& rule_other = other == 0 ? r0 : r1;
    for (int j = 0; j < count; ++j) {
      size_t idx = axis == 0 ? chart.index(edge_i, chart.param_dim == 2 ? j : 0)
                             : chart.index(j, edge_i);
      if (cache.degenerate[idx]) continue;
      BoundarySample b;
      b.sample_index = static_cast<int>(idx);
      b.p = cache.position[idx];
      b.normal = cache.normal[idx];
      const Vec& along = axis == 0 ? jets[idx].d1[0] : jets[idx].d1[1];
      Vec inward = at_hi ? (-along).eval() : along;
      if (chart.param_dim == 2) {
        const Vec& edge_dir = axis == 0 ? jets[idx].d1[1] : jets[idx].d1[0];
        Vec t = edge_dir / edge_dir.norm();
        inward -= inward.dot(t) * t;
        b.dl_weight = rule_other.weights[static_cast<size_t>(j)] * edge_dir.norm();
      } else {
        b.dl_weight = 1.0;  // counting measure on a 0-dimensional boundary
      }
      double nn = inward.norm();
      if (nn < 1e-14) continue;
      b.conormal = inward / nn;  // inner conormal, pointing into the surface
      b.f = cache.f[idx];
      b.wall_normal = cone.boundary_inner_normal(b.p);
      b.II_NN = cone.boundary_II(b.p, b.normal);
      b.support = b.p.dot(b.normal);
      cache.boundary.push_back(std::move(b));
    }
  };
  for (int axis = 0; axis < chart.param_dim; ++axis) {
    if (chart.periodic[axis]) continue;
    if (chart.face[chart.face_index(axis, false)] == FaceKind::FreeBoundary) {
      add_boundary_row(axis, false);
    }
    if (chart.face[chart.face_index(axis, true)] == FaceKind::FreeBoundary) {
      add_boundary_row(axis, true);
    }
  }
}

// Discrete curvature of a closed or open polyline via turning angles.
// Segments glued to the wall are excluded from area and connectivity; the rim
// where the retained part meets them behaves as free boundary.
void geometry_polyline(GeometryCache& cache, const DiscreteHypersurface& surface,
                       const HomogeneousDensity& density, const SolidCone& cone) {
  const SimplicialMesh& mesh = surface.mesh;
  int nv = static_cast<int>(mesh.vertices.size());
  cache.resize(nv);
  cache.n = 1;

  double scale = 0;
  for (const Vec& p : mesh.vertices) scale = std::max(scale, p.norm());

  std::vector<bool> excluded(mesh.segments.size(), false);
  if (cone.region() != ConeRegion::FullSphere) {
    for (size_t e = 0; e < mesh.segments.size(); ++e) {
      const Vec& a = mesh.vertices[static_cast<size_t>(mesh.segments[e][0])];
      const Vec& b = mesh.vertices[static_cast<size_t>(mesh.segments[e][1])];
      if (cone.boundary_distance(a) < 1e-8 * scale && cone.boundary_distance(b) < 1e-8 * scale) {
        excluded[e] = true;
        ++cache.excluded_cells;
      }
    }
  }
  cache.excluded_cell.assign(excluded.begin(), excluded.end());

  std::vector<std::vector<int>> incident_all(static_cast<size_t>(nv));
  std::vector<std::vector<int>> incident(static_cast<size_t>(nv));  // active only
  for (int e = 0; e < static_cast<int>(mesh.segments.size()); ++e) {
    for (int v : mesh.segments[static_cast<size_t>(e)]) {
      incident_all[static_cast<size_t>(v)].push_back(e);
      if (!excluded[static_cast<size_t>(e)]) incident[static_cast<size_t>(v)].push_back(e);
    }
  }

  double h = 0;
  std::vector<int> interior_neighbor(static_cast<size_t>(nv), -1);
  for (int i = 0; i < nv; ++i) {
    if (incident_all[static_cast<size_t>(i)].empty() ||
        incident_all[static_cast<size_t>(i)].size() > 2) {
      fail(ErrorKind::InvalidArgument, "polyline vertex with bad valence");
    }
    cache.position[static_cast<size_t>(i)] = mesh.vertices[static_cast<size_t>(i)];
    const auto& inc = incident[static_cast<size_t>(i)];
    if (inc.empty()) {
      // Vertex belongs only to wall-glued segments; it carries no area and is
      // dropped from operators downstream.
      cache.normal[static_cast<size_t>(i)] = cone.has_boundary()
                                                 ? cone.boundary_inner_normal(
                                                       mesh.vertices[static_cast<size_t>(i)])
                                                 : Vec(Vec::Zero(2));
      cache.degenerate[static_cast<size_t>(i)] = true;
      continue;
    }
    Vec prev_dir = Vec::Zero(2), next_dir = Vec::Zero(2);
    double len_prev = 0, len_next = 0;
    for (int e : inc) {
      int a = mesh.segments[static_cast<size_t>(e)][0];
      int b = mesh.segments[static_cast<size_t>(e)][1];
      Vec d = mesh.vertices[static_cast<size_t>(b)] - mesh.vertices[static_cast<size_t>(a)];
      if (b == i) {
        prev_dir = d;
        len_prev = d.norm();
        interior_neighbor[static_cast<size_t>(i)] = a;
      } else {
        next_dir = d;
        len_next = d.norm();
        interior_neighbor[static_cast<size_t>(i)] = b;
      }
    }
    bool interior = inc.size() == 2 && len_prev > 0 && len_next > 0;
    Vec tangent = interior ? (prev_dir / len_prev + next_dir / len_next).eval()
                           : (len_prev > 0 ? prev_dir : next_dir);
    double tn = tangent.norm();
    if (tn < 1e-14) fail(ErrorKind::InvalidArgument, "degenerate polyline corner");
    tangent /= tn;
    cache.normal[static_cast<size_t>(i)] = mesh.normal_sign * rotate90(tangent);
    double kappa = 0;
    if (interior) {
      double turn = std::atan2(prev_dir[0] * next_dir[1] - prev_dir[1] * next_dir[0],
                               prev_dir.dot(next_dir));
      double lbar = 0.5 * (len_prev + len_next);
      kappa = mesh.normal_sign * 2.0 * std::sin(turn / 2) / lbar;
    }
    cache.H[static_cast<size_t>(i)] = kappa;
    cache.sigma2[static_cast<size_t>(i)] = kappa * kappa;
    double w = 0;
    for (int e : inc) {
      int a = mesh.segments[static_cast<size_t>(e)][0];
      int b = mesh.segments[static_cast<size_t>(e)][1];
      double len = (mesh.vertices[static_cast<size_t>(b)] -
                    mesh.vertices[static_cast<size_t>(a)])
                       .norm();
      w += 0.5 * len;
      h = std::max(h, len);
    }
    cache.da_weight[static_cast<size_t>(i)] = w;
  }
  cache.h_disc = h;

  // One-sided vertices have no turning angle; borrow curvature from the
  // adjacent interior vertex (exact on arcs of constant curvature).
  for (int i = 0; i < nv; ++i) {
    if (incident[static_cast<size_t>(i)].size() != 1) continue;
    int j = interior_neighbor[static_cast<size_t>(i)];
    if (j >= 0 && incident[static_cast<size_t>(j)].size() == 2) {
      cache.H[static_cast<size_t>(i)] = cache.H[static_cast<size_t>(j)];
      cache.sigma2[static_cast<size_t>(i)] = cache.sigma2[static_cast<size_t>(j)];
    }
  }

  // Endpoint chord tangents tilt by O(h); refit with a one-sided parabola
  // through the two nearest curve vertices so the conormal (and the endpoint
  // normal) are second order.
  std::vector<Vec> endpoint_inward(static_cast<size_t>(nv), Vec(Vec::Zero(2)));
  for (int i = 0; i < nv; ++i) {
    const auto& inc = incident[static_cast<size_t>(i)];
    if (inc.size() != 1) continue;
    int j = interior_neighbor[static_cast<size_t>(i)];
    Vec chord = mesh.vertices[static_cast<size_t>(j)] - mesh.vertices[static_cast<size_t>(i)];
    Vec inward = chord;
    int l = -1;
    for (int e : incident[static_cast<size_t>(j)]) {
      for (int v : mesh.segments[static_cast<size_t>(e)]) {
        if (v != i && v != j) l = v;
      }
    }
    if (l >= 0) {
      double s1 = chord.norm();
      double s2 =
          (mesh.vertices[static_cast<size_t>(l)] - mesh.vertices[static_cast<size_t>(j)]).norm();
      if (s1 > 1e-14 && s2 > 1e-14) {
        double c0 = -(2 * s1 + s2) / (s1 * (s1 + s2));
        double c1 = (s1 + s2) / (s1 * s2);
        double c2 = -s1 / (s2 * (s1 + s2));
        inward = c0 * mesh.vertices[static_cast<size_t>(i)] +
                 c1 * mesh.vertices[static_cast<size_t>(j)] +
                 c2 * mesh.vertices[static_cast<size_t>(l)];
      }
    }
    double nn = inward.norm();
    if (nn < 1e-14) inward = chord;
    endpoint_inward[static_cast<size_t>(i)] = inward.normalized();
    bool starts_here = mesh.segments[static_cast<size_t>(inc[0])][0] == i;
    Vec tau = starts_here ? endpoint_inward[static_cast<size_t>(i)]
                          : (-endpoint_inward[static_cast<size_t>(i)]).eval();
    cache.normal[static_cast<size_t>(i)] = mesh.normal_sign * rotate90(tau);
  }

  for (int i = 0; i < nv; ++i) apply_density(cache, density, cone, i);

  for (int i = 0; i < nv; ++i) {
    if (incident[static_cast<size_t>(i)].size() != 1) continue;
    if (cone.region() == ConeRegion::FullSphere) {
      fail(ErrorKind::BoundaryTooClose, "open curve in a cone without wall");
    }
    BoundarySample b;
    b.sample_index = i;
    b.p = cache.position[static_cast<size_t>(i)];
    b.normal = cache.normal[static_cast<size_t>(i)];
    b.conormal = endpoint_inward[static_cast<size_t>(i)];  // inner conormal
    b.dl_weight = 1.0;
    b.f = cache.f[static_cast<size_t>(i)];
    b.wall_normal = cone.boundary_inner_normal(b.p);
    b.II_NN = cone.boundary_II(b.p, b.normal);
    b.support = b.p.dot(b.normal);
    cache.boundary.push_back(std::move(b));
  }
}

// Triangle-mesh curvature: angle-weighted normals, cotangent mean curvature,
// and a least-squares shape operator from edge normal curvatures.
void geometry_trimesh(GeometryCache& cache, const DiscreteHypersurface& surface,
                      const HomogeneousDensity& density, const SolidCone& cone) {
  const SimplicialMesh& mesh = surface.mesh;
  int nv = static_cast<int>(mesh.vertices.size());
  cache.resize(nv);
  cache.n = 2;

  double scale = 0;
  for (const Vec& p : mesh.vertices) scale = std::max(scale, p.norm());

  std::vector<bool> excluded(mesh.triangles.size(), false);
  if (cone.region() != ConeRegion::FullSphere) {
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
      bool all_glued = true;
      for (int v : mesh.triangles[t]) {
        if (cone.boundary_distance(mesh.vertices[static_cast<size_t>(v)]) > 1e-8 * scale) {
          all_glued = false;
          break;
        }
      }
      if (all_glued) {
        excluded[t] = true;
        ++cache.excluded_cells;
      }
    }
  }
  cache.excluded_cell.assign(excluded.begin(), excluded.end());

  std::vector<Vec> vertex_normal(static_cast<size_t>(nv), Vec::Zero(3));
  std::vector<double> vertex_area(static_cast<size_t>(nv), 0.0);
  std::vector<Vec> cotan_sum(static_cast<size_t>(nv), Vec::Zero(3));
  std::vector<std::vector<int>> neighbors(static_cast<size_t>(nv));
  std::map<std::pair<int, int>, int> edge_use;  // active triangles only
  double h = 0;

  auto add_neighbor = [&](int a, int b) {
    auto& list = neighbors[static_cast<size_t>(a)];
    if (std::find(list.begin(), list.end(), b) == list.end()) list.push_back(b);
  };

  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (excluded[t]) continue;
    const auto& tri = mesh.triangles[t];
    Vec x[3] = {mesh.vertices[static_cast<size_t>(tri[0])],
                mesh.vertices[static_cast<size_t>(tri[1])],
                mesh.vertices[static_cast<size_t>(tri[2])]};
    Vec raw = cross3(x[1] - x[0], x[2] - x[0]);
    double area2 = raw.norm();
    if (area2 < 1e-300) continue;
    Vec n_face = mesh.normal_sign * raw / area2;
    for (int c = 0; c < 3; ++c) {
      int i = tri[c], jn = tri[(c + 1) % 3], kn = tri[(c + 2) % 3];
      Vec u = x[(c + 1) % 3] - x[c];
      Vec v = x[(c + 2) % 3] - x[c];
      double angle = std::atan2(cross3(u, v).norm(), u.dot(v));
      vertex_normal[static_cast<size_t>(i)] += angle * n_face;
      add_neighbor(i, jn);
      add_neighbor(i, kn);
      h = std::max(h, u.norm());
      // Cotangent weight for the edge opposite this corner.
      double cot = u.dot(v) / cross3(u, v).norm();
      Vec e = x[(c + 1) % 3] - x[(c + 2) % 3];
      cotan_sum[static_cast<size_t>(jn)] += cot * (-e);
      cotan_sum[static_cast<size_t>(kn)] += cot * e;
      edge_use[{std::min(jn, kn), std::max(jn, kn)}]++;
      vertex_area[static_cast<size_t>(i)] += area2 / 6.0;
    }
  }
  cache.h_disc = h;

  std::vector<bool> on_rim(static_cast<size_t>(nv), false);
  for (const auto& [edge, uses] : edge_use) {
    if (uses == 1) {
      on_rim[static_cast<size_t>(edge.first)] = true;
      on_rim[static_cast<size_t>(edge.second)] = true;
    }
  }

  for (int i = 0; i < nv; ++i) {
    cache.position[static_cast<size_t>(i)] = mesh.vertices[static_cast<size_t>(i)];
    double nn = vertex_normal[static_cast<size_t>(i)].norm();
    if (nn < 1e-300) {
      // Vertex belongs only to wall-glued triangles: inert, zero weight.
      cache.normal[static_cast<size_t>(i)] =
          cone.has_boundary() ? cone.boundary_inner_normal(mesh.vertices[static_cast<size_t>(i)])
                              : Vec(Vec::Zero(3));
      cache.degenerate[static_cast<size_t>(i)] = true;
      continue;
    }
    Vec N = vertex_normal[static_cast<size_t>(i)] / nn;
    cache.normal[static_cast<size_t>(i)] = N;
    double A = vertex_area[static_cast<size_t>(i)];
    cache.da_weight[static_cast<size_t>(i)] = A;
    // Mean curvature from the cotangent Laplacian of the position: the
    // discrete Laplacian equals 2 H N for the inward normal convention.
    double H = 0;
    if (A > 1e-300) {
      Vec lap = cotan_sum[static_cast<size_t>(i)] / (2.0 * A);
      H = 0.5 * lap.dot(N);
    }
    cache.H[static_cast<size_t>(i)] = H;

    // sigma^2 from a least-squares symmetric shape operator over the 1-ring.
    Vec t1 = std::abs(N[0]) < 0.9 ? make_vec3(1, 0, 0) : make_vec3(0, 1, 0);
    t1 = (t1 - t1.dot(N) * N).normalized();
    Vec t2 = cross3(N, t1);
    Eigen::Matrix3d AtA = Eigen::Matrix3d::Zero();
    Eigen::Vector3d Atb = Eigen::Vector3d::Zero();
    int rows = 0;
    for (int jn : neighbors[static_cast<size_t>(i)]) {
      Vec d = mesh.vertices[static_cast<size_t>(jn)] - mesh.vertices[static_cast<size_t>(i)];
      double dn2 = d.squaredNorm();
      if (dn2 < 1e-300) continue;
      double kappa = 2.0 * d.dot(N) / dn2;
      Vec tang = d - d.dot(N) * N;
      double tn = tang.norm();
      if (tn < 1e-12 * std::sqrt(dn2)) continue;
      tang /= tn;
      double c1 = tang.dot(t1), c2 = tang.dot(t2);
      Eigen::Vector3d row(c1 * c1, 2 * c1 * c2, c2 * c2);
      AtA += row * row.transpose();
      Atb += row * kappa;
      ++rows;
    }
    double sigma2 = 2 * H * H;
    if (rows >= 3) {
      Eigen::Vector3d s = AtA.ldlt().solve(Atb);
      sigma2 = s[0] * s[0] + 2 * s[1] * s[1] + s[2] * s[2];
    }
    cache.sigma2[static_cast<size_t>(i)] = sigma2;
  }

  // Cotangent curvature is unreliable along the rim; borrow from an interior
  // neighbor (exact on constant-curvature caps).
  for (int i = 0; i < nv; ++i) {
    if (!on_rim[static_cast<size_t>(i)] || cache.degenerate[static_cast<size_t>(i)]) continue;
    for (int jn : neighbors[static_cast<size_t>(i)]) {
      if (on_rim[static_cast<size_t>(jn)] || cache.degenerate[static_cast<size_t>(jn)]) continue;
      cache.H[static_cast<size_t>(i)] = cache.H[static_cast<size_t>(jn)];
      cache.sigma2[static_cast<size_t>(i)] = cache.sigma2[static_cast<size_t>(jn)];
      break;
    }
  }

  for (int i = 0; i < nv; ++i) apply_density(cache, density, cone, i);

  // Boundary edges of the retained surface: used by exactly one active
  // triangle.
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (excluded[t]) continue;
    const auto& tri = mesh.triangles[t];
    for (int c = 0; c < 3; ++c) {
      int a = tri[c], b = tri[(c + 1) % 3];
      if (edge_use[{std::min(a, b), std::max(a, b)}] != 1) continue;
      if (cone.region() == ConeRegion::FullSphere) {
        fail(ErrorKind::BoundaryTooClose, "open mesh in a cone without wall");
      }
      const Vec& xa = mesh.vertices[static_cast<size_t>(a)];
      const Vec& xb = mesh.vertices[static_cast<size_t>(b)];
      const Vec& xc = mesh.vertices[static_cast<size_t>(tri[(c + 2) % 3])];
      Vec mid = 0.5 * (xa + xb);
      Vec e = xb - xa;
      double len = e.norm();
      if (len < 1e-300) continue;
      Vec n_face = mesh.normal_sign * cross3(xb - xa, xc - xa).normalized();
      Vec nu = cross3(n_face, e / len);
      if (nu.dot(xc - mid) < 0) nu = -nu;  // inner conormal
      BoundarySample bs;
      bs.sample_index = a;
      bs.edge = {a, b};
      bs.p = mid;
      bs.normal = 0.5 * (cache.normal[static_cast<size_t>(a)] +
                         cache.normal[static_cast<size_t>(b)]);
      bs.normal.normalize();
      bs.conormal = nu;
      bs.dl_weight = len;
      bs.f = 0.5 * (cache.f[static_cast<size_t>(a)] + cache.f[static_cast<size_t>(b)]);
      bs.wall_normal = cone.boundary_inner_normal(mid);
      bs.II_NN = cone.boundary_II(mid, bs.normal);
      bs.support = mid.dot(bs.normal);
      cache.boundary.push_back(std::move(bs));
    }
  }
}

}  // namespace

GeometryCache geometry(const DiscreteHypersurface& surface, const HomogeneousDensity& density,
                       const SolidCone& cone) {
  if (surface.ambient_dim != cone.ambient_dim()) {
    fail(ErrorKind::InvalidArgument, "surface/cone dimension mismatch");
  }
  GeometryCache cache;
  cache.ambient_dim = surface.ambient_dim;
  cache.backend = surface.backend;
  if (surface.backend == Backend::Parametric) {
    geometry_parametric(cache, surface, density, cone);
  } else if (surface.mesh.ambient_dim == 2) {
    geometry_polyline(cache, surface, density, cone);
  } else {
    geometry_trimesh(cache, surface, density, cone);
  }
  finish_scalars(cache);
  guard_vertex(cache, density);
  return cache;
}

std::vector<double> support_function(const GeometryCache& cache) {
  std::vector<double> s(cache.position.size());
  for (size_t i = 0; i < s.size(); ++i) s[i] = cache.position[i].dot(cache.normal[i]);
  return s;
}

double GeometryCache::area_f() const {
  KahanSum s;
  for (size_t i = 0; i < da_weight.size(); ++i) s.add(da_weight[i] * f[i]);
  return s.value();
}

double GeometryCache::weighted_mean_Hf() const {
  KahanSum num, den;
  for (size_t i = 0; i < da_weight.size(); ++i) {
    double w = da_weight[i] * f[i];
    num.add(w * Hf[i]);
    den.add(w);
  }
  if (den.value() <= 0) fail(ErrorKind::SingularMass, "weighted area vanishes");
  return num.value() / den.value();
}

double GeometryCache::weighted_std_Hf() const {
  double mean = weighted_mean_Hf();
  KahanSum num, den;
  for (size_t i = 0; i < da_weight.size(); ++i) {
    double w = da_weight[i] * f[i];
    num.add(w * (Hf[i] - mean) * (Hf[i] - mean));
    den.add(w);
  }
  return std::sqrt(std::max(0.0, num.value() / den.value()));
}

void GeometryCache::resize(int n_samples) {
  size_t n = static_cast<size_t>(n_samples);
  position.assign(n, Vec());
  normal.assign(n, Vec());
  grad_psi.assign(n, Vec());
  d1u.assign(n, Vec());
  d1v.assign(n, Vec());
  f.assign(n, 0.0);
  H.assign(n, 0.0);
  sigma2.assign(n, 0.0);
  support.assign(n, 0.0);
  Hf.assign(n, 0.0);
  da_weight.assign(n, 0.0);
  jac.assign(n, 0.0);
  inv_g00.assign(n, 0.0);
  inv_g01.assign(n, 0.0);
  inv_g11.assign(n, 0.0);
  degenerate.assign(n, false);
}

void validate_in_cone(const DiscreteHypersurface& surface, const SolidCone& cone,
                      double tol_boundary) {
  double scale = 0;
  for (int i = 0; i < surface.sample_count(); ++i) {
    scale = std::max(scale, surface.sample(i).norm());
  }
  for (int i = 0; i < surface.sample_count(); ++i) {
    if (!cone.contains(surface.sample(i), 1e-9)) {
      fail(ErrorKind::OutsideCone, "surface sample leaves the cone");
    }
  }
  // Free-boundary samples must sit on the wall.
  auto check_on_wall = [&](const Vec& p) {
    if (cone.region() == ConeRegion::FullSphere) {
      fail(ErrorKind::BoundaryTooClose, "free boundary declared but the cone has no wall");
    }
    if (cone.boundary_distance(p) > tol_boundary * std::max(1.0, scale)) {
      fail(ErrorKind::BoundaryTooClose, "free boundary sample is not on the cone wall");
    }
  };
  if (surface.backend == Backend::Parametric) {
    const ParametricChart& c = surface.chart;
    int m1 = c.param_dim == 2 ? c.nodes[1] : 1;
    for (int axis = 0; axis < c.param_dim; ++axis) {
      if (c.periodic[axis]) continue;
      for (bool at_hi : {false, true}) {
        if (c.face[c.face_index(axis, at_hi)] != FaceKind::FreeBoundary) continue;
        int edge = at_hi ? c.nodes[axis] - 1 : 0;
        int count = axis == 0 ? m1 : c.nodes[0];
        for (int j = 0; j < count; ++j) {
          size_t idx = axis == 0 ? c.index(edge, c.param_dim == 2 ? j : 0) : c.index(j, edge);
          check_on_wall(c.table[idx]);
        }
      }
    }
  } else if (!surface.mesh.closed || !surface.mesh.triangles.empty()) {
    // Open simplicial boundaries: endpoints of open polylines, rim edges of
    // open meshes.
    if (surface.mesh.ambient_dim == 2) {
      if (!surface.mesh.closed) {
        std::vector<int> valence(surface.mesh.vertices.size(), 0);
        for (const auto& seg : surface.mesh.segments) {
          valence[static_cast<size_t>(seg[0])]++;
          valence[static_cast<size_t>(seg[1])]++;
        }
        for (size_t i = 0; i < valence.size(); ++i) {
          if (valence[i] == 1) check_on_wall(surface.mesh.vertices[i]);
        }
      }
    } else {
      std::map<std::pair<int, int>, int> edge_use;
      for (const auto& tri : surface.mesh.triangles) {
        for (int c = 0; c < 3; ++c) {
          int a = tri[c], b = tri[(c + 1) % 3];
          edge_use[{std::min(a, b), std::max(a, b)}]++;
        }
      }
      for (const auto& [edge, uses] : edge_use) {
        if (uses == 1) {
          check_on_wall(surface.mesh.vertices[static_cast<size_t>(edge.first)]);
          check_on_wall(surface.mesh.vertices[static_cast<size_t>(edge.second)]);
        }
      }
    }
  }
}

namespace {

DiscreteHypersurface rebuild_with_positions(const DiscreteHypersurface& surface,
                                            const std::vector<Vec>& positions,
                                            const SolidCone& cone) {
  DiscreteHypersurface out = surface;
  out.info.kind = SurfaceInfo::Kind::Generic;
  if (surface.backend == Backend::Parametric) {
    out.chart.pos = nullptr;
    out.chart.jet = nullptr;
    out.chart.table = positions;
  } else {
    out.mesh.vertices = positions;
  }
  for (const Vec& p : positions) {
    if (!cone.contains(p, 1e-9)) {
      fail(ErrorKind::StencilExitsCone, "deformed surface leaves the cone");
    }
  }
  return out;
}

// Boundary samples slide along the wall: project them back after moving.
void clamp_free_boundary(const DiscreteHypersurface& surface, std::vector<Vec>& positions,
                         const SolidCone& cone) {
  if (cone.region() == ConeRegion::FullSphere) return;
  auto clamp = [&](size_t idx) { positions[idx] = project_to_wall(cone, positions[idx]); };
  if (surface.backend == Backend::Parametric) {
    const ParametricChart& c = surface.chart;
    int m1 = c.param_dim == 2 ? c.nodes[1] : 1;
    for (int axis = 0; axis < c.param_dim; ++axis) {
      if (c.periodic[axis]) continue;
      for (bool at_hi : {false, true}) {
        if (c.face[c.face_index(axis, at_hi)] != FaceKind::FreeBoundary) continue;
        int edge = at_hi ? c.nodes[axis] - 1 : 0;
        int count = axis == 0 ? m1 : c.nodes[0];
        for (int j = 0; j < count; ++j) {
          clamp(axis == 0 ? c.index(edge, c.param_dim == 2 ? j : 0) : c.index(j, edge));
        }
      }
    }
  } else if (surface.mesh.ambient_dim == 2) {
    if (surface.mesh.closed) return;
    std::vector<int> valence(surface.mesh.vertices.size(), 0);
    for (const auto& seg : surface.mesh.segments) {
      valence[static_cast<size_t>(seg[0])]++;
      valence[static_cast<size_t>(seg[1])]++;
    }
    for (size_t i = 0; i < valence.size(); ++i) {
      if (valence[i] == 1) clamp(i);
    }
  } else {
    std::map<std::pair<int, int>, int> edge_use;
    for (const auto& tri : surface.mesh.triangles) {
      for (int c = 0; c < 3; ++c) {
        int a = tri[c], b = tri[(c + 1) % 3];
        edge_use[{std::min(a, b), std::max(a, b)}]++;
      }
    }
    for (const auto& [edge, uses] : edge_use) {
      if (uses == 1) {
        clamp(static_cast<size_t>(edge.first));
        clamp(static_cast<size_t>(edge.second));
      }
    }
  }
}

}  // namespace

DiscreteHypersurface deform_normal(const DiscreteHypersurface& surface,
                                   const GeometryCache& cache, const VecX& u, double t,
                                   const SolidCone& cone) {
  if (u.size() != surface.sample_count()) {
    fail(ErrorKind::InvalidArgument, "velocity size mismatch");
  }
  std::vector<Vec> positions(static_cast<size_t>(surface.sample_count()));
  for (int i = 0; i < surface.sample_count(); ++i) {
    positions[static_cast<size_t>(i)] =
        cache.position[static_cast<size_t>(i)] + t * u[i] * cache.normal[static_cast<size_t>(i)];
  }
  clamp_free_boundary(surface, positions, cone);
  return rebuild_with_positions(surface, positions, cone);
}

DiscreteHypersurface deform_by(const DiscreteHypersurface& surface,
                               const std::function<Vec(const Vec&)>& displacement, double t,
                               const SolidCone& cone) {
  std::vector<Vec> positions(static_cast<size_t>(surface.sample_count()));
  for (int i = 0; i < surface.sample_count(); ++i) {
    Vec p = surface.sample(i);
    positions[static_cast<size_t>(i)] = p + t * displacement(p);
  }
  clamp_free_boundary(surface, positions, cone);
  return rebuild_with_positions(surface, positions, cone);
}

}  // namespace conelab
