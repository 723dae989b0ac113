#pragma once

#include "conelab/cone.hpp"
#include "conelab/density.hpp"
#include "conelab/types.hpp"

#include <array>
#include <functional>
#include <memory>
#include <optional>

namespace conelab {

enum class Backend { Parametric, Simplicial };

enum class FaceKind {
  FreeBoundary,  // chart edge resting on the cone wall
  Puncture,      // excluded neighborhood of the vertex (no boundary terms)
  Degenerate,    // chart pole (zero area element); not a true boundary
};

// Derivative data of a chart at one parameter point. d1 holds param_dim
// vectors, d2 the symmetric second derivatives (uu, uv, vv).
struct ChartJet {
  Vec p;
  std::array<Vec, 2> d1;
  std::array<Vec, 3> d2;
};

struct ParametricChart {
  int param_dim = 1;
  std::array<double, 2> lo{0, 0}, hi{0, 0};
  std::array<bool, 2> periodic{false, false};
  std::array<int, 2> nodes{0, 1};
  double normal_sign = 1.0;  // applied to the raw chart normal
  std::array<FaceKind, 4> face{FaceKind::FreeBoundary, FaceKind::FreeBoundary,
                               FaceKind::FreeBoundary, FaceKind::FreeBoundary};
  // Analytic description; absent for tabulated (deformed/imported) charts.
  std::function<Vec(double, double)> pos;
  std::function<ChartJet(double, double)> jet;
  // Node positions, always materialized (row-major, index = i0 * nodes[1] + i1).
  std::vector<Vec> table;

  bool analytic() const { return static_cast<bool>(jet); }
  int face_index(int axis, bool at_hi) const { return 2 * axis + (at_hi ? 1 : 0); }
  size_t index(int i0, int i1) const {
    return static_cast<size_t>(i0) * static_cast<size_t>(nodes[1]) + static_cast<size_t>(i1);
  }
};

// Relative jacobian threshold below which a chart node counts as a pole.
inline constexpr double kDegenerateJacobian = 1e-9;

struct SimplicialMesh {
  int ambient_dim = 2;
  std::vector<Vec> vertices;
  std::vector<std::array<int, 2>> segments;   // 2D polylines
  std::vector<std::array<int, 3>> triangles;  // 3D meshes
  bool closed = false;                        // polyline loop
  double normal_sign = 1.0;
};

// What the surface is, when a constructor knows (used by analyses that rely
// on exact sphere geometry, e.g. band refinement near the vertex).
struct SurfaceInfo {
  enum class Kind { Generic, Cap, SphereThroughOrigin, Ellipsoid } kind = Kind::Generic;
  Vec center;
  double radius = 0.0;
  double puncture_radius = 0.0;
};

// A discretized hypersurface: either a tensor-grid chart or a simplicial
// complex (polyline / triangle mesh).
class DiscreteHypersurface {
 public:
  Backend backend = Backend::Parametric;
  int ambient_dim = 2;
  ParametricChart chart;
  SimplicialMesh mesh;
  SurfaceInfo info;

  int surface_dim() const { return ambient_dim - 1; }
  int sample_count() const;
  Vec sample(int index) const;
  double min_radius() const;

  DiscreteHypersurface dilated(double factor) const;
  // Restrict an analytic chart to a sub-range of parameter axis 0 with a
  // fresh resolution (used for quadrature refinement near the vertex).
  DiscreteHypersurface subchart(double lo0, double hi0, int nodes0) const;
};

// Deterministic quadrature/differentiation rules for one parameter axis.
struct AxisRule {
  int nodes = 0;
  double h = 0.0;
  bool periodic = false;
  std::vector<double> weights;  // quadrature weights (4th order Gregory / trapezoid)
  MatX d1, d2;                  // differentiation matrices
};

AxisRule make_axis_rule(double lo, double hi, int nodes, bool periodic, bool with_derivatives);

struct BoundarySample {
  int sample_index = -1;           // owning surface sample (nearest node / vertex)
  std::array<int, 2> edge{-1, -1};  // endpoint vertices (triangle meshes only)
  Vec p;
  Vec normal;       // surface normal at the sample
  Vec conormal;     // inward conormal of the surface along its boundary
  Vec wall_normal;  // inner normal of the cone wall
  double f = 0.0;
  double dl_weight = 0.0;  // unweighted boundary measure
  double II_NN = 0.0;      // wall second fundamental form on the surface normal
  double support = 0.0;
};

// Per-sample geometric and density data; all weighted integrals and operator
// assemblies read from here.
struct GeometryCache {
  int ambient_dim = 2;
  int n = 1;  // surface dimension
  Backend backend = Backend::Parametric;

  std::vector<Vec> position, normal, grad_psi;
  std::vector<double> f;           // density value
  std::vector<double> H;           // mean curvature, H = -(1/n) div_N
  std::vector<double> sigma2;      // squared norm of the second fundamental form
  std::vector<double> support;     // <p, N>
  std::vector<double> Hf;          // weighted mean curvature nH - <grad psi, N>
  std::vector<double> da_weight;   // unweighted area quadrature weight
  std::vector<uint8_t> degenerate; // zero-area chart nodes (poles)

  std::vector<BoundarySample> boundary;

  // Parametric extras for operator assembly and tangential calculus.
  std::vector<Vec> d1u, d1v;
  std::vector<double> jac;                  // area element
  std::vector<double> inv_g00, inv_g01, inv_g11;  // inverse metric (2D charts)

  double min_radius = 0.0;
  double h_disc = 0.0;  // coarsest node spacing (tolerance scaling)
  int excluded_cells = 0;  // simplicial cells glued to the cone wall
  std::vector<uint8_t> excluded_cell;  // per segment/triangle, simplicial only

  double area_f() const;      // weighted area (compensated sum)
  double weighted_mean_Hf() const;
  double weighted_std_Hf() const;
  void resize(int n_samples);
};

// --- constructors ---------------------------------------------------------

// Spherical cap: intersection of the sphere |p| = r with the cone, meeting
// the wall orthogonally, inward normal N = -p/r.
DiscreteHypersurface make_cap(const SolidCone& cone, double radius, int resolution);

// Punctured round sphere through the vertex, center != 0, radius |center|;
// the puncture removes |p| <= puncture_radius (default 1e-3 * radius).
DiscreteHypersurface make_sphere_through_origin(const Vec& center, int resolution,
                                                double puncture_radius = -1.0);

DiscreteHypersurface make_ellipsoid(const Vec& semiaxes, int resolution);

// Radial graph p = rho(angles) * q(angles) over the cone's spherical region.
DiscreteHypersurface make_radial_graph(const SolidCone& cone,
                                       const std::function<double(double, double)>& rho,
                                       int resolution);

// Simplicial builders (P1 meshes).
DiscreteHypersurface mesh_cap(const SolidCone& cone, double radius, int resolution);
DiscreteHypersurface mesh_ellipsoid(const Vec& semiaxes, int resolution);

// Imports. OBJ subset: 'v' and 'f' records (triangles); polyline CSV: two
// columns x,y per line, closed when first == last point.
DiscreteHypersurface import_obj(const std::string& path);
DiscreteHypersurface import_polyline_csv(const std::string& path);

// --- geometry --------------------------------------------------------------

// Checks membership of every sample and that free-boundary samples rest on
// the cone wall within tol_boundary (relative to the surface scale).
void validate_in_cone(const DiscreteHypersurface& surface, const SolidCone& cone,
                      double tol_boundary = 1e-8);

GeometryCache geometry(const DiscreteHypersurface& surface, const HomogeneousDensity& density,
                       const SolidCone& cone);

// Support function <p, N> as a standalone field.
std::vector<double> support_function(const GeometryCache& cache);

// Jet of a tabulated or analytic chart at every node (differentiation
// matrices fill in when the chart is not analytic).
std::vector<ChartJet> chart_jets(const ParametricChart& chart, bool second_order = true);

// First derivatives of a per-node scalar along the chart axes.
std::array<std::vector<double>, 2> chart_scalar_d1(const ParametricChart& chart,
                                                   const std::vector<double>& values);

// Normal deformation p -> p + t u N with free-boundary samples slid back onto
// the cone wall; the result is a tabulated chart / moved mesh.
DiscreteHypersurface deform_normal(const DiscreteHypersurface& surface, const GeometryCache& cache,
                                   const VecX& u, double t, const SolidCone& cone);

// Displacement by an ambient field evaluated per sample (used for
// parallel-type deformations); same sliding rule.
DiscreteHypersurface deform_by(const DiscreteHypersurface& surface,
                               const std::function<Vec(const Vec&)>& displacement, double t,
                               const SolidCone& cone);

Vec project_to_wall(const SolidCone& cone, const Vec& p);

}  // namespace conelab
