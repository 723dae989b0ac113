#pragma once

#include "conelab/measures.hpp"

// Reference computations kept deliberately simple and separate from the
// optimized paths: closed forms, composite-Simpson quadrature, and plain
// central differences. Nothing in here reuses the chart-differentiation,
// Gregory-quadrature, or variation-stencil code it is meant to check.
namespace conelab::oracle {

enum class Method { ClosedForm, PolarQuadrature, FourierModes, FiniteDifference };

const char* method_name(Method m);

struct OracleResult {
  std::string name;
  std::vector<std::pair<std::string, double>> values;
  Method method = Method::ClosedForm;
  std::string detail;  // step sizes, resolutions, basis truncations
};

// 4th-order central-difference jet of a raw scalar function.
struct FdJet {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

FdJet fd_jet(const std::function<double(const Vec&)>& fun, const Vec& p, double h);

// Reference values for the spherical cap Sigma_r under a radial density of
// degree k with unit profile. Spectral references exist only where the
// harmonics separate: full circle, full sphere, half circle on a half plane.
struct CapReference {
  double Hf = 0.0;
  double area_formula_check = 0.0;  // |region| * r^(n+k)
  double potential = 0.0;           // (n+k)/r^2
  double min_eigen_all = 0.0;
  double min_eigen_meanzero = 0.0;
  bool has_spectrum = false;
  OracleResult record;
};

CapReference cap_reference(int n, double k, double r, const SolidCone& cone,
                           bool require_spectrum = false);

// Closed-form weighted area and oriented volume of the full sphere/circle of
// radius r with unit radial profile; the cone overload scales by the solid
// angle of the region.
struct RadialIntegrals {
  double circle_area = 0.0;
  double oriented_volume = 0.0;
  OracleResult record;
};

RadialIntegrals radial_integrals(int n, double k, double r);
RadialIntegrals radial_integrals(int n, double k, double r, const SolidCone& cone);

// Solid angle (arc length in 2D) of the cone's spherical region.
double region_measure(const SolidCone& cone);

// Ambient divergence theorem on the conical shell {r1 <= |p| <= r2} cut to
// the cone, by composite Simpson quadrature in polar/spherical coordinates.
// The density is a raw callback so it can be evaluated across the wall by
// the difference stencils; it must extend smoothly a little past it.
struct ShellDivergence {
  double volume_integral = 0.0;  // int div(f X) dv over the shell
  double flux_integral = 0.0;    // int <X, n_out> f da over its boundary
  double residual = 0.0;
  OracleResult record;
};

ShellDivergence shell_divergence(const SolidCone& cone,
                                 const std::function<double(const Vec&)>& density,
                                 const AmbientField& field, double r1, double r2,
                                 int resolution);

// Derivative estimates from re-evaluated functionals on deformed copies.
// Second-order central stencils per step size; Richardson extrapolation from
// the two smallest steps; the successive-difference ratio (about 4 under
// clean halving) guards against steps inside the roundoff floor.
struct StencilSeries {
  std::vector<double> estimate;  // one entry per step, largest step first
  double extrapolated = 0.0;
  double ratio = 0.0;  // 0 when fewer than three steps
  bool reliable = true;
};

struct BruteVariation {
  std::vector<double> dt;  // sorted, largest first
  StencilSeries area_first;
  StencilSeries volume_first;
  StencilSeries area_second;
  StencilSeries volume_second;
  bool volume_defined = true;  // false at the critical degree
  OracleResult record;
};

// Normal-speed variation p -> p + t u N.
BruteVariation brute_variation(const DiscreteHypersurface& surface,
                               const HomogeneousDensity& density, const SolidCone& cone,
                               const ScalarField& u, const std::vector<double>& dt_list);

// Dilation variation p -> (1 + t) p.
BruteVariation brute_dilation(const DiscreteHypersurface& surface,
                              const HomogeneousDensity& density, const SolidCone& cone,
                              const std::vector<double>& dt_list);

}  // namespace conelab::oracle
