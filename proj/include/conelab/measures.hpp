#pragma once

#include "conelab/surface.hpp"

namespace conelab {

using ScalarField = std::vector<double>;

// Ambient vector field with an optional analytic divergence; a 4th-order
// central difference fills in when none is supplied.
struct AmbientField {
  std::function<Vec(const Vec&)> value;
  std::function<double(const Vec&)> divergence;
};

AmbientField position_field();
AmbientField constant_field(const Vec& direction);

// Quadrature view of a geometry cache (for inspection and reporting).
struct QuadratureRule {
  std::vector<Vec> nodes;
  std::vector<double> weights;  // unweighted area weights
  int order = 0;                // 4 parametric, 2 simplicial
  bool compensated = true;
};

QuadratureRule quadrature_rule(const GeometryCache& cache);

// A_f(Sigma) = integral of f over the surface samples.
double weighted_area(const GeometryCache& cache);

// V_f(Sigma) = (-1/(n+k+1)) * integral of <p, N> f da. Throws CriticalDegree
// at k = -(n+1).
double oriented_volume(const GeometryCache& cache, const HomogeneousDensity& density);

// Ambient weighted divergence div X + <grad psi, X> at a point.
double f_divergence(const HomogeneousDensity& density, const SolidCone& cone,
                    const AmbientField& field, const Vec& p);

// Tangential weighted divergence div_Sigma X + <grad psi, X> per sample, for
// a field given by its values on the surface samples.
ScalarField surface_f_divergence(const DiscreteHypersurface& surface, const GeometryCache& cache,
                                 const std::vector<Vec>& field);

// Tangential gradient of a sampled scalar (vector per sample).
std::vector<Vec> tangential_gradient(const DiscreteHypersurface& surface,
                                     const GeometryCache& cache, const ScalarField& values);

// Weighted surface Laplacian div_{Sigma,f}(grad_Sigma phi); parametric charts
// only (the simplicial counterpart lives in the operator assembly).
ScalarField weighted_laplacian(const DiscreteHypersurface& surface, const GeometryCache& cache,
                               const ScalarField& values);

// Residual of: int div_{Sigma,f} X da_f + int H_f <X,N> da_f
//            + int_{boundary} <X, nu> dl_f  (nu = inner conormal).
double verify_surface_divergence_theorem(const DiscreteHypersurface& surface,
                                         const GeometryCache& cache, const AmbientField& field);

struct MinkowskiReport {
  double residual_integral = 0.0;  // int (n + k + H_f g) da_f
  double area = 0.0;
  double oriented_volume = 0.0;
  double identity_gap = 0.0;  // (n+k) A_f - (n+k+1) Hf_mean V_f
  double relative_residual = 0.0;
  double relative_gap = 0.0;
  double Hf_mean = 0.0;
  double Hf_std = 0.0;
  bool stationary = false;       // H_f constant within tolerance
  bool critical_degree = false;  // k = -(n+1): volume and gap not defined
  bool forced_zero_Hf = false;   // k = -n: stationarity forces H_f = 0
};

MinkowskiReport minkowski(const GeometryCache& cache, const HomogeneousDensity& density,
                          double tol_stationary = 1e-6);

// u = n + k + H_f g with constant H_f when the surface is stationary within
// tolerance; otherwise the per-sample H_f is used and the flag is cleared.
struct TestFieldResult {
  ScalarField values;
  bool constant_Hf = true;
  double Hf_used = 0.0;
};

TestFieldResult minkowski_test_field(const GeometryCache& cache,
                                     const HomogeneousDensity& density,
                                     double tol_stationary = 1e-6);

// Log-log slopes of A_f and V_f under dilations.
struct ScalingFit {
  double area_slope = 0.0;
  double volume_slope = 0.0;
};

ScalingFit scaling_exponents(const DiscreteHypersurface& surface,
                             const HomogeneousDensity& density, const SolidCone& cone,
                             const std::vector<double>& factors);

}  // namespace conelab
