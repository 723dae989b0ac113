#pragma once

#include <Eigen/SparseCore>

#include "conelab/measures.hpp"

namespace conelab {

// Discrete quadratic forms of the weighted index form
//   I_f(u,v) = int <grad u, grad v> da_f - int W u v da_f - int II(N,N) u v dl_f
// with W = Ric_f(N,N) + |sigma|^2, so I_f(u,u) = u^T (K - P - B) u.
// Zero-mass samples (degenerate chart nodes, wall-glued vertices) are dropped;
// `kept` maps dof index to sample index.
struct WeightedOperators {
  Backend backend = Backend::Parametric;
  int dofs = 0;
  Eigen::SparseMatrix<double> K;  // stiffness
  Eigen::SparseMatrix<double> M;  // weighted mass
  Eigen::SparseMatrix<double> P;  // potential
  Eigen::SparseMatrix<double> B;  // wall Robin term
  std::vector<int> kept;
  std::vector<int> dropped;
  // Scatters dof vectors back to sample vectors: identity on kept samples.
  // Chart poles are tied to the average of the adjacent grid ring instead of
  // being zeroed, which keeps constants in the stiffness kernel on closed
  // surfaces.
  Eigen::SparseMatrix<double> prolongation;  // sample_count x dofs
  // Grid-noise kernel directions excluded from every spectrum solve. Fourier
  // differentiation on an even periodic grid annihilates the Nyquist sawtooth
  // (-1)^i, which would otherwise show up as a spurious soft mode.
  std::vector<VecX> deflate;
  std::vector<double> potential_value;  // W per sample (all samples)
  DiscreteHypersurface surface;         // collocation context
  GeometryCache cache;
};

WeightedOperators assemble(const DiscreteHypersurface& surface, const HomogeneousDensity& density,
                           const SolidCone& cone);

// I_f(u,v) from the assembled matrices; fields are indexed per sample.
double index_form(const WeightedOperators& ops, const ScalarField& u, const ScalarField& v);
double index_form(const WeightedOperators& ops, const ScalarField& u);

// Discrete f-Jacobi action L_f u = Delta_{Sigma,f} u + W u. Parametric charts
// use pointwise collocation (flux-form Laplacian); simplicial meshes use the
// weak action M^{-1}(-K + P) u, extended by zero on dropped samples.
ScalarField jacobi_apply(const WeightedOperators& ops, const ScalarField& u);

enum class SpectrumMode { All, MeanZero };

struct SpectrumResult {
  double lambda_min = 0.0;
  VecX eigenvector;  // per sample, zero on dropped samples
  int dofs = 0;
};

// Minimum generalized eigenvalue of (K - P - B) u = lambda M u; MeanZero
// restricts to 1^T M u = 0 by deflation. Dense solve, refused above 5000
// dofs.
SpectrumResult stability_spectrum(const WeightedOperators& ops, SpectrumMode mode);

// Lowest `count` eigenvalues of K u = lambda M u (no potential, no Robin
// term), with the same grid-noise deflation as stability_spectrum.
VecX laplace_eigenvalues(const WeightedOperators& ops, int count);

// Lowest `count` eigenvalues of the full pencil (K - P - B, M) in the given
// mode (for spectra exports); same deflation as stability_spectrum.
VecX spectrum_eigenvalues(const WeightedOperators& ops, SpectrumMode mode, int count);

struct StabilityReport {
  double Hf_mean = 0.0;
  double Hf_std = 0.0;
  double orthogonality_error = 0.0;  // max |<N, wall normal>| over boundary samples
  double lambda_min_all = 0.0;
  double lambda_min_meanzero = 0.0;
  bool stationary = false;
  bool strongly_stationary = false;
  bool f_stable = false;
  bool strongly_f_stable = false;
  bool refinement_checked = false;  // lambda verified Cauchy under refinement
  double refinement_delta = 0.0;    // relative lambda_mz change at the last step
  double tol_stationary = 0.0;      // tolerance actually used
  int dofs = 0;
};

// Backend-matched default: 1e-6 parametric, 10 h^2 simplicial.
double default_stationarity_tol(const GeometryCache& cache);

// H_f statistics and wall orthogonality only (no spectra).
StabilityReport stationarity_check(const DiscreteHypersurface& surface,
                                   const HomogeneousDensity& density, const SolidCone& cone,
                                   double tol_stationary = -1.0);

// Full verdicts at a single resolution (refinement_checked stays false).
StabilityReport stability_report(const DiscreteHypersurface& surface,
                                 const HomogeneousDensity& density, const SolidCone& cone,
                                 double tol_stationary = -1.0);

// Re-generates the surface across resolutions and requires lambda_min_meanzero
// to be non-increasing and Cauchy (2%) before trusting the final verdict.
StabilityReport stability_report(const std::function<DiscreteHypersurface(int)>& generator,
                                 const std::vector<int>& resolutions,
                                 const HomogeneousDensity& density, const SolidCone& cone,
                                 double tol_stationary = -1.0);

struct Variation {
  enum class Kind { Normal, Dilation, Parallel };
  Kind kind = Kind::Normal;
  ScalarField u;  // normal speed, Kind::Normal only
};

struct VariationDiagnostics {
  double dt = 0.0;
  double area_first = 0.0;  // 5-point stencil estimates
  double volume_first = 0.0;
  double area_first_expected = 0.0;  // -int H_f u da_f - int <X,nu> dl_f
  double volume_first_expected = 0.0;  // -int u da_f
  double second_combined = 0.0;        // (A_f - Hf_mean V_f)''(0)
  double index_form_value = 0.0;       // I_f(u,u) for the effective normal speed
  double Hf_rate = 0.0;                // d/dt Hf_mean (dilation check)
  double Hf_rate_expected = 0.0;
  double richardson_error = 0.0;  // relative dt vs dt/2 disagreement (first derivatives)
  bool richardson_ok = true;
  bool critical_degree = false;  // volume fields undefined
};

// dt <= 0 picks 1e-3 * surface diameter.
VariationDiagnostics run_variation(const DiscreteHypersurface& surface,
                                   const HomogeneousDensity& density, const SolidCone& cone,
                                   const Variation& variation, double dt = 0.0);

struct RescaledParallelReport {
  double dt = 0.0;
  double volume_drift = 0.0;    // max relative |V_f(t) - V_f(0)| over the stencil times
  double velocity_error = 0.0;  // sup per sample of |<X,N> - (n + k + H_f g)|
  double s_prime = 0.0;
  double s_prime_expected = 0.0;  // (n+k) A_f / ((n+k+1) V_f)
  bool stationary = true;         // false = diagnostics carry no guarantee
};

// Volume-renormalized parallel variation phi_t(p) = s(t)(p + t(n+k)N).
RescaledParallelReport rescaled_parallel(const DiscreteHypersurface& surface,
                                         const HomogeneousDensity& density, const SolidCone& cone,
                                         double dt = 0.0);

struct UmbilicityReport {
  ScalarField gap;          // Ric_f(N,N) + |sigma|^2 - H_f^2/(n+k) per sample
  ScalarField lower_bound;  // n/(k(n+k)) (<grad psi,N> + kH)^2
  double min_gap = 0.0;
  double max_gap = 0.0;
  double max_bound_violation = 0.0;  // max over samples of (lower_bound - gap)
};

// Needs k < -n or k > 0 (WrongDegreeRange otherwise).
UmbilicityReport umbilicity_gap(const DiscreteHypersurface& surface,
                                const HomogeneousDensity& density, const SolidCone& cone);

struct CutoffDecay {
  std::vector<double> eps;
  std::vector<double> energy;  // weighted Dirichlet energy of the cutoff
  double slope = 0.0;          // log-log fit
  double expected = 0.0;       // n + k - 2
  bool monotone = true;        // energies decrease as eps does
};

// Radial cutoff phi(|p|/eps) with a quintic smoothstep vanishing on B_{1/2}
// and equal to 1 outside B_1; needs n + k > 2 (HypothesisViolated otherwise).
CutoffDecay cutoff_energy_decay(const DiscreteHypersurface& surface,
                                const HomogeneousDensity& density, const SolidCone& cone,
                                const std::vector<double>& eps_list);

}  // namespace conelab
