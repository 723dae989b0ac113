#pragma once

#include "conelab/cone.hpp"
#include "conelab/expression.hpp"
#include "conelab/types.hpp"

#include <optional>

namespace conelab {

enum class ProfileFamily { Radial, Monomial, LinearPower, PerturbedRadial, Expression };

enum class DerivativeMode { Analytic, FiniteDifference };

// Log-profile data at a unit vector q: value, intrinsic spherical gradient
// (a tangent vector at q) and intrinsic spherical Hessian (a symmetric
// bilinear form on the tangent space, stored as an ambient matrix that
// annihilates q).
struct SphereJet {
  double mu = 0.0;
  Vec grad;
  Mat hess;
};

// First and second derivative data of log f at an ambient point.
struct AmbientJet {
  Vec point;
  double f_value = 0.0;
  Vec grad_psi;
  Mat hess_psi;
};

struct SampleSpec {
  int sphere_resolution = 48;  // base points across the spherical region
  double h_guard = 1e-3;       // radians kept clear of the region boundary
  double tolerance = 1e-9;     // certification slack on quadratic-form minima
};

struct CurvatureWitness {
  Vec point;
  Vec direction;
  double value = 0.0;
};

struct CurvatureReport {
  bool cd_certified = false;
  double min_ric_f_k = 0.0;
  double min_ric_f = 0.0;
  // Verdict of the profile-side inequality on the spherical region; the spec
  // for this tool requires it to agree with the direct quadratic-form scan.
  bool profile_test_certified = false;
  bool methods_agree = false;
  CurvatureWitness witness;
};

// Profile of a homogeneous density: the positive function eta on the unit
// sphere with f(p) = eta(p/|p|) |p|^k.
class DensityProfile {
 public:
  static DensityProfile radial(double constant = 1.0);
  static DensityProfile monomial(const std::vector<double>& exponents);
  static DensityProfile linear_power(const Vec& form, double power);
  static DensityProfile perturbed_radial(const Vec& direction, double amplitude);
  static DensityProfile expression(const std::string& source, int ambient_dim);

  ProfileFamily family() const { return family_; }
  int ambient_dim() const { return dim_; }  // 0 = any
  double monomial_degree() const;

  // eta and mu = log(eta) at a unit vector.
  double eta(const Vec& q) const;
  double mu(const Vec& q) const;

  // Intrinsic spherical derivatives of mu. Analytic for the built-in
  // families; great-circle finite differences otherwise (or when forced).
  SphereJet sphere_jet(const Vec& q, DerivativeMode mode, double h_sphere) const;

  std::string describe() const;

 private:
  DensityProfile() = default;
  SphereJet analytic_jet(const Vec& q) const;
  SphereJet stencil_jet(const Vec& q, double h) const;

  ProfileFamily family_ = ProfileFamily::Radial;
  int dim_ = 0;
  double constant_ = 1.0;
  std::vector<double> exponents_;
  Vec form_;
  double power_ = 0.0;
  Vec direction_;
  double amplitude_ = 0.0;
  Expression expr_;
};

// Homogeneous density f = eta(p/|p|) |p|^k on a solid cone, together with the
// derived objects of its weighted geometry: psi = log f, the Bakry-Emery
// tensor Ric_f = -Hess psi (the ambient space is flat) and its k-dimensional
// refinement Ric_f^k = Ric_f - (1/k) d psi (x) d psi.
class HomogeneousDensity {
 public:
  HomogeneousDensity(double degree, DensityProfile profile,
                     DerivativeMode mode = DerivativeMode::Analytic, double h_sphere = 1e-4);

  double degree() const { return degree_; }
  const DensityProfile& profile() const { return profile_; }
  DerivativeMode derivative_mode() const { return mode_; }
  bool is_radial() const { return profile_.family() == ProfileFamily::Radial; }

  // f(p); 0 at the vertex when k > 0 by continuity, VertexSingular otherwise.
  double evaluate(const SolidCone& cone, const Vec& p) const;
  // log f and its first two ambient derivatives, assembled from the profile's
  // spherical jet and the homogeneity degree.
  AmbientJet ambient_jet(const SolidCone& cone, const Vec& p) const;

  double ric_f(const SolidCone& cone, const Vec& p, const Vec& v) const;
  double ric_f_k(const SolidCone& cone, const Vec& p, const Vec& v) const;

  // Matrix forms at a point (quadratic forms of ric_f / ric_f_k).
  Mat ric_f_matrix(const AmbientJet& jet) const;
  Mat ric_f_k_matrix(const AmbientJet& jet) const;

  // Scan of the curvature-dimension condition CD(0, n+1+k): the sign of
  // Ric_f^k over the truncated cone, cross-checked against the equivalent
  // inequality for the profile on the spherical region.
  CurvatureReport certify_cd(const SolidCone& cone, const SampleSpec& spec) const;

  // Frobenius residual of Hess(f^{1/k}) + (1/k) f^{1/k} Ric_f^k at p, the
  // Hessian identity satisfied by the k-th root of the density. The Hessian
  // of f^{1/k} is recomputed by central differences, independent of the jet.
  double root_hessian_residual(const SolidCone& cone, const Vec& p) const;

  std::string describe() const;

 private:
  void require_in_cone(const SolidCone& cone, const Vec& p) const;

  double degree_;
  DensityProfile profile_;
  DerivativeMode mode_;
  double h_sphere_;
};

// Deterministic orthonormal tangent frame at a unit vector (n = dim - 1
// vectors). Shared by stencil code and certification scans.
std::vector<Vec> tangent_frame(const Vec& q);

}  // namespace conelab
