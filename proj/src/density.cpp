#include "conelab/density.hpp"

#include <cmath>
#include <sstream>

namespace conelab {

std::vector<Vec> tangent_frame(const Vec& q) {
  if (q.size() == 2) return {rotate90(q)};
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(q[i]) < std::abs(q[axis])) axis = i;
  }
  Vec e = Vec::Zero(3);
  e[axis] = 1.0;
  Vec t1 = (e - e.dot(q) * q).normalized();
  Vec t2 = cross3(q, t1);
  return {t1, t2};
}

DensityProfile DensityProfile::radial(double constant) {
  if (!(constant > 0)) fail(ErrorKind::InvalidArgument, "radial constant must be positive");
  DensityProfile p;
  p.family_ = ProfileFamily::Radial;
  p.constant_ = constant;
  return p;
}

DensityProfile DensityProfile::monomial(const std::vector<double>& exponents) {
  if (exponents.size() != 2 && exponents.size() != 3) {
    fail(ErrorKind::InvalidArgument, "monomial exponents must be 2D or 3D");
  }
  for (double a : exponents) {
    if (a < 0) fail(ErrorKind::InvalidArgument, "monomial exponents must be >= 0");
  }
  DensityProfile p;
  p.family_ = ProfileFamily::Monomial;
  p.dim_ = static_cast<int>(exponents.size());
  p.exponents_ = exponents;
  return p;
}

DensityProfile DensityProfile::linear_power(const Vec& form, double power) {
  if (form.norm() < 1e-14) fail(ErrorKind::InvalidArgument, "linear form is zero");
  DensityProfile p;
  p.family_ = ProfileFamily::LinearPower;
  p.dim_ = static_cast<int>(form.size());
  p.form_ = form;
  p.power_ = power;
  return p;
}

DensityProfile DensityProfile::perturbed_radial(const Vec& direction, double amplitude) {
  DensityProfile p;
  p.family_ = ProfileFamily::PerturbedRadial;
  p.dim_ = static_cast<int>(direction.size());
  p.direction_ = direction;
  p.amplitude_ = amplitude;
  return p;
}

DensityProfile DensityProfile::expression(const std::string& source, int ambient_dim) {
  if (ambient_dim != 2 && ambient_dim != 3) {
    fail(ErrorKind::InvalidArgument, "ambient dimension must be 2 or 3");
  }
  DensityProfile p;
  p.family_ = ProfileFamily::Expression;
  p.dim_ = ambient_dim;
  std::vector<std::string> vars =
      ambient_dim == 2 ? std::vector<std::string>{"theta"} : std::vector<std::string>{"theta", "phi"};
  p.expr_ = Expression::parse(source, vars);
  return p;
}

double DensityProfile::monomial_degree() const {
  double k = 0;
  for (double a : exponents_) k += a;
  return k;
}

double DensityProfile::eta(const Vec& q) const {
  switch (family_) {
    case ProfileFamily::Radial:
      return constant_;
    case ProfileFamily::Monomial: {
      double v = 1.0;
      for (int i = 0; i < q.size(); ++i) {
        if (exponents_[static_cast<size_t>(i)] == 0.0) continue;
        if (q[i] < 0) return std::numeric_limits<double>::quiet_NaN();
        v *= std::pow(q[i], exponents_[static_cast<size_t>(i)]);
      }
      return v;
    }
    case ProfileFamily::LinearPower: {
      double s = form_.dot(q);
      if (s < 0 && power_ != std::floor(power_)) return std::numeric_limits<double>::quiet_NaN();
      return std::pow(s, power_);
    }
    case ProfileFamily::PerturbedRadial:
      return std::exp(amplitude_ * direction_.dot(q));
    case ProfileFamily::Expression: {
      if (q.size() == 2) return expr_.eval({std::atan2(q[1], q[0])});
      double theta = std::acos(std::clamp(q[2], -1.0, 1.0));
      double phi = std::atan2(q[1], q[0]);
      return expr_.eval({theta, phi});
    }
  }
  return 0.0;
}

double DensityProfile::mu(const Vec& q) const { return std::log(eta(q)); }

SphereJet DensityProfile::sphere_jet(const Vec& q, DerivativeMode mode, double h_sphere) const {
  bool analytic = mode == DerivativeMode::Analytic && family_ != ProfileFamily::Expression;
  return analytic ? analytic_jet(q) : stencil_jet(q, h_sphere);
}

SphereJet DensityProfile::analytic_jet(const Vec& q) const {
  int d = static_cast<int>(q.size());
  Mat P = Mat::Identity(d, d) - q * q.transpose();
  SphereJet jet;
  jet.grad = Vec::Zero(d);
  jet.hess = Mat::Zero(d, d);
  switch (family_) {
    case ProfileFamily::Radial:
      jet.mu = std::log(constant_);
      return jet;
    case ProfileFamily::Monomial: {
      // mu = sum a_i log q_i on the sphere; its degree-0 extension subtracts
      // (sum a_i) log|x|.
      double k = monomial_degree();
      double m = 0.0;
      Vec g = Vec::Zero(d);
      Mat h = Mat::Zero(d, d);
      for (int i = 0; i < d; ++i) {
        double a = exponents_[static_cast<size_t>(i)];
        if (a == 0.0) continue;
        if (q[i] <= 0) fail(ErrorKind::OutsideCone, "monomial profile needs positive coordinates");
        m += a * std::log(q[i]);
        g[i] = a / q[i];
        h(i, i) = -a / (q[i] * q[i]);
      }
      jet.mu = m;
      jet.grad = g - k * q;
      jet.hess = P * h * P - k * P;
      return jet;
    }
    case ProfileFamily::LinearPower: {
      double s = form_.dot(q);
      if (s <= 0) fail(ErrorKind::OutsideCone, "linear form not positive at this direction");
      jet.mu = power_ * std::log(s);
      jet.grad = (power_ / s) * form_ - power_ * q;
      jet.hess = -(power_ / (s * s)) * (P * form_) * (P * form_).transpose() - power_ * P;
      return jet;
    }
    case ProfileFamily::PerturbedRadial: {
      double s = direction_.dot(q);
      jet.mu = amplitude_ * s;
      jet.grad = amplitude_ * (P * direction_);
      jet.hess = -amplitude_ * s * P;
      return jet;
    }
    case ProfileFamily::Expression:
      break;  // handled by stencils
  }
  fail(ErrorKind::InvalidArgument, "no analytic jet for this family");
}

SphereJet DensityProfile::stencil_jet(const Vec& q, double h) const {
  // Great-circle stencils: c(s) = q cos s + t sin s is a unit-speed geodesic,
  // so d/ds and d^2/ds^2 of mu(c(s)) at 0 are the intrinsic derivatives.
  int d = static_cast<int>(q.size());
  auto along = [&](const Vec& t, double s) { return mu(std::cos(s) * q + std::sin(s) * t); };
  auto d1 = [&](const Vec& t) {
    return (-along(t, 2 * h) + 8 * along(t, h) - 8 * along(t, -h) + along(t, -2 * h)) / (12 * h);
  };
  double mu0 = mu(q);
  auto d2 = [&](const Vec& t) {
    return (-along(t, 2 * h) + 16 * along(t, h) - 30 * mu0 + 16 * along(t, -h) -
            along(t, -2 * h)) /
           (12 * h * h);
  };

  std::vector<Vec> frame = tangent_frame(q);
  SphereJet jet;
  jet.mu = mu0;
  jet.grad = Vec::Zero(d);
  jet.hess = Mat::Zero(d, d);
  std::vector<double> diag(frame.size());
  for (size_t a = 0; a < frame.size(); ++a) {
    double ga = d1(frame[a]);
    diag[a] = d2(frame[a]);
    jet.grad += ga * frame[a];
    jet.hess += diag[a] * frame[a] * frame[a].transpose();
  }
  if (frame.size() == 2) {
    Vec diagdir = ((frame[0] + frame[1]) / std::sqrt(2.0)).eval();
    double hdd = d2(diagdir);
    double h01 = hdd - 0.5 * (diag[0] + diag[1]);
    jet.hess += h01 * (frame[0] * frame[1].transpose() + frame[1] * frame[0].transpose());
  }
  return jet;
}

std::string DensityProfile::describe() const {
  std::ostringstream os;
  switch (family_) {
    case ProfileFamily::Radial: os << "radial(c=" << constant_ << ")"; break;
    case ProfileFamily::Monomial: {
      os << "monomial(";
      for (size_t i = 0; i < exponents_.size(); ++i) os << (i ? "," : "") << exponents_[i];
      os << ")";
      break;
    }
    case ProfileFamily::LinearPower: os << "linear_power(k=" << power_ << ")"; break;
    case ProfileFamily::PerturbedRadial: os << "perturbed_radial(a=" << amplitude_ << ")"; break;
    case ProfileFamily::Expression: os << "expression(" << expr_.source() << ")"; break;
  }
  return os.str();
}

HomogeneousDensity::HomogeneousDensity(double degree, DensityProfile profile, DerivativeMode mode,
                                       double h_sphere)
    : degree_(degree), profile_(std::move(profile)), mode_(mode), h_sphere_(h_sphere) {
  if (profile_.family() == ProfileFamily::Monomial &&
      std::abs(profile_.monomial_degree() - degree_) > 1e-12) {
    fail(ErrorKind::InvalidArgument, "monomial degree must equal the sum of exponents");
  }
  if (!(h_sphere_ > 0) || h_sphere_ > 0.1) {
    fail(ErrorKind::InvalidArgument, "h_sphere must lie in (0, 0.1]");
  }
}

void HomogeneousDensity::require_in_cone(const SolidCone& cone, const Vec& p) const {
  if (!cone.contains(p)) {
    fail(ErrorKind::OutsideCone, "point outside the solid cone");
  }
}

double HomogeneousDensity::evaluate(const SolidCone& cone, const Vec& p) const {
  require_in_cone(cone, p);
  double r = p.norm();
  if (r < 1e-14) {
    if (degree_ > 0) return 0.0;  // continuous extension
    fail(ErrorKind::VertexSingular, "density undefined at the vertex for degree <= 0");
  }
  return profile_.eta(p / r) * std::pow(r, degree_);
}

AmbientJet HomogeneousDensity::ambient_jet(const SolidCone& cone, const Vec& p) const {
  require_in_cone(cone, p);
  double r = p.norm();
  if (r < 1e-14) fail(ErrorKind::VertexSingular, "log-density jet undefined at the vertex");
  Vec q = p / r;
  SphereJet sj = profile_.sphere_jet(q, mode_, h_sphere_);
  int d = static_cast<int>(p.size());
  double k = degree_;

  AmbientJet jet;
  jet.point = p;
  jet.f_value = std::exp(sj.mu) * std::pow(r, k);
  jet.grad_psi = (k / r) * q + sj.grad / r;
  Mat I = Mat::Identity(d, d);
  jet.hess_psi = (k * (I - 2.0 * q * q.transpose()) - q * sj.grad.transpose() -
                  sj.grad * q.transpose() + sj.hess) /
                 (r * r);
  return jet;
}

double HomogeneousDensity::ric_f(const SolidCone& cone, const Vec& p, const Vec& v) const {
  AmbientJet jet = ambient_jet(cone, p);
  return -v.dot(jet.hess_psi * v);
}

double HomogeneousDensity::ric_f_k(const SolidCone& cone, const Vec& p, const Vec& v) const {
  if (degree_ == 0.0) fail(ErrorKind::DegreeZero, "Ric_f^k undefined for degree 0");
  AmbientJet jet = ambient_jet(cone, p);
  double dpsi = jet.grad_psi.dot(v);
  return -v.dot(jet.hess_psi * v) - dpsi * dpsi / degree_;
}

Mat HomogeneousDensity::ric_f_matrix(const AmbientJet& jet) const { return (-jet.hess_psi).eval(); }

Mat HomogeneousDensity::ric_f_k_matrix(const AmbientJet& jet) const {
  if (degree_ == 0.0) fail(ErrorKind::DegreeZero, "Ric_f^k undefined for degree 0");
  return (-jet.hess_psi - (jet.grad_psi * jet.grad_psi.transpose()) / degree_).eval();
}

CurvatureReport HomogeneousDensity::certify_cd(const SolidCone& cone, const SampleSpec& spec) const {
  if (degree_ == 0.0) fail(ErrorKind::DegreeZero, "CD certification needs degree != 0");
  double k = degree_;
  std::vector<Vec> qs = cone.sphere_samples(spec.sphere_resolution, spec.h_guard);

  CurvatureReport report;
  report.min_ric_f_k = std::numeric_limits<double>::infinity();
  report.min_ric_f = std::numeric_limits<double>::infinity();
  double max_profile_violation = -std::numeric_limits<double>::infinity();

  for (const Vec& q : qs) {
    // Direct scan: both tensors are quadratic forms, so the extreme values
    // over unit directions are eigenvalues. Sign along rays is scale
    // invariant, so radius 1 suffices.
    AmbientJet jet = ambient_jet(cone, q);
    Eigen::SelfAdjointEigenSolver<MatX> rf(MatX(ric_f_matrix(jet)));
    report.min_ric_f = std::min(report.min_ric_f, rf.eigenvalues().minCoeff());
    Eigen::SelfAdjointEigenSolver<MatX> rfk(MatX(ric_f_k_matrix(jet)));
    int lo = 0;
    rfk.eigenvalues().minCoeff(&lo);
    if (rfk.eigenvalues()[lo] < report.min_ric_f_k) {
      report.min_ric_f_k = rfk.eigenvalues()[lo];
      report.witness.point = q;
      report.witness.direction = rfk.eigenvectors().col(lo);
      report.witness.value = rfk.eigenvalues()[lo];
    }

    // Profile-side test: the equivalent statement on the spherical region is
    // hess_mu(v,v) + (1/k) <grad_mu, v>^2 + k <v,v> <= 0 on tangent vectors.
    SphereJet sj = profile_.sphere_jet(q, mode_, h_sphere_);
    std::vector<Vec> frame = tangent_frame(q);
    int n = static_cast<int>(frame.size());
    MatX T(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b <= a; ++b) {
        double hab = frame[a].dot(sj.hess * frame[b]);
        double gab = sj.grad.dot(frame[a]) * sj.grad.dot(frame[b]) / k;
        double val = hab + gab + (a == b ? k : 0.0);
        T(a, b) = T(b, a) = val;
      }
    }
    Eigen::SelfAdjointEigenSolver<MatX> ts(T);
    max_profile_violation = std::max(max_profile_violation, ts.eigenvalues().maxCoeff());
  }

  report.cd_certified = report.min_ric_f_k >= -spec.tolerance;
  report.profile_test_certified = max_profile_violation <= spec.tolerance;
  report.methods_agree = report.cd_certified == report.profile_test_certified;
  return report;
}

double HomogeneousDensity::root_hessian_residual(const SolidCone& cone, const Vec& p) const {
  if (degree_ == 0.0) fail(ErrorKind::DegreeZero, "k-th root undefined for degree 0");
  double k = degree_;
  int d = static_cast<int>(p.size());
  double r = p.norm();
  double h = 1e-4 * std::max(r, 1e-3);

  auto root = [&](const Vec& x) {
    if (!cone.contains(x)) fail(ErrorKind::StencilExitsCone, "stencil point left the cone");
    return std::pow(evaluate(cone, x), 1.0 / k);
  };

  Mat hess = Mat::Zero(d, d);
  double f0 = root(p);
  for (int i = 0; i < d; ++i) {
    Vec ei = Vec::Zero(d);
    ei[i] = h;
    hess(i, i) = (root(p + ei) - 2 * f0 + root(p - ei)) / (h * h);
    for (int j = 0; j < i; ++j) {
      Vec ej = Vec::Zero(d);
      ej[j] = h;
      double v = (root(p + ei + ej) - root(p + ei - ej) - root(p - ei + ej) + root(p - ei - ej)) /
                 (4 * h * h);
      hess(i, j) = hess(j, i) = v;
    }
  }

  AmbientJet jet = ambient_jet(cone, p);
  Mat expected = (-1.0 / k) * std::pow(jet.f_value, 1.0 / k) * ric_f_k_matrix(jet);
  return (hess - expected).norm();
}

std::string HomogeneousDensity::describe() const {
  std::ostringstream os;
  os << profile_.describe() << " * |p|^" << degree_;
  return os.str();
}

}  // namespace conelab
