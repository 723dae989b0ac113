#include "conelab/cone.hpp"

#include <cmath>
#include <sstream>

namespace conelab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OutsideCone: return "OutsideCone";
    case ErrorKind::VertexSingular: return "VertexSingular";
    case ErrorKind::DegreeZero: return "DegreeZero";
    case ErrorKind::CriticalDegree: return "CriticalDegree";
    case ErrorKind::BoundaryTooClose: return "BoundaryTooClose";
    case ErrorKind::NonRadialDensity: return "NonRadialDensity";
    case ErrorKind::WrongDegreeRange: return "WrongDegreeRange";
    case ErrorKind::HypothesisViolated: return "HypothesisViolated";
    case ErrorKind::StencilExitsCone: return "StencilExitsCone";
    case ErrorKind::SingularMass: return "SingularMass";
    case ErrorKind::ProjectionDegenerate: return "ProjectionDegenerate";
    case ErrorKind::NoSpectralReference: return "NoSpectralReference";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Error";
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorKind::InvalidArgument, "fit_slope needs >= 2 matched points");
  }
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-300) fail(ErrorKind::InvalidArgument, "degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

SolidCone SolidCone::full_sphere(int ambient_dim) {
  if (ambient_dim != 2 && ambient_dim != 3) {
    fail(ErrorKind::InvalidArgument, "ambient dimension must be 2 or 3");
  }
  SolidCone c;
  c.dim_ = ambient_dim;
  c.region_ = ConeRegion::FullSphere;
  return c;
}

SolidCone SolidCone::half_space(const Vec& inner_normal) {
  if (inner_normal.size() != 2 && inner_normal.size() != 3) {
    fail(ErrorKind::InvalidArgument, "half-space normal must be 2D or 3D");
  }
  double len = inner_normal.norm();
  if (len < 1e-14) fail(ErrorKind::InvalidArgument, "half-space normal is zero");
  SolidCone c;
  c.dim_ = static_cast<int>(inner_normal.size());
  c.region_ = ConeRegion::HalfSpace;
  c.axis_ = inner_normal / len;
  return c;
}

SolidCone SolidCone::circular(const Vec& axis, double half_aperture) {
  if (axis.size() != 3) fail(ErrorKind::InvalidArgument, "circular cones are 3D");
  if (!(half_aperture > 0.0 && half_aperture <= M_PI / 2)) {
    fail(ErrorKind::InvalidArgument, "half aperture must lie in (0, pi/2]");
  }
  double len = axis.norm();
  if (len < 1e-14) fail(ErrorKind::InvalidArgument, "axis is zero");
  SolidCone c;
  c.dim_ = 3;
  c.region_ = ConeRegion::Circular;
  c.axis_ = axis / len;
  c.half_aperture_ = half_aperture;
  return c;
}

SolidCone SolidCone::planar_sector(double angle, double start_angle) {
  if (!(angle > 0.0 && angle < 2 * M_PI)) {
    fail(ErrorKind::InvalidArgument, "sector angle must lie in (0, 2*pi)");
  }
  SolidCone c;
  c.dim_ = 2;
  c.region_ = ConeRegion::PlanarSector;
  c.angle_ = angle;
  c.start_angle_ = start_angle;
  return c;
}

SolidCone SolidCone::planar_sector(double angle) { return planar_sector(angle, -angle / 2); }

bool SolidCone::convex() const {
  switch (region_) {
    case ConeRegion::FullSphere:
    case ConeRegion::HalfSpace:
    case ConeRegion::Circular:  // half aperture <= pi/2 by construction
      return true;
    case ConeRegion::PlanarSector:
      return angle_ <= M_PI + 1e-15;
  }
  return false;
}

namespace {

// Wrap an angle into [base, base + 2*pi).
double wrap_angle(double theta, double base) {
  double t = std::fmod(theta - base, 2 * M_PI);
  if (t < 0) t += 2 * M_PI;
  return t + base;
}

}  // namespace

bool SolidCone::contains(const Vec& p, double tol) const {
  if (p.size() != dim_) fail(ErrorKind::InvalidArgument, "dimension mismatch");
  double r = p.norm();
  if (r < 1e-300) return true;  // the vertex belongs to every cone
  switch (region_) {
    case ConeRegion::FullSphere:
      return true;
    case ConeRegion::HalfSpace:
      return p.dot(axis_) >= -tol * r;
    case ConeRegion::Circular: {
      double c = p.dot(axis_) / r;
      return c >= std::cos(half_aperture_) - tol;
    }
    case ConeRegion::PlanarSector: {
      double theta = wrap_angle(std::atan2(p[1], p[0]), start_angle_ - tol * 2);
      return theta <= start_angle_ + angle_ + tol;
    }
  }
  return false;
}

double SolidCone::boundary_distance(const Vec& p) const {
  double r = p.norm();
  switch (region_) {
    case ConeRegion::FullSphere:
      return std::numeric_limits<double>::infinity();
    case ConeRegion::HalfSpace:
      return std::abs(p.dot(axis_));
    case ConeRegion::Circular: {
      if (r < 1e-300) return 0.0;
      double ang = std::acos(std::clamp(p.dot(axis_) / r, -1.0, 1.0));
      return 2.0 * r * std::abs(std::sin((ang - half_aperture_) / 2));
    }
    case ConeRegion::PlanarSector: {
      if (r < 1e-300) return 0.0;
      double theta = wrap_angle(std::atan2(p[1], p[0]), start_angle_ - M_PI + angle_ / 2);
      double d0 = std::abs(theta - start_angle_);
      double d1 = std::abs(theta - (start_angle_ + angle_));
      return 2.0 * r * std::abs(std::sin(std::min(d0, d1) / 2));
    }
  }
  return 0.0;
}

Vec SolidCone::boundary_inner_normal(const Vec& p) const {
  double r = p.norm();
  if (r < 1e-14) fail(ErrorKind::VertexSingular, "boundary normal undefined at the vertex");
  switch (region_) {
    case ConeRegion::FullSphere:
      fail(ErrorKind::InvalidArgument, "full space has no boundary");
    case ConeRegion::HalfSpace:
      return axis_;
    case ConeRegion::Circular: {
      Vec q = p / r;
      double ca = std::cos(half_aperture_), sa = std::sin(half_aperture_);
      Vec n = (axis_ - ca * q) / sa;
      double len = n.norm();
      if (len < 1e-10) fail(ErrorKind::ProjectionDegenerate, "point is not on the cone wall");
      return n / len;
    }
    case ConeRegion::PlanarSector: {
      double theta = wrap_angle(std::atan2(p[1], p[0]), start_angle_ - M_PI + angle_ / 2);
      double d0 = std::abs(theta - start_angle_);
      double d1 = std::abs(theta - (start_angle_ + angle_));
      if (d0 <= d1) {
        double t = start_angle_;
        return make_vec2(-std::sin(t), std::cos(t));
      }
      double t = start_angle_ + angle_;
      return make_vec2(std::sin(t), -std::cos(t));
    }
  }
  fail(ErrorKind::InvalidArgument, "unreachable");
}

double SolidCone::boundary_II(const Vec& p, const Vec& v) const {
  double r = p.norm();
  if (r < 1e-14) fail(ErrorKind::VertexSingular, "wall curvature undefined at the vertex");
  switch (region_) {
    case ConeRegion::FullSphere:
      fail(ErrorKind::InvalidArgument, "full space has no boundary");
    case ConeRegion::HalfSpace:
    case ConeRegion::PlanarSector:
      return 0.0;  // flat walls
    case ConeRegion::Circular: {
      // Rulings are flat; the circumferential direction carries curvature
      // cot(alpha)/|p| toward the axis.
      Vec q = p / r;
      Vec tau = cross3(axis_, q);
      double len = tau.norm();
      if (len < 1e-12) fail(ErrorKind::ProjectionDegenerate, "point on the cone axis");
      tau /= len;
      double c = v.dot(tau);
      return c * c * std::cos(half_aperture_) / (std::sin(half_aperture_) * r);
    }
  }
  fail(ErrorKind::InvalidArgument, "unreachable");
}

std::vector<Vec> SolidCone::sphere_samples(int resolution, double guard) const {
  if (resolution < 2) fail(ErrorKind::InvalidArgument, "resolution must be >= 2");
  std::vector<Vec> out;
  if (dim_ == 2) {
    double lo, hi;
    bool periodic = false;
    switch (region_) {
      case ConeRegion::FullSphere:
        lo = 0.0;
        hi = 2 * M_PI;
        periodic = true;
        break;
      case ConeRegion::HalfSpace: {
        double mid = std::atan2(axis_[1], axis_[0]);
        lo = mid - M_PI / 2 + guard;
        hi = mid + M_PI / 2 - guard;
        break;
      }
      case ConeRegion::PlanarSector:
        lo = start_angle_ + guard;
        hi = start_angle_ + angle_ - guard;
        break;
      default:
        fail(ErrorKind::InvalidArgument, "region/dimension mismatch");
    }
    int m = resolution;
    for (int i = 0; i < m; ++i) {
      double t = periodic ? lo + (hi - lo) * i / m : lo + (hi - lo) * i / (m - 1);
      out.push_back(make_vec2(std::cos(t), std::sin(t)));
    }
    return out;
  }

  // 3D: colatitude x azimuth grid about the region axis.
  Vec axis = (region_ == ConeRegion::FullSphere) ? make_vec3(0, 0, 1) : axis_;
  double theta_max;
  switch (region_) {
    case ConeRegion::FullSphere: theta_max = M_PI; break;
    case ConeRegion::HalfSpace: theta_max = M_PI / 2 - guard; break;
    case ConeRegion::Circular: theta_max = half_aperture_ - guard; break;
    default: fail(ErrorKind::InvalidArgument, "region/dimension mismatch");
  }
  if (theta_max <= 0) fail(ErrorKind::InvalidArgument, "guard exceeds the region");
  // Orthonormal frame completing the axis.
  Vec e1 = std::abs(axis[0]) < 0.9 ? make_vec3(1, 0, 0) : make_vec3(0, 1, 0);
  e1 = (e1 - e1.dot(axis) * axis).normalized();
  Vec e2 = cross3(axis, e1);
  int mt = resolution, mp = 2 * resolution;
  for (int i = 0; i < mt; ++i) {
    // Midpoint colatitudes avoid the axis point and the guard ring.
    double th = theta_max * (i + 0.5) / mt;
    for (int j = 0; j < mp; ++j) {
      double ph = 2 * M_PI * j / mp;
      Vec q = std::cos(th) * axis + std::sin(th) * (std::cos(ph) * e1 + std::sin(ph) * e2);
      out.push_back(q);
    }
  }
  return out;
}

std::string SolidCone::describe() const {
  std::ostringstream os;
  switch (region_) {
    case ConeRegion::FullSphere: os << "full_sphere(dim=" << dim_ << ")"; break;
    case ConeRegion::HalfSpace: os << "half_space(dim=" << dim_ << ")"; break;
    case ConeRegion::Circular: os << "circular(half_aperture=" << half_aperture_ << ")"; break;
    case ConeRegion::PlanarSector:
      os << "planar_sector(angle=" << angle_ << ", start=" << start_angle_ << ")";
      break;
  }
  return os.str();
}

}  // namespace conelab
