#pragma once

#include "conelab/types.hpp"

namespace conelab {

enum class ConeRegion {
  FullSphere,    // M = R^{n+1}
  HalfSpace,     // M = { <p, normal> >= 0 }
  Circular,      // 3D: angle(p, axis) <= half_aperture
  PlanarSector,  // 2D: polar angle in [start_angle, start_angle + angle]
};

// Solid cone over a smooth spherical region, vertex at the origin.
// Membership is scale invariant; the boundary away from the vertex is a
// smooth hypersurface whose inner normal and second fundamental form are
// available in closed form.
class SolidCone {
 public:
  static SolidCone full_sphere(int ambient_dim);
  static SolidCone half_space(const Vec& inner_normal);
  static SolidCone circular(const Vec& axis, double half_aperture);
  static SolidCone planar_sector(double angle, double start_angle);
  static SolidCone planar_sector(double angle);  // symmetric about +x axis

  int ambient_dim() const { return dim_; }
  ConeRegion region() const { return region_; }
  bool convex() const;
  bool has_boundary() const { return region_ != ConeRegion::FullSphere; }

  double half_aperture() const { return half_aperture_; }
  double sector_angle() const { return angle_; }
  double sector_start() const { return start_angle_; }
  const Vec& axis() const { return axis_; }

  bool contains(const Vec& p, double tol = 1e-12) const;
  // Euclidean distance from p to the boundary cone surface (0 if no boundary;
  // exact for half spaces and sectors, chordal estimate for circular cones).
  double boundary_distance(const Vec& p) const;

  // Inner unit normal of the boundary hypersurface at a boundary point.
  Vec boundary_inner_normal(const Vec& p) const;
  // Second fundamental form of the boundary wall with respect to the inner
  // normal, evaluated on a vector tangent to the wall at p.
  double boundary_II(const Vec& p, const Vec& v) const;

  // Deterministic sample grid of unit vectors in the (open) spherical region,
  // stopped `guard` radians short of the region boundary.
  std::vector<Vec> sphere_samples(int resolution, double guard) const;

  std::string describe() const;

 private:
  SolidCone() = default;
  int dim_ = 0;
  ConeRegion region_ = ConeRegion::FullSphere;
  Vec axis_;                   // circular axis or half-space normal
  double half_aperture_ = 0.0; // circular
  double angle_ = 0.0;         // sector opening
  double start_angle_ = 0.0;   // sector start
};

}  // namespace conelab
