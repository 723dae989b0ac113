#include "conelab/stability.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace conelab {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

constexpr double kMassCut = 1e-14;  // relative mass below which a dof is dropped

std::vector<double> potential_field(const GeometryCache& g, const HomogeneousDensity& density,
                                    const SolidCone& cone) {
  std::vector<double> W(g.position.size(), 0.0);
  for (size_t i = 0; i < g.position.size(); ++i) {
    if (g.degenerate[i] || !(g.f[i] > 0.0)) continue;
    AmbientJet jet = density.ambient_jet(cone, g.position[i]);
    double ric_f = -g.normal[i].dot(jet.hess_psi * g.normal[i]);
    W[i] = ric_f + g.sigma2[i];
  }
  return W;
}

// Quadrature (collocation) assembly on a tensor grid: K = D^T diag(w f g^ab) D.
void assemble_parametric(WeightedOperators& ops, const std::vector<double>& mass) {
  const ParametricChart& c = ops.surface.chart;
  const GeometryCache& g = ops.cache;
  const int ns = static_cast<int>(g.position.size());

  SpMat K_full(ns, ns);
  if (c.param_dim == 1) {
    AxisRule r0 = make_axis_rule(c.lo[0], c.hi[0], c.nodes[0], c.periodic[0], true);
    VecX w(ns);
    for (int i = 0; i < ns; ++i) w(i) = mass[static_cast<size_t>(i)] * g.inv_g00[static_cast<size_t>(i)];
    MatX Kd = r0.d1.transpose() * w.asDiagonal() * r0.d1;
    K_full = Kd.sparseView(1.0, 1e-300);
  } else {
    const int m0 = c.nodes[0], m1 = c.nodes[1];
    AxisRule r0 = make_axis_rule(c.lo[0], c.hi[0], m0, c.periodic[0], true);
    AxisRule r1 = make_axis_rule(c.lo[1], c.hi[1], m1, c.periodic[1], true);
    std::vector<Trip> t0, t1;
    for (int i0 = 0; i0 < m0; ++i0)
      for (int k0 = 0; k0 < m0; ++k0) {
        double v = r0.d1(i0, k0);
        if (v == 0.0) continue;
        for (int i1 = 0; i1 < m1; ++i1)
          t0.emplace_back(static_cast<int>(c.index(i0, i1)), static_cast<int>(c.index(k0, i1)), v);
      }
    for (int i1 = 0; i1 < m1; ++i1)
      for (int k1 = 0; k1 < m1; ++k1) {
        double v = r1.d1(i1, k1);
        if (v == 0.0) continue;
        for (int i0 = 0; i0 < m0; ++i0)
          t1.emplace_back(static_cast<int>(c.index(i0, i1)), static_cast<int>(c.index(i0, k1)), v);
      }
    SpMat D0(ns, ns), D1(ns, ns);
    D0.setFromTriplets(t0.begin(), t0.end());
    D1.setFromTriplets(t1.begin(), t1.end());

    VecX f00(ns), f01(ns), f11(ns);
    for (int i = 0; i < ns; ++i) {
      size_t s = static_cast<size_t>(i);
      f00(i) = mass[s] * g.inv_g00[s];
      f01(i) = mass[s] * g.inv_g01[s];
      f11(i) = mass[s] * g.inv_g11[s];
    }
    auto add_term = [&](const SpMat& A, const VecX& w, const SpMat& B) {
      SpMat wB = w.asDiagonal() * B;
      K_full += SpMat(A.transpose() * wB);
    };
    add_term(D0, f00, D0);
    add_term(D1, f11, D1);
    if (f01.cwiseAbs().maxCoeff() > 0.0) {
      add_term(D0, f01, D1);
      add_term(D1, f01, D0);
    }
  }

  // Restrict: u_samples = Pi u_dofs, K = Pi^T K_full Pi. Chart poles are tied
  // to the average of the adjacent grid ring so constants stay in the kernel.
  std::vector<int> dof_of(static_cast<size_t>(ns), -1);
  for (size_t j = 0; j < ops.kept.size(); ++j) dof_of[static_cast<size_t>(ops.kept[j])] = static_cast<int>(j);
  std::vector<Trip> pt;
  for (size_t j = 0; j < ops.kept.size(); ++j) pt.emplace_back(ops.kept[j], static_cast<int>(j), 1.0);
  if (c.param_dim == 2) {
    const int m0 = c.nodes[0], m1 = c.nodes[1];
    for (int s : ops.dropped) {
      if (!g.degenerate[static_cast<size_t>(s)]) continue;
      int i0 = s / m1;
      int ring = (i0 == 0) ? 1 : (i0 == m0 - 1 ? m0 - 2 : -1);
      if (ring < 0 || ring >= m0) continue;
      std::vector<int> ring_dofs;
      for (int j1 = 0; j1 < m1; ++j1) {
        int d = dof_of[c.index(ring, j1)];
        if (d >= 0) ring_dofs.push_back(d);
      }
      if (ring_dofs.empty()) continue;
      double w = 1.0 / static_cast<double>(ring_dofs.size());
      for (int d : ring_dofs) pt.emplace_back(s, d, w);
    }
  }
  SpMat Pi(ns, static_cast<int>(ops.kept.size()));
  Pi.setFromTriplets(pt.begin(), pt.end());
  ops.prolongation = Pi;
  ops.K = SpMat(Pi.transpose() * SpMat(K_full * Pi));

  const int nd = static_cast<int>(ops.kept.size());

  // Fourier differentiation on an even periodic grid maps the Nyquist
  // sawtooth to zero, so K gains a spurious kernel vector; record it for
  // deflation in the eigensolves.
  for (int axis = 0; axis < c.param_dim; ++axis) {
    if (!c.periodic[axis] || c.nodes[axis] % 2 != 0) continue;
    VecX ny(nd);
    for (int j = 0; j < nd; ++j) {
      int s = ops.kept[static_cast<size_t>(j)];
      int ia = axis == 0 ? s / std::max(c.nodes[1], 1) : s % c.nodes[1];
      ny(j) = (ia % 2 == 0) ? 1.0 : -1.0;
    }
    if (ny.norm() > 0) ops.deflate.push_back(ny);
  }
  std::vector<Trip> tm, tp;
  for (int j = 0; j < nd; ++j) {
    size_t s = static_cast<size_t>(ops.kept[static_cast<size_t>(j)]);
    tm.emplace_back(j, j, mass[s]);
    tp.emplace_back(j, j, mass[s] * ops.potential_value[s]);
  }
  ops.M.resize(nd, nd);
  ops.P.resize(nd, nd);
  ops.M.setFromTriplets(tm.begin(), tm.end());
  ops.P.setFromTriplets(tp.begin(), tp.end());

  std::vector<Trip> tb;
  for (const auto& b : g.boundary) {
    int d = b.sample_index >= 0 ? dof_of[static_cast<size_t>(b.sample_index)] : -1;
    if (d < 0) continue;
    tb.emplace_back(d, d, b.dl_weight * b.f * b.II_NN);
  }
  ops.B.resize(nd, nd);
  ops.B.setFromTriplets(tb.begin(), tb.end());
}

// P1 finite elements on polylines / triangle meshes (consistent mass, linear
// interpolation of the density within each cell).
void assemble_simplicial(WeightedOperators& ops) {
  const SimplicialMesh& mesh = ops.surface.mesh;
  const GeometryCache& g = ops.cache;
  const int ns = static_cast<int>(g.position.size());
  const std::vector<double>& W = ops.potential_value;

  std::vector<Trip> tk, tm, tp, tb;
  auto excluded = [&](size_t cell) {
    return cell < g.excluded_cell.size() && g.excluded_cell[cell] != 0;
  };

  if (!mesh.segments.empty()) {
    for (size_t e = 0; e < mesh.segments.size(); ++e) {
      if (excluded(e)) continue;
      int a = mesh.segments[e][0], b = mesh.segments[e][1];
      double L = (g.position[static_cast<size_t>(b)] - g.position[static_cast<size_t>(a)]).norm();
      if (!(L > 0)) continue;
      double fa = g.f[static_cast<size_t>(a)], fb = g.f[static_cast<size_t>(b)];
      double kf = 0.5 * (fa + fb) / L;
      tk.emplace_back(a, a, kf);
      tk.emplace_back(b, b, kf);
      tk.emplace_back(a, b, -kf);
      tk.emplace_back(b, a, -kf);
      auto consistent = [&](std::vector<Trip>& out, double qa, double qb) {
        out.emplace_back(a, a, L * (3 * qa + qb) / 12.0);
        out.emplace_back(b, b, L * (qa + 3 * qb) / 12.0);
        out.emplace_back(a, b, L * (qa + qb) / 12.0);
        out.emplace_back(b, a, L * (qa + qb) / 12.0);
      };
      consistent(tm, fa, fb);
      consistent(tp, fa * W[static_cast<size_t>(a)], fb * W[static_cast<size_t>(b)]);
    }
  } else {
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
      if (excluded(t)) continue;
      const auto& tri = mesh.triangles[t];
      const Vec& xa = g.position[static_cast<size_t>(tri[0])];
      const Vec& xb = g.position[static_cast<size_t>(tri[1])];
      const Vec& xc = g.position[static_cast<size_t>(tri[2])];
      double area2 = cross3(xb - xa, xc - xa).norm();
      double A = 0.5 * area2;
      if (!(A > 0)) continue;
      double f0 = g.f[static_cast<size_t>(tri[0])];
      double f1 = g.f[static_cast<size_t>(tri[1])];
      double f2 = g.f[static_cast<size_t>(tri[2])];
      double fbar = (f0 + f1 + f2) / 3.0;
      // Cotangent stiffness, scaled by the element-average density.
      for (int cidx = 0; cidx < 3; ++cidx) {
        int i = tri[cidx], j = tri[(cidx + 1) % 3], l = tri[(cidx + 2) % 3];
        Vec u = g.position[static_cast<size_t>(j)] - g.position[static_cast<size_t>(i)];
        Vec v = g.position[static_cast<size_t>(l)] - g.position[static_cast<size_t>(i)];
        double cross = area2;  // same for every corner of the triangle
        double cot = u.dot(v) / cross;
        double w = 0.5 * fbar * cot;
        tk.emplace_back(j, j, w);
        tk.emplace_back(l, l, w);
        tk.emplace_back(j, l, -w);
        tk.emplace_back(l, j, -w);
      }
      // Consistent mass with a linear coefficient q: uses
      // int phi_a^3 = A/10, int phi_a^2 phi_b = A/30, int phi_a phi_b phi_c = A/60.
      auto consistent = [&](std::vector<Trip>& out, double q0, double q1, double q2) {
        double qs[3] = {q0, q1, q2};
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            double val = 0.0;
            for (int d = 0; d < 3; ++d) {
              double integral;
              if (a == b && b == d) integral = A / 10.0;
              else if (a == b || a == d || b == d) integral = A / 30.0;
              else integral = A / 60.0;
              val += qs[d] * integral;
            }
            out.emplace_back(tri[a], tri[b], val);
          }
      };
      consistent(tm, f0, f1, f2);
      consistent(tp, f0 * W[static_cast<size_t>(tri[0])], f1 * W[static_cast<size_t>(tri[1])],
                 f2 * W[static_cast<size_t>(tri[2])]);
    }
  }

  for (const auto& b : g.boundary) {
    if (b.edge[0] >= 0 && b.edge[1] >= 0) {
      double qa = g.f[static_cast<size_t>(b.edge[0])] * b.II_NN;
      double qb = g.f[static_cast<size_t>(b.edge[1])] * b.II_NN;
      double L = b.dl_weight;
      tb.emplace_back(b.edge[0], b.edge[0], L * (3 * qa + qb) / 12.0);
      tb.emplace_back(b.edge[1], b.edge[1], L * (qa + 3 * qb) / 12.0);
      tb.emplace_back(b.edge[0], b.edge[1], L * (qa + qb) / 12.0);
      tb.emplace_back(b.edge[1], b.edge[0], L * (qa + qb) / 12.0);
    } else if (b.sample_index >= 0) {
      tb.emplace_back(b.sample_index, b.sample_index, b.dl_weight * b.f * b.II_NN);
    }
  }

  SpMat K_full(ns, ns), M_full(ns, ns), P_full(ns, ns), B_full(ns, ns);
  K_full.setFromTriplets(tk.begin(), tk.end());
  M_full.setFromTriplets(tm.begin(), tm.end());
  P_full.setFromTriplets(tp.begin(), tp.end());
  B_full.setFromTriplets(tb.begin(), tb.end());

  // Keep vertices with positive lumped mass.
  VecX lumped = M_full * VecX::Ones(ns);
  double lmax = lumped.maxCoeff();
  if (!(lmax > 0)) fail(ErrorKind::SingularMass, "surface carries no weighted mass");
  ops.kept.clear();
  ops.dropped.clear();
  for (int i = 0; i < ns; ++i) {
    if (lumped(i) > kMassCut * lmax) ops.kept.push_back(i);
    else ops.dropped.push_back(i);
  }

  std::vector<Trip> pt;
  for (size_t j = 0; j < ops.kept.size(); ++j) pt.emplace_back(ops.kept[j], static_cast<int>(j), 1.0);
  SpMat Pi(ns, static_cast<int>(ops.kept.size()));
  Pi.setFromTriplets(pt.begin(), pt.end());
  ops.prolongation = Pi;
  SpMat PiT = Pi.transpose();
  ops.K = SpMat(PiT * SpMat(K_full * Pi));
  ops.M = SpMat(PiT * SpMat(M_full * Pi));
  ops.P = SpMat(PiT * SpMat(P_full * Pi));
  ops.B = SpMat(PiT * SpMat(B_full * Pi));
}

VecX gather(const WeightedOperators& ops, const ScalarField& u) {
  if (u.size() != ops.cache.position.size())
    fail(ErrorKind::InvalidArgument, "field length does not match the sample count");
  VecX out(static_cast<int>(ops.kept.size()));
  for (size_t j = 0; j < ops.kept.size(); ++j) out(static_cast<int>(j)) = u[static_cast<size_t>(ops.kept[j])];
  return out;
}

double five_point_first(double fm2, double fm1, double fp1, double fp2, double h) {
  return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
}

double five_point_second(double fm2, double fm1, double f0, double fp1, double fp2, double h) {
  return (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
}

}  // namespace

WeightedOperators assemble(const DiscreteHypersurface& surface, const HomogeneousDensity& density,
                           const SolidCone& cone) {
  WeightedOperators ops;
  ops.surface = surface;
  ops.backend = surface.backend;
  ops.cache = geometry(surface, density, cone);
  const GeometryCache& g = ops.cache;
  const size_t ns = g.position.size();

  for (size_t i = 0; i < ns; ++i)
    if (!std::isfinite(g.f[i]))
      fail(ErrorKind::SingularMass, "density is not finite on the surface");
  ops.potential_value = potential_field(g, density, cone);

  if (surface.backend == Backend::Parametric) {
    std::vector<double> mass(ns);
    double mmax = 0.0;
    for (size_t i = 0; i < ns; ++i) {
      mass[i] = g.da_weight[i] * g.f[i];
      mmax = std::max(mmax, mass[i]);
    }
    if (!(mmax > 0)) fail(ErrorKind::SingularMass, "surface carries no weighted mass");
    ops.kept.clear();
    ops.dropped.clear();
    for (size_t i = 0; i < ns; ++i) {
      if (mass[i] > kMassCut * mmax) ops.kept.push_back(static_cast<int>(i));
      else ops.dropped.push_back(static_cast<int>(i));
    }
    assemble_parametric(ops, mass);
  } else {
    assemble_simplicial(ops);
  }
  ops.dofs = static_cast<int>(ops.kept.size());
  if (ops.dofs == 0) fail(ErrorKind::SingularMass, "no degrees of freedom left after dropping zero-mass samples");
  return ops;
}

double index_form(const WeightedOperators& ops, const ScalarField& u, const ScalarField& v) {
  VecX ud = gather(ops, u), vd = gather(ops, v);
  return ud.dot(ops.K * vd) - ud.dot(ops.P * vd) - ud.dot(ops.B * vd);
}

double index_form(const WeightedOperators& ops, const ScalarField& u) { return index_form(ops, u, u); }

ScalarField jacobi_apply(const WeightedOperators& ops, const ScalarField& u) {
  const GeometryCache& g = ops.cache;
  if (u.size() != g.position.size())
    fail(ErrorKind::InvalidArgument, "field length does not match the sample count");
  ScalarField out(u.size(), 0.0);
  if (ops.backend == Backend::Parametric) {
    ScalarField lap = weighted_laplacian(ops.surface, g, u);
    for (size_t i = 0; i < u.size(); ++i) {
      if (g.degenerate[i] || !(g.f[i] > 0.0)) continue;
      out[i] = lap[i] + ops.potential_value[i] * u[i];
    }
  } else {
    VecX ud = gather(ops, u);
    VecX rhs = -(ops.K * ud) + ops.P * ud;
    Eigen::SimplicialLDLT<SpMat> solver(ops.M);
    if (solver.info() != Eigen::Success)
      fail(ErrorKind::SingularMass, "mass matrix factorization failed");
    VecX y = solver.solve(rhs);
    for (size_t j = 0; j < ops.kept.size(); ++j) out[static_cast<size_t>(ops.kept[j])] = y(static_cast<int>(j));
  }
  return out;
}

namespace {

// Orthonormal basis of the subspace { u : C^T u = 0 }; empty constraints give
// the identity.
MatX constraint_null_basis(const MatX& C, int nd) {
  if (C.cols() == 0) return MatX::Identity(nd, nd);
  Eigen::HouseholderQR<MatX> qr(C);
  MatX Q = qr.householderQ();
  return Q.rightCols(nd - static_cast<int>(C.cols()));
}

// Constraint columns: M-orthogonality to the recorded grid-noise directions,
// plus the weighted mean when requested.
MatX spectrum_constraints(const WeightedOperators& ops, const MatX& Mm, bool mean_zero) {
  const int nd = ops.dofs;
  int cols = static_cast<int>(ops.deflate.size()) + (mean_zero ? 1 : 0);
  MatX C(nd, cols);
  int at = 0;
  for (const VecX& d : ops.deflate) C.col(at++) = Mm * d;
  if (mean_zero) {
    VecX mvec = Mm * VecX::Ones(nd);
    if (!(mvec.norm() > 0) || !std::isfinite(mvec.norm()))
      fail(ErrorKind::ProjectionDegenerate, "weighted mean functional vanishes");
    C.col(at++) = mvec;
  }
  return C;
}

}  // namespace

SpectrumResult stability_spectrum(const WeightedOperators& ops, SpectrumMode mode) {
  const int nd = ops.dofs;
  if (nd > 5000)
    fail(ErrorKind::InvalidArgument,
         "dense eigensolve refused above 5000 dofs; use a coarser grid");

  MatX A = MatX(ops.K) - MatX(ops.P) - MatX(ops.B);
  MatX Mm(ops.M);
  A = 0.5 * (A + A.transpose()).eval();
  Mm = 0.5 * (Mm + Mm.transpose()).eval();

  MatX C = spectrum_constraints(ops, Mm, mode == SpectrumMode::MeanZero);
  if (nd - C.cols() < 1)
    fail(ErrorKind::InvalidArgument, "not enough dofs for a spectrum");
  MatX V = constraint_null_basis(C, nd);

  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es;
  es.compute(V.transpose() * A * V, V.transpose() * Mm * V);
  if (es.info() != Eigen::Success) fail(ErrorKind::InvalidArgument, "eigensolver failed");
  double lambda = es.eigenvalues()(0);
  VecX y = V * es.eigenvectors().col(0);

  SpectrumResult res;
  res.lambda_min = lambda;
  res.dofs = nd;
  VecX us = ops.prolongation * y;
  int imax = 0;
  double amax = 0.0;
  for (int i = 0; i < us.size(); ++i)
    if (std::abs(us(i)) > amax) {
      amax = std::abs(us(i));
      imax = i;
    }
  if (amax > 0) us /= us(imax) > 0 ? amax : -amax;
  res.eigenvector = us;
  return res;
}

VecX laplace_eigenvalues(const WeightedOperators& ops, int count) {
  const int nd = ops.dofs;
  if (nd > 5000)
    fail(ErrorKind::InvalidArgument,
         "dense eigensolve refused above 5000 dofs; use a coarser grid");
  MatX K(ops.K), Mm(ops.M);
  K = 0.5 * (K + K.transpose()).eval();
  Mm = 0.5 * (Mm + Mm.transpose()).eval();
  MatX C = spectrum_constraints(ops, Mm, false);
  if (nd - C.cols() < 1) fail(ErrorKind::InvalidArgument, "not enough dofs for a spectrum");
  MatX V = constraint_null_basis(C, nd);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(V.transpose() * K * V,
                                                    V.transpose() * Mm * V);
  if (es.info() != Eigen::Success) fail(ErrorKind::InvalidArgument, "eigensolver failed");
  int m = std::min<int>(count, es.eigenvalues().size());
  return es.eigenvalues().head(m);
}

VecX spectrum_eigenvalues(const WeightedOperators& ops, SpectrumMode mode, int count) {
  const int nd = ops.dofs;
  if (nd > 5000)
    fail(ErrorKind::InvalidArgument,
         "dense eigensolve refused above 5000 dofs; use a coarser grid");
  MatX A = MatX(ops.K) - MatX(ops.P) - MatX(ops.B);
  MatX Mm(ops.M);
  A = 0.5 * (A + A.transpose()).eval();
  Mm = 0.5 * (Mm + Mm.transpose()).eval();
  MatX C = spectrum_constraints(ops, Mm, mode == SpectrumMode::MeanZero);
  if (nd - C.cols() < 1) fail(ErrorKind::InvalidArgument, "not enough dofs for a spectrum");
  MatX V = constraint_null_basis(C, nd);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(V.transpose() * A * V,
                                                    V.transpose() * Mm * V);
  if (es.info() != Eigen::Success) fail(ErrorKind::InvalidArgument, "eigensolver failed");
  int m = std::min<int>(count, static_cast<int>(es.eigenvalues().size()));
  return es.eigenvalues().head(m);
}

double default_stationarity_tol(const GeometryCache& cache) {
  if (cache.backend == Backend::Parametric) return 1e-6;
  return 10.0 * cache.h_disc * cache.h_disc;
}

StabilityReport stationarity_check(const DiscreteHypersurface& surface,
                                   const HomogeneousDensity& density, const SolidCone& cone,
                                   double tol_stationary) {
  GeometryCache g = geometry(surface, density, cone);
  StabilityReport r;
  r.tol_stationary = tol_stationary > 0 ? tol_stationary : default_stationarity_tol(g);
  r.Hf_mean = g.weighted_mean_Hf();
  r.Hf_std = g.weighted_std_Hf();
  r.orthogonality_error = 0.0;
  for (const auto& b : g.boundary)
    r.orthogonality_error = std::max(r.orthogonality_error, std::abs(b.normal.dot(b.wall_normal)));
  r.stationary = r.Hf_std <= r.tol_stationary * (1.0 + std::abs(r.Hf_mean)) &&
                 r.orthogonality_error <= r.tol_stationary;
  r.strongly_stationary = r.stationary && std::abs(r.Hf_mean) <= r.tol_stationary;
  r.lambda_min_all = std::numeric_limits<double>::quiet_NaN();
  r.lambda_min_meanzero = std::numeric_limits<double>::quiet_NaN();
  return r;
}

StabilityReport stability_report(const DiscreteHypersurface& surface,
                                 const HomogeneousDensity& density, const SolidCone& cone,
                                 double tol_stationary) {
  StabilityReport r = stationarity_check(surface, density, cone, tol_stationary);
  WeightedOperators ops = assemble(surface, density, cone);
  SpectrumResult all = stability_spectrum(ops, SpectrumMode::All);
  SpectrumResult mz = stability_spectrum(ops, SpectrumMode::MeanZero);
  r.lambda_min_all = all.lambda_min;
  r.lambda_min_meanzero = mz.lambda_min;
  r.dofs = ops.dofs;
  double scale = 1.0 + std::max(std::abs(all.lambda_min), std::abs(mz.lambda_min));
  double vt = r.tol_stationary * scale;
  r.f_stable = r.stationary && mz.lambda_min >= -vt;
  r.strongly_f_stable = r.strongly_stationary && all.lambda_min >= -vt;
  return r;
}

StabilityReport stability_report(const std::function<DiscreteHypersurface(int)>& generator,
                                 const std::vector<int>& resolutions,
                                 const HomogeneousDensity& density, const SolidCone& cone,
                                 double tol_stationary) {
  if (resolutions.size() < 2)
    fail(ErrorKind::InvalidArgument, "refinement check needs at least two resolutions");
  std::vector<StabilityReport> reports;
  reports.reserve(resolutions.size());
  for (int res : resolutions)
    reports.push_back(stability_report(generator(res), density, cone, tol_stationary));
  bool monotone = true;
  for (size_t i = 0; i + 1 < reports.size(); ++i) {
    double prev = reports[i].lambda_min_meanzero, next = reports[i + 1].lambda_min_meanzero;
    if (next > prev + 0.02 * (1.0 + std::abs(prev))) monotone = false;
  }
  StabilityReport r = reports.back();
  double last = r.lambda_min_meanzero;
  double prev = reports[reports.size() - 2].lambda_min_meanzero;
  r.refinement_delta = std::abs(last - prev) / (1.0 + std::abs(last));
  r.refinement_checked = monotone && r.refinement_delta <= 0.02;
  return r;
}

VariationDiagnostics run_variation(const DiscreteHypersurface& surface,
                                   const HomogeneousDensity& density, const SolidCone& cone,
                                   const Variation& variation, double dt) {
  GeometryCache g0 = geometry(surface, density, cone);
  const size_t ns = g0.position.size();
  const double n = static_cast<double>(g0.n);
  const double k = density.degree();
  const bool critical = std::abs(n + k + 1.0) < 1e-12;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Vec lo = g0.position[0], hi = g0.position[0];
  for (const Vec& p : g0.position) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double diameter = (hi - lo).norm();
  if (!(dt > 0)) dt = 1e-3 * diameter;

  ScalarField u_eff;
  switch (variation.kind) {
    case Variation::Kind::Normal:
      if (variation.u.size() != ns)
        fail(ErrorKind::InvalidArgument, "normal speed length does not match the sample count");
      u_eff = variation.u;
      break;
    case Variation::Kind::Dilation:
      u_eff = support_function(g0);
      break;
    case Variation::Kind::Parallel:
      u_eff.assign(ns, n + k);
      break;
  }
  VecX uv = Eigen::Map<const VecX>(u_eff.data(), static_cast<int>(ns));

  struct FVal {
    double A = 0.0, V = 0.0, Hbar = 0.0;
  };
  auto eval = [&](double t) -> FVal {
    DiscreteHypersurface st;
    try {
      st = (variation.kind == Variation::Kind::Dilation) ? surface.dilated(1.0 + t)
                                                         : deform_normal(surface, g0, uv, t, cone);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::OutsideCone)
        fail(ErrorKind::StencilExitsCone, "deformed surface leaves the cone");
      throw;
    }
    FVal r;
    try {
      GeometryCache gt = geometry(st, density, cone);
      r.A = weighted_area(gt);
      r.V = critical ? nan : oriented_volume(gt, density);
      r.Hbar = gt.weighted_mean_Hf();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::OutsideCone)
        fail(ErrorKind::StencilExitsCone, "deformed surface leaves the cone");
      throw;
    }
    return r;
  };

  FVal f0;
  f0.A = weighted_area(g0);
  f0.V = critical ? nan : oriented_volume(g0, density);
  f0.Hbar = g0.weighted_mean_Hf();
  FVal fp2 = eval(2.0 * dt), fp1 = eval(dt), fph = eval(0.5 * dt);
  FVal fmh = eval(-0.5 * dt), fm1 = eval(-dt), fm2 = eval(-2.0 * dt);

  VariationDiagnostics d;
  d.dt = dt;
  d.critical_degree = critical;
  d.area_first = five_point_first(fm2.A, fm1.A, fp1.A, fp2.A, dt);
  double area_first_h = five_point_first(fm1.A, fmh.A, fph.A, fp1.A, 0.5 * dt);
  d.volume_first = critical ? nan : five_point_first(fm2.V, fm1.V, fp1.V, fp2.V, dt);
  double volume_first_h = critical ? nan : five_point_first(fm1.V, fmh.V, fph.V, fp1.V, 0.5 * dt);

  double floor_a = 1e-9 * (1.0 + std::abs(f0.A));
  double rel_a = std::abs(d.area_first - area_first_h) / std::max(std::abs(area_first_h), floor_a);
  d.richardson_error = rel_a;
  if (!critical) {
    double floor_v = 1e-9 * (1.0 + std::abs(f0.V));
    double rel_v =
        std::abs(d.volume_first - volume_first_h) / std::max(std::abs(volume_first_h), floor_v);
    d.richardson_error = std::max(d.richardson_error, rel_v);
  }
  d.richardson_ok = d.richardson_error <= 0.01;
  d.area_first = area_first_h;  // finer stencil is the reported estimate
  if (!critical) d.volume_first = volume_first_h;

  // Expected first variations from the divergence structure.
  KahanSum a_exp, v_exp;
  for (size_t i = 0; i < ns; ++i) {
    double w = g0.da_weight[i] * g0.f[i];
    a_exp.add(-w * g0.Hf[i] * u_eff[i]);
    v_exp.add(-w * u_eff[i]);
  }
  for (const auto& b : g0.boundary) {
    Vec X;
    if (variation.kind == Variation::Kind::Dilation) {
      X = b.p;
    } else {
      double ub;
      if (b.edge[0] >= 0 && b.edge[1] >= 0)
        ub = 0.5 * (u_eff[static_cast<size_t>(b.edge[0])] + u_eff[static_cast<size_t>(b.edge[1])]);
      else
        ub = b.sample_index >= 0 ? u_eff[static_cast<size_t>(b.sample_index)] : 0.0;
      X = ub * b.normal;
    }
    a_exp.add(-b.dl_weight * b.f * X.dot(b.conormal));
  }
  d.area_first_expected = a_exp.value();
  d.volume_first_expected = critical ? nan : v_exp.value();

  if (critical) {
    d.second_combined = nan;
  } else {
    auto G = [&](const FVal& f) { return f.A - f0.Hbar * f.V; };
    double g2 = five_point_second(G(fm2), G(fm1), G(f0), G(fp1), G(fp2), dt);
    double g2h = five_point_second(G(fm1), G(fmh), G(f0), G(fph), G(fp1), 0.5 * dt);
    d.second_combined = (16.0 * g2h - g2) / 15.0;
  }

  WeightedOperators ops = assemble(surface, density, cone);
  d.index_form_value = index_form(ops, u_eff);

  d.Hf_rate = five_point_first(fm2.Hbar, fm1.Hbar, fp1.Hbar, fp2.Hbar, dt);
  d.Hf_rate_expected =
      variation.kind == Variation::Kind::Dilation ? -f0.Hbar : nan;
  return d;
}

RescaledParallelReport rescaled_parallel(const DiscreteHypersurface& surface,
                                         const HomogeneousDensity& density, const SolidCone& cone,
                                         double dt) {
  GeometryCache g0 = geometry(surface, density, cone);
  const size_t ns = g0.position.size();
  const double n = static_cast<double>(g0.n);
  const double k = density.degree();
  if (std::abs(n + k + 1.0) < 1e-12)
    fail(ErrorKind::CriticalDegree, "weighted volume undefined at k = -(n+1)");
  if (surface.info.kind == SurfaceInfo::Kind::SphereThroughOrigin && !density.is_radial())
    fail(ErrorKind::NonRadialDensity,
         "spheres through the vertex are weighted-stationary only for radial densities");

  Vec lo = g0.position[0], hi = g0.position[0];
  for (const Vec& p : g0.position) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (!(dt > 0)) dt = 1e-3 * (hi - lo).norm();

  double A0 = weighted_area(g0);
  double V0 = oriented_volume(g0, density);
  if (!(std::abs(V0) > 0)) fail(ErrorKind::InvalidArgument, "weighted volume vanishes");

  VecX uc = VecX::Constant(static_cast<int>(ns), n + k);
  auto parallel_volume = [&](double t) {
    DiscreteHypersurface st = deform_normal(surface, g0, uc, t, cone);
    return oriented_volume(geometry(st, density, cone), density);
  };
  auto rescale_factor = [&](double Vp) {
    double ratio = V0 / Vp;
    if (!(ratio > 0)) fail(ErrorKind::InvalidArgument, "parallel surface flips the weighted volume");
    return std::pow(ratio, 1.0 / (n + k + 1.0));
  };

  RescaledParallelReport r;
  r.dt = dt;
  StabilityReport st = stationarity_check(surface, density, cone);
  r.stationary = st.stationary;

  double s_at[4];
  const double times[4] = {dt, -dt, 0.5 * dt, -0.5 * dt};
  std::array<DiscreteHypersurface, 4> hats;
  for (int i = 0; i < 4; ++i) {
    double Vp = parallel_volume(times[i]);
    double s = rescale_factor(Vp);
    s_at[i] = s;
    hats[static_cast<size_t>(i)] = deform_normal(surface, g0, uc, times[i], cone).dilated(s);
    double Vh = oriented_volume(geometry(hats[static_cast<size_t>(i)], density, cone), density);
    r.volume_drift = std::max(r.volume_drift, std::abs(Vh - V0) / std::abs(V0));
  }
  // 5-point first derivative on {+-dt, +-dt/2}.
  r.s_prime = (s_at[1] - 8.0 * s_at[3] + 8.0 * s_at[2] - s_at[0]) / (6.0 * dt);
  r.s_prime_expected = (n + k) * A0 / ((n + k + 1.0) * V0);

  double sup = 0.0;
  for (size_t i = 0; i < ns; ++i) {
    if (g0.degenerate[i] || !(g0.f[i] > 0.0)) continue;
    int idx = static_cast<int>(i);
    Vec x_full = (hats[0].sample(idx) - hats[1].sample(idx)) / (2.0 * dt);
    Vec x_half = (hats[2].sample(idx) - hats[3].sample(idx)) / dt;
    Vec X = (4.0 * x_half - x_full) / 3.0;
    double want = n + k + g0.Hf[i] * g0.support[i];
    sup = std::max(sup, std::abs(X.dot(g0.normal[i]) - want));
  }
  r.velocity_error = sup;
  return r;
}

UmbilicityReport umbilicity_gap(const DiscreteHypersurface& surface,
                                const HomogeneousDensity& density, const SolidCone& cone) {
  GeometryCache g = geometry(surface, density, cone);
  const double n = static_cast<double>(g.n);
  const double k = density.degree();
  if (k >= -n && k <= 0)
    fail(ErrorKind::WrongDegreeRange, "umbilicity gap requires k < -n or k > 0");

  UmbilicityReport r;
  const size_t ns = g.position.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.gap.assign(ns, nan);
  r.lower_bound.assign(ns, nan);
  r.min_gap = std::numeric_limits<double>::infinity();
  r.max_gap = -std::numeric_limits<double>::infinity();
  r.max_bound_violation = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (size_t i = 0; i < ns; ++i) {
    if (g.degenerate[i] || !(g.f[i] > 0.0)) continue;
    AmbientJet jet = density.ambient_jet(cone, g.position[i]);
    double ric_f = -g.normal[i].dot(jet.hess_psi * g.normal[i]);
    double gap = ric_f + g.sigma2[i] - g.Hf[i] * g.Hf[i] / (n + k);
    double slack = jet.grad_psi.dot(g.normal[i]) + k * g.H[i];
    double bound = n / (k * (n + k)) * slack * slack;
    r.gap[i] = gap;
    r.lower_bound[i] = bound;
    r.min_gap = std::min(r.min_gap, gap);
    r.max_gap = std::max(r.max_gap, gap);
    r.max_bound_violation = std::max(r.max_bound_violation, bound - gap);
    any = true;
  }
  if (!any) fail(ErrorKind::InvalidArgument, "no usable samples for the umbilicity gap");
  return r;
}

CutoffDecay cutoff_energy_decay(const DiscreteHypersurface& surface,
                                const HomogeneousDensity& density, const SolidCone& cone,
                                const std::vector<double>& eps_list) {
  const double n = static_cast<double>(surface.surface_dim());
  const double k = density.degree();
  if (k < 0 || n + k <= 2.0)
    fail(ErrorKind::HypothesisViolated, "cutoff decay requires k >= 0 and n + k > 2");
  if (surface.backend != Backend::Parametric || !surface.chart.analytic())
    fail(ErrorKind::InvalidArgument, "cutoff refinement needs an analytic chart");
  if (eps_list.size() < 2) fail(ErrorKind::InvalidArgument, "need at least two cutoff radii");

  std::vector<double> eps(eps_list);
  std::sort(eps.begin(), eps.end(), std::greater<double>());
  if (!(eps.back() > 0)) fail(ErrorKind::InvalidArgument, "cutoff radii must be positive");
  if (surface.info.puncture_radius > 0.4 * eps.back())
    fail(ErrorKind::InvalidArgument, "vertex puncture overlaps the cutoff band");

  // Quintic smoothstep on [1/2, 1]: 0 inside B_{1/2}, 1 outside B_1.
  auto dphi = [](double s) {
    if (s <= 0.5 || s >= 1.0) return 0.0;
    double t = 2.0 * s - 1.0;
    double omt = 1.0 - t;
    return 60.0 * t * t * omt * omt;
  };

  const ParametricChart& c = surface.chart;
  const int nscan = 4096;
  const int nphi = c.param_dim == 2 ? 8 : 1;
  const double lo0 = c.lo[0], hi0 = c.hi[0];
  const double step = (hi0 - lo0) / (nscan - 1);

  CutoffDecay out;
  out.expected = n + k - 2.0;
  for (double e : eps) {
    std::vector<char> hit(nscan, 0);
    for (int i = 0; i < nscan; ++i) {
      double t0 = lo0 + step * i;
      double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
      for (int j = 0; j < nphi; ++j) {
        double t1 = c.param_dim == 2
                        ? c.lo[1] + (c.hi[1] - c.lo[1]) * (j + 0.5) / nphi
                        : 0.0;
        double rr = c.pos(t0, t1).norm();
        rmin = std::min(rmin, rr);
        rmax = std::max(rmax, rr);
      }
      hit[static_cast<size_t>(i)] = (rmin <= 1.12 * e && rmax >= 0.43 * e) ? 1 : 0;
    }
    // Pad each run by one scan step, then integrate each padded run on a
    // refined subchart.
    std::vector<char> padded(hit);
    for (int i = 0; i < nscan; ++i)
      if (hit[static_cast<size_t>(i)]) {
        if (i > 0) padded[static_cast<size_t>(i - 1)] = 1;
        if (i + 1 < nscan) padded[static_cast<size_t>(i + 1)] = 1;
      }
    KahanSum energy;
    int i = 0;
    while (i < nscan) {
      if (!padded[static_cast<size_t>(i)]) {
        ++i;
        continue;
      }
      int j = i;
      while (j + 1 < nscan && padded[static_cast<size_t>(j + 1)]) ++j;
      double a = lo0 + step * i, b = lo0 + step * j;
      if (b > a) {
        DiscreteHypersurface sub = surface.subchart(a, b, 96);
        GeometryCache gs = geometry(sub, density, cone);
        for (size_t m = 0; m < gs.position.size(); ++m) {
          if (gs.degenerate[m] || !(gs.f[m] > 0.0)) continue;
          double rr = gs.position[m].norm();
          if (!(rr > 0)) continue;
          double dp = dphi(rr / e) / e;
          if (dp == 0.0) continue;
          double qn = gs.position[m].dot(gs.normal[m]) / rr;
          double tang = std::max(0.0, 1.0 - qn * qn);
          energy.add(gs.da_weight[m] * gs.f[m] * dp * dp * tang);
        }
      }
      i = j + 1;
    }
    out.eps.push_back(e);
    out.energy.push_back(energy.value());
  }

  out.monotone = true;
  for (size_t i = 0; i + 1 < out.energy.size(); ++i)
    if (out.energy[i + 1] > out.energy[i] * (1.0 + 1e-9)) out.monotone = false;
  std::vector<double> lx, ly;
  for (size_t i = 0; i < out.eps.size(); ++i) {
    if (!(out.energy[i] > 0)) fail(ErrorKind::InvalidArgument, "cutoff energy vanished; bands too narrow");
    lx.push_back(std::log(out.eps[i]));
    ly.push_back(std::log(out.energy[i]));
  }
  out.slope = fit_slope(lx, ly);
  return out;
}

}  // namespace conelab
