#pragma once

#include <array>
#include <memory>

#include <Eigen/Dense>

#include "staticext/harmonics.hpp"
#include "staticext/radial_grid.hpp"

namespace staticext {

// Everything the field layer needs about the grid, built once and shared.
// Also caches the Cartesian components of the orthonormal spherical frame
// {rhat, that, phat} per angular node.
struct Discretization {
  RadialGrid rad;
  AngularGrid ang;
  HarmonicTables harm;
  // frame vectors: (nang x 3) each
  Eigen::MatrixXd rhat, that, phat;

  Discretization(int n_r, int lmax, int n_theta = 0, int n_phi = 0)
      : rad(n_r), ang(lmax, n_theta, n_phi), harm(ang) {
    int na = ang.nang();
    rhat.resize(na, 3);
    that.resize(na, 3);
    phat.resize(na, 3);
    for (int k = 0; k < na; ++k) {
      double st = ang.sint(k), ct = ang.cost(k), cp = ang.cosp(k), sp = ang.sinp(k);
      rhat.row(k) << st * cp, st * sp, ct;
      that.row(k) << ct * cp, ct * sp, -st;
      phat.row(k) << -sp, cp, 0.0;
    }
  }

  int nr() const { return rad.n(); }
  int nang() const { return ang.nang(); }
};

using Grid2 = Eigen::MatrixXd;  // (n_r x nang) sample matrix

// ----------------------------------------------------------------------
// Field types.  Values live on the (radial x angular) collocation grid in
// the orthonormal spherical frame; perturbation fields vanish identically
// at the s = 0 row (spatial infinity).
// ----------------------------------------------------------------------

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Discretization& D, double fill = 0.0)
      : D_(&D), v_(Grid2::Constant(D.nr(), D.nang(), fill)) {}
  ScalarField(const Discretization& D, Grid2 values) : D_(&D), v_(std::move(values)) {}

  const Discretization& disc() const { return *D_; }
  const Grid2& v() const { return v_; }
  Grid2& v() { return v_; }
  double decay_tag = 1.0;  // nominal decay exponent, informational

  ScalarField& operator+=(const ScalarField& o) { v_ += o.v_; return *this; }
  ScalarField& operator-=(const ScalarField& o) { v_ -= o.v_; return *this; }
  ScalarField& operator*=(double c) { v_ *= c; return *this; }

 private:
  const Discretization* D_ = nullptr;
  Grid2 v_;
};

// 1-form with frame components (r, theta, phi).
class OneFormField {
 public:
  OneFormField() = default;
  explicit OneFormField(const Discretization& D) : D_(&D) {
    for (auto& c : comp_) c = Grid2::Zero(D.nr(), D.nang());
  }
  const Discretization& disc() const { return *D_; }
  const Grid2& comp(int a) const { return comp_[static_cast<size_t>(a)]; }
  Grid2& comp(int a) { return comp_[static_cast<size_t>(a)]; }

  OneFormField& operator+=(const OneFormField& o) {
    for (int a = 0; a < 3; ++a) comp_[a] += o.comp_[a];
    return *this;
  }
  OneFormField& operator*=(double c) {
    for (auto& m : comp_) m *= c;
    return *this;
  }

 private:
  const Discretization* D_ = nullptr;
  std::array<Grid2, 3> comp_;
};

// Symmetric 2-tensor, frame components ordered (rr, rt, rp, tt, tp, pp).
class SymTensorField {
 public:
  enum Comp { RR = 0, RT = 1, RP = 2, TT = 3, TP = 4, PP = 5 };

  SymTensorField() = default;
  explicit SymTensorField(const Discretization& D) : D_(&D) {
    for (auto& c : comp_) c = Grid2::Zero(D.nr(), D.nang());
  }
  const Discretization& disc() const { return *D_; }
  const Grid2& comp(int a) const { return comp_[static_cast<size_t>(a)]; }
  Grid2& comp(int a) { return comp_[static_cast<size_t>(a)]; }

  SymTensorField& operator+=(const SymTensorField& o) {
    for (int a = 0; a < 6; ++a) comp_[a] += o.comp_[a];
    return *this;
  }
  SymTensorField& operator-=(const SymTensorField& o) {
    for (int a = 0; a < 6; ++a) comp_[a] -= o.comp_[a];
    return *this;
  }
  SymTensorField& operator*=(double c) {
    for (auto& m : comp_) m *= c;
    return *this;
  }

 private:
  const Discretization* D_ = nullptr;
  std::array<Grid2, 6> comp_;
};

// Cartesian views: symmetric tensors as (xx, xy, xz, yy, yz, zz).
// Conversion between frame and Cartesian components is a pointwise
// orthogonal change of basis and round-trips to machine precision.
using Cart6 = std::array<Grid2, 6>;
using Cart3 = std::array<Grid2, 3>;

Cart6 to_cartesian(const SymTensorField& T);
SymTensorField from_cartesian(const Discretization& D, const Cart6& C);
Cart3 to_cartesian(const OneFormField& V);
OneFormField oneform_from_cartesian(const Discretization& D, const Cart3& C);

// ----------------------------------------------------------------------
// Spectral calculus: Cartesian first derivatives of a scalar sample.
// Radial part via the collocation derivative in s, angular part through
// harmonic space (exact for band-limited content up to lwork).
// ----------------------------------------------------------------------
Cart3 cart_gradient(const Discretization& D, const Grid2& u);

// Laplacian = div grad, nested first derivatives.
Grid2 cart_laplacian(const Discretization& D, const Grid2& u);

// ----------------------------------------------------------------------
// Quadrature
// ----------------------------------------------------------------------

// Integral over the exterior domain of a pointwise sample F (which must
// vanish at s = 0 fast enough that F/s^4 -> 0; the s = 0 row is taken as
// that limit).  Measure: dx = r^2 dr dOmega = s^-4 ds dOmega.
double volume_integral(const Discretization& D, const Grid2& F);

// Integral over the boundary sphere (s = 1 row) of a surface sample.
double surface_integral(const Discretization& D, const Eigen::VectorXd& F);

// ----------------------------------------------------------------------
// Reflection group: the eight compositions of coordinate-plane
// reflections.  The grid is closed under all of them, so the pullback is
// an index permutation with component signs.
// ----------------------------------------------------------------------
ScalarField reflection_project(const ScalarField& f);
OneFormField reflection_project(const OneFormField& f);
SymTensorField reflection_project(const SymTensorField& f);

// surface variants acting on the boundary row only
Eigen::VectorXd surface_reflection_project_scalar(const Discretization& D,
                                                  const Eigen::VectorXd& f);

// The pi/2 tangent rotation on the unit sphere used to build odd-parity
// fields; parallel, squares to -identity, preserves lengths.
struct EpsilonRotation {
  // action on tangent vector components (v_theta, v_phi)
  static std::pair<double, double> vec(double v1, double v2) { return {v2, -v1}; }
  // action on 1-form components
  static std::pair<double, double> form(double w1, double w2) { return {-w2, w1}; }
};

}  // namespace staticext
