#pragma once

#include <Eigen/Dense>

#include "staticext/util.hpp"

namespace staticext {

// Quadrature grid on the unit sphere: Gauss-Legendre nodes in cos(theta)
// crossed with a uniform azimuth grid.  Products of harmonics up to the
// truncation degree integrate exactly, which the orthogonality pairings
// rely on.  The azimuth count is kept even so every coordinate-plane
// reflection maps the node set onto itself.
class AngularGrid {
 public:
  // lmax: truncation degree for mode I/O.  Internally transforms carry a
  // few extra degrees of headroom (lwork) so that frame conversions and
  // first/second gradients of band-limited fields stay exactly resolved.
  explicit AngularGrid(int lmax, int n_theta = 0, int n_phi = 0);

  int lmax() const { return lmax_; }
  int lwork() const { return lwork_; }
  int ntheta() const { return ntheta_; }
  int nphi() const { return nphi_; }
  int nang() const { return ntheta_ * nphi_; }
  int node(int itheta, int iphi) const { return itheta * nphi_ + iphi; }

  const Eigen::VectorXd& cos_theta() const { return cost_; }
  const Eigen::VectorXd& sin_theta() const { return sint_; }
  const Eigen::VectorXd& phi() const { return phi_; }
  // Combined solid-angle weights, one per node; they sum to 4*pi.
  const Eigen::VectorXd& w() const { return w_; }

  double cost(int k) const { return cost_[k / nphi_]; }
  double sint(int k) const { return sint_[k / nphi_]; }
  double cosp(int k) const { return cosp_[k % nphi_]; }
  double sinp(int k) const { return sinp_[k % nphi_]; }

  // Index permutations realizing theta -> pi - theta, phi -> -phi and
  // phi -> pi - phi on the node set.
  int flip_theta(int k) const {
    return node(ntheta_ - 1 - k / nphi_, k % nphi_);
  }
  int flip_phi_y(int k) const {  // phi -> -phi
    int ip = k % nphi_;
    return node(k / nphi_, (nphi_ - ip) % nphi_);
  }
  int flip_phi_x(int k) const {  // phi -> pi - phi
    int ip = k % nphi_;
    return node(k / nphi_, ((nphi_ / 2 - ip) % nphi_ + nphi_) % nphi_);
  }

 private:
  int lmax_, lwork_, ntheta_, nphi_;
  Eigen::VectorXd cost_, sint_, wtheta_, phi_, cosp_, sinp_, w_;
};

namespace detail {
// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
inline void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}
}  // namespace detail

inline AngularGrid::AngularGrid(int lmax, int n_theta, int n_phi) : lmax_(lmax) {
  if (lmax < 1) throw InputError("AngularGrid: lmax must be >= 1");
  lwork_ = lmax_ + 4;
  // Defaults give exact quadrature for products of two degree-lwork fields
  // against an analysis harmonic (integrand degree <= 3*lwork).
  ntheta_ = (n_theta > 0) ? n_theta : (3 * lwork_) / 2 + 2;
  nphi_ = (n_phi > 0) ? n_phi : 2 * ntheta_;
  if (nphi_ % 2) ++nphi_;  // reflection closure needs an even azimuth count
  if (ntheta_ < lmax_ + 1) throw InputError("AngularGrid: n_theta < lmax + 1");
  if (nphi_ < 2 * lmax_ + 1) throw InputError("AngularGrid: n_phi < 2*lmax + 1");

  Eigen::VectorXd xg, wg;
  detail::gauss_legendre(ntheta_, xg, wg);
  // descending in cos(theta): theta increases with the row index
  cost_.resize(ntheta_);
  sint_.resize(ntheta_);
  wtheta_.resize(ntheta_);
  for (int i = 0; i < ntheta_; ++i) {
    cost_[i] = xg[ntheta_ - 1 - i];
    sint_[i] = std::sqrt(1.0 - cost_[i] * cost_[i]);
    wtheta_[i] = wg[ntheta_ - 1 - i];
  }

  phi_.resize(nphi_);
  cosp_.resize(nphi_);
  sinp_.resize(nphi_);
  for (int k = 0; k < nphi_; ++k) {
    phi_[k] = 2.0 * M_PI * k / nphi_;
    cosp_[k] = std::cos(phi_[k]);
    sinp_[k] = std::sin(phi_[k]);
  }

  double wphi = 2.0 * M_PI / nphi_;
  w_.resize(nang());
  for (int i = 0; i < ntheta_; ++i)
    for (int k = 0; k < nphi_; ++k) w_[node(i, k)] = wtheta_[i] * wphi;
}

}  // namespace staticext
