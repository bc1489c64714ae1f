#pragma once

#include <Eigen/Dense>

#include "staticext/util.hpp"

namespace staticext {

// Radial discretization of the exterior domain r >= 1 in the compactified
// coordinate s = 1/r.  Nodes are Chebyshev-Gauss-Lobatto points on [0, 1],
// ordered s[0] = 1 (the boundary sphere) down to s[n-1] = 0 (spatial
// infinity).  Decaying fields carry an exact zero at s = 0, so the decay
// condition at infinity is a plain Dirichlet row there.
class RadialGrid {
 public:
  explicit RadialGrid(int n_r);

  int n() const { return n_; }
  const Eigen::VectorXd& s() const { return s_; }
  double s(int j) const { return s_[j]; }
  // r = 1/s; infinity at the last node.
  double r(int j) const { return s_[j] > 0 ? 1.0 / s_[j] : std::numeric_limits<double>::infinity(); }

  // Spectral differentiation in s on the CGL nodes.
  const Eigen::MatrixXd& Ds() const { return Ds_; }
  // d/dr = -s^2 d/ds as a dense operator on nodal values.
  const Eigen::MatrixXd& Dr() const { return Dr_; }

  // Clenshaw-Curtis weights for integration in s over [0, 1].
  const Eigen::VectorXd& ws() const { return ws_; }

  // Value of the interpolant of nodal data at s = 0 equals the nodal value
  // there; this helper instead evaluates the interpolant anywhere in [0,1]
  // (barycentric formula), used for flux extrapolation to infinity.
  double interpolate(const Eigen::VectorXd& values, double s_eval) const;

 private:
  int n_;
  Eigen::VectorXd s_;
  Eigen::MatrixXd Ds_, Dr_;
  Eigen::VectorXd ws_;
  Eigen::VectorXd bary_;  // barycentric weights
};

inline RadialGrid::RadialGrid(int n_r) : n_(n_r) {
  if (n_r < 8) throw InputError("RadialGrid: need at least 8 radial nodes");
  const int N = n_ - 1;
  s_.resize(n_);
  for (int j = 0; j < n_; ++j) {
    // cos(j*pi/N) mapped from [-1,1] to [0,1]; trig identity keeps the
    // endpoints exactly 1 and 0 and the grid exactly symmetric.
    s_[j] = std::pow(std::sin(0.5 * M_PI * (N - j) / N), 2.0) * 2.0 - 1.0;
    s_[j] = 0.5 * (1.0 + s_[j]);
  }
  s_[0] = 1.0;
  s_[N] = 0.0;

  // Chebyshev differentiation matrix (Trefethen) on x = 2s - 1.
  Eigen::VectorXd x(n_);
  for (int j = 0; j < n_; ++j) x[j] = 2.0 * s_[j] - 1.0;
  Eigen::VectorXd c(n_);
  for (int j = 0; j < n_; ++j) c[j] = (j == 0 || j == N) ? 2.0 : 1.0;
  Eigen::MatrixXd Dx(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      if (i != j) {
        double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
        Dx(i, j) = (c[i] / c[j]) * sign / (x[i] - x[j]);
      }
    }
  }
  for (int i = 0; i < n_; ++i) {
    double rowsum = 0.0;
    for (int j = 0; j < n_; ++j)
      if (j != i) rowsum += Dx(i, j);
    Dx(i, i) = -rowsum;  // negative-sum trick
  }
  Ds_ = 2.0 * Dx;

  Dr_ = Ds_;
  for (int i = 0; i < n_; ++i) Dr_.row(i) *= -s_[i] * s_[i];

  // Clenshaw-Curtis weights on [-1,1], scaled to [0,1].  Cosine-sum form;
  // exact for polynomials of degree <= N.
  ws_.setZero(n_);
  for (int j = 0; j <= N; ++j) {
    double theta = M_PI * j / N;
    double sum = 1.0;
    for (int k = 1; k <= N / 2; ++k) {
      double bk = (2 * k == N) ? 1.0 : 2.0;
      sum -= bk * std::cos(2.0 * k * theta) / (4.0 * k * k - 1.0);
    }
    double w = 2.0 * sum / N;
    if (j == 0 || j == N) w *= 0.5;
    ws_[j] = 0.5 * w;  // [-1,1] -> [0,1]
  }

  bary_.resize(n_);
  for (int j = 0; j < n_; ++j) {
    bary_[j] = (j % 2 == 0) ? 1.0 : -1.0;
    if (j == 0 || j == N) bary_[j] *= 0.5;
  }
}

inline double RadialGrid::interpolate(const Eigen::VectorXd& values, double s_eval) const {
  double num = 0.0, den = 0.0;
  for (int j = 0; j < n_; ++j) {
    double d = s_eval - s_[j];
    if (d == 0.0) return values[j];
    double t = bary_[j] / d;
    num += t * values[j];
    den += t;
  }
  return num / den;
}

}  // namespace staticext
