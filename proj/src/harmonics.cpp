#include "staticext/harmonics.hpp"

namespace staticext {

HarmonicTables::HarmonicTables(const AngularGrid& ang) : ang_(&ang) {
  const int lw = ang.lwork();
  ncoef_ = (lw + 1) * (lw + 1);
  const int nt = ang.ntheta(), np = ang.nphi(), na = ang.nang();

  keys_.resize(static_cast<size_t>(ncoef_));
  lam_.resize(ncoef_);
  NL_.resize(ncoef_);
  PL_.resize(ncoef_);
  for (int L = 0; L <= lw; ++L) {
    for (int m = 0; m <= L; ++m) {
      for (int t = 0; t < (m == 0 ? 1 : 2); ++t) {
        ModeKey k{L, m, t == 0};
        int c = coef_index(k);
        keys_[static_cast<size_t>(c)] = k;
        lam_[c] = static_cast<double>(L) * (L + 1);
        NL_[c] = 4.0 * M_PI / (2 * L + 1);
        PL_[c] = 0.5 * (L - 1.0) * L * (L + 1.0) * (L + 2.0) * NL_[c];
      }
    }
  }

  // Schmidt semi-normalized associated Legendre values and theta
  // derivatives per colatitude row.
  Eigen::MatrixXd P(nt, ncoef_), dP(nt, ncoef_);
  auto at = [](int L, int m) { return L * L + (m == 0 ? 0 : 2 * m - 1); };
  for (int i = 0; i < nt; ++i) {
    double x = ang.cos_theta()[i];
    double sx = ang.sin_theta()[i];
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(lw + 1, lw + 1);
    S(0, 0) = 1.0;
    if (lw >= 1) S(1, 1) = sx;
    for (int m = 2; m <= lw; ++m)
      S(m, m) = sx * std::sqrt((2.0 * m - 1.0) / (2.0 * m)) * S(m - 1, m - 1);
    for (int m = 0; m <= lw; ++m) {
      for (int L = m + 1; L <= lw; ++L) {
        double a = std::sqrt(static_cast<double>(L) * L - m * m);
        double b = std::sqrt(static_cast<double>(L - 1) * (L - 1) - m * m);
        S(L, m) = ((2.0 * L - 1.0) * x * S(L - 1, m) - (L > m + 1 ? b * S(L - 2, m) : 0.0)) / a;
      }
    }
    for (int L = 0; L <= lw; ++L) {
      for (int m = 0; m <= L; ++m) {
        double v = S(L, m);
        double d = (L == 0) ? 0.0
                            : (L * x * S(L, m) -
                               (L > m ? std::sqrt(static_cast<double>(L) * L - m * m) * S(L - 1, m)
                                      : 0.0)) /
                                  sx;
        int c0 = at(L, m);
        P(i, c0) = v;
        dP(i, c0) = d;
        if (m > 0) {  // sin partner shares the Legendre part
          P(i, c0 + 1) = v;
          dP(i, c0 + 1) = d;
        }
      }
    }
  }

  Yv_.setZero(na, ncoef_);
  Yt_.setZero(na, ncoef_);
  Yp_.setZero(na, ncoef_);
  Htf1_.setZero(na, ncoef_);
  Htf2_.setZero(na, ncoef_);
  for (int i = 0; i < nt; ++i) {
    double x = ang.cos_theta()[i];
    double sx = ang.sin_theta()[i];
    double cot = x / sx;
    for (int k = 0; k < np; ++k) {
      int a = ang.node(i, k);
      double ph = ang.phi()[k];
      for (int c = 0; c < ncoef_; ++c) {
        const ModeKey& key = keys_[static_cast<size_t>(c)];
        int m = key.m;
        double trig = key.cosine ? std::cos(m * ph) : std::sin(m * ph);
        // derivative of the azimuthal factor w.r.t. phi
        double dtrig = key.cosine ? -m * std::sin(m * ph) : m * std::cos(m * ph);
        double p = P(i, c), g1 = dP(i, c);
        Yv_(a, c) = p * trig;
        Yt_(a, c) = g1 * trig;
        Yp_(a, c) = p * dtrig / sx;
        // second theta derivative from the Legendre equation
        double ptt = -cot * g1 - (lam_[c] - m * m / (sx * sx)) * p;
        double Htt = ptt * trig;
        double Hpp = (cot * g1 - m * m * p / (sx * sx)) * trig;
        Htf1_(a, c) = 0.5 * (Htt - Hpp);
        Htf2_(a, c) = (g1 - cot * p) * dtrig / sx;
      }
    }
  }

  // Analysis matrices: quadrature weights and inverse norms folded in.
  const Eigen::VectorXd& w = ang.w();
  Eigen::VectorXd inv_s(ncoef_), inv_v(ncoef_), inv_t(ncoef_);
  for (int c = 0; c < ncoef_; ++c) {
    inv_s[c] = 1.0 / NL_[c];
    inv_v[c] = lam_[c] > 0 ? 1.0 / (lam_[c] * NL_[c]) : 0.0;
    inv_t[c] = PL_[c] > 0 ? 2.0 / PL_[c] : 0.0;
  }
  As_ = w.asDiagonal() * Yv_ * inv_s.asDiagonal();
  Ave_t_ = w.asDiagonal() * Yt_ * inv_v.asDiagonal();
  Ave_p_ = w.asDiagonal() * Yp_ * inv_v.asDiagonal();
  Avo_t_ = -(w.asDiagonal() * Yp_ * inv_v.asDiagonal());
  Avo_p_ = w.asDiagonal() * Yt_ * inv_v.asDiagonal();
  At1_ = w.asDiagonal() * Htf1_ * inv_t.asDiagonal();
  At2_ = w.asDiagonal() * Htf2_ * inv_t.asDiagonal();
  At1o_ = -(w.asDiagonal() * Htf2_ * inv_t.asDiagonal());
  At2o_ = w.asDiagonal() * Htf1_ * inv_t.asDiagonal();
}

}  // namespace staticext
