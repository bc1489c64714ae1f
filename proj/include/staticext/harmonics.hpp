#pragma once

#include <Eigen/Dense>

#include "staticext/angular_grid.hpp"

namespace staticext {

// Real spherical harmonics in the Schmidt semi-normalized convention
// (no Condon-Shortley phase):
//   Y_{L,0} = P_L(cos th),  Y_{L,m}^{cos} = S_{Lm} cos(m ph),
//   Y_{L,m}^{sin} = S_{Lm} sin(m ph),   int Y^2 dOmega = 4 pi / (2L+1).
// Degree-1 members are exactly x/r, y/r, z/r with unit coefficient, which
// keeps the closed-form cokernel fields free of normalization clutter.
//
// Mode index M in 1..2L+1 maps as: M=1 -> (m=0,cos), M=2k -> (m=k,cos),
// M=2k+1 -> (m=k,sin).
struct ModeKey {
  int L = 0;
  int m = 0;
  bool cosine = true;
  bool operator==(const ModeKey&) const = default;
};

// Tables of harmonic values and tangent-frame derivatives on an angular
// grid, with analysis (quadrature + normalization) matrices folded in.
// Frame components on the unit sphere use the orthonormal basis
// {e_theta, e_phi}; the Hessian tables carry the trace-free part only.
class HarmonicTables {
 public:
  explicit HarmonicTables(const AngularGrid& ang);

  const AngularGrid& ang() const { return *ang_; }
  int lwork() const { return ang_->lwork(); }
  int ncoef() const { return ncoef_; }

  int coef_index(int L, int m, bool cosine) const {
    if (L > lwork() || m > L) throw InputError("harmonic index out of range");
    return L * L + (m == 0 ? 0 : 2 * m - 1 + (cosine ? 0 : 1));
  }
  int coef_index(const ModeKey& k) const { return coef_index(k.L, k.m, k.cosine); }
  ModeKey key_of(int coef) const { return keys_[coef]; }
  int L_of(int coef) const { return keys_[coef].L; }

  // spec-facing M in 1..2L+1 <-> (m, cos/sin)
  static ModeKey key_from_LM(int L, int M) {
    if (M < 1 || M > 2 * L + 1) throw InputError("mode index M out of range");
    if (M == 1) return {L, 0, true};
    return {L, M / 2, (M % 2 == 0)};
  }
  static int M_from_key(const ModeKey& k) {
    return k.m == 0 ? 1 : 2 * k.m + (k.cosine ? 0 : 1);
  }

  // Invariance of a mode family under the three coordinate-plane
  // reflections; odd (axial) families pick up one extra sign flip per
  // reflection from the eps rotation.
  static bool scalar_family_symmetric(const ModeKey& k) {
    return k.L % 2 == 0 && k.m % 2 == 0 && k.cosine;
  }
  static bool odd_family_symmetric(const ModeKey& k) {
    return k.L % 2 == 1 && k.m % 2 == 0 && k.m >= 2 && !k.cosine;
  }

  // L(L+1) and the norm constants per coefficient column.
  double Lambda(int coef) const { return lam_[coef]; }
  double NL(int coef) const { return NL_[coef]; }
  double PL(int coef) const { return PL_[coef]; }

  // Raw value/derivative tables, (nang x ncoef).
  const Eigen::MatrixXd& Yv() const { return Yv_; }
  const Eigen::MatrixXd& Yt() const { return Yt_; }
  const Eigen::MatrixXd& Yp() const { return Yp_; }
  const Eigen::MatrixXd& Htf1() const { return Htf1_; }
  const Eigen::MatrixXd& Htf2() const { return Htf2_; }

  // --- transforms; F rows index radial shells (any count), columns nodes ---

  // scalar field -> coefficients (rows x ncoef)
  Eigen::MatrixXd analyze_scalar(const Eigen::MatrixXd& F) const { return F * As_; }
  Eigen::MatrixXd synth_scalar(const Eigen::MatrixXd& C) const { return C * Yv_.transpose(); }
  // angular derivatives of a band-limited scalar, synthesized from its
  // coefficients: d/dtheta and (1/sin)d/dphi
  Eigen::MatrixXd synth_dtheta(const Eigen::MatrixXd& C) const { return C * Yt_.transpose(); }
  Eigen::MatrixXd synth_dphi_over_sin(const Eigen::MatrixXd& C) const { return C * Yp_.transpose(); }

  // tangent 1-form (frame components) -> even (gradient) and odd (rotated
  // gradient) coefficients; L=0 columns are identically zero.
  void analyze_vector(const Eigen::MatrixXd& Ft, const Eigen::MatrixXd& Fp,
                      Eigen::MatrixXd& Ce, Eigen::MatrixXd& Co) const {
    Ce = Ft * Ave_t_ + Fp * Ave_p_;
    Co = Ft * Avo_t_ + Fp * Avo_p_;
  }
  void synth_vector(const Eigen::MatrixXd& Ce, const Eigen::MatrixXd& Co,
                    Eigen::MatrixXd& Ft, Eigen::MatrixXd& Fp) const {
    Ft = Ce * Yt_.transpose() - Co * Yp_.transpose();
    Fp = Ce * Yp_.transpose() + Co * Yt_.transpose();
  }

  // tangent symmetric 2-tensor (frame components Ttt, Ttp, Tpp) ->
  // coefficients of the trace-free even (c), trace (d) and trace-free odd
  // parts: T = c*Htf + d*Y*Id + codd*Htf^*.  c columns vanish for L <= 1.
  void analyze_tangential(const Eigen::MatrixXd& Ttt, const Eigen::MatrixXd& Ttp,
                          const Eigen::MatrixXd& Tpp, Eigen::MatrixXd& Cc,
                          Eigen::MatrixXd& Cd, Eigen::MatrixXd& Codd) const {
    Eigen::MatrixXd T1 = 0.5 * (Ttt - Tpp);
    Cc = T1 * At1_ + Ttp * At2_;
    Codd = T1 * At1o_ + Ttp * At2o_;
    Eigen::MatrixXd tr = (Ttt + Tpp) * As_;
    Cd = 0.5 * (tr + Cc * lam_.asDiagonal());
  }
  void synth_tangential(const Eigen::MatrixXd& Cc, const Eigen::MatrixXd& Cd,
                        const Eigen::MatrixXd& Codd, Eigen::MatrixXd& Ttt,
                        Eigen::MatrixXd& Ttp, Eigen::MatrixXd& Tpp) const {
    Eigen::MatrixXd T1 = Cc * Htf1_.transpose() - Codd * Htf2_.transpose();
    Eigen::MatrixXd T2 = Cc * Htf2_.transpose() + Codd * Htf1_.transpose();
    Eigen::MatrixXd half_tr =
        (Cd - 0.5 * Cc * lam_.asDiagonal()) * Yv_.transpose();
    Ttt = half_tr + T1;
    Tpp = half_tr - T1;
    Ttp = T2;
  }

 private:
  const AngularGrid* ang_;
  int ncoef_;
  std::vector<ModeKey> keys_;
  Eigen::VectorXd lam_, NL_, PL_;
  Eigen::MatrixXd Yv_, Yt_, Yp_, Htf1_, Htf2_;
  Eigen::MatrixXd As_, Ave_t_, Ave_p_, Avo_t_, Avo_p_, At1_, At2_, At1o_, At2o_;
};

}  // namespace staticext
