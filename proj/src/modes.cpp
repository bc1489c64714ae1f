#include "staticext/modes.hpp"

namespace staticext {

namespace {

// columns above the physical truncation are dropped
void truncate_cols(const Discretization& D, Eigen::MatrixXd& C) {
  const auto& H = D.harm;
  for (int c = 0; c < C.cols(); ++c)
    if (H.L_of(c) > D.ang.lmax()) C.col(c).setZero();
}

// divide column-wise by s^pow, rows with s = 0 set to zero (decay)
Eigen::MatrixXd unscale_s(const Discretization& D, const Eigen::MatrixXd& C, int pow) {
  Eigen::MatrixXd out = C;
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    if (s == 0.0)
      out.row(j).setZero();
    else
      out.row(j) /= std::pow(s, pow);
  }
  return out;
}

Eigen::MatrixXd scale_s(const Discretization& D, const Eigen::MatrixXd& C, int pow) {
  Eigen::MatrixXd out = C;
  for (int j = 0; j < D.nr(); ++j) out.row(j) *= std::pow(D.rad.s(j), pow);
  return out;
}

}  // namespace

RadialProfile TensorModes::profile(int L, int M, bool even) const {
  const auto& H = D->harm;
  int col = H.coef_index(HarmonicTables::key_from_LM(L, M));
  RadialProfile P;
  if (even) {
    P.a = a.col(col);
    if (L >= 1) P.b = b.col(col);
    if (L >= 2) P.c = c.col(col);
    P.d = d.col(col);
  } else {
    if (L >= 1) P.b = bo.col(col);
    if (L >= 2) P.c = co.col(col);
  }
  return P;
}

TensorModes transform_to_modes(const SymTensorField& T) {
  const Discretization& D = T.disc();
  const auto& H = D.harm;
  TensorModes M;
  M.D = &D;
  M.a = H.analyze_scalar(T.comp(SymTensorField::RR));
  Eigen::MatrixXd Ce, Co;
  H.analyze_vector(T.comp(SymTensorField::RT), T.comp(SymTensorField::RP), Ce, Co);
  M.b = unscale_s(D, Ce, 1);
  M.bo = unscale_s(D, Co, 1);
  Eigen::MatrixXd Cc, Cd, Codd;
  H.analyze_tangential(T.comp(SymTensorField::TT), T.comp(SymTensorField::TP),
                       T.comp(SymTensorField::PP), Cc, Cd, Codd);
  M.c = Cc;
  M.d = Cd;
  M.co = unscale_s(D, Codd, 2);
  for (auto* m : {&M.a, &M.b, &M.c, &M.d, &M.bo, &M.co}) truncate_cols(D, *m);
  return M;
}

ScalarModes transform_to_modes(const ScalarField& f) {
  const Discretization& D = f.disc();
  ScalarModes M;
  M.D = &D;
  M.p = D.harm.analyze_scalar(f.v());
  truncate_cols(D, M.p);
  return M;
}

OneFormModes transform_to_modes(const OneFormField& V) {
  const Discretization& D = V.disc();
  OneFormModes M;
  M.D = &D;
  M.n = D.harm.analyze_scalar(V.comp(0));
  Eigen::MatrixXd Ce, Co;
  D.harm.analyze_vector(V.comp(1), V.comp(2), Ce, Co);
  M.g = unscale_s(D, Ce, 1);
  M.s = unscale_s(D, Co, 1);
  for (auto* m : {&M.n, &M.g, &M.s}) truncate_cols(D, *m);
  return M;
}

SymTensorField transform_from_modes(const TensorModes& M) {
  const Discretization& D = *M.D;
  const auto& H = D.harm;
  SymTensorField T(D);
  T.comp(SymTensorField::RR) = H.synth_scalar(M.a);
  Eigen::MatrixXd Ft, Fp;
  H.synth_vector(scale_s(D, M.b, 1), scale_s(D, M.bo, 1), Ft, Fp);
  T.comp(SymTensorField::RT) = Ft;
  T.comp(SymTensorField::RP) = Fp;
  Eigen::MatrixXd Ttt, Ttp, Tpp;
  H.synth_tangential(M.c, M.d, scale_s(D, M.co, 2), Ttt, Ttp, Tpp);
  T.comp(SymTensorField::TT) = Ttt;
  T.comp(SymTensorField::TP) = Ttp;
  T.comp(SymTensorField::PP) = Tpp;
  return T;
}

ScalarField transform_from_modes_scalar(const ScalarModes& M) {
  const Discretization& D = *M.D;
  return ScalarField(D, D.harm.synth_scalar(M.p));
}

OneFormField transform_from_modes_oneform(const OneFormModes& M) {
  const Discretization& D = *M.D;
  OneFormField V(D);
  V.comp(0) = D.harm.synth_scalar(M.n);
  Eigen::MatrixXd Ft, Fp;
  D.harm.synth_vector(scale_s(D, M.g, 1), scale_s(D, M.s, 1), Ft, Fp);
  V.comp(1) = Ft;
  V.comp(2) = Fp;
  return V;
}

double truncation_error(const SymTensorField& T, const TensorModes& M) {
  SymTensorField R = transform_from_modes(M);
  double num = 0, den = 0;
  for (int c = 0; c < 6; ++c) {
    num += (T.comp(c) - R.comp(c)).squaredNorm();
    den += T.comp(c).squaredNorm();
  }
  return den > 0 ? std::sqrt(num / den) : 0.0;
}

SurfaceScalarModes surface_scalar_modes(const Discretization& D, const Eigen::VectorXd& f) {
  SurfaceScalarModes out;
  Eigen::MatrixXd C = D.harm.analyze_scalar(f.transpose());
  out.c = C.row(0).transpose();
  return out;
}

SurfaceOneFormModes surface_oneform_modes(const Discretization& D, const Eigen::VectorXd& fn,
                                          const Eigen::VectorXd& ft, const Eigen::VectorXd& fp) {
  SurfaceOneFormModes out;
  out.n = surface_scalar_modes(D, fn).c;
  Eigen::MatrixXd Ce, Co;
  D.harm.analyze_vector(ft.transpose(), fp.transpose(), Ce, Co);
  out.g = Ce.row(0).transpose();
  out.s = Co.row(0).transpose();
  return out;
}

SurfaceTensorModes surface_tensor_modes(const Discretization& D, const Eigen::VectorXd& Ttt,
                                        const Eigen::VectorXd& Ttp, const Eigen::VectorXd& Tpp) {
  SurfaceTensorModes out;
  Eigen::MatrixXd Cc, Cd, Codd;
  D.harm.analyze_tangential(Ttt.transpose(), Ttp.transpose(), Tpp.transpose(), Cc, Cd, Codd);
  out.c = Cc.row(0).transpose();
  out.d = Cd.row(0).transpose();
  out.codd = Codd.row(0).transpose();
  return out;
}

namespace {

// smooth decaying radial profile: s^2 times a low-degree polynomial in s
Eigen::VectorXd random_profile(const Discretization& D, Rng& rng, double amp) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(D.nr());
  double coef[4];
  for (double& c : coef) c = amp * rng.sym();
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    double poly = coef[0] + s * (coef[1] + s * (coef[2] + s * coef[3]));
    p[j] = s * s * poly;
  }
  return p;
}

}  // namespace

SymTensorField random_tensor_field(const Discretization& D, Rng& rng, double amplitude,
                                   bool symmetric_only) {
  const auto& H = D.harm;
  TensorModes M;
  M.D = &D;
  int nc = H.ncoef();
  for (auto* m : {&M.a, &M.b, &M.c, &M.d, &M.bo, &M.co}) m->setZero(D.nr(), nc);
  for (int c = 0; c < nc; ++c) {
    ModeKey k = H.key_of(c);
    if (k.L > D.ang.lmax()) continue;
    double fade = amplitude / (1.0 + k.L * k.L);
    bool even_ok = !symmetric_only || HarmonicTables::scalar_family_symmetric(k);
    bool odd_ok = !symmetric_only || HarmonicTables::odd_family_symmetric(k);
    if (even_ok) {
      M.a.col(c) = random_profile(D, rng, fade);
      if (k.L >= 1) M.b.col(c) = random_profile(D, rng, fade);
      if (k.L >= 2) M.c.col(c) = random_profile(D, rng, fade);
      M.d.col(c) = random_profile(D, rng, fade);
    }
    if (k.L >= 1 && odd_ok) {
      M.bo.col(c) = random_profile(D, rng, fade);
      if (k.L >= 2) M.co.col(c) = random_profile(D, rng, fade);
    }
  }
  return transform_from_modes(M);
}

ScalarField random_scalar_field(const Discretization& D, Rng& rng, double amplitude,
                                bool symmetric_only) {
  const auto& H = D.harm;
  ScalarModes M;
  M.D = &D;
  M.p.setZero(D.nr(), H.ncoef());
  for (int c = 0; c < H.ncoef(); ++c) {
    ModeKey k = H.key_of(c);
    if (k.L > D.ang.lmax()) continue;
    if (symmetric_only && !HarmonicTables::scalar_family_symmetric(k)) continue;
    M.p.col(c) = random_profile(D, rng, amplitude / (1.0 + k.L * k.L));
  }
  ScalarField out = transform_from_modes_scalar(M);
  out.decay_tag = 2.0;
  return out;
}

}  // namespace staticext
