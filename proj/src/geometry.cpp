#include "staticext/geometry.hpp"

namespace staticext {

namespace {

constexpr int sym_of[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
constexpr int sym_i[6] = {0, 0, 0, 1, 1, 2};
constexpr int sym_j[6] = {0, 1, 2, 1, 2, 2};

// 3x3 symmetric inverse; returns determinant
inline double inv3(const double g[6], double out[6]) {
  double a = g[0], b = g[1], c = g[2], d = g[3], e = g[4], f = g[5];
  double A = d * f - e * e;
  double B = c * e - b * f;
  double C = b * e - c * d;
  double det = a * A + b * B + c * C;
  double inv = 1.0 / det;
  out[0] = A * inv;
  out[1] = B * inv;
  out[2] = C * inv;
  out[3] = (a * f - c * c) * inv;
  out[4] = (b * c - a * e) * inv;
  out[5] = (a * d - b * b) * inv;
  return det;
}

}  // namespace

bool MetricState::admissible() const {
  const Discretization& D = disc();
  Cart6 Tc = to_cartesian(theta);
  for (int j = 0; j < D.nr(); ++j) {
    for (int k = 0; k < D.nang(); ++k) {
      double g[6];
      for (int c = 0; c < 6; ++c) g[c] = Tc[static_cast<size_t>(c)](j, k);
      g[0] += 1.0;
      g[3] += 1.0;
      g[5] += 1.0;
      double m1 = g[0];
      double m2 = g[0] * g[3] - g[1] * g[1];
      double gi[6];
      double det = inv3(g, gi);
      if (!(m1 > 0 && m2 > 0 && det > 0)) return false;
      if (!(1.0 + lapse_pert.v()(j, k) > 0)) return false;
    }
  }
  return true;
}

BoundaryData BoundaryData::round_data(const Discretization& D) {
  BoundaryData bd;
  bd.D = &D;
  bd.s_tt = Eigen::VectorXd::Ones(D.nang());
  bd.s_tp = Eigen::VectorXd::Zero(D.nang());
  bd.s_pp = Eigen::VectorXd::Ones(D.nang());
  bd.h = Eigen::VectorXd::Constant(D.nang(), 2.0);
  bd.symmetric = true;
  return bd;
}

bool BoundaryData::positive_definite() const {
  for (int k = 0; k < D->nang(); ++k) {
    if (!(s_tt[k] > 0 && s_tt[k] * s_pp[k] - s_tp[k] * s_tp[k] > 0)) return false;
  }
  return true;
}

double BoundaryData::symmetry_defect() const {
  Eigen::VectorXd tt = s_tt, tp = s_tp, pp = s_pp;
  surface_project_tensor(*D, tt, tp, pp);
  Eigen::VectorXd hp = surface_project_scalar(*D, h);
  double dev = (tt - s_tt).cwiseAbs().maxCoeff();
  dev = std::max(dev, (tp - s_tp).cwiseAbs().maxCoeff());
  dev = std::max(dev, (pp - s_pp).cwiseAbs().maxCoeff());
  dev = std::max(dev, (hp - h).cwiseAbs().maxCoeff());
  return dev;
}

void BoundaryData::validate() const {
  if (!positive_definite()) throw InputError("boundary metric is not positive definite");
  if (symmetric && symmetry_defect() > 1e-12)
    throw InputError("boundary data flagged symmetric but fails the reflection check");
}

SlotNorms residual_norms(const ResidualVector& R, double delta) {
  const Discretization& D = R.disc();
  WeightedNormSpec spec{0, delta};
  SlotNorms out{};
  out.s1 = weighted_norm(R.interior_tensor, spec);
  out.s2 = weighted_norm(R.interior_scalar, spec);
  auto surf2 = [&D](const Eigen::VectorXd& v) { return v.cwiseAbs2().dot(D.ang.w()); };
  out.s3 = std::sqrt(surf2(R.gauge_n) + surf2(R.gauge_t) + surf2(R.gauge_p));
  out.s4 = std::sqrt(surf2(R.metric_tt) + 2.0 * surf2(R.metric_tp) + surf2(R.metric_pp));
  out.s5 = std::sqrt(surf2(R.meancurv));
  return out;
}

// ---------------------------------------------------------------------
// surface reflection averages
// ---------------------------------------------------------------------

namespace {
struct SurfElement {
  double sgn_t, sgn_p;
  std::vector<int> perm;
};

std::vector<SurfElement> surf_elements(const Discretization& D) {
  std::vector<SurfElement> out;
  for (int sx : {1, -1}) {
    for (int sy : {1, -1}) {
      for (int sz : {1, -1}) {
        SurfElement e;
        e.sgn_t = sz;
        e.sgn_p = sx * sy;
        e.perm.resize(static_cast<size_t>(D.nang()));
        for (int k = 0; k < D.nang(); ++k) {
          int kk = k;
          if (sz < 0) kk = D.ang.flip_theta(kk);
          if (sx > 0 && sy < 0) kk = D.ang.flip_phi_y(kk);
          if (sx < 0 && sy > 0) kk = D.ang.flip_phi_x(kk);
          if (sx < 0 && sy < 0) {
            int ip = kk % D.ang.nphi(), it = kk / D.ang.nphi();
            kk = D.ang.node(it, (ip + D.ang.nphi() / 2) % D.ang.nphi());
          }
          e.perm[static_cast<size_t>(k)] = kk;
        }
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}
}  // namespace

Eigen::VectorXd surface_project_scalar(const Discretization& D, const Eigen::VectorXd& f) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.size());
  for (const auto& e : surf_elements(D))
    for (int k = 0; k < f.size(); ++k) acc[k] += f[e.perm[static_cast<size_t>(k)]];
  return acc / 8.0;
}

void surface_project_tensor(const Discretization& D, Eigen::VectorXd& tt, Eigen::VectorXd& tp,
                            Eigen::VectorXd& pp) {
  Eigen::VectorXd att = Eigen::VectorXd::Zero(tt.size()), atp = att, app = att;
  for (const auto& e : surf_elements(D)) {
    for (int k = 0; k < tt.size(); ++k) {
      int kk = e.perm[static_cast<size_t>(k)];
      att[k] += tt[kk];
      atp[k] += e.sgn_t * e.sgn_p * tp[kk];
      app[k] += pp[kk];
    }
  }
  tt = att / 8.0;
  tp = atp / 8.0;
  pp = app / 8.0;
}

// ---------------------------------------------------------------------
// GeometryContext
// ---------------------------------------------------------------------

GeometryContext::GeometryContext(const MetricState& state)
    : D_(&state.disc()), state_(&state) {}

void GeometryContext::ensure_base() {
  if (base_) return;
  const Discretization& D = *D_;
  Tc_ = to_cartesian(state_->theta);
  f_ = Grid2::Constant(D.nr(), D.nang(), 1.0) + state_->lapse_pert.v();

  for (int a = 0; a < 6; ++a)
    dG_[static_cast<size_t>(a)] = cart_gradient(D, Tc_[static_cast<size_t>(a)]);

  for (auto& m : Ginv_) m.resize(D.nr(), D.nang());
  for (auto& m : Dk_) m.resize(D.nr(), D.nang());
  for (auto& m : omega_) m.resize(D.nr(), D.nang());

  const int nr = D.nr(), na = D.nang();
  for (int j = 0; j < nr; ++j) {
    for (int k = 0; k < na; ++k) {
      double g[6], gi[6];
      for (int c = 0; c < 6; ++c) g[c] = Tc_[static_cast<size_t>(c)](j, k);
      g[0] += 1.0;
      g[3] += 1.0;
      g[5] += 1.0;
      double det = inv3(g, gi);
      if (!(det > 0)) throw NumericalError("metric not invertible at a grid node");
      for (int c = 0; c < 6; ++c) Ginv_[static_cast<size_t>(c)](j, k) = gi[c];

      double P[3][6];  // P[l][sym(ij)] = d_l g_ij
      for (int l = 0; l < 3; ++l)
        for (int c = 0; c < 6; ++c)
          P[l][c] = dG_[static_cast<size_t>(c)][static_cast<size_t>(l)](j, k);

      // C_lij = d_i g_lj + d_j g_li - d_l g_ij ; D^k_ij = 1/2 g^{kl} C_lij
      for (int kk = 0; kk < 3; ++kk) {
        for (int c = 0; c < 6; ++c) {
          int i = sym_i[c], jj = sym_j[c];
          double acc = 0;
          for (int l = 0; l < 3; ++l) {
            double C = P[i][sym_of[l][jj]] + P[jj][sym_of[l][i]] - P[l][c];
            acc += gi[sym_of[kk][l]] * C;
          }
          Dk_[static_cast<size_t>(kk * 6 + c)](j, k) = 0.5 * acc;
        }
      }

      // omega_i = div(Theta)_i - 1/2 d(tr Theta)_i, flat operations
      for (int i = 0; i < 3; ++i) {
        double div = P[0][sym_of[0][i]] + P[1][sym_of[1][i]] + P[2][sym_of[2][i]];
        double dtr = P[i][0] + P[i][3] + P[i][5];
        omega_[static_cast<size_t>(i)](j, k) = div - 0.5 * dtr;
      }
    }
  }
  base_ = true;
}

void GeometryContext::ensure_curvature() {
  if (curv_) return;
  ensure_base();
  const Discretization& D = *D_;
  for (int a = 0; a < 18; ++a)
    dD_[static_cast<size_t>(a)] = cart_gradient(D, Dk_[static_cast<size_t>(a)]);

  for (auto& m : ric_) m.resize(D.nr(), D.nang());
  const int nr = D.nr(), na = D.nang();
  for (int j = 0; j < nr; ++j) {
    for (int k = 0; k < na; ++k) {
      double Dv[3][6];
      for (int kk = 0; kk < 3; ++kk)
        for (int c = 0; c < 6; ++c) Dv[kk][c] = Dk_[static_cast<size_t>(kk * 6 + c)](j, k);
      double T[3];  // contracted D^k_{ki}
      for (int i = 0; i < 3; ++i)
        T[i] = Dv[0][sym_of[0][i]] + Dv[1][sym_of[1][i]] + Dv[2][sym_of[2][i]];

      for (int c = 0; c < 6; ++c) {
        int i = sym_i[c], jj = sym_j[c];
        double div_term = 0, trace_term = 0, quad1 = 0, quad2 = 0;
        for (int kk = 0; kk < 3; ++kk) {
          div_term += dD_[static_cast<size_t>(kk * 6 + c)][static_cast<size_t>(kk)](j, k);
          trace_term +=
              dD_[static_cast<size_t>(kk * 6 + sym_of[kk][i])][static_cast<size_t>(jj)](j, k);
          quad1 += T[kk] * Dv[kk][c];
          for (int l = 0; l < 3; ++l) quad2 += Dv[kk][sym_of[l][jj]] * Dv[l][sym_of[i][kk]];
        }
        ric_[static_cast<size_t>(c)](j, k) = div_term - trace_term + quad1 - quad2;
      }
    }
  }
  curv_ = true;
}

void GeometryContext::ensure_lapse() {
  if (lapse_) return;
  ensure_base();
  const Discretization& D = *D_;
  // differentiate the perturbation, not 1 + perturbation: the constant
  // part has exactly zero derivative and must not inject transform noise
  F1_ = cart_gradient(D, state_->lapse_pert.v());
  for (int i = 0; i < 3; ++i)
    dF1_[static_cast<size_t>(i)] = cart_gradient(D, F1_[static_cast<size_t>(i)]);

  for (auto& m : hess_) m.resize(D.nr(), D.nang());
  lap_.resize(D.nr(), D.nang());
  for (int j = 0; j < D.nr(); ++j) {
    for (int k = 0; k < D.nang(); ++k) {
      double l = 0;
      for (int c = 0; c < 6; ++c) {
        int i = sym_i[c], jj = sym_j[c];
        double dd = 0.5 * (dF1_[static_cast<size_t>(i)][static_cast<size_t>(jj)](j, k) +
                           dF1_[static_cast<size_t>(jj)][static_cast<size_t>(i)](j, k));
        double corr = 0;
        for (int kk = 0; kk < 3; ++kk)
          corr +=
              Dk_[static_cast<size_t>(kk * 6 + c)](j, k) * F1_[static_cast<size_t>(kk)](j, k);
        double h = dd - corr;
        hess_[static_cast<size_t>(c)](j, k) = h;
        l += (i == jj ? 1.0 : 2.0) * Ginv_[static_cast<size_t>(c)](j, k) * h;
      }
      lap_(j, k) = l;
    }
  }
  lapse_ = true;
}

void GeometryContext::ensure_gauge() {
  if (gauge_) return;
  ensure_base();
  const Discretization& D = *D_;
  for (int i = 0; i < 3; ++i)
    dOm_[static_cast<size_t>(i)] = cart_gradient(D, omega_[static_cast<size_t>(i)]);
  for (auto& m : wsym_) m.resize(D.nr(), D.nang());
  for (int j = 0; j < D.nr(); ++j) {
    for (int k = 0; k < D.nang(); ++k) {
      for (int c = 0; c < 6; ++c) {
        int i = sym_i[c], jj = sym_j[c];
        double sym = 0.5 * (dOm_[static_cast<size_t>(jj)][static_cast<size_t>(i)](j, k) +
                            dOm_[static_cast<size_t>(i)][static_cast<size_t>(jj)](j, k));
        double corr = 0;
        for (int kk = 0; kk < 3; ++kk)
          corr +=
              Dk_[static_cast<size_t>(kk * 6 + c)](j, k) * omega_[static_cast<size_t>(kk)](j, k);
        wsym_[static_cast<size_t>(c)](j, k) = sym - corr;
      }
    }
  }
  gauge_ = true;
}

void GeometryContext::ensure_boundary() {
  if (bdry_) return;
  ensure_base();
  const Discretization& D = *D_;
  const int na = D.nang();
  lam_.resize(na);
  q_.resize(na, 3);
  qinv_.resize(na, 3);
  Pi_.resize(na, 3);
  H_.resize(na);

  for (int k = 0; k < na; ++k) {
    Eigen::Vector3d rh = D.rhat.row(k), th = D.that.row(k), ph = D.phat.row(k);
    double st = D.ang.sint(k), ct = D.ang.cost(k);
    Eigen::Vector3d e_t = th;       // d_theta of the unit-sphere embedding
    Eigen::Vector3d e_p = st * ph;  // d_phi
    Eigen::Vector3d E_tt = -rh;
    Eigen::Vector3d E_tp = ct * ph;
    Eigen::Vector3d E_pp = -st * (st * rh + ct * th);

    double g[6], gi[6];
    for (int c = 0; c < 6; ++c) {
      g[c] = Tc_[static_cast<size_t>(c)](0, k);
      gi[c] = Ginv_[static_cast<size_t>(c)](0, k);
    }
    g[0] += 1.0;
    g[3] += 1.0;
    g[5] += 1.0;

    auto gdot = [&](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
      double acc = 0;
      for (int i = 0; i < 3; ++i)
        for (int jj = 0; jj < 3; ++jj) acc += g[sym_of[i][jj]] * u[i] * v[jj];
      return acc;
    };
    double qtt = gdot(e_t, e_t), qtp = gdot(e_t, e_p), qpp = gdot(e_p, e_p);
    q_.row(k) << qtt, qtp, qpp;
    double detq = qtt * qpp - qtp * qtp;
    if (!(detq > 0)) throw NumericalError("degenerate induced boundary metric");
    qinv_.row(k) << qpp / detq, -qtp / detq, qtt / detq;

    double lam2 = 0;
    for (int i = 0; i < 3; ++i)
      for (int jj = 0; jj < 3; ++jj) lam2 += gi[sym_of[i][jj]] * rh[i] * rh[jj];
    lam_[k] = std::sqrt(lam2);

    // Pi_ab = -(1/lam) n_k (E_ab^k + D^k_ij e_a^i e_b^j), outward normal
    auto pi_of = [&](const Eigen::Vector3d& ea, const Eigen::Vector3d& eb,
                     const Eigen::Vector3d& Eab) {
      double acc = rh.dot(Eab);
      for (int kk = 0; kk < 3; ++kk) {
        double dk = 0;
        for (int i = 0; i < 3; ++i)
          for (int jj = 0; jj < 3; ++jj)
            dk += Dk_[static_cast<size_t>(kk * 6 + sym_of[i][jj])](0, k) * ea[i] * eb[jj];
        acc += rh[kk] * dk;
      }
      return -acc / lam_[k];
    };
    double Ptt = pi_of(e_t, e_t, E_tt);
    double Ptp = pi_of(e_t, e_p, E_tp);
    double Ppp = pi_of(e_p, e_p, E_pp);
    Pi_.row(k) << Ptt, Ptp, Ppp;
    H_[k] = qinv_(k, 0) * Ptt + 2.0 * qinv_(k, 1) * Ptp + qinv_(k, 2) * Ppp;
  }
  bdry_ = true;
}

SymTensorField GeometryContext::ricci() {
  ensure_curvature();
  return from_cartesian(*D_, ric_);
}

std::pair<SymTensorField, ScalarField> GeometryContext::hessian_and_laplacian(
    const ScalarField& fn) {
  ensure_base();
  const Discretization& D = *D_;
  Cart3 G1 = cart_gradient(D, fn.v());
  std::array<Cart3, 3> G2;
  for (int i = 0; i < 3; ++i)
    G2[static_cast<size_t>(i)] = cart_gradient(D, G1[static_cast<size_t>(i)]);
  Cart6 hess;
  for (auto& m : hess) m.resize(D.nr(), D.nang());
  Grid2 lap(D.nr(), D.nang());
  for (int j = 0; j < D.nr(); ++j) {
    for (int k = 0; k < D.nang(); ++k) {
      double l = 0;
      for (int c = 0; c < 6; ++c) {
        int i = sym_i[c], jj = sym_j[c];
        double v = 0.5 * (G2[static_cast<size_t>(i)][static_cast<size_t>(jj)](j, k) +
                          G2[static_cast<size_t>(jj)][static_cast<size_t>(i)](j, k));
        for (int kk = 0; kk < 3; ++kk)
          v -= Dk_[static_cast<size_t>(kk * 6 + c)](j, k) * G1[static_cast<size_t>(kk)](j, k);
        hess[static_cast<size_t>(c)](j, k) = v;
        l += (i == jj ? 1.0 : 2.0) * Ginv_[static_cast<size_t>(c)](j, k) * v;
      }
      lap(j, k) = l;
    }
  }
  return {from_cartesian(D, hess), ScalarField(D, std::move(lap))};
}

OneFormField GeometryContext::gauge_one_form() {
  ensure_base();
  return oneform_from_cartesian(*D_, omega_);
}

std::pair<SymTensorField, ScalarField> GeometryContext::static_defect() {
  ensure_curvature();
  ensure_lapse();
  Cart6 d;
  for (int c = 0; c < 6; ++c)
    d[static_cast<size_t>(c)] =
        f_.cwiseProduct(ric_[static_cast<size_t>(c)]) - hess_[static_cast<size_t>(c)];
  return {from_cartesian(*D_, d), ScalarField(*D_, lap_)};
}

Eigen::VectorXd GeometryContext::mean_curvature() {
  ensure_boundary();
  return H_;
}

ResidualVector GeometryContext::static_residual(const BoundaryData& bd) {
  ensure_curvature();
  ensure_lapse();
  ensure_gauge();
  ensure_boundary();
  const Discretization& D = *D_;

  ResidualVector R(D);
  Cart6 slot1;
  for (int c = 0; c < 6; ++c) {
    slot1[static_cast<size_t>(c)] =
        f_.cwiseProduct(ric_[static_cast<size_t>(c)] - wsym_[static_cast<size_t>(c)]) -
        hess_[static_cast<size_t>(c)];
  }
  R.interior_tensor = from_cartesian(D, slot1);
  R.interior_scalar = ScalarField(D, lap_);

  for (int k = 0; k < D.nang(); ++k) {
    Eigen::Vector3d rh = D.rhat.row(k), th = D.that.row(k), ph = D.phat.row(k);
    Eigen::Vector3d om(omega_[0](0, k), omega_[1](0, k), omega_[2](0, k));
    R.gauge_n[k] = om.dot(rh);
    R.gauge_t[k] = om.dot(th);
    R.gauge_p[k] = om.dot(ph);
    R.metric_tt[k] = 1.0 + state_->theta.comp(SymTensorField::TT)(0, k) - bd.s_tt[k];
    R.metric_tp[k] = state_->theta.comp(SymTensorField::TP)(0, k) - bd.s_tp[k];
    R.metric_pp[k] = 1.0 + state_->theta.comp(SymTensorField::PP)(0, k) - bd.s_pp[k];
    R.meancurv[k] = H_[k] - bd.h[k];
  }
  return R;
}

GeometryContext::Reduction GeometryContext::reduction_residual() {
  ensure_curvature();
  ensure_lapse();
  ensure_gauge();
  const Discretization& D = *D_;
  Reduction out(D);

  // full covariant derivative W_{mi} = d_m w_i - D^k_mi w_k
  std::array<Grid2, 9> W;
  for (int mm = 0; mm < 3; ++mm) {
    for (int i = 0; i < 3; ++i) {
      Grid2 v = dOm_[static_cast<size_t>(i)][static_cast<size_t>(mm)];
      for (int kk = 0; kk < 3; ++kk)
        v -= Dk_[static_cast<size_t>(kk * 6 + sym_of[mm][i])].cwiseProduct(
            omega_[static_cast<size_t>(kk)]);
      W[static_cast<size_t>(mm * 3 + i)] = std::move(v);
    }
  }
  std::array<Cart3, 9> dW;
  for (int a = 0; a < 9; ++a)
    dW[static_cast<size_t>(a)] = cart_gradient(D, W[static_cast<size_t>(a)]);

  Cart3 rough;
  for (auto& m : rough) m.setZero(D.nr(), D.nang());
  Grid2 Rscal(D.nr(), D.nang()), defect(D.nr(), D.nang());

  for (int j = 0; j < D.nr(); ++j) {
    for (int k = 0; k < D.nang(); ++k) {
      double gi[6], Dv[3][6], Wv[3][3], om[3];
      for (int c = 0; c < 6; ++c) gi[c] = Ginv_[static_cast<size_t>(c)](j, k);
      for (int kk = 0; kk < 3; ++kk)
        for (int c = 0; c < 6; ++c) Dv[kk][c] = Dk_[static_cast<size_t>(kk * 6 + c)](j, k);
      for (int mm = 0; mm < 3; ++mm)
        for (int i = 0; i < 3; ++i) Wv[mm][i] = W[static_cast<size_t>(mm * 3 + i)](j, k);
      for (int i = 0; i < 3; ++i) om[i] = omega_[static_cast<size_t>(i)](j, k);

      double Rs = 0;
      for (int c = 0; c < 6; ++c)
        Rs += (sym_i[c] == sym_j[c] ? 1.0 : 2.0) * gi[c] * ric_[static_cast<size_t>(c)](j, k);
      Rscal(j, k) = Rs;

      double divw = 0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) divw += gi[sym_of[a][b]] * Wv[a][b];
      defect(j, k) = Rs - divw;

      double fval = f_(j, k);
      for (int i = 0; i < 3; ++i) {
        double acc = 0;
        for (int kk = 0; kk < 3; ++kk) {
          for (int mm = 0; mm < 3; ++mm) {
            double z = dW[static_cast<size_t>(mm * 3 + i)][static_cast<size_t>(kk)](j, k);
            for (int l = 0; l < 3; ++l) {
              z -= Dv[l][sym_of[kk][mm]] * Wv[l][i];
              z -= Dv[l][sym_of[kk][i]] * Wv[mm][l];
            }
            acc += gi[sym_of[kk][mm]] * z;
          }
        }
        double v = acc;
        for (int a = 0; a < 3; ++a) {
          double vec = 0;  // (f^-1 grad f)^a
          for (int b = 0; b < 3; ++b) vec += gi[sym_of[a][b]] * F1_[static_cast<size_t>(b)](j, k);
          vec /= fval;
          v += 2.0 * wsym_[static_cast<size_t>(sym_of[a][i])](j, k) * vec;
          double omup = 0;
          for (int b = 0; b < 3; ++b) omup += gi[sym_of[a][b]] * om[b];
          v += ric_[static_cast<size_t>(sym_of[i][a])](j, k) * omup;
        }
        rough[static_cast<size_t>(i)](j, k) = v;
      }
    }
  }
  out.scalar_curvature = ScalarField(D, std::move(Rscal));
  out.identity_defect = ScalarField(D, std::move(defect));
  out.omega_equation = oneform_from_cartesian(D, rough);
  return out;
}

ResidualVector GeometryContext::apply_jacobian(const SymTensorField& dtheta,
                                               const ScalarField& dphi) {
  ensure_curvature();
  ensure_lapse();
  ensure_gauge();
  ensure_boundary();
  const Discretization& D = *D_;
  const int nr = D.nr(), na = D.nang();

  Cart6 V = to_cartesian(dtheta);
  std::array<Cart3, 6> dV;
  for (int a = 0; a < 6; ++a)
    dV[static_cast<size_t>(a)] = cart_gradient(D, V[static_cast<size_t>(a)]);

  Cart6 dGinv;
  std::array<Grid2, 18> dDk;
  Cart3 dom;
  for (auto& m : dGinv) m.resize(nr, na);
  for (auto& m : dDk) m.resize(nr, na);
  for (auto& m : dom) m.resize(nr, na);

  for (int j = 0; j < nr; ++j) {
    for (int k = 0; k < na; ++k) {
      double gi[6], v[6];
      for (int c = 0; c < 6; ++c) {
        gi[c] = Ginv_[static_cast<size_t>(c)](j, k);
        v[c] = V[static_cast<size_t>(c)](j, k);
      }
      for (int c = 0; c < 6; ++c) {
        int i = sym_i[c], jj = sym_j[c];
        double acc = 0;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            acc += gi[sym_of[i][a]] * v[sym_of[a][b]] * gi[sym_of[b][jj]];
        dGinv[static_cast<size_t>(c)](j, k) = -acc;
      }

      double P[3][6], dP[3][6];
      for (int l = 0; l < 3; ++l) {
        for (int c = 0; c < 6; ++c) {
          P[l][c] = dG_[static_cast<size_t>(c)][static_cast<size_t>(l)](j, k);
          dP[l][c] = dV[static_cast<size_t>(c)][static_cast<size_t>(l)](j, k);
        }
      }
      for (int kk = 0; kk < 3; ++kk) {
        for (int c = 0; c < 6; ++c) {
          int i = sym_i[c], jj = sym_j[c];
          double acc = 0;
          for (int l = 0; l < 3; ++l) {
            double C = P[i][sym_of[l][jj]] + P[jj][sym_of[l][i]] - P[l][c];
            double dC = dP[i][sym_of[l][jj]] + dP[jj][sym_of[l][i]] - dP[l][c];
            acc += dGinv[static_cast<size_t>(sym_of[kk][l])](j, k) * C + gi[sym_of[kk][l]] * dC;
          }
          dDk[static_cast<size_t>(kk * 6 + c)](j, k) = 0.5 * acc;
        }
      }
      for (int i = 0; i < 3; ++i) {
        double div = dP[0][sym_of[0][i]] + dP[1][sym_of[1][i]] + dP[2][sym_of[2][i]];
        double dtr = dP[i][0] + dP[i][3] + dP[i][5];
        dom[static_cast<size_t>(i)](j, k) = div - 0.5 * dtr;
      }
    }
  }

  std::array<Cart3, 18> ddD;
  for (int a = 0; a < 18; ++a)
    ddD[static_cast<size_t>(a)] = cart_gradient(D, dDk[static_cast<size_t>(a)]);
  Cart3 dF1 = cart_gradient(D, dphi.v());
  std::array<Cart3, 3> ddF1;
  for (int i = 0; i < 3; ++i)
    ddF1[static_cast<size_t>(i)] = cart_gradient(D, dF1[static_cast<size_t>(i)]);
  std::array<Cart3, 3> ddom;
  for (int i = 0; i < 3; ++i)
    ddom[static_cast<size_t>(i)] = cart_gradient(D, dom[static_cast<size_t>(i)]);

  ResidualVector R(D);
  Cart6 slot1;
  for (auto& m : slot1) m.resize(nr, na);
  Grid2 dlap(nr, na);

  for (int j = 0; j < nr; ++j) {
    for (int k = 0; k < na; ++k) {
      double gi[6], dgi[6], Dv[3][6], dDv[3][6], T[3], dT[3];
      for (int c = 0; c < 6; ++c) {
        gi[c] = Ginv_[static_cast<size_t>(c)](j, k);
        dgi[c] = dGinv[static_cast<size_t>(c)](j, k);
      }
      for (int kk = 0; kk < 3; ++kk) {
        for (int c = 0; c < 6; ++c) {
          Dv[kk][c] = Dk_[static_cast<size_t>(kk * 6 + c)](j, k);
          dDv[kk][c] = dDk[static_cast<size_t>(kk * 6 + c)](j, k);
        }
      }
      for (int i = 0; i < 3; ++i) {
        T[i] = Dv[0][sym_of[0][i]] + Dv[1][sym_of[1][i]] + Dv[2][sym_of[2][i]];
        dT[i] = dDv[0][sym_of[0][i]] + dDv[1][sym_of[1][i]] + dDv[2][sym_of[2][i]];
      }

      double fval = f_(j, k), dfval = dphi.v()(j, k);
      double dlap_acc = 0;
      for (int c = 0; c < 6; ++c) {
        int i = sym_i[c], jj = sym_j[c];

        double ddiv = 0, dtrace = 0, dquad = 0;
        for (int kk = 0; kk < 3; ++kk) {
          ddiv += ddD[static_cast<size_t>(kk * 6 + c)][static_cast<size_t>(kk)](j, k);
          dtrace +=
              ddD[static_cast<size_t>(kk * 6 + sym_of[kk][i])][static_cast<size_t>(jj)](j, k);
          dquad += dT[kk] * Dv[kk][c] + T[kk] * dDv[kk][c];
          for (int l = 0; l < 3; ++l)
            dquad -= dDv[kk][sym_of[l][jj]] * Dv[l][sym_of[i][kk]] +
                     Dv[kk][sym_of[l][jj]] * dDv[l][sym_of[i][kk]];
        }
        double dric = ddiv - dtrace + dquad;

        double dhess = 0.5 * (ddF1[static_cast<size_t>(i)][static_cast<size_t>(jj)](j, k) +
                              ddF1[static_cast<size_t>(jj)][static_cast<size_t>(i)](j, k));
        for (int kk = 0; kk < 3; ++kk)
          dhess -= dDv[kk][c] * F1_[static_cast<size_t>(kk)](j, k) +
                   Dv[kk][c] * dF1[static_cast<size_t>(kk)](j, k);

        double dw = 0.5 * (ddom[static_cast<size_t>(jj)][static_cast<size_t>(i)](j, k) +
                           ddom[static_cast<size_t>(i)][static_cast<size_t>(jj)](j, k));
        for (int kk = 0; kk < 3; ++kk)
          dw -= dDv[kk][c] * omega_[static_cast<size_t>(kk)](j, k) +
                Dv[kk][c] * dom[static_cast<size_t>(kk)](j, k);

        slot1[static_cast<size_t>(c)](j, k) =
            dfval * (ric_[static_cast<size_t>(c)](j, k) - wsym_[static_cast<size_t>(c)](j, k)) +
            fval * (dric - dw) - dhess;

        dlap_acc += (i == jj ? 1.0 : 2.0) *
                    (dgi[c] * hess_[static_cast<size_t>(c)](j, k) + gi[c] * dhess);
      }
      dlap(j, k) = dlap_acc;
    }
  }
  R.interior_tensor = from_cartesian(D, slot1);
  R.interior_scalar = ScalarField(D, std::move(dlap));

  for (int k = 0; k < na; ++k) {
    Eigen::Vector3d rh = D.rhat.row(k), th = D.that.row(k), ph = D.phat.row(k);
    double st = D.ang.sint(k), ct = D.ang.cost(k);
    Eigen::Vector3d dOm(dom[0](0, k), dom[1](0, k), dom[2](0, k));
    R.gauge_n[k] = dOm.dot(rh);
    R.gauge_t[k] = dOm.dot(th);
    R.gauge_p[k] = dOm.dot(ph);
    R.metric_tt[k] = dtheta.comp(SymTensorField::TT)(0, k);
    R.metric_tp[k] = dtheta.comp(SymTensorField::TP)(0, k);
    R.metric_pp[k] = dtheta.comp(SymTensorField::PP)(0, k);

    Eigen::Vector3d e_t = th, e_p = st * ph;

    double dq[3];
    auto vdot = [&](const Eigen::Vector3d& u, const Eigen::Vector3d& w) {
      double acc = 0;
      for (int i = 0; i < 3; ++i)
        for (int jj = 0; jj < 3; ++jj)
          acc += V[static_cast<size_t>(sym_of[i][jj])](0, k) * u[i] * w[jj];
      return acc;
    };
    dq[0] = vdot(e_t, e_t);
    dq[1] = vdot(e_t, e_p);
    dq[2] = vdot(e_p, e_p);

    double dgin = 0;
    for (int i = 0; i < 3; ++i)
      for (int jj = 0; jj < 3; ++jj)
        dgin += dGinv[static_cast<size_t>(sym_of[i][jj])](0, k) * rh[i] * rh[jj];
    double dlam = 0.5 * dgin / lam_[k];

    // Pi = -M/lam  =>  dPi = -dM/lam - Pi dlam/lam
    auto dpi_of = [&](const Eigen::Vector3d& ea, const Eigen::Vector3d& eb, double Pi_ab) {
      double dM = 0;
      for (int kk = 0; kk < 3; ++kk) {
        double dk = 0;
        for (int i = 0; i < 3; ++i)
          for (int jj = 0; jj < 3; ++jj)
            dk += dDk[static_cast<size_t>(kk * 6 + sym_of[i][jj])](0, k) * ea[i] * eb[jj];
        dM += rh[kk] * dk;
      }
      return -dM / lam_[k] - Pi_ab * dlam / lam_[k];
    };
    double dPtt = dpi_of(e_t, e_t, Pi_(k, 0));
    double dPtp = dpi_of(e_t, e_p, Pi_(k, 1));
    double dPpp = dpi_of(e_p, e_p, Pi_(k, 2));

    double a = qinv_(k, 0), b = qinv_(k, 1), cc = qinv_(k, 2);
    double dqi_tt = -(a * dq[0] * a + 2 * a * dq[1] * b + b * dq[2] * b);
    double dqi_tp = -(a * dq[0] * b + a * dq[1] * cc + b * dq[1] * b + b * dq[2] * cc);
    double dqi_pp = -(b * dq[0] * b + 2 * b * dq[1] * cc + cc * dq[2] * cc);

    R.meancurv[k] = dqi_tt * Pi_(k, 0) + 2.0 * dqi_tp * Pi_(k, 1) + dqi_pp * Pi_(k, 2) +
                    a * dPtt + 2.0 * b * dPtp + cc * dPpp;
  }
  return R;
}

}  // namespace staticext
