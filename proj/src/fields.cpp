#include "staticext/fields.hpp"

namespace staticext {

namespace {
// (i, j) -> symmetric storage index for 3x3
constexpr int sym_idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
}  // namespace

Cart6 to_cartesian(const SymTensorField& T) {
  const Discretization& D = T.disc();
  Cart6 out;
  for (auto& m : out) m.setZero(D.nr(), D.nang());
  const int na = D.nang(), nr = D.nr();
  for (int k = 0; k < na; ++k) {
    Eigen::Vector3d e[3] = {D.rhat.row(k), D.that.row(k), D.phat.row(k)};
    // cart_ij = sum_ab T_ab e_a,i e_b,j  (T symmetric)
    double B[6][6];  // [cart comp][frame comp]
    int cc = 0;
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j, ++cc) {
        int fc = 0;
        for (int a = 0; a < 3; ++a) {
          for (int b = a; b < 3; ++b, ++fc) {
            double v = e[a][i] * e[b][j] + e[b][i] * e[a][j];
            if (a == b) v *= 0.5;
            B[cc][fc] = v;
          }
        }
      }
    }
    for (int row = 0; row < nr; ++row) {
      double f[6];
      for (int fc = 0; fc < 6; ++fc) f[fc] = T.comp(fc)(row, k);
      for (int c = 0; c < 6; ++c) {
        double acc = 0;
        for (int fc = 0; fc < 6; ++fc) acc += B[c][fc] * f[fc];
        out[static_cast<size_t>(c)](row, k) = acc;
      }
    }
  }
  return out;
}

SymTensorField from_cartesian(const Discretization& D, const Cart6& C) {
  SymTensorField T(D);
  const int na = D.nang(), nr = D.nr();
  static const int fa[6] = {0, 0, 0, 1, 1, 2};
  static const int fb[6] = {0, 1, 2, 1, 2, 2};
  for (int k = 0; k < na; ++k) {
    Eigen::Vector3d e[3] = {D.rhat.row(k), D.that.row(k), D.phat.row(k)};
    for (int row = 0; row < nr; ++row) {
      double c[6];
      for (int cc = 0; cc < 6; ++cc) c[cc] = C[static_cast<size_t>(cc)](row, k);
      for (int f = 0; f < 6; ++f) {
        int a = fa[f], b = fb[f];
        double t = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) t += e[a][i] * e[b][j] * c[sym_idx[i][j]];
        T.comp(f)(row, k) = t;
      }
    }
  }
  return T;
}

Cart3 to_cartesian(const OneFormField& V) {
  const Discretization& D = V.disc();
  Cart3 out;
  for (auto& m : out) m.setZero(D.nr(), D.nang());
  for (int k = 0; k < D.nang(); ++k) {
    Eigen::Vector3d e[3] = {D.rhat.row(k), D.that.row(k), D.phat.row(k)};
    for (int row = 0; row < D.nr(); ++row) {
      for (int i = 0; i < 3; ++i) {
        out[static_cast<size_t>(i)](row, k) = e[0][i] * V.comp(0)(row, k) +
                                              e[1][i] * V.comp(1)(row, k) +
                                              e[2][i] * V.comp(2)(row, k);
      }
    }
  }
  return out;
}

OneFormField oneform_from_cartesian(const Discretization& D, const Cart3& C) {
  OneFormField V(D);
  for (int k = 0; k < D.nang(); ++k) {
    Eigen::Vector3d e[3] = {D.rhat.row(k), D.that.row(k), D.phat.row(k)};
    for (int row = 0; row < D.nr(); ++row) {
      for (int a = 0; a < 3; ++a) {
        V.comp(a)(row, k) = e[a][0] * C[0](row, k) + e[a][1] * C[1](row, k) +
                            e[a][2] * C[2](row, k);
      }
    }
  }
  return V;
}

Cart3 cart_gradient(const Discretization& D, const Grid2& u) {
  const auto& H = D.harm;
  Eigen::MatrixXd coef = H.analyze_scalar(u);
  Grid2 ut = H.synth_dtheta(coef);
  Grid2 up = H.synth_dphi_over_sin(coef);
  Grid2 ur = D.rad.Dr() * u;

  Cart3 g;
  for (auto& m : g) m.resize(D.nr(), D.nang());
  const int nr = D.nr(), na = D.nang();
  for (int k = 0; k < na; ++k) {
    double st = D.ang.sint(k), ct = D.ang.cost(k), cp = D.ang.cosp(k), sp = D.ang.sinp(k);
    for (int j = 0; j < nr; ++j) {
      double s = D.rad.s(j);  // 1/r
      double dr = ur(j, k), dth = s * ut(j, k), dph = s * up(j, k);
      g[0](j, k) = st * cp * dr + ct * cp * dth - sp * dph;
      g[1](j, k) = st * sp * dr + ct * sp * dth + cp * dph;
      g[2](j, k) = ct * dr - st * dth;
    }
  }
  return g;
}

Grid2 cart_laplacian(const Discretization& D, const Grid2& u) {
  Cart3 g = cart_gradient(D, u);
  Grid2 lap = Grid2::Zero(D.nr(), D.nang());
  for (int i = 0; i < 3; ++i) {
    Cart3 gg = cart_gradient(D, g[static_cast<size_t>(i)]);
    lap += gg[static_cast<size_t>(i)];
  }
  return lap;
}

double volume_integral(const Discretization& D, const Grid2& F) {
  const auto& ws = D.rad.ws();
  const auto& wa = D.ang.w();
  double acc = 0.0;
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    if (s == 0.0) continue;  // integrand limit is zero for admissible F
    double s4 = s * s * s * s;
    double radial = ws[j] / s4;
    acc += radial * F.row(j).dot(wa);
  }
  return acc;
}

double surface_integral(const Discretization& D, const Eigen::VectorXd& F) {
  return F.dot(D.ang.w());
}

namespace {

struct ReflectionElement {
  int sx, sy, sz;
  std::vector<int> perm;  // node permutation realizing x -> iota(x)
};

std::vector<ReflectionElement> group_elements(const Discretization& D) {
  std::vector<ReflectionElement> out;
  const int na = D.ang.nang();
  for (int sx : {1, -1}) {
    for (int sy : {1, -1}) {
      for (int sz : {1, -1}) {
        ReflectionElement e{sx, sy, sz, std::vector<int>(static_cast<size_t>(na))};
        for (int k = 0; k < na; ++k) {
          int kk = k;
          if (sz < 0) kk = D.ang.flip_theta(kk);
          if (sx > 0 && sy < 0) kk = D.ang.flip_phi_y(kk);
          if (sx < 0 && sy > 0) kk = D.ang.flip_phi_x(kk);
          if (sx < 0 && sy < 0) {
            int ip = kk % D.ang.nphi();
            int it = kk / D.ang.nphi();
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

Grid2 permute_cols(const Grid2& F, const std::vector<int>& perm) {
  Grid2 out(F.rows(), F.cols());
  for (int k = 0; k < F.cols(); ++k) out.col(k) = F.col(perm[static_cast<size_t>(k)]);
  return out;
}

}  // namespace

ScalarField reflection_project(const ScalarField& f) {
  const Discretization& D = f.disc();
  Grid2 acc = Grid2::Zero(D.nr(), D.nang());
  for (const auto& e : group_elements(D)) acc += permute_cols(f.v(), e.perm);
  ScalarField out(D, acc / 8.0);
  out.decay_tag = f.decay_tag;
  return out;
}

OneFormField reflection_project(const OneFormField& f) {
  const Discretization& D = f.disc();
  Cart3 C = to_cartesian(f);
  Cart3 acc;
  for (auto& m : acc) m.setZero(D.nr(), D.nang());
  for (const auto& e : group_elements(D)) {
    double sgn[3] = {static_cast<double>(e.sx), static_cast<double>(e.sy),
                     static_cast<double>(e.sz)};
    for (int i = 0; i < 3; ++i)
      acc[static_cast<size_t>(i)] += sgn[i] * permute_cols(C[static_cast<size_t>(i)], e.perm);
  }
  for (auto& m : acc) m /= 8.0;
  return oneform_from_cartesian(D, acc);
}

SymTensorField reflection_project(const SymTensorField& f) {
  const Discretization& D = f.disc();
  Cart6 C = to_cartesian(f);
  Cart6 acc;
  for (auto& m : acc) m.setZero(D.nr(), D.nang());
  static const int ci[6] = {0, 0, 0, 1, 1, 2};
  static const int cj[6] = {0, 1, 2, 1, 2, 2};
  for (const auto& e : group_elements(D)) {
    double sgn[3] = {static_cast<double>(e.sx), static_cast<double>(e.sy),
                     static_cast<double>(e.sz)};
    for (int c = 0; c < 6; ++c) {
      double sc = sgn[ci[c]] * sgn[cj[c]];
      acc[static_cast<size_t>(c)] += sc * permute_cols(C[static_cast<size_t>(c)], e.perm);
    }
  }
  for (auto& m : acc) m /= 8.0;
  return from_cartesian(D, acc);
}

Eigen::VectorXd surface_reflection_project_scalar(const Discretization& D,
                                                  const Eigen::VectorXd& f) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.size());
  for (const auto& e : group_elements(D)) {
    for (int k = 0; k < f.size(); ++k) acc[k] += f[e.perm[static_cast<size_t>(k)]];
  }
  return acc / 8.0;
}

}  // namespace staticext
