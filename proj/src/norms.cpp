#include "staticext/norms.hpp"

namespace staticext {

namespace {

// integral of Q * s^(2*delta - 2l - 1) ds dOmega where Q = |D^l u|^2.
// For mass-order tails the radial integrand tends to a finite value at
// s = 0 when delta = -1/2 (and is integrably singular below), so the
// endpoint value is recovered by polynomial extrapolation from the
// smallest positive nodes instead of being evaluated directly.
double weight_layer(const Discretization& D, const Grid2& Q, int l, double delta) {
  const auto& ws = D.rad.ws();
  const auto& wa = D.ang.w();
  double expo = 2.0 * delta - 2.0 * l - 1.0;
  const int n = D.nr();
  Eigen::VectorXd G(n);
  for (int j = 0; j < n - 1; ++j)
    G[j] = std::pow(D.rad.s(j), expo) * Q.row(j).dot(wa);
  // cubic extrapolation through the four smallest positive nodes
  double s0 = 0.0, val = 0.0;
  for (int a = n - 5; a < n - 1; ++a) {
    double term = G[a];
    for (int b = n - 5; b < n - 1; ++b) {
      if (b == a) continue;
      term *= (s0 - D.rad.s(b)) / (D.rad.s(a) - D.rad.s(b));
    }
    val += term;
  }
  G[n - 1] = val;
  return ws.dot(G);
}

}  // namespace

double weighted_norm_components(const Discretization& D, const std::vector<const Grid2*>& comps,
                                const std::vector<double>& mult, const WeightedNormSpec& spec) {
  spec.validate();
  double norm = 0.0;

  // l = 0
  Grid2 Q = Grid2::Zero(D.nr(), D.nang());
  for (size_t i = 0; i < comps.size(); ++i) Q += mult[i] * comps[i]->cwiseAbs2();
  norm += std::sqrt(weight_layer(D, Q, 0, spec.delta));

  std::vector<Cart3> grads;
  if (spec.k >= 1) {
    Q.setZero();
    grads.reserve(comps.size());
    for (size_t i = 0; i < comps.size(); ++i) {
      grads.push_back(cart_gradient(D, *comps[i]));
      for (int a = 0; a < 3; ++a) Q += mult[i] * grads.back()[a].cwiseAbs2();
    }
    norm += std::sqrt(weight_layer(D, Q, 1, spec.delta));
  }

  if (spec.k >= 2) {
    Q.setZero();
    for (size_t i = 0; i < comps.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        Cart3 gg = cart_gradient(D, grads[i][a]);
        for (int b = 0; b < 3; ++b) Q += mult[i] * gg[b].cwiseAbs2();
      }
    }
    norm += std::sqrt(weight_layer(D, Q, 2, spec.delta));
  }
  return norm;
}

double weighted_norm(const ScalarField& u, const WeightedNormSpec& spec) {
  return weighted_norm_components(u.disc(), {&u.v()}, {1.0}, spec);
}

double weighted_norm(const OneFormField& u, const WeightedNormSpec& spec) {
  Cart3 C = to_cartesian(u);
  return weighted_norm_components(u.disc(), {&C[0], &C[1], &C[2]}, {1.0, 1.0, 1.0}, spec);
}

double weighted_norm(const SymTensorField& u, const WeightedNormSpec& spec) {
  Cart6 C = to_cartesian(u);
  return weighted_norm_components(u.disc(), {&C[0], &C[1], &C[2], &C[3], &C[4], &C[5]},
                                  {1.0, 2.0, 2.0, 1.0, 2.0, 1.0}, spec);
}

}  // namespace staticext
