#pragma once

#include <optional>

#include "staticext/modes.hpp"
#include "staticext/norms.hpp"

namespace staticext {

// The unknown pair: metric perturbation Theta = g - g_o (orthonormal
// spherical frame) and lapse perturbation f - 1.  Both decay at infinity.
struct MetricState {
  SymTensorField theta;
  ScalarField lapse_pert;

  explicit MetricState(const Discretization& D) : theta(D), lapse_pert(D) {}
  const Discretization& disc() const { return theta.disc(); }

  // g positive definite and f positive at every node
  bool admissible() const;
};

// Flat-background boundary geometry of the unit sphere.
struct BoundaryFrame {
  double H_o = 2.0;            // mean curvature of S^2 in flat space
  // second fundamental form Pi_o equals the round metric; outward unit
  // normal is d_r, pointing toward infinity
};

// Target boundary pair: induced metric sigma on S^2 (frame components
// tt, tp, pp) and mean curvature h.  `symmetric` asserts invariance under
// all coordinate-plane reflections.
struct BoundaryData {
  const Discretization* D = nullptr;
  Eigen::VectorXd s_tt, s_tp, s_pp, h;
  bool symmetric = false;

  static BoundaryData round_data(const Discretization& D);

  bool positive_definite() const;
  // largest deviation of (sigma, h) from its reflection average
  double symmetry_defect() const;
  void validate() const;
};

// Codomain of the residual map: two interior fields and three boundary
// slots sampled on the s = 1 shell.
struct ResidualVector {
  SymTensorField interior_tensor;
  ScalarField interior_scalar;
  Eigen::VectorXd gauge_n, gauge_t, gauge_p;       // omega restricted to the boundary
  Eigen::VectorXd metric_tt, metric_tp, metric_pp; // induced metric mismatch
  Eigen::VectorXd meancurv;                        // mean curvature mismatch

  explicit ResidualVector(const Discretization& D)
      : interior_tensor(D),
        interior_scalar(D),
        gauge_n(Eigen::VectorXd::Zero(D.nang())),
        gauge_t(Eigen::VectorXd::Zero(D.nang())),
        gauge_p(Eigen::VectorXd::Zero(D.nang())),
        metric_tt(Eigen::VectorXd::Zero(D.nang())),
        metric_tp(Eigen::VectorXd::Zero(D.nang())),
        metric_pp(Eigen::VectorXd::Zero(D.nang())),
        meancurv(Eigen::VectorXd::Zero(D.nang())) {}
  const Discretization& disc() const { return interior_tensor.disc(); }
};

// Slot-wise norms used for convergence control: weighted interior norms
// for the two field slots, surface L2 for the boundary slots.
struct SlotNorms {
  double s1, s2, s3, s4, s5;
  double max() const { return std::max({s1, s2, s3, s4, s5}); }
};
SlotNorms residual_norms(const ResidualVector& R, double delta);

// ----------------------------------------------------------------------
// Evaluation context: the full differential pipeline at one state, reused
// by the residual, the directional derivative and the diagnostics.
// Internally everything runs on Cartesian components where the flat
// connection vanishes; the Christoffel difference D^k_ij then annihilates
// the flat background identically.
// ----------------------------------------------------------------------
class GeometryContext {
 public:
  explicit GeometryContext(const MetricState& state);

  const Discretization& disc() const { return *D_; }
  const MetricState& state() const { return *state_; }

  // curvature of the perturbed metric (frame components)
  SymTensorField ricci();
  // Hessian and Laplace-Beltrami of an arbitrary function
  std::pair<SymTensorField, ScalarField> hessian_and_laplacian(const ScalarField& fn);
  OneFormField gauge_one_form();
  Eigen::VectorXd mean_curvature();

  ResidualVector static_residual(const BoundaryData& bd);

  struct Reduction {
    ScalarField scalar_curvature;
    OneFormField omega_equation;   // elliptic system applied to omega
    ScalarField identity_defect;   // R(g) - g^{jk} omega_{j;k}
    Reduction(const Discretization& D)
        : scalar_curvature(D), omega_equation(D), identity_defect(D) {}
  };
  Reduction reduction_residual();

  // the unmodified static pair: (f Ric - Hess f, Lap f)
  std::pair<SymTensorField, ScalarField> static_defect();

  // Exact directional derivative of the residual map at this state along
  // (dtheta, dphi); boundary data drops out of the derivative.
  ResidualVector apply_jacobian(const SymTensorField& dtheta, const ScalarField& dphi);

 private:
  void ensure_base();       // Theta_cart, f, dG, Ginv, D, omega
  void ensure_curvature();  // gradD, Ric
  void ensure_lapse();      // F1, Hess, Lap
  void ensure_gauge();      // grad(omega), symmetrized covariant derivative
  void ensure_boundary();   // induced metric, normal, second fundamental form

  const Discretization* D_;
  const MetricState* state_;

  bool base_ = false, curv_ = false, lapse_ = false, gauge_ = false, bdry_ = false;

  Cart6 Tc_;                 // Cartesian Theta
  Grid2 f_;                  // 1 + lapse perturbation
  std::array<Cart3, 6> dG_;  // dG_[a][k] = d_k Theta_a
  Cart6 Ginv_;               // inverse metric minus nothing (full inverse)
  std::array<Grid2, 18> Dk_; // D^k_(ij): index k*6 + sym(ij)
  Cart3 omega_;              // gauge 1-form, Cartesian components

  std::array<Cart3, 18> dD_; // gradients of Dk_
  Cart6 ric_;

  Cart3 F1_;                 // df
  std::array<Cart3, 3> dF1_;
  Cart6 hess_;
  Grid2 lap_;

  std::array<Cart3, 3> dOm_; // dOm_[i][m] = d_m omega_i
  Cart6 wsym_;               // symmetrized covariant derivative of omega

  // boundary arrays (per angular node)
  Eigen::VectorXd lam_;                   // |grad r|_g at the boundary
  Eigen::MatrixXd q_, qinv_, Pi_;         // 2x2 packed as (tt, tp, pp) columns
  Eigen::VectorXd H_;

  friend class JacobianWorkspace;
};

// Free-function conveniences matching the operation surface.
inline SymTensorField ricci(const MetricState& s) { return GeometryContext(s).ricci(); }
inline std::pair<SymTensorField, ScalarField> hessian_and_laplacian(const ScalarField& fn,
                                                                    const MetricState& s) {
  return GeometryContext(s).hessian_and_laplacian(fn);
}
inline OneFormField gauge_one_form(const MetricState& s) {
  return GeometryContext(s).gauge_one_form();
}
inline Eigen::VectorXd mean_curvature(const MetricState& s) {
  return GeometryContext(s).mean_curvature();
}
inline ResidualVector static_residual(const MetricState& s, const BoundaryData& bd) {
  return GeometryContext(s).static_residual(bd);
}

// Surface reflection averages (used by BoundaryData checks and the solver).
Eigen::VectorXd surface_project_scalar(const Discretization& D, const Eigen::VectorXd& f);
void surface_project_tensor(const Discretization& D, Eigen::VectorXd& tt, Eigen::VectorXd& tp,
                            Eigen::VectorXd& pp);

}  // namespace staticext
