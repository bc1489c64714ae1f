#pragma once

#include "staticext/linear.hpp"

namespace staticext {

struct SolverConfig {
  int lmax = 8;
  int n_r = 48;
  double delta = -0.5;       // decay weight, in (-1, -1/2]
  double newton_tol = 1e-10; // residual norm across the five slots
  double lin_tol = 1e-12;    // relative tolerance of the Newton linear solves
  int max_iter = 25;
  double damping = 1.0;      // fallback halves the step once per iteration
  uint64_t seed = 0;

  void validate() const {
    WeightedNormSpec{0, delta}.validate();
    if (newton_tol <= 0 || lin_tol <= 0) throw InputError("tolerances must be positive");
    if (max_iter < 1) throw InputError("max_iter must be positive");
    if (!(damping > 0 && damping <= 1.0)) throw InputError("damping must lie in (0, 1]");
  }
};

struct NewtonStep {
  int iter;
  SlotNorms slots;
  double total;
  double omega_surface;   // trace norm of the gauge form on the boundary
  double omega_interior;  // weighted interior norm of the gauge form
  double step_damping;
  int gmres_iterations;
};

struct StaticVerification {
  double static_defect;   // weighted norm of f Ric - Hess f
  double lapse_harmonic;  // weighted norm of Lap f
  double scalar_curv;     // weighted norm of R(g)
  double omega_norm;      // weighted norm of the gauge form
  double omega_equation;  // weighted norm of the elliptic system applied to it
  double identity_defect; // weighted norm of R(g) - g^{jk} w_{j;k}
  double max() const {
    return std::max({static_defect, lapse_harmonic, scalar_curv, omega_norm, omega_equation});
  }
};

struct MassEstimate {
  double primary;  // from the r^-1 coefficient of the monopole profile
  double flux;     // from the surface flux integral extrapolated to infinity
  double spread() const {
    double scale = std::max({std::abs(primary), std::abs(flux), 1e-12});
    return std::abs(primary - flux) / scale;
  }
};

struct StaticSolution {
  MetricState state;
  bool converged = false;
  bool gauge_anomaly = false;  // omega failed the reduction check post hoc
  std::vector<NewtonStep> history;
  double final_residual = 0;
  double theta_norm = 0;       // weighted norm of the metric perturbation
  StaticVerification verification{};
  MassEstimate mass{};
  BoundaryData achieved;       // boundary pair realized by the solution
  int newton_iterations = 0;

  explicit StaticSolution(const Discretization& D) : state(D) {}
};

// Newton iteration on the gauge-modified system from the flat initial
// guess; boundary data must be reflection symmetric.  A prebuilt flat
// preconditioner (geometric fifth row) can be shared across solves.
StaticSolution newton_solve(const Discretization& D, const BoundaryData& bd,
                            const SolverConfig& cfg, const FlatBlocks* precond = nullptr);

// Quadratic-tail diagnostic: ratios r_{k+1}/r_k^2 over the steps with
// r_k <= window and r_{k+1} still comfortably above the floor (ten times
// the convergence target).  Returns max/min of the ratios, 1.0 when fewer
// than two qualify.
struct TailCheck {
  int samples = 0;
  double spread = 1.0;
  double constant = 0.0;  // representative r_{k+1} / r_k^2
};
TailCheck quadratic_tail(const std::vector<NewtonStep>& history, double newton_tol,
                         double window = 1e-2);

// Post-hoc verification of the unmodified static system plus the gauge
// vanishing; pure report.
StaticVerification verify_static(const MetricState& state, double delta);

// Two-route mass extraction with the disagreement as error bar.
MassEstimate adm_mass(const MetricState& state);

// Conformally flat test family: sigma = (1 + m/2)^4 x round, h evaluated
// by the geometric mean-curvature operator on the matching bulk metric.
BoundaryData schwarzschild_boundary_data(const Discretization& D, double m);
// the matching bulk state (used by tests and the injected-field checks)
MetricState conformal_bulk_state(const Discretization& D, double m);

// ----------------------------------------------------------------------
// Independent spherically symmetric oracle: shooting on the radial static
// system in areal-radius variables (A, f), matching the boundary data at
// the inner sphere and flatness at infinity.  The tangential equation is
// monitored as a constraint along the integration.
// ----------------------------------------------------------------------
struct ShootingResult {
  double mass = 0;
  double lapse_slope = 0;        // shot value of f'(t0)/f(t0)
  double mass_drift = 0;         // max deviation of the mass function
  double constraint_residual = 0;
  int shots = 0;
  std::vector<double> t, A, f;   // sampled profiles
};

ShootingResult shooting_oracle(const Discretization& D, const BoundaryData& bd);

// ----------------------------------------------------------------------
// Finite-difference validation of the flat linearization: central probes
// of the nonlinear residual along one seeded direction, per-slot errors
// and fitted convergence orders.  Exactly linear slots show pure roundoff
// and are reported as exact.
// ----------------------------------------------------------------------
struct LinearizationCheck {
  std::array<double, 3> steps;
  std::array<std::array<double, 5>, 3> errors;  // [step][slot]
  std::array<double, 5> orders;
  std::array<bool, 5> exact;
  bool pass = false;
};
LinearizationCheck verify_linearization(const Discretization& D, uint64_t seed,
                                        double order_gate = 1.8);

}  // namespace staticext
