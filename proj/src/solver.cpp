#include "staticext/solver.hpp"

namespace staticext {

namespace {

double weighted0(const SymTensorField& T, double delta) {
  return weighted_norm(T, WeightedNormSpec{0, delta});
}
double weighted0(const ScalarField& f, double delta) {
  return weighted_norm(f, WeightedNormSpec{0, delta});
}
double weighted0(const OneFormField& v, double delta) {
  return weighted_norm(v, WeightedNormSpec{0, delta});
}

ScalarField project_scalar(const ScalarField& f) { return reflection_project(f); }

// cubic extrapolation of a radial sample to s = 0 from the four smallest
// positive nodes
double extrapolate_zero(const Discretization& D, const Eigen::VectorXd& G) {
  const int n = D.nr();
  double val = 0.0;
  for (int a = n - 5; a < n - 1; ++a) {
    double term = G[a];
    for (int b = n - 5; b < n - 1; ++b) {
      if (b == a) continue;
      term *= (0.0 - D.rad.s(b)) / (D.rad.s(a) - D.rad.s(b));
    }
    val += term;
  }
  return val;
}

}  // namespace

StaticVerification verify_static(const MetricState& state, double delta) {
  GeometryContext ctx(state);
  StaticVerification out{};
  auto [defect, lap] = ctx.static_defect();
  out.static_defect = weighted0(defect, delta);
  out.lapse_harmonic = weighted0(lap, delta);
  auto red = ctx.reduction_residual();
  out.scalar_curv = weighted0(red.scalar_curvature, delta);
  out.omega_norm = weighted0(ctx.gauge_one_form(), delta);
  out.omega_equation = weighted0(red.omega_equation, delta);
  out.identity_defect = weighted0(red.identity_defect, delta);
  return out;
}

MassEstimate adm_mass(const MetricState& state) {
  const Discretization& D = state.disc();
  MassEstimate out{};

  // route 1: r^-1 coefficient of the monopole rr-profile
  TensorModes M = transform_to_modes(state.theta);
  int c00 = D.harm.coef_index(0, 0, true);
  Eigen::VectorXd aprof = M.a.col(c00);
  out.primary = 0.5 * D.rad.Ds().row(D.nr() - 1).dot(aprof);

  // route 2: flux integral (1/16 pi) oint (d_j g_ij - d_i g_jj) nu^i dA,
  // evaluated on every shell and extrapolated to infinity
  Cart6 Tc = to_cartesian(state.theta);
  std::array<Cart3, 6> dT;
  for (int a = 0; a < 6; ++a)
    dT[static_cast<size_t>(a)] = cart_gradient(D, Tc[static_cast<size_t>(a)]);
  static const int sym_of[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  Eigen::VectorXd F = Eigen::VectorXd::Zero(D.nr());
  for (int j = 0; j < D.nr() - 1; ++j) {
    double s = D.rad.s(j);
    double acc = 0;
    for (int k = 0; k < D.nang(); ++k) {
      Eigen::Vector3d n = D.rhat.row(k);
      double val = 0;
      for (int i = 0; i < 3; ++i) {
        double div = dT[static_cast<size_t>(sym_of[0][i])][0](j, k) +
                     dT[static_cast<size_t>(sym_of[1][i])][1](j, k) +
                     dT[static_cast<size_t>(sym_of[2][i])][2](j, k);
        double dtr = dT[0][static_cast<size_t>(i)](j, k) + dT[3][static_cast<size_t>(i)](j, k) +
                     dT[5][static_cast<size_t>(i)](j, k);
        val += (div - dtr) * n[i];
      }
      acc += val * D.ang.w()[k];
    }
    F[j] = acc / (16.0 * M_PI * s * s);  // r^2 dA factor
  }
  out.flux = extrapolate_zero(D, F);
  return out;
}

MetricState conformal_bulk_state(const Discretization& D, double m) {
  MetricState st(D);
  for (int j = 0; j < D.nr(); ++j) {
    double s = D.rad.s(j);
    double u = 1.0 + 0.5 * m * s;
    double pert = u * u * u * u - 1.0;
    st.theta.comp(SymTensorField::RR).row(j).setConstant(pert);
    st.theta.comp(SymTensorField::TT).row(j).setConstant(pert);
    st.theta.comp(SymTensorField::PP).row(j).setConstant(pert);
    // matching lapse of the static family, normalized to 1 at infinity
    st.lapse_pert.v().row(j).setConstant((1.0 - 0.5 * m * s) / u - 1.0);
  }
  return st;
}

BoundaryData schwarzschild_boundary_data(const Discretization& D, double m) {
  if (std::abs(m) > 0.3)
    throw InputError("mass parameter out of the near-round range |m| <= 0.3");
  BoundaryData bd;
  bd.D = &D;
  double c4 = std::pow(1.0 + 0.5 * m, 4);
  bd.s_tt = Eigen::VectorXd::Constant(D.nang(), c4);
  bd.s_tp = Eigen::VectorXd::Zero(D.nang());
  bd.s_pp = Eigen::VectorXd::Constant(D.nang(), c4);
  MetricState bulk = conformal_bulk_state(D, m);
  bd.h = mean_curvature(bulk);
  bd.symmetric = true;
  return bd;
}

// ---------------------------------------------------------------------
// Newton driver
// ---------------------------------------------------------------------

StaticSolution newton_solve(const Discretization& D, const BoundaryData& bd,
                            const SolverConfig& cfg, const FlatBlocks* precond) {
  cfg.validate();
  bd.validate();
  if (!bd.symmetric)
    throw InputError("boundary data must be reflection symmetric for the Newton driver");

  std::optional<SymmetricBasis> own_basis;
  std::optional<FlatBlocks> own_blocks;
  if (!precond) {
    own_basis.emplace(D);
    own_blocks.emplace(*own_basis, FifthRow::Geometric);
    precond = &*own_blocks;
  }
  const SymmetricBasis& basis = precond->basis();

  StaticSolution sol(D);
  double initial_total = -1;

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    GeometryContext ctx(sol.state);
    ResidualVector R = ctx.static_residual(bd);
    SlotNorms slots = residual_norms(R, cfg.delta);
    double total = slots.max();
    if (initial_total < 0) initial_total = std::max(total, 1e-300);

    OneFormField om = ctx.gauge_one_form();
    NewtonStep step{};
    step.iter = iter;
    step.slots = slots;
    step.total = total;
    step.omega_surface = residual_norms(R, cfg.delta).s3;
    step.omega_interior = weighted0(om, cfg.delta);
    step.step_damping = 0;
    step.gmres_iterations = 0;
    sol.history.push_back(step);
    sol.final_residual = total;

    if (total <= cfg.newton_tol) {
      sol.converged = true;
      break;
    }
    if (total > 1e4 * initial_total || !std::isfinite(total)) break;
    if (iter == cfg.max_iter - 1) break;

    Eigen::VectorXd rhs = -basis.pack_residual(R);
    auto precond_apply = [&](const Eigen::VectorXd& v) { return precond->solve(v); };
    auto op = [&](const Eigen::VectorXd& v) {
      SymTensorField dth(D);
      ScalarField dph(D);
      basis.unpack(v, dth, dph);
      return basis.pack_residual(ctx.apply_jacobian(dth, dph));
    };
    // left-preconditioned system keeps the convergence test on the well-
    // scaled update variables
    auto pop = [&](const Eigen::VectorXd& v) { return precond_apply(op(v)); };
    auto ident = [](const Eigen::VectorXd& v) { return v; };
    GmresResult gm = gmres(pop, ident, precond_apply(rhs), cfg.lin_tol, 200);
    sol.history.back().gmres_iterations = gm.iterations;

    SymTensorField dth(D);
    ScalarField dph(D);
    basis.unpack(gm.x, dth, dph);

    double alpha = cfg.damping;
    for (int attempt = 0; attempt < 4; ++attempt) {
      MetricState trial(D);
      trial.theta = sol.state.theta;
      SymTensorField sd = dth;
      sd *= alpha;
      trial.theta += sd;
      trial.lapse_pert = sol.state.lapse_pert;
      ScalarField sp = dph;
      sp *= alpha;
      trial.lapse_pert += sp;
      // keep every iterate exactly reflection invariant
      trial.theta = reflection_project(trial.theta);
      trial.lapse_pert = project_scalar(trial.lapse_pert);

      if (!trial.admissible()) {
        alpha *= 0.5;
        continue;
      }
      GeometryContext tctx(trial);
      double tnorm = residual_norms(tctx.static_residual(bd), cfg.delta).max();
      if (tnorm > total && alpha == cfg.damping && attempt == 0) {
        alpha = 0.5 * cfg.damping;  // single documented fallback
        continue;
      }
      sol.state = std::move(trial);
      sol.history.back().step_damping = alpha;
      break;
    }
    ++sol.newton_iterations;
  }

  // post-hoc diagnostics
  sol.theta_norm = weighted0(sol.state.theta, cfg.delta);
  sol.verification = verify_static(sol.state, cfg.delta);
  sol.gauge_anomaly =
      sol.converged && sol.verification.omega_norm > 1e-8 * (1.0 + sol.theta_norm);
  sol.mass = adm_mass(sol.state);

  sol.achieved.D = &D;
  sol.achieved.s_tt =
      Eigen::VectorXd::Ones(D.nang()) + sol.state.theta.comp(SymTensorField::TT).row(0).transpose();
  sol.achieved.s_tp = sol.state.theta.comp(SymTensorField::TP).row(0).transpose();
  sol.achieved.s_pp =
      Eigen::VectorXd::Ones(D.nang()) + sol.state.theta.comp(SymTensorField::PP).row(0).transpose();
  sol.achieved.h = mean_curvature(sol.state);
  sol.achieved.symmetric = bd.symmetric;
  return sol;
}

LinearizationCheck verify_linearization(const Discretization& D, uint64_t seed,
                                        double order_gate) {
  Rng rng(seed);
  SymTensorField th = random_tensor_field(D, rng, 1.0);
  ScalarField ph = random_scalar_field(D, rng, 1.0);
  BoundaryData bd = BoundaryData::round_data(D);
  ResidualVector lin = apply_linearized(th, ph);

  double lin_scale[5] = {0, 0, 0, 0, 0};
  for (int c = 0; c < 6; ++c)
    lin_scale[0] = std::max(lin_scale[0], lin.interior_tensor.comp(c).cwiseAbs().maxCoeff());
  lin_scale[1] = lin.interior_scalar.v().cwiseAbs().maxCoeff();
  lin_scale[2] = std::max({lin.gauge_n.cwiseAbs().maxCoeff(), lin.gauge_t.cwiseAbs().maxCoeff(),
                           lin.gauge_p.cwiseAbs().maxCoeff()});
  lin_scale[3] = std::max({lin.metric_tt.cwiseAbs().maxCoeff(),
                           lin.metric_tp.cwiseAbs().maxCoeff(),
                           lin.metric_pp.cwiseAbs().maxCoeff()});
  lin_scale[4] = lin.meancurv.cwiseAbs().maxCoeff();

  LinearizationCheck out;
  out.steps = {1e-2, 1e-3, 1e-4};
  for (int i = 0; i < 3; ++i) {
    double t = out.steps[static_cast<size_t>(i)];
    MetricState plus(D), minus(D);
    plus.theta = th;
    plus.theta *= t;
    plus.lapse_pert = ph;
    plus.lapse_pert *= t;
    minus.theta = th;
    minus.theta *= -t;
    minus.lapse_pert = ph;
    minus.lapse_pert *= -t;
    ResidualVector Rp = static_residual(plus, bd);
    ResidualVector Rm = static_residual(minus, bd);
    double inv2t = 0.5 / t;

    double e1 = 0;
    for (int c = 0; c < 6; ++c)
      e1 = std::max(e1, ((Rp.interior_tensor.comp(c) - Rm.interior_tensor.comp(c)) * inv2t -
                         lin.interior_tensor.comp(c))
                            .cwiseAbs()
                            .maxCoeff());
    auto& err = out.errors[static_cast<size_t>(i)];
    err[0] = e1;
    err[1] = ((Rp.interior_scalar.v() - Rm.interior_scalar.v()) * inv2t -
              lin.interior_scalar.v())
                 .cwiseAbs()
                 .maxCoeff();
    double e3 = ((Rp.gauge_n - Rm.gauge_n) * inv2t - lin.gauge_n).cwiseAbs().maxCoeff();
    e3 = std::max(e3, ((Rp.gauge_t - Rm.gauge_t) * inv2t - lin.gauge_t).cwiseAbs().maxCoeff());
    e3 = std::max(e3, ((Rp.gauge_p - Rm.gauge_p) * inv2t - lin.gauge_p).cwiseAbs().maxCoeff());
    err[2] = e3;
    double e4 = ((Rp.metric_tt - Rm.metric_tt) * inv2t - lin.metric_tt).cwiseAbs().maxCoeff();
    e4 = std::max(e4,
                  ((Rp.metric_pp - Rm.metric_pp) * inv2t - lin.metric_pp).cwiseAbs().maxCoeff());
    err[3] = e4;
    err[4] = ((Rp.meancurv - Rm.meancurv) * inv2t - lin.meancurv).cwiseAbs().maxCoeff();
  }

  out.pass = true;
  for (int s = 0; s < 5; ++s) {
    // a slot is exactly linear when its probes sit at roundoff relative to
    // the linearization's own magnitude
    double floor = 1e-9 * std::max(1.0, lin_scale[s]);
    bool exact = true;
    for (int i = 0; i < 3; ++i) exact = exact && out.errors[static_cast<size_t>(i)][s] < floor;
    out.exact[static_cast<size_t>(s)] = exact;
    if (exact) {
      out.orders[static_cast<size_t>(s)] = std::numeric_limits<double>::infinity();
      continue;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
      double x = std::log10(out.steps[static_cast<size_t>(i)]);
      double y = std::log10(std::max(out.errors[static_cast<size_t>(i)][s], 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double order = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    out.orders[static_cast<size_t>(s)] = order;
    if (order < order_gate) out.pass = false;
  }
  return out;
}

TailCheck quadratic_tail(const std::vector<NewtonStep>& history, double newton_tol,
                         double window) {
  TailCheck out;
  std::vector<double> C;
  for (size_t i = 0; i + 1 < history.size(); ++i) {
    double rk = history[i].total, rn = history[i + 1].total;
    if (rk <= window && rn >= 10.0 * newton_tol) C.push_back(rn / (rk * rk));
  }
  out.samples = static_cast<int>(C.size());
  if (!C.empty()) out.constant = C.back();
  if (C.size() >= 2) {
    double lo = *std::min_element(C.begin(), C.end());
    double hi = *std::max_element(C.begin(), C.end());
    out.spread = hi / lo;
  }
  return out;
}

// ---------------------------------------------------------------------
// spherically symmetric shooting oracle
// ---------------------------------------------------------------------

namespace {

struct RadialOdeState {
  double A, f, fp;
};

// right-hand side in x = ln t
RadialOdeState ode_rhs(double t, const RadialOdeState& y) {
  RadialOdeState d;
  d.A = t * (-2.0 * y.A * y.fp / y.f);
  d.f = t * y.fp;
  d.fp = -t * y.fp * y.fp / y.f - 2.0 * y.fp;
  return d;
}

RadialOdeState axpy(const RadialOdeState& y, double c, const RadialOdeState& d) {
  return {y.A + c * d.A, y.f + c * d.f, y.fp + c * d.fp};
}

struct IntegrationOut {
  double A_inf;      // asymptotic value, finite-radius tail eliminated
  double mass_inf;   // mass function extrapolated the same way
  double mass_early; // mass function at a moderate radius (10 t0); equals
                     // the others on the true orbit, far less noise-prone
  double mass_drift;
  double constraint;
  std::vector<double> ts, As, fs;
};

// Quadratic-in-1/t elimination from three sample radii: exact for
// F = c0 + c1/t + c2/t^2, leaving an O(1/t^3) tail.
double eliminate_tail(const double t[3], const double F[3]) {
  double x0 = 1.0 / t[0], x1 = 1.0 / t[1], x2 = 1.0 / t[2];
  double c0 = F[0] * (x1 * x2) / ((x0 - x1) * (x0 - x2)) +
              F[1] * (x0 * x2) / ((x1 - x0) * (x1 - x2)) +
              F[2] * (x0 * x1) / ((x2 - x0) * (x2 - x1));
  return c0;
}

IntegrationOut integrate(double t0, double A0, double q, int n_steps, double t_max,
                         bool record) {
  IntegrationOut out;
  out.constraint = 0;
  RadialOdeState y{A0, 1.0, q};
  double x = std::log(t0), x_end = std::log(t_max);
  double dx = (x_end - x) / n_steps;
  double m_first = 0.5 * t0 * (1.0 - 1.0 / y.A);
  out.mass_drift = 0;

  double ts[3] = {0, 0, 0}, As[3] = {0, 0, 0}, ms[3] = {0, 0, 0};
  double x_samples[3] = {x_end - 2.0 * std::log(2.0), x_end - std::log(2.0), x_end};
  int sample_at = 0;
  double x_early = std::log(10.0 * t0);
  bool early_done = false;
  out.mass_early = m_first;

  for (int i = 0; i <= n_steps; ++i) {
    double t = std::exp(x);
    double mass = 0.5 * t * (1.0 - 1.0 / y.A);
    out.mass_drift = std::max(out.mass_drift, std::abs(mass - m_first));
    double E2 = y.f * (1.0 - 1.0 / y.A) - 2.0 * t * y.fp / y.A;
    out.constraint = std::max(out.constraint, std::abs(E2));
    if (record && i % 64 == 0) {
      out.ts.push_back(t);
      out.As.push_back(y.A);
      out.fs.push_back(y.f);
    }
    if (!early_done && x >= x_early) {
      out.mass_early = mass;
      early_done = true;
    }
    if (sample_at < 3 && x >= x_samples[sample_at] - 0.5 * dx) {
      ts[sample_at] = t;
      As[sample_at] = y.A;
      ms[sample_at] = mass;
      ++sample_at;
    }
    if (i == n_steps) break;
    RadialOdeState k1 = ode_rhs(t, y);
    RadialOdeState k2 = ode_rhs(std::exp(x + 0.5 * dx), axpy(y, 0.5 * dx, k1));
    RadialOdeState k3 = ode_rhs(std::exp(x + 0.5 * dx), axpy(y, 0.5 * dx, k2));
    RadialOdeState k4 = ode_rhs(std::exp(x + dx), axpy(y, dx, k3));
    y.A += dx / 6.0 * (k1.A + 2 * k2.A + 2 * k3.A + k4.A);
    y.f += dx / 6.0 * (k1.f + 2 * k2.f + 2 * k3.f + k4.f);
    y.fp += dx / 6.0 * (k1.fp + 2 * k2.fp + 2 * k3.fp + k4.fp);
    x += dx;
  }
  out.A_inf = eliminate_tail(ts, As);
  out.mass_inf = eliminate_tail(ts, ms);
  return out;
}

}  // namespace

ShootingResult shooting_oracle(const Discretization& D, const BoundaryData& bd) {
  // reject data with angular content: only the monopole may be present
  SurfaceTensorModes sm = surface_tensor_modes(D, bd.s_tt, bd.s_tp, bd.s_pp);
  SurfaceScalarModes hm = surface_scalar_modes(D, bd.h);
  int c00 = D.harm.coef_index(0, 0, true);
  for (int c = 0; c < D.harm.ncoef(); ++c) {
    double dev = std::abs(sm.codd[c]) + std::abs(sm.c[c]);
    if (c != c00) dev += std::abs(sm.d[c]) + std::abs(hm.c[c]);
    if (dev > 1e-10)
      throw InputError("shooting oracle requires spherically symmetric boundary data");
  }
  double sigma_round = sm.d[c00];  // sigma = sigma_round x round metric
  double h0 = hm.c[c00];

  double t0 = std::sqrt(sigma_round);  // areal radius of the boundary
  if (!(sigma_round > 0)) throw InputError("boundary metric is not a sphere");
  if (!(h0 > 0)) throw NumericalError("shooting expects positive mean curvature");
  double A0 = std::pow(2.0 / (t0 * h0), 2);

  const int n_steps = 8192;
  const double t_max = 1e5;

  ShootingResult res;
  // staticity-compatible initial slope; secant refines toward flatness
  double q0 = (A0 - 1.0) / (2.0 * t0);
  double g0 = integrate(t0, A0, q0, n_steps, t_max, false).A_inf - 1.0;
  int shots = 1;
  double q = q0;
  if (std::abs(g0) > 1e-13) {
    double q1 = q0 + 1e-4 * (std::abs(q0) + 1e-3);
    double g1 = integrate(t0, A0, q1, n_steps, t_max, false).A_inf - 1.0;
    ++shots;
    for (; shots < 60; ++shots) {
      if (std::abs(g1 - g0) < 1e-300)
        throw NumericalError("shooting failed to bracket the flatness condition");
      double qn = q1 - g1 * (q1 - q0) / (g1 - g0);
      q0 = q1;
      g0 = g1;
      q1 = qn;
      g1 = integrate(t0, A0, q1, n_steps, t_max, false).A_inf - 1.0;
      q = q1;
      if (std::abs(g1) < 1e-13 && std::abs(q1 - q0) < 1e-12 * (1 + std::abs(q1))) break;
    }
    if (std::abs(g1) > 1e-10)
      throw NumericalError("shooting failed to bracket the flatness condition");
  }

  IntegrationOut fin = integrate(t0, A0, q, n_steps, t_max, true);
  res.mass = fin.mass_early;
  res.lapse_slope = q;
  res.mass_drift = fin.mass_drift;
  res.constraint_residual = fin.constraint;
  res.shots = shots;
  res.t = std::move(fin.ts);
  res.A = std::move(fin.As);
  res.f = std::move(fin.fs);
  return res;
}

}  // namespace staticext
