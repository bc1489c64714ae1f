// Command-line driver: boundary-data ingestion, the Newton solver, and the
// verification suites as subcommands.  All outputs are deterministic text;
// seeded randomness is echoed into the embedded manifest.

#include <chrono>
#include <clocale>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "staticext/io.hpp"
#include "staticext/linear.hpp"
#include "staticext/solver.hpp"

using namespace staticext;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

struct GridArgs {
  int lmax = 8;
  int n_r = 48;
  void attach(CLI::App* app) {
    app->add_option("--lmax", lmax, "harmonic truncation degree");
    app->add_option("--nr", n_r, "radial node count");
  }
};

int cmd_solve(const std::string& boundary_path, const std::string& out_path, GridArgs grid,
              SolverConfig cfg) {
  Timer total;
  std::string input_bytes;
  BoundaryFile bf;
  try {
    input_bytes = read_file(boundary_path);
    bf = parse_boundary_file(input_bytes);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  cfg.lmax = grid.lmax;
  cfg.n_r = grid.n_r;
  Discretization D(cfg.n_r, cfg.lmax);
  BoundaryData bd;
  try {
    bd = to_boundary_data(D, bf);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (!bd.symmetric) {
    auto [plane, dev] = worst_reflection(bd);
    std::cerr << "error: boundary data is not reflection symmetric; worst offender "
              << plane << " with deviation " << fmt_full(dev) << "\n";
    return 4;
  }

  RunManifest man;
  man.command = "solve";
  man.add("lmax", cfg.lmax);
  man.add("nr", cfg.n_r);
  man.add("delta", cfg.delta);
  man.add("tol", cfg.newton_tol);
  man.add("lin-tol", cfg.lin_tol);
  man.add("max-iter", cfg.max_iter);
  man.add("damping", cfg.damping);
  man.add("seed", static_cast<int>(cfg.seed));
  man.input_digest = fnv1a_digest(input_bytes);

  Timer solve_timer;
  StaticSolution sol(D);
  try {
    sol = newton_solve(D, bd, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  double solve_s = solve_timer.seconds();

  write_solution(out_path, sol.state, man);
  {
    std::ofstream log(out_path + ".log", std::ios::binary);
    log << render_log(sol, man,
                      {{"solve", solve_s}, {"total", total.seconds()}});
  }
  {
    std::ofstream rep(out_path + ".verify", std::ios::binary);
    rep << "static-defect " << fmt_full(sol.verification.static_defect) << "\n"
        << "lapse-harmonic " << fmt_full(sol.verification.lapse_harmonic) << "\n"
        << "scalar-curvature " << fmt_full(sol.verification.scalar_curv) << "\n"
        << "omega " << fmt_full(sol.verification.omega_norm) << "\n"
        << "omega-equation " << fmt_full(sol.verification.omega_equation) << "\n"
        << "identity-defect " << fmt_full(sol.verification.identity_defect) << "\n"
        << "theta-norm " << fmt_full(sol.theta_norm) << "\n"
        << man.to_comments();
  }

  std::cout << "status " << (sol.converged ? "converged" : "diverged") << " iterations "
            << sol.newton_iterations << " residual " << fmt_full(sol.final_residual) << "\n";
  std::cout << "mass " << fmt_full(sol.mass.primary) << " " << fmt_full(sol.mass.flux) << "\n";

  if (!sol.converged) return 2;
  double gate = 10.0 * cfg.newton_tol;
  bool verify_ok = sol.verification.max() <= gate && !sol.gauge_anomaly;
  if (!verify_ok) {
    std::cerr << "error: static verification failed (max defect "
              << fmt_full(sol.verification.max()) << " vs gate " << fmt_full(gate) << ")\n";
    return 3;
  }
  return 0;
}

int cmd_cokernel(GridArgs grid, int only_L, const std::string& only_parity) {
  Discretization D(grid.n_r, grid.lmax);
  bool pattern_ok = true;
  bool resolution_warning = false;

  auto report = [&](int L, Parity par) {
    AdjointModeSystem sys = build_adjoint_system(D, L, par);
    int want = (L == 1) ? 1 : 0;
    bool ok = sys.kernel_dim() == want;
    pattern_ok = pattern_ok && ok;
    double gap = sys.gap();
    if (gap < 1e3) resolution_warning = true;
    std::cout << "L " << L << " parity " << (par == Parity::Even ? "even" : "odd ")
              << " kernel-dim " << sys.kernel_dim() << " expected " << want << " sv-gap "
              << strformat("%.3e", gap);
    if (L == 1 && sys.kernel_dim() == 1) {
      auto kers = adjoint_kernel(D, L, par);
      double dev = 0;
      const RadialProfile& P = kers[0];
      for (int j = 0; j < D.nr(); ++j) {
        double s = D.rad.s(j);
        if (par == Parity::Even) {
          dev = std::max(dev, std::abs(P.a[j] - s * s));
          dev = std::max(dev, std::abs(P.b[j] - s));
          dev = std::max(dev, std::abs(P.d[j] + s * s));
        } else {
          dev = std::max(dev, std::abs(P.b[j] - s * s));
        }
      }
      std::cout << " closed-form-deviation " << strformat("%.3e", dev);
    }
    std::cout << (ok ? "" : "  MISMATCH") << "\n";
  };

  if (only_L >= 0) {
    if (only_parity == "even" || only_parity.empty()) report(only_L, Parity::Even);
    if ((only_parity == "odd" || only_parity.empty()) && only_L >= 1)
      report(only_L, Parity::Odd);
  } else {
    for (int L = 0; L <= D.ang.lmax(); ++L) {
      report(L, Parity::Even);
      if (L >= 1) report(L, Parity::Odd);
    }
  }
  if (resolution_warning)
    std::cout << "# warning: singular-value gap below 1e3; raise the resolution\n";
  return pattern_ok ? 0 : 1;
}

int cmd_verify_linearization(GridArgs grid, uint64_t seed, double single_eps) {
  Discretization D(grid.n_r, grid.lmax);

  if (single_eps > 0) {
    // single-step mode: raw error table only, no order fit
    Rng rng(seed);
    SymTensorField th = random_tensor_field(D, rng, 1.0);
    ScalarField ph = random_scalar_field(D, rng, 1.0);
    BoundaryData bd = BoundaryData::round_data(D);
    ResidualVector lin = apply_linearized(th, ph);
    double t = single_eps;
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
    double e2 = ((Rp.interior_scalar.v() - Rm.interior_scalar.v()) * inv2t -
                 lin.interior_scalar.v())
                    .cwiseAbs()
                    .maxCoeff();
    double e3 = ((Rp.gauge_n - Rm.gauge_n) * inv2t - lin.gauge_n).cwiseAbs().maxCoeff();
    double e4 = ((Rp.metric_tt - Rm.metric_tt) * inv2t - lin.metric_tt).cwiseAbs().maxCoeff();
    double e5 = ((Rp.meancurv - Rm.meancurv) * inv2t - lin.meancurv).cwiseAbs().maxCoeff();
    std::cout << "eps " << fmt_full(t) << "\n";
    const double errs[5] = {e1, e2, e3, e4, e5};
    for (int s = 0; s < 5; ++s)
      std::cout << "slot" << (s + 1) << " error " << strformat("%.6e", errs[s]) << "\n";
    return 0;
  }

  LinearizationCheck chk = verify_linearization(D, seed);
  for (int s = 0; s < 5; ++s) {
    std::cout << "slot" << (s + 1) << " errors " << strformat("%.6e", chk.errors[0][s]) << " "
              << strformat("%.6e", chk.errors[1][s]) << " "
              << strformat("%.6e", chk.errors[2][s]);
    if (chk.exact[static_cast<size_t>(s)])
      std::cout << " order exact";
    else
      std::cout << strformat(" order %.3f", chk.orders[static_cast<size_t>(s)]);
    bool ok = chk.exact[static_cast<size_t>(s)] || chk.orders[static_cast<size_t>(s)] >= 1.8;
    std::cout << (ok ? "" : " FAIL") << "\n";
  }
  return chk.pass ? 0 : 1;
}

int cmd_mass(const std::string& solution_path) {
  std::unique_ptr<Discretization> D;
  std::unique_ptr<MetricState> state;
  try {
    std::tie(D, state) = load_solution(solution_path);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  MassEstimate m = adm_mass(*state);
  std::cout << "mass " << fmt_full(m.primary) << " " << fmt_full(m.flux) << " spread "
            << fmt_full(m.spread()) << "\n";
  if (m.spread() > 1e-3) {
    std::cerr << "error: extraction disagreement above 1e-3 relative; "
                 "insufficient radial resolution\n";
    return 5;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{"static metric extension solver and verification suites"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "solve the extension problem for boundary data");
  std::string boundary_path, out_path = "solution.dat";
  GridArgs sgrid;
  SolverConfig cfg;
  solve->add_option("--boundary", boundary_path, "boundary data file")->required();
  solve->add_option("--out", out_path, "solution output file");
  sgrid.attach(solve);
  solve->add_option("--delta", cfg.delta, "decay weight in (-1, -1/2]");
  solve->add_option("--tol", cfg.newton_tol, "Newton residual tolerance");
  solve->add_option("--lin-tol", cfg.lin_tol, "linear solve tolerance");
  solve->add_option("--max-iter", cfg.max_iter, "Newton iteration cap");
  solve->add_option("--damping", cfg.damping, "Newton damping factor in (0,1]");
  solve->add_option("--seed", cfg.seed, "seed echoed into the manifest");

  // cokernel
  auto* cok = app.add_subcommand("cokernel", "kernel dimensions of the adjoint mode systems");
  GridArgs cgrid;
  cgrid.attach(cok);
  int only_L = -1;
  std::string only_parity;
  cok->add_option("--L", only_L, "restrict to one degree");
  cok->add_option("--parity", only_parity, "restrict to one parity (even|odd)")
      ->check(CLI::IsMember({"even", "odd"}));

  // verify-linearization
  auto* ver = app.add_subcommand("verify-linearization",
                                 "finite-difference orders of the flat linearization");
  GridArgs vgrid;
  vgrid.attach(ver);
  uint64_t seed = 1;
  double eps = -1;
  ver->add_option("--seed", seed, "probe field seed");
  ver->add_option("--eps", eps, "single-step mode: raw error table only");

  // mass
  auto* mass = app.add_subcommand("mass", "two-route mass extraction from a solution file");
  std::string solution_path;
  mass->add_option("--solution", solution_path, "solution file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(boundary_path, out_path, sgrid, cfg);
    if (*cok) return cmd_cokernel(cgrid, only_L, only_parity);
    if (*ver) return cmd_verify_linearization(vgrid, seed, eps);
    if (*mass) return cmd_mass(solution_path);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
