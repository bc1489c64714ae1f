#include "staticext/io.hpp"

#include <fstream>
#include <sstream>

namespace staticext {

std::string RunManifest::to_comments() const {
  std::string out;
  out += "# manifest format " + format_version + "\n";
  out += "# manifest command " + command + "\n";
  for (const auto& [k, v] : config) out += "# manifest " + k + " " + v + "\n";
  if (!input_digest.empty()) out += "# manifest input-digest " + input_digest + "\n";
  return out;
}

std::string fnv1a_digest(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return strformat("%016llx", static_cast<unsigned long long>(h));
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {
void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + p.string());
  out << text;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream ss(line);
  std::string t;
  while (ss >> t) {
    if (t[0] == '#') break;
    toks.push_back(t);
  }
  return toks;
}

[[noreturn]] void bad_line(int lineno, const std::string& why) {
  throw InputError(strformat("line %d: %s", lineno, why.c_str()));
}
}  // namespace

BoundaryFile parse_boundary_file(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  BoundaryFile bf;
  bool have_header = false, have_lmax = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = tokens_of(line);
    if (toks.empty()) continue;
    if (!have_header) {
      if (toks.size() != 2 || toks[0] != "staticext-bd" || toks[1] != "v1")
        bad_line(lineno, "expected header 'staticext-bd v1'");
      have_header = true;
      continue;
    }
    if (!have_lmax) {
      if (toks.size() != 2 || toks[0] != "lmax") bad_line(lineno, "expected 'lmax <int>'");
      bf.lmax = std::atoi(toks[1].c_str());
      if (bf.lmax < 1) bad_line(lineno, "lmax must be at least 1");
      have_lmax = true;
      continue;
    }
    if (toks[0] == "sigma") {
      if (toks.size() != 6) bad_line(lineno, "expected 'sigma L M even|odd c|d value'");
      BoundaryEntry e;
      e.is_sigma = true;
      e.L = std::atoi(toks[1].c_str());
      e.M = std::atoi(toks[2].c_str());
      if (toks[3] == "even")
        e.even = true;
      else if (toks[3] == "odd")
        e.even = false;
      else
        bad_line(lineno, "parity must be 'even' or 'odd'");
      if (toks[4] == "c")
        e.c_term = true;
      else if (toks[4] == "d")
        e.c_term = false;
      else
        bad_line(lineno, "term must be 'c' or 'd'");
      if (!e.even && e.c_term == false) bad_line(lineno, "odd parity uses the starred c basis");
      char* end = nullptr;
      e.value = std::strtod(toks[5].c_str(), &end);
      if (end == toks[5].c_str()) bad_line(lineno, "bad coefficient");
      if (e.L < 0 || e.L > bf.lmax) bad_line(lineno, "degree out of range");
      if (e.M < 1 || e.M > 2 * e.L + 1) bad_line(lineno, "mode index out of range");
      if (e.c_term && e.L < 2) bad_line(lineno, "c-type coefficients need degree >= 2");
      bf.entries.push_back(e);
    } else if (toks[0] == "h") {
      if (toks.size() != 4) bad_line(lineno, "expected 'h L M value'");
      BoundaryEntry e;
      e.is_sigma = false;
      e.L = std::atoi(toks[1].c_str());
      e.M = std::atoi(toks[2].c_str());
      char* end = nullptr;
      e.value = std::strtod(toks[3].c_str(), &end);
      if (end == toks[3].c_str()) bad_line(lineno, "bad coefficient");
      if (e.L < 0 || e.L > bf.lmax) bad_line(lineno, "degree out of range");
      if (e.M < 1 || e.M > 2 * e.L + 1) bad_line(lineno, "mode index out of range");
      bf.entries.push_back(e);
    } else {
      bad_line(lineno, "unknown record '" + toks[0] + "'");
    }
  }
  if (!have_header) throw InputError("line 1: missing header 'staticext-bd v1'");
  if (!have_lmax) throw InputError("line 2: missing 'lmax <int>'");
  return bf;
}

BoundaryFile load_boundary_file(const std::filesystem::path& p) {
  return parse_boundary_file(read_file(p));
}

std::string render_boundary_file(const BoundaryFile& bf) {
  std::string out = "staticext-bd v1\n";
  out += "lmax " + std::to_string(bf.lmax) + "\n";
  for (const auto& e : bf.entries) {
    if (e.is_sigma)
      out += strformat("sigma %d %d %s %s %s\n", e.L, e.M, e.even ? "even" : "odd",
                       e.c_term ? "c" : "d", fmt_full(e.value).c_str());
    else
      out += strformat("h %d %d %s\n", e.L, e.M, fmt_full(e.value).c_str());
  }
  return out;
}

BoundaryData to_boundary_data(const Discretization& D, const BoundaryFile& bf) {
  if (bf.lmax > D.ang.lmax())
    throw InputError("boundary file truncation exceeds the grid truncation");
  const auto& H = D.harm;
  Eigen::MatrixXd Cc = Eigen::MatrixXd::Zero(1, H.ncoef());
  Eigen::MatrixXd Cd = Cc, Codd = Cc, Ch = Cc;
  for (const auto& e : bf.entries) {
    int coef = H.coef_index(HarmonicTables::key_from_LM(e.L, e.M));
    if (!e.is_sigma)
      Ch(0, coef) += e.value;
    else if (!e.even)
      Codd(0, coef) += e.value;
    else if (e.c_term)
      Cc(0, coef) += e.value;
    else
      Cd(0, coef) += e.value;
  }
  Eigen::MatrixXd Ttt, Ttp, Tpp;
  H.synth_tangential(Cc, Cd, Codd, Ttt, Ttp, Tpp);
  BoundaryData bd;
  bd.D = &D;
  bd.s_tt = Eigen::VectorXd::Ones(D.nang()) + Ttt.row(0).transpose();
  bd.s_tp = Ttp.row(0).transpose();
  bd.s_pp = Eigen::VectorXd::Ones(D.nang()) + Tpp.row(0).transpose();
  bd.h = Eigen::VectorXd::Constant(D.nang(), 2.0) +
         H.synth_scalar(Ch).row(0).transpose();
  bd.symmetric = bd.symmetry_defect() <= 1e-12;
  return bd;
}

std::pair<std::string, double> worst_reflection(const BoundaryData& bd) {
  const Discretization& D = *bd.D;
  const char* names[3] = {"x-plane", "y-plane", "z-plane"};
  double worst = 0;
  int which = 0;
  for (int axis = 0; axis < 3; ++axis) {
    double dev = 0;
    for (int k = 0; k < D.nang(); ++k) {
      int kk = k;
      if (axis == 0) kk = D.ang.flip_phi_x(kk);
      if (axis == 1) kk = D.ang.flip_phi_y(kk);
      if (axis == 2) kk = D.ang.flip_theta(kk);
      // tangential signs: theta flips under z, phi flips under x/y
      double st = (axis == 2) ? -1.0 : 1.0;
      double sp = (axis == 2) ? 1.0 : -1.0;
      dev = std::max(dev, std::abs(bd.s_tt[k] - bd.s_tt[kk]));
      dev = std::max(dev, std::abs(bd.s_pp[k] - bd.s_pp[kk]));
      dev = std::max(dev, std::abs(bd.s_tp[k] - st * sp * bd.s_tp[kk]));
      dev = std::max(dev, std::abs(bd.h[k] - bd.h[kk]));
    }
    if (dev > worst) {
      worst = dev;
      which = axis;
    }
  }
  return {names[which], worst};
}

// ---------------------------------------------------------------------
// solution files
// ---------------------------------------------------------------------

std::string render_solution(const MetricState& state, const RunManifest& manifest) {
  const Discretization& D = state.disc();
  const auto& H = D.harm;
  TensorModes M = transform_to_modes(state.theta);
  ScalarModes S = transform_to_modes(state.lapse_pert);

  std::string out = "staticext-sol v1\n";
  out += "nr " + std::to_string(D.nr()) + "\n";
  out += "nodes";
  for (int j = 0; j < D.nr(); ++j) out += " " + fmt_full(D.rad.s(j));
  out += "\n";
  out += "lmax " + std::to_string(D.ang.lmax()) + "\n";

  auto col_nonzero = [](const Eigen::MatrixXd& m, int c) {
    return m.col(c).cwiseAbs().maxCoeff() > 0.0;
  };
  for (int c = 0; c < H.ncoef(); ++c) {
    ModeKey key = H.key_of(c);
    if (key.L > D.ang.lmax()) continue;
    int Mix = HarmonicTables::M_from_key(key);
    bool even_live = col_nonzero(M.a, c) || col_nonzero(M.b, c) || col_nonzero(M.c, c) ||
                     col_nonzero(M.d, c);
    bool odd_live = col_nonzero(M.bo, c) || col_nonzero(M.co, c);
    if (even_live) {
      out += strformat("mode %d %d even\n", key.L, Mix);
      for (int j = 0; j < D.nr(); ++j) {
        double s = D.rad.s(j);
        out += strformat("%s %s %s %s %s\n", s > 0 ? fmt_full(1.0 / s).c_str() : "inf",
                         fmt_full(M.a(j, c)).c_str(), fmt_full(M.b(j, c)).c_str(),
                         fmt_full(M.c(j, c)).c_str(), fmt_full(M.d(j, c)).c_str());
      }
    }
    if (odd_live) {
      out += strformat("mode %d %d odd\n", key.L, Mix);
      for (int j = 0; j < D.nr(); ++j) {
        double s = D.rad.s(j);
        out += strformat("%s 0 %s %s 0\n", s > 0 ? fmt_full(1.0 / s).c_str() : "inf",
                         fmt_full(M.bo(j, c)).c_str(), fmt_full(M.co(j, c)).c_str());
      }
    }
    if (col_nonzero(S.p, c)) {
      out += strformat("lapse %d %d\n", key.L, Mix);
      for (int j = 0; j < D.nr(); ++j) {
        double s = D.rad.s(j);
        out += strformat("%s %s\n", s > 0 ? fmt_full(1.0 / s).c_str() : "inf",
                         fmt_full(S.p(j, c)).c_str());
      }
    }
  }
  out += manifest.to_comments();
  return out;
}

void write_solution(const std::filesystem::path& p, const MetricState& state,
                    const RunManifest& manifest) {
  write_file(p, render_solution(state, manifest));
}

SolutionFile parse_solution(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  SolutionFile sf;

  auto next_tokens = [&](std::vector<std::string>& toks) {
    while (std::getline(in, line)) {
      ++lineno;
      toks = tokens_of(line);
      if (!toks.empty()) return true;
    }
    return false;
  };

  std::vector<std::string> toks;
  if (!next_tokens(toks) || toks.size() != 2 || toks[0] != "staticext-sol" || toks[1] != "v1")
    bad_line(lineno, "expected header 'staticext-sol v1'");
  if (!next_tokens(toks) || toks.size() != 2 || toks[0] != "nr")
    bad_line(lineno, "expected 'nr <int>'");
  sf.n_r = std::atoi(toks[1].c_str());
  if (sf.n_r < 8) bad_line(lineno, "nr too small");
  if (!next_tokens(toks) || toks[0] != "nodes" || static_cast<int>(toks.size()) != sf.n_r + 1)
    bad_line(lineno, "expected 'nodes' with one entry per radial node");
  sf.nodes.resize(sf.n_r);
  for (int j = 0; j < sf.n_r; ++j) sf.nodes[j] = std::strtod(toks[j + 1].c_str(), nullptr);
  if (!next_tokens(toks) || toks.size() != 2 || toks[0] != "lmax")
    bad_line(lineno, "expected 'lmax <int>'");
  sf.lmax = std::atoi(toks[1].c_str());

  while (next_tokens(toks)) {
    if (toks[0] == "mode") {
      if (toks.size() != 4) bad_line(lineno, "expected 'mode L M even|odd'");
      int L = std::atoi(toks[1].c_str());
      int Mix = std::atoi(toks[2].c_str());
      bool even = toks[3] == "even";
      if (!even && toks[3] != "odd") bad_line(lineno, "parity must be even|odd");
      RadialProfile P;
      P.a.setZero(sf.n_r);
      P.b.setZero(sf.n_r);
      P.c.setZero(sf.n_r);
      P.d.setZero(sf.n_r);
      for (int j = 0; j < sf.n_r; ++j) {
        if (!next_tokens(toks) || toks.size() != 5) bad_line(lineno, "expected 'r a b c d' row");
        P.a[j] = std::strtod(toks[1].c_str(), nullptr);
        P.b[j] = std::strtod(toks[2].c_str(), nullptr);
        P.c[j] = std::strtod(toks[3].c_str(), nullptr);
        P.d[j] = std::strtod(toks[4].c_str(), nullptr);
      }
      sf.modes.emplace_back(L, Mix, even, std::move(P));
    } else if (toks[0] == "lapse") {
      if (toks.size() != 3) bad_line(lineno, "expected 'lapse L M'");
      int L = std::atoi(toks[1].c_str());
      int Mix = std::atoi(toks[2].c_str());
      Eigen::VectorXd p(sf.n_r);
      for (int j = 0; j < sf.n_r; ++j) {
        if (!next_tokens(toks) || toks.size() != 2) bad_line(lineno, "expected 'r phi' row");
        p[j] = std::strtod(toks[1].c_str(), nullptr);
      }
      sf.lapse.emplace_back(L, Mix, std::move(p));
    } else {
      bad_line(lineno, "unknown record '" + toks[0] + "'");
    }
  }
  return sf;
}

std::pair<std::unique_ptr<Discretization>, std::unique_ptr<MetricState>> load_solution(
    const std::filesystem::path& p) {
  SolutionFile sf = parse_solution(read_file(p));
  auto D = std::make_unique<Discretization>(sf.n_r, sf.lmax);
  for (int j = 0; j < sf.n_r; ++j) {
    if (std::abs(D->rad.s(j) - sf.nodes[j]) > 1e-12)
      throw InputError("solution file radial nodes do not match the reconstructed grid");
  }
  const auto& H = D->harm;
  TensorModes M;
  M.D = D.get();
  for (auto* m : {&M.a, &M.b, &M.c, &M.d, &M.bo, &M.co}) m->setZero(sf.n_r, H.ncoef());
  ScalarModes S;
  S.D = D.get();
  S.p.setZero(sf.n_r, H.ncoef());
  for (const auto& [L, Mix, even, P] : sf.modes) {
    int coef = H.coef_index(HarmonicTables::key_from_LM(L, Mix));
    if (even) {
      M.a.col(coef) = P.a;
      M.b.col(coef) = P.b;
      M.c.col(coef) = P.c;
      M.d.col(coef) = P.d;
    } else {
      M.bo.col(coef) = P.b;
      M.co.col(coef) = P.c;
    }
  }
  for (const auto& [L, Mix, pcol] : sf.lapse)
    S.p.col(H.coef_index(HarmonicTables::key_from_LM(L, Mix))) = pcol;

  auto state = std::make_unique<MetricState>(*D);
  state->theta = transform_from_modes(M);
  state->lapse_pert = transform_from_modes_scalar(S);
  return {std::move(D), std::move(state)};
}

std::string render_log(const StaticSolution& sol, const RunManifest& manifest,
                       const std::vector<std::pair<std::string, double>>& timings) {
  std::string out;
  for (const auto& st : sol.history) {
    out += strformat("iter %d res %s res_slot1 %s res_slot2 %s res_slot3 %s res_slot4 %s "
                     "res_slot5 %s omega %s\n",
                     st.iter, fmt_full(st.total).c_str(), fmt_full(st.slots.s1).c_str(),
                     fmt_full(st.slots.s2).c_str(), fmt_full(st.slots.s3).c_str(),
                     fmt_full(st.slots.s4).c_str(), fmt_full(st.slots.s5).c_str(),
                     fmt_full(st.omega_interior).c_str());
  }
  out += strformat("mass %s %s\n", fmt_full(sol.mass.primary).c_str(),
                   fmt_full(sol.mass.flux).c_str());
  out += strformat("status %s\n", sol.converged ? "converged" : "diverged");
  out += manifest.to_comments();
  // wall-clock timings are non-normative and excluded from reproducibility
  for (const auto& [phase, seconds] : timings)
    out += strformat("# wallclock(non-normative) %s %.3f s\n", phase.c_str(), seconds);
  return out;
}

}  // namespace staticext
