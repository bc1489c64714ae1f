#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "staticext/io.hpp"

using namespace staticext;

namespace {
const Discretization& disc() {
  static Discretization D(32, 6);
  return D;
}

std::filesystem::path tmpdir() {
  auto p = std::filesystem::temp_directory_path() / "staticext-io-test";
  std::filesystem::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("boundary file parse, render, realize") {
  std::string text =
      "staticext-bd v1\n"
      "lmax 6\n"
      "# a comment line\n"
      "sigma 2 1 even d 0.001\n"
      "sigma 2 1 even c 0.0005   # trailing comment\n"
      "h 2 1 -0.002\n";
  BoundaryFile bf = parse_boundary_file(text);
  CHECK(bf.lmax == 6);
  CHECK(bf.entries.size() == 3);

  const auto& D = disc();
  BoundaryData bd = to_boundary_data(D, bf);
  CHECK(bd.positive_definite());
  // (L=2, M=1) is the m=0 cosine harmonic: symmetric data
  CHECK(bd.symmetric);

  // mode coefficients survive the synthesis round trip
  SurfaceTensorModes sm = surface_tensor_modes(D, bd.s_tt, bd.s_tp, bd.s_pp);
  int c20 = D.harm.coef_index(2, 0, true);
  CHECK(sm.d[c20] == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(sm.c[c20] == doctest::Approx(0.0005).epsilon(1e-12));
  SurfaceScalarModes hm = surface_scalar_modes(D, bd.h);
  CHECK(hm.c[c20] == doctest::Approx(-0.002).epsilon(1e-12));

  std::string rendered = render_boundary_file(bf);
  BoundaryFile bf2 = parse_boundary_file(rendered);
  CHECK(bf2.entries.size() == bf.entries.size());
}

TEST_CASE("boundary file error reporting carries line numbers") {
  CHECK_THROWS_WITH_AS(parse_boundary_file("junk\n"), doctest::Contains("line 1"), InputError);
  CHECK_THROWS_WITH_AS(parse_boundary_file("staticext-bd v1\nlmax 6\nsigma 2 1 even q 1.0\n"),
                       doctest::Contains("line 3"), InputError);
  CHECK_THROWS_WITH_AS(parse_boundary_file("staticext-bd v1\nlmax 6\nh 9 1 0.1\n"),
                       doctest::Contains("line 3"), InputError);
  // odd parity with a d-term is rejected (the starred basis has no trace part)
  CHECK_THROWS_AS(parse_boundary_file("staticext-bd v1\nlmax 6\nsigma 2 1 odd d 0.1\n"),
                  InputError);
}

TEST_CASE("non-symmetric data names the offending reflection") {
  const auto& D = disc();
  BoundaryFile bf;
  bf.lmax = 6;
  // (L=1, M=1) is z/r: odd under the z-plane reflection
  bf.entries.push_back({false, 1, 1, true, false, 0.01});
  BoundaryData bd = to_boundary_data(D, bf);
  CHECK(!bd.symmetric);
  auto [plane, dev] = worst_reflection(bd);
  CHECK(plane == "z-plane");
  CHECK(dev > 1e-3);
}

TEST_CASE("solution file round trip preserves the residual") {
  const auto& D = disc();
  MetricState st = conformal_bulk_state(D, 0.15);
  // include some angular content
  Rng rng(9);
  SymTensorField extra = random_tensor_field(D, rng, 1e-3, true);
  st.theta += extra;

  RunManifest man;
  man.command = "test";
  man.add("lmax", 6);
  auto path = tmpdir() / "sol.dat";
  write_solution(path, st, man);

  auto [D2, st2] = load_solution(path);
  CHECK(D2->nr() == D.nr());
  CHECK(D2->ang.lmax() == D.ang.lmax());

  // the reloaded state agrees to the last ulp modulo one transform pass;
  // residuals re-evaluated on it agree relative to their own size (the
  // tighter converged-solution form of this check runs in the acceptance
  // suite where a logged final residual exists)
  for (int c = 0; c < 6; ++c)
    CHECK((st.theta.comp(c) - st2->theta.comp(c)).cwiseAbs().maxCoeff() < 1e-13);
  BoundaryData bd = BoundaryData::round_data(D);
  BoundaryData bd2 = BoundaryData::round_data(*D2);
  SlotNorms before = residual_norms(static_residual(st, bd), -0.5);
  SlotNorms after = residual_norms(static_residual(*st2, bd2), -0.5);
  CHECK(std::abs(before.s1 - after.s1) < 1e-10 * (1.0 + before.s1));
  CHECK(std::abs(before.s5 - after.s5) < 1e-10 * (1.0 + before.s5));

  // determinism: rendering twice is byte-identical
  CHECK(render_solution(st, man) == render_solution(st, man));
}

TEST_CASE("manifest digest is stable") {
  CHECK(fnv1a_digest("") == "cbf29ce484222325");
  CHECK(fnv1a_digest("abc") == fnv1a_digest("abc"));
  CHECK(fnv1a_digest("abc") != fnv1a_digest("abd"));
}
