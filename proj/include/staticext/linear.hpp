#pragma once

#include <map>

#include "staticext/geometry.hpp"

namespace staticext {

// ----------------------------------------------------------------------
// Linearization of the residual map at the flat background, with the two
// boundary variants: the geometric mean-curvature row and the reduced row
// that keeps only the normal-derivative part.  Slots 1-4 coincide.
// ----------------------------------------------------------------------
ResidualVector apply_linearized(const SymTensorField& theta, const ScalarField& phi);
ResidualVector apply_linearized_reduced(const SymTensorField& theta, const ScalarField& phi);

// ----------------------------------------------------------------------
// Closed-form spanning set of the obstruction space: for each coordinate
// direction one even and one odd quintuple built from the degree-1
// harmonic xi_i.
// ----------------------------------------------------------------------
struct CokernelElement {
  enum Kind { EVEN_1, EVEN_2, EVEN_3, ODD_1, ODD_2, ODD_3 };
  Kind kind;
  SymTensorField upsilon;
  ScalarField phi;
  Eigen::VectorXd eta_n, eta_t, eta_p;  // boundary 1-form
  Eigen::VectorXd tau_tt, tau_tp, tau_pp;
  Eigen::VectorXd h;

  bool even() const { return kind <= EVEN_3; }
  int axis() const { return even() ? kind : kind - 3; }  // 0,1,2 <-> x,y,z
};

std::vector<CokernelElement> cokernel_basis(const Discretization& D);

// Three-term pairing of a residual against a cokernel element: interior
// tensor and scalar integrals plus the boundary gauge-slot integral.
double pair_residual(const ResidualVector& res, const CokernelElement& ck);

// Residual of the degree-1 adjoint mode system (interior rows, boundary
// rows and decay rows, row-equilibrated) applied to the element's radial
// profiles; the closed forms satisfy it to roundoff.
double cokernel_system_defect(const Discretization& D, const CokernelElement& ck);

// ----------------------------------------------------------------------
// Radial systems satisfied by the adjoint-kernel mode profiles, one per
// (degree, parity), discretized on the radial grid with their boundary
// rows at r = 1 and decay rows at infinity.
// ----------------------------------------------------------------------
enum class Parity { Even, Odd };

struct AdjointModeSystem {
  int L;
  Parity parity;
  int n_profiles;      // radial unknowns (a,b,c,d subsets)
  bool has_co;         // scalar multiplier of the lapse profile
  Eigen::MatrixXd A;   // square collocation matrix (row-equilibrated)
  std::vector<std::string> profile_names;

  // smallest singular values and the kernel basis under the relative
  // threshold; profiles are columns of `kernel`, stacked per profile
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd kernel;  // (n_profiles*n_r + has_co) x dim

  int kernel_dim() const { return static_cast<int>(kernel.cols()); }
  // gap ratio between the first kept and first discarded singular value
  double gap() const;
};

AdjointModeSystem build_adjoint_system(const Discretization& D, int L, Parity parity);

// kernel profiles of the (L, parity) system as RadialProfile records
std::vector<RadialProfile> adjoint_kernel(const Discretization& D, int L, Parity parity);

// ----------------------------------------------------------------------
// Mode-space packing of the linearized problem over the reflection-
// invariant families, and the block-diagonal flat matrix obtained by
// applying the linearized operator to basis fields.
// ----------------------------------------------------------------------
struct Family {
  ModeKey key;
  Parity parity;
  int n_tensor_profiles;  // 1..4
  bool has_lapse;
  int rows;               // equations of this family block
  int cols;               // unknowns of this family block
};

class SymmetricBasis {
 public:
  SymmetricBasis(const Discretization& D, bool symmetric_only = true);

  const Discretization& disc() const { return *D_; }
  const std::vector<Family>& families() const { return fams_; }
  int size() const { return total_; }

  // unknown vector <-> fields (band-limited synthesis)
  void unpack(const Eigen::VectorXd& x, SymTensorField& theta, ScalarField& phi) const;
  Eigen::VectorXd pack_state(const SymTensorField& theta, const ScalarField& phi) const;

  // residual vector -> equation vector (interior collocation rows plus
  // boundary rows, square against the unknown count per family)
  Eigen::VectorXd pack_residual(const ResidualVector& R) const;

 private:
  const Discretization* D_;
  std::vector<Family> fams_;
  std::vector<int> col_offset_, row_offset_;
  int total_ = 0;

  friend class FlatBlocks;
};

// Which linearized boundary row the fifth slot carries.
enum class FifthRow { Geometric, Reduced };

// Per-(L, parity) dense blocks of the flat linearized operator in the
// packed basis, assembled by applying the grid operator to basis fields
// (profiles of distinct unknowns ride on distinct M channels of one
// synthesized field, so one operator application fills one radial column
// of every family at once).
class FlatBlocks {
 public:
  FlatBlocks(const SymmetricBasis& basis, FifthRow fifth);

  const SymmetricBasis& basis() const { return *basis_; }

  // direct solve / least squares on each diagonal block; singular values
  // below rel_threshold * max are treated as kernel (minimum-norm pick)
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double rel_threshold = 1e-8) const;

  // forward application of the assembled blocks to a packed vector
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  // the block of one family (keyed by (L, parity)); families with the
  // same degree and parity share their block
  const Eigen::MatrixXd& block(int L, Parity parity) const;

 private:
  struct Factor {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd;  // of the equilibrated block
    Eigen::VectorXd rscale, cscale;
  };
  const Factor& factor(int L, Parity parity) const;

  const SymmetricBasis* basis_;
  std::map<std::pair<int, int>, Eigen::MatrixXd> blocks_;
  mutable std::map<std::pair<int, int>, Factor> svd_cache_;
};

// ----------------------------------------------------------------------
// Least-squares solve of the flat linearized problem over the symmetric
// basis: minimum-norm solution, with the honest grid-level relative
// residual reported (large when the right-hand side was not symmetric).
// ----------------------------------------------------------------------
struct LinearSolveResult {
  SymTensorField theta;
  ScalarField phi;
  double rel_residual;  // least-squares residual of the packed system
  double sym_defect;    // relative content of the rhs outside the
                        // reflection-invariant families
  LinearSolveResult(const Discretization& D)
      : theta(D), phi(D), rel_residual(0), sym_defect(0) {}
};

struct LinearSolveConfig {
  double lin_tol = 1e-9;
  double null_threshold = 1e-8;
};

LinearSolveResult solve_linearized(const ResidualVector& rhs, const SymmetricBasis& basis,
                                   const FlatBlocks& blocks, const LinearSolveConfig& cfg);

// Dense GMRES with a caller-supplied operator and (right) preconditioner;
// used by the Newton driver with FlatBlocks as the preconditioner.
struct GmresResult {
  Eigen::VectorXd x;
  double rel_residual;
  int iterations;
  bool converged;
};
GmresResult gmres(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& precond,
                  const Eigen::VectorXd& rhs, double tol, int max_iter);

}  // namespace staticext
