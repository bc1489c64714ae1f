#pragma once

#include "staticext/fields.hpp"
#include "staticext/util.hpp"

namespace staticext {

// Radial profiles of one (L, M, parity) family sampled on the radial grid.
struct RadialProfile {
  Eigen::VectorXd a, b, c, d;  // absent entries are empty
};

// Mode decomposition of a symmetric 2-tensor.  Profile conventions (frame
// components on the sphere of radius r, with Y the Schmidt-normalized
// harmonic and hats denoting unit-sphere frame objects):
//   even:  T_rr           = a(r) Y
//          (T_rt, T_rp)   = (b(r)/r) (dY)^
//          T_tang         = c(r) Htf(Y) + (d(r) - c(r) L(L+1)/2) Y Id
//                           i.e.  c Hess^(Y) + d Y Id
//   odd:   (T_rt, T_rp)   = (b(r)/r) (dY)*^
//          T_tang         = (c(r)/r^2) Hess*^(Y)
// Columns are indexed by the harmonic coefficient index; entries above the
// grid's lmax are zero.  Profiles that the ansatz excludes (c at L<=1,
// even b at L=0, ...) are stored as zero columns.
struct TensorModes {
  const Discretization* D = nullptr;
  Eigen::MatrixXd a, b, c, d;  // even, (n_r x ncoef)
  Eigen::MatrixXd bo, co;      // odd

  RadialProfile profile(int L, int M, bool even) const;
};

struct ScalarModes {
  const Discretization* D = nullptr;
  Eigen::MatrixXd p;
};

// 1-form: V_r = n(r) Y, tangential = (g(r)/r)(dY)^ + (s(r)/r)(dY)*^.
struct OneFormModes {
  const Discretization* D = nullptr;
  Eigen::MatrixXd n, g, s;
};

TensorModes transform_to_modes(const SymTensorField& T);
ScalarModes transform_to_modes(const ScalarField& f);
OneFormModes transform_to_modes(const OneFormField& V);

SymTensorField transform_from_modes(const TensorModes& M);
ScalarField transform_from_modes_scalar(const ScalarModes& M);
OneFormField transform_from_modes_oneform(const OneFormModes& M);

// Relative L2 distance between a field and its reconstruction from the
// truncated spectrum; reported so callers can detect an insufficient lmax.
double truncation_error(const SymTensorField& T, const TensorModes& M);

// Surface (s = 1) data in mode form --------------------------------------

struct SurfaceScalarModes {
  Eigen::VectorXd c;  // coefficient per harmonic (<= lmax)
};
struct SurfaceOneFormModes {
  Eigen::VectorXd n, g, s;
};
struct SurfaceTensorModes {
  Eigen::VectorXd c, d, codd;
};

SurfaceScalarModes surface_scalar_modes(const Discretization& D, const Eigen::VectorXd& f);
SurfaceOneFormModes surface_oneform_modes(const Discretization& D, const Eigen::VectorXd& fn,
                                          const Eigen::VectorXd& ft, const Eigen::VectorXd& fp);
SurfaceTensorModes surface_tensor_modes(const Discretization& D, const Eigen::VectorXd& Ttt,
                                        const Eigen::VectorXd& Ttp, const Eigen::VectorXd& Tpp);

// ----------------------------------------------------------------------
// Seeded band-limited test fields: smooth decaying random content over all
// families up to lmax, decay ~ r^-2, amplitudes falling off with L.
// ----------------------------------------------------------------------
SymTensorField random_tensor_field(const Discretization& D, Rng& rng, double amplitude,
                                   bool symmetric_only = false);
ScalarField random_scalar_field(const Discretization& D, Rng& rng, double amplitude,
                                bool symmetric_only = false);

}  // namespace staticext
