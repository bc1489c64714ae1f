#pragma once

#include "staticext/fields.hpp"

namespace staticext {

// Weighted Sobolev norm specification: derivative order k (0..2 supported
// discretely) and decay weight delta, restricted to the non-exceptional
// admissible window (-1, -1/2].
struct WeightedNormSpec {
  int k = 0;
  double delta = -0.5;

  void validate() const {
    if (k < 0 || k > 2) throw InputError("WeightedNormSpec: k must be in 0..2");
    if (!(delta > -1.0 && delta <= -0.5))
      throw InputError("WeightedNormSpec: delta must lie in (-1, -1/2]");
  }
};

// || u ||_{k,2,delta} = sum_{l<=k} ( int (|D^l u| |x|^{l-delta})^2 |x|^-3 dx )^{1/2}
// evaluated by grid quadrature; the integrand's s = 0 limit is zero for
// decaying fields.
double weighted_norm(const ScalarField& u, const WeightedNormSpec& spec);
double weighted_norm(const OneFormField& u, const WeightedNormSpec& spec);
double weighted_norm(const SymTensorField& u, const WeightedNormSpec& spec);

// Same norm evaluated directly on Cartesian component stacks (off-diagonal
// multiplicity handled by the caller-provided weights).
double weighted_norm_components(const Discretization& D, const std::vector<const Grid2*>& comps,
                                const std::vector<double>& mult, const WeightedNormSpec& spec);

}  // namespace staticext
