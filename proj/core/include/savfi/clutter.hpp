#pragma once

#include <complex>
#include <vector>

#include "savfi/beamform.hpp"

namespace savfi {

// Singular values of the Casorati matrix (descending). Exposed for tests of
// the energy partition identity.
std::vector<double> casorati_singular_values(const IqStack& stack);

// SVD clutter filter: reconstruct only singular components with index in
// [low_cut, high_cut). low_cut leading components hold static/slow tissue;
// components >= high_cut hold noise. Computed through the eigen-
// decomposition of the n_frames x n_frames Gram matrix, exact because
// n_frames << H*W.
IqStack svd_filter(const IqStack& stack, int low_cut, int high_cut);

}  // namespace savfi
