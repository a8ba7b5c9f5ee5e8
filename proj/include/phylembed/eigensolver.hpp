#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "phylembed/graph.hpp"
#include "phylembed/matrix.hpp"

namespace phylembed {

/// Eigenpairs sorted by ascending eigenvalue; vectors stored as columns
/// (vectors(i, j) is entry i of eigenvector j).
struct EigenPairs {
  std::vector<double> values;
  Matrix vectors;
  std::size_t iterations = 0;
};

/// Full dense decomposition of a symmetric sparse matrix.
EigenPairs dense_symmetric_eigen(const SparseMatrix& a);

struct LanczosOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 5000;
  /// Krylov basis size per restart cycle; 0 picks a size from `wanted`.
  std::size_t basis_size = 0;
  std::uint64_t seed = 0;
};

/// Smallest `wanted` eigenpairs of a symmetric matrix whose spectrum lies in
/// [0, spectral_bound], restricted to the orthogonal complement of `deflate`
/// (orthonormal columns, e.g. a known null space).
///
/// Lanczos with full reorthogonalisation on (spectral_bound * I - A), with
/// locking: converged Ritz vectors are locked and the process restarts from a
/// fresh vector orthogonal to everything locked, so repeated eigenvalues are
/// recovered one copy per cycle. Stops when a cycle finds nothing below the
/// current `wanted`-th locked eigenvalue. Throws NumericError with the
/// iteration count when the budget is exhausted.
EigenPairs lanczos_smallest(const SparseMatrix& a, std::size_t wanted, double spectral_bound,
                            const Matrix& deflate, const LanczosOptions& options = {});

}  // namespace phylembed
