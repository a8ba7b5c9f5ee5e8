#include "phylembed/eigensolver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "phylembed/error.hpp"
#include "phylembed/rng.hpp"

namespace phylembed {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void apply(const SparseMatrix& a, const VectorXd& x, VectorXd& y) {
  a.multiply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
             std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
}

/// Two passes of classical Gram-Schmidt against the first `cols` columns.
void orthogonalize(VectorXd& w, const MatrixXd& basis, Eigen::Index cols) {
  if (cols == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    VectorXd h = basis.leftCols(cols).transpose() * w;
    w.noalias() -= basis.leftCols(cols) * h;
  }
}

}  // namespace

EigenPairs dense_symmetric_eigen(const SparseMatrix& a) {
  const auto n = static_cast<Eigen::Index>(a.n_rows());
  MatrixXd dense = MatrixXd::Zero(n, n);
  for (std::size_t r = 0; r < a.n_rows(); ++r) {
    for (std::size_t k = a.offsets()[r]; k < a.offsets()[r + 1]; ++k) {
      dense(static_cast<Eigen::Index>(r), a.indices()[k]) = a.values()[k];
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(dense);
  if (es.info() != Eigen::Success) throw NumericError("dense eigensolver failed to converge");
  EigenPairs out;
  out.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
  out.vectors = Matrix(a.n_rows(), a.n_rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out.vectors(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = es.eigenvectors()(i, j);
    }
  }
  return out;
}

EigenPairs lanczos_smallest(const SparseMatrix& a, std::size_t wanted, double spectral_bound,
                            const Matrix& deflate, const LanczosOptions& options) {
  const auto n = static_cast<Eigen::Index>(a.n_rows());
  const auto n_deflate = static_cast<Eigen::Index>(deflate.cols());
  if (deflate.rows() != 0 && static_cast<Eigen::Index>(deflate.rows()) != n) {
    throw ConfigError("lanczos: deflation basis has wrong row count");
  }
  const Eigen::Index available = n - n_deflate;
  if (static_cast<Eigen::Index>(wanted) > available) {
    throw ConfigError("lanczos: requested " + std::to_string(wanted) + " eigenpairs but only " +
                      std::to_string(available) + " dimensions remain after deflation");
  }
  EigenPairs result;
  if (wanted == 0) {
    result.vectors = Matrix(a.n_rows(), 0);
    return result;
  }

  // Locked columns: deflation basis first, then converged eigenvectors.
  MatrixXd locked(n, std::min<Eigen::Index>(n, n_deflate + static_cast<Eigen::Index>(wanted) + 16));
  Eigen::Index n_locked = 0;
  auto lock_column = [&](const VectorXd& v) {
    if (n_locked == locked.cols()) {
      locked.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(n, 2 * locked.cols() + 1));
    }
    locked.col(n_locked++) = v;
  };
  for (Eigen::Index j = 0; j < n_deflate; ++j) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = deflate(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    lock_column(v);
  }
  std::vector<double> locked_values;  // eigenvalues of non-deflation locked columns

  Rng rng(derive_seed(options.seed, "lanczos"));
  const double conv_tol = options.tolerance * std::max(1.0, spectral_bound);
  Eigen::Index basis_cap =
      options.basis_size ? static_cast<Eigen::Index>(options.basis_size)
                         : std::max<Eigen::Index>(2 * static_cast<Eigen::Index>(wanted) + 20, 40);
  std::size_t iterations = 0;
  VectorXd restart;

  for (;;) {
    const Eigen::Index remaining = n - n_locked;
    if (remaining <= 0) break;
    const Eigen::Index m = std::min(basis_cap, remaining);
    const std::size_t have = locked_values.size();
    const bool verifying = have >= wanted;
    const Eigen::Index need =
        verifying ? 1 : std::min<Eigen::Index>(static_cast<Eigen::Index>(wanted - have), m);
    double threshold = 0.0;
    if (verifying) {
      std::vector<double> sorted = locked_values;
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(wanted - 1), sorted.end());
      threshold = sorted[wanted - 1];
    }

    VectorXd v(n);
    if (restart.size() == n) {
      v = restart;
    } else {
      for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
    }
    orthogonalize(v, locked, n_locked);
    double norm = v.norm();
    if (norm < 1e-10) {
      for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
      orthogonalize(v, locked, n_locked);
      norm = v.norm();
      if (norm < 1e-10) break;
    }
    v /= norm;

    MatrixXd basis(n, m);
    VectorXd alpha(m), beta(m);
    basis.col(0) = v;
    VectorXd w(n);
    Eigen::Index steps = 0;
    bool invariant = false;
    Eigen::SelfAdjointEigenSolver<MatrixXd> tri;
    Eigen::Index n_converged = 0;

    for (Eigen::Index j = 0; j < m; ++j) {
      if (++iterations > options.max_iterations) {
        throw NumericError("lanczos: no convergence after " + std::to_string(options.max_iterations) +
                           " iterations (" + std::to_string(locked_values.size()) + " of " +
                           std::to_string(wanted) + " eigenpairs locked)");
      }
      VectorXd vj = basis.col(j);
      apply(a, vj, w);
      w = spectral_bound * vj - w;
      alpha(j) = vj.dot(w);
      w -= alpha(j) * vj;
      if (j > 0) w -= beta(j - 1) * basis.col(j - 1);
      orthogonalize(w, basis, j + 1);
      orthogonalize(w, locked, n_locked);
      beta(j) = w.norm();
      steps = j + 1;
      invariant = beta(j) < 1e-12 * std::max(1.0, spectral_bound);

      const bool check = invariant || steps == m || (steps >= need && steps % 5 == 0);
      if (check) {
        VectorXd sub = beta.head(std::max<Eigen::Index>(steps - 1, 0));
        VectorXd diag = alpha.head(steps);
        tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        // Ritz values ascending; wanted ones (largest for the shifted operator) at the end.
        n_converged = 0;
        for (Eigen::Index r = steps - 1; r >= 0; --r) {
          double resid = invariant ? 0.0 : std::abs(beta(j) * tri.eigenvectors()(steps - 1, r));
          if (resid > conv_tol) break;
          ++n_converged;
        }
        if (invariant || n_converged >= need) break;
      }
      if (j + 1 == m) break;
      basis.col(j + 1) = w / beta(j);
    }

    if (n_converged == 0) {
      // Explicit restart from the leading Ritz vectors with a larger basis.
      restart = basis.leftCols(steps) *
                tri.eigenvectors().rightCols(std::min<Eigen::Index>(need, steps)).rowwise().sum();
      basis_cap = std::min<Eigen::Index>(2 * basis_cap, std::max<Eigen::Index>(available, 1));
      continue;
    }
    restart.resize(0);

    bool improved = false;
    for (Eigen::Index r = steps - 1; r >= steps - n_converged; --r) {
      VectorXd y = basis.leftCols(steps) * tri.eigenvectors().col(r);
      orthogonalize(y, locked, n_locked);
      double yn = y.norm();
      if (yn < 1e-8) continue;
      y /= yn;
      // Rayleigh quotient of the cleaned vector.
      VectorXd ay(n);
      apply(a, y, ay);
      const double lambda = y.dot(ay);
      lock_column(y);
      locked_values.push_back(lambda);
      if (!verifying || lambda < threshold - 1e-12) improved = true;
    }
    if (verifying && !improved) break;
  }

  if (locked_values.size() < wanted) {
    throw NumericError("lanczos: only " + std::to_string(locked_values.size()) + " of " +
                       std::to_string(wanted) + " eigenpairs found after " +
                       std::to_string(iterations) + " iterations");
  }
  std::vector<std::size_t> order(locked_values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return locked_values[x] < locked_values[y]; });
  result.values.resize(wanted);
  result.vectors = Matrix(a.n_rows(), wanted);
  for (std::size_t c = 0; c < wanted; ++c) {
    result.values[c] = locked_values[order[c]];
    const auto col = n_deflate + static_cast<Eigen::Index>(order[c]);
    for (Eigen::Index i = 0; i < n; ++i) result.vectors(static_cast<std::size_t>(i), c) = locked(i, col);
  }
  result.iterations = iterations;
  return result;
}

}  // namespace phylembed
