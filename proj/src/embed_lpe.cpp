#include <algorithm>
#include <cctype>
#include <cmath>

#include "phylembed/eigensolver.hpp"
#include "phylembed/embed.hpp"
#include "phylembed/error.hpp"

namespace phylembed {

std::string_view to_string(EmbedMethod method) {
  switch (method) {
    case EmbedMethod::LPE: return "LPE";
    case EmbedMethod::RWPE: return "RWPE";
    case EmbedMethod::N2V: return "N2V";
  }
  return "?";
}

EmbedMethod parse_embed_method(std::string_view text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "lpe") return EmbedMethod::LPE;
  if (lower == "rwpe") return EmbedMethod::RWPE;
  if (lower == "n2v" || lower == "node2vec") return EmbedMethod::N2V;
  throw ConfigError("unknown embedding method '" + std::string(text) + "'");
}

void fix_sign(std::span<double> v) {
  double top = 0.0;
  for (double x : v) top = std::max(top, std::abs(x));
  // Entries of equal magnitude are common on symmetric graphs; the first one
  // within rounding of the maximum decides, so the choice survives solver noise.
  for (double x : v) {
    if (std::abs(x) >= top * (1.0 - 1e-9)) {
      if (x < 0.0) {
        for (auto& y : v) y = -y;
      }
      return;
    }
  }
}

namespace {

/// Orthonormal basis of the Laplacian null space: one vector per component.
Matrix trivial_basis(const Graph& graph, LaplacianKind kind, std::size_t& n_components) {
  auto comp = graph.components(&n_components);
  Matrix basis(graph.n_nodes(), n_components);
  std::vector<double> norm2(n_components, 0.0);
  std::vector<char> has_degree(n_components, 0);
  for (std::size_t v = 0; v < graph.n_nodes(); ++v) {
    if (graph.degree(v) > 0) has_degree[comp[v]] = 1;
  }
  for (std::size_t v = 0; v < graph.n_nodes(); ++v) {
    double x = kind == LaplacianKind::Unnormalized || !has_degree[comp[v]]
                   ? 1.0
                   : std::sqrt(static_cast<double>(graph.degree(v)));
    basis(v, comp[v]) = x;
    norm2[comp[v]] += x * x;
  }
  for (std::size_t v = 0; v < graph.n_nodes(); ++v) basis(v, comp[v]) /= std::sqrt(norm2[comp[v]]);
  return basis;
}

}  // namespace

EmbeddingMatrix compute_lpe(const Graph& graph, std::size_t k, const LpeOptions& options) {
  const std::size_t n = graph.n_nodes();
  EmbeddingMatrix out;
  out.method = EmbedMethod::LPE;
  out.info.seed = options.seed;
  if (n == 0) throw ConfigError("compute_lpe: empty graph");

  std::size_t c = 0;
  Matrix null_basis = trivial_basis(graph, options.laplacian, c);
  out.info.components = c;
  if (k > n - c) {
    throw ConfigError("compute_lpe: k=" + std::to_string(k) + " exceeds the " +
                      std::to_string(n - c) + " non-trivial eigenvectors of a graph with " +
                      std::to_string(n) + " nodes and " + std::to_string(c) + " components");
  }
  if (k == 0) {
    out.vectors = Matrix(n, 0);
    return out;
  }

  const SparseMatrix lap = laplacian(graph, options.laplacian);
  // One extra pair, when available, tells whether column k splits a cluster.
  const std::size_t request = std::min(k + 1, n - c);
  std::vector<double> values;
  Matrix vecs;

  if (n < options.dense_threshold) {
    out.info.solver = "dense";
    EigenPairs all = dense_symmetric_eigen(lap);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < n && keep.size() < request; ++j) {
      if (all.values[j] > options.zero_tolerance) keep.push_back(j);
    }
    if (keep.size() < k) {
      throw NumericError("compute_lpe: only " + std::to_string(keep.size()) +
                         " eigenvalues above the zero tolerance");
    }
    vecs = Matrix(n, keep.size());
    for (std::size_t c2 = 0; c2 < keep.size(); ++c2) {
      values.push_back(all.values[keep[c2]]);
      for (std::size_t i = 0; i < n; ++i) vecs(i, c2) = all.vectors(i, keep[c2]);
    }
  } else {
    out.info.solver = "lanczos";
    double bound = 2.0;
    if (options.laplacian == LaplacianKind::Unnormalized) {
      std::size_t max_deg = 0;
      for (std::size_t v = 0; v < n; ++v) max_deg = std::max(max_deg, graph.degree(v));
      bound = 2.0 * static_cast<double>(max_deg);
    }
    LanczosOptions lo;
    lo.tolerance = options.tolerance;
    lo.max_iterations = options.max_iterations;
    lo.seed = options.seed;
    EigenPairs pairs = lanczos_smallest(lap, request, bound, null_basis, lo);
    out.info.solver_iterations = pairs.iterations;
    for (std::size_t j = 0; j < pairs.values.size(); ++j) {
      if (pairs.values[j] <= options.zero_tolerance) {
        throw NumericError("compute_lpe: iterative solver returned a trivial eigenvalue " +
                           std::to_string(pairs.values[j]));
      }
    }
    values = std::move(pairs.values);
    vecs = std::move(pairs.vectors);
  }

  out.vectors = Matrix(n, k);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < k; ++j) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = vecs(i, j);
      norm2 += col[i] * col[i];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : col) x *= inv;
    fix_sign(col);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = col[i];
  }
  constexpr double cluster_gap = 1e-8;
  out.info.eigenvalues.assign(values.begin(), values.begin() + static_cast<long>(k));
  out.info.eigen_cluster.resize(k);
  std::uint32_t cluster = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (j > 0 && values[j] - values[j - 1] >= cluster_gap) ++cluster;
    out.info.eigen_cluster[j] = cluster;
  }
  out.info.truncated_cluster = values.size() > k && values[k] - values[k - 1] < cluster_gap;
  return out;
}

}  // namespace phylembed
