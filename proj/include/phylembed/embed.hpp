#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phylembed/graph.hpp"
#include "phylembed/matrix.hpp"
#include "phylembed/rng.hpp"

namespace phylembed {

enum class EmbedMethod : std::uint8_t { LPE, RWPE, N2V };

std::string_view to_string(EmbedMethod method);
/// Case-insensitive "lpe" / "rwpe" / "n2v".
EmbedMethod parse_embed_method(std::string_view text);

/// Backend-specific facts about how an embedding was produced.
struct EmbeddingInfo {
  // LPE
  std::vector<double> eigenvalues;
  /// Multiplicity cluster per column; columns sharing an id span one eigenspace.
  std::vector<std::uint32_t> eigen_cluster;
  bool truncated_cluster = false;  ///< last cluster continues past column k
  std::size_t components = 0;
  std::size_t solver_iterations = 0;
  std::string solver;
  // RWPE
  std::vector<std::uint32_t> isolated_nodes;
  // N2V
  std::vector<double> epoch_losses;
  std::uint64_t seed = 0;
};

/// Node-indexed dense vectors; rows follow the source graph's node order.
struct EmbeddingMatrix {
  EmbedMethod method = EmbedMethod::LPE;
  Matrix vectors;  // n_nodes x dim
  EmbeddingInfo info;

  std::size_t dim() const noexcept { return vectors.cols(); }
  std::size_t n_nodes() const noexcept { return vectors.rows(); }
  std::span<const double> row(std::size_t v) const { return vectors.row(v); }
};

// ---------------------------------------------------------------------------
// Laplacian eigenvector positional encoding

struct LpeOptions {
  LaplacianKind laplacian = LaplacianKind::SymmetricNormalized;
  /// Graphs with fewer nodes use the dense solver.
  std::size_t dense_threshold = 2000;
  double tolerance = 1e-10;
  std::size_t max_iterations = 5000;
  /// Eigenvalues at or below this are trivial.
  double zero_tolerance = 1e-8;
  std::uint64_t seed = 0;
};

/// Eigenvectors of the k smallest non-trivial Laplacian eigenvalues, unit
/// norm, sign fixed so each column's largest-magnitude entry is positive.
EmbeddingMatrix compute_lpe(const Graph& graph, std::size_t k, const LpeOptions& options = {});

/// Flips v so that its entry of largest magnitude (first on ties) is positive.
void fix_sign(std::span<double> v);

// ---------------------------------------------------------------------------
// Random-walk positional encoding

/// Row i = [RW_ii, (RW^2)_ii, ..., (RW^k)_ii].
EmbeddingMatrix compute_rwpe(const Graph& graph, std::size_t k, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Node2Vec

struct N2VConfig {
  std::size_t dim = 16;
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 20;
  double return_param_p = 1.0;
  double inout_param_q = 1.0;
  std::size_t window = 5;
  std::size_t negatives_per_positive = 5;
  std::size_t epochs = 1;
  double learning_rate = 0.025;
  std::uint64_t seed = 0;
  /// Sequential and bit-reproducible when true; otherwise walks and updates
  /// run on `workers` threads without locking.
  bool deterministic = true;
  std::size_t workers = 1;

  void validate() const;
};

/// Walker-side alias table (Vose).
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> weights);
  std::size_t size() const noexcept { return prob_.size(); }
  std::size_t sample(Rng& rng) const;

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Second-order biased walker. Transition tables for each (prev, cur) arc are
/// built on first use and kept, at most one per arc; safe to share between
/// threads.
class BiasedWalker {
 public:
  BiasedWalker(const Graph& graph, double p, double q);

  /// Unnormalised weights of moving to each neighbor of `cur` (neighbor order)
  /// having arrived from `prev`.
  std::vector<double> transition_weights(std::uint32_t prev, std::uint32_t cur) const;

  std::vector<std::uint32_t> walk(std::uint32_t start, std::size_t length, Rng& rng) const;

 private:
  const AliasTable& table(std::size_t arc, std::uint32_t prev, std::uint32_t cur) const;

  const Graph& graph_;
  double p_;
  double q_;
  std::unique_ptr<std::once_flag[]> once_;
  std::unique_ptr<AliasTable[]> tables_;
};

std::vector<std::uint32_t> biased_random_walk(const Graph& graph, std::uint32_t start,
                                              const N2VConfig& cfg, Rng& rng);

/// Skip-gram with negative sampling over biased walks; returns center vectors.
EmbeddingMatrix train_node2vec(const Graph& graph, const N2VConfig& cfg);

// ---------------------------------------------------------------------------
// Export

/// TSV `node_name<TAB>v1..vk`, values in shortest round-trip decimal form.
void write_embedding(std::ostream& out, const HeteroGraph& graph, const EmbeddingMatrix& emb);
EmbeddingMatrix read_embedding(std::istream& in, const HeteroGraph& graph, EmbedMethod method);

}  // namespace phylembed
