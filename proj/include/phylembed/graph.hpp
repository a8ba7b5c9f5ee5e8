#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "phylembed/ingest.hpp"

namespace phylembed {

/// Compressed sparse row matrix with sorted column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> offsets,
               std::vector<std::uint32_t> indices, std::vector<double> values);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  const std::vector<std::uint32_t>& indices() const noexcept { return indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double at(std::size_t r, std::size_t c) const;
  double row_sum(std::size_t r) const;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

/// Undirected simple graph, unit edge weights, adjacency in CSR form.
class Graph {
 public:
  Graph() = default;
  /// Duplicate edges and self loops are rejected.
  Graph(std::size_t n_nodes, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges);

  std::size_t n_nodes() const noexcept { return offsets_.size() - 1; }
  std::size_t n_edges() const noexcept { return adjacency_.size() / 2; }
  std::span<const std::uint32_t> neighbors(std::size_t v) const {
    return std::span(adjacency_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
  }
  std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(std::size_t u, std::size_t v) const;
  /// Position of (u -> v) in the flat adjacency array, or npos.
  std::size_t arc_index(std::size_t u, std::size_t v) const;
  std::size_t n_arcs() const noexcept { return adjacency_.size(); }
  std::size_t arc_begin(std::size_t v) const { return offsets_[v]; }

  /// Component id per node (ids dense, ordered by smallest member).
  std::vector<std::uint32_t> components(std::size_t* count = nullptr) const;
  std::vector<std::uint32_t> isolated_nodes() const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> adjacency_;
};

enum class LaplacianKind : std::uint8_t { Unnormalized, SymmetricNormalized };

/// L = D - A, or L_sym = I - D^-1/2 A D^-1/2 (zero diagonal for isolated nodes).
SparseMatrix laplacian(const Graph& graph,
                       LaplacianKind kind = LaplacianKind::SymmetricNormalized);
/// RW = D^-1 A; isolated nodes get empty rows.
SparseMatrix random_walk_matrix(const Graph& graph);

// ---------------------------------------------------------------------------
// Phylogenetic gene / species / genus graph

enum class NodeKind : std::uint8_t { Gene, Species, Genus };
enum class EdgeKind : std::uint8_t { GeneSpecies, SpeciesGenus };

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeKind kind);

struct NodeId {
  std::uint32_t index;
  NodeKind kind;
  std::string name;
};

struct TypedEdge {
  std::uint32_t source;
  std::uint32_t target;
  EdgeKind kind;
};

/// Sorted set of node indices (a patient's expressed genes).
struct NodeSet {
  std::vector<std::uint32_t> members;
  std::size_t size() const noexcept { return members.size(); }
  bool empty() const noexcept { return members.empty(); }
  bool contains(std::uint32_t v) const;
};

/// Taxonomy of one omic level, as fed to build_graph.
struct LevelTaxonomy {
  const TaxonomyMap* taxonomy;
  OmicLevel level;
};

/// The heterogeneous phylogenetic graph. Gene nodes come first (input order),
/// then species (first-seen order), then genera; immutable after build.
class HeteroGraph {
 public:
  HeteroGraph() = default;

  const Graph& topology() const noexcept { return topology_; }
  const std::vector<NodeId>& nodes() const noexcept { return nodes_; }
  const std::vector<TypedEdge>& edges() const noexcept { return edges_; }
  std::size_t n_nodes() const noexcept { return nodes_.size(); }
  std::size_t n_edges() const noexcept { return edges_.size(); }
  std::size_t n_genes() const noexcept { return n_genes_; }

  NodeKind kind(std::size_t v) const { return nodes_.at(v).kind; }
  const std::string& name(std::size_t v) const { return nodes_.at(v).name; }

  std::optional<std::uint32_t> find(NodeKind kind, std::string_view name) const;
  std::optional<std::uint32_t> gene_node(OmicLevel level, std::string_view feature_id) const;
  /// Omic level of a gene node.
  OmicLevel omic_of_gene(std::size_t gene) const;
  /// Species parent of a gene, genus parent of a species.
  std::uint32_t parent(std::size_t v) const;
  std::vector<std::uint32_t> gene_nodes(OmicLevel level) const;

  static std::string gene_name(OmicLevel level, std::string_view feature_id);

  friend HeteroGraph build_graph(std::span<const LevelTaxonomy> taxonomies);
  friend HeteroGraph read_graph(std::istream& node_table, std::istream& edge_list);

 private:
  void finalize();

  Graph topology_;
  std::vector<NodeId> nodes_;
  std::vector<TypedEdge> edges_;
  std::vector<OmicLevel> gene_omic_;
  std::vector<std::uint32_t> parent_;
  std::size_t n_genes_ = 0;
  std::unordered_map<std::string, std::uint32_t> by_name_[3];
};

HeteroGraph build_graph(std::span<const LevelTaxonomy> taxonomies);

/// Gene nodes whose CPM in `sample_id` is strictly positive.
NodeSet patient_node_subset(const HeteroGraph& graph, const AbundanceTable& table,
                            std::string_view sample_id);

/// Node table `name<TAB>kind<TAB>index` and edge list `src<TAB>dst<TAB>kind`.
void write_node_table(std::ostream& out, const HeteroGraph& graph);
void write_edge_list(std::ostream& out, const HeteroGraph& graph);
HeteroGraph read_graph(std::istream& node_table, std::istream& edge_list);

/// Hash of the exported node + edge tables; stable across runs.
std::uint64_t graph_hash(const HeteroGraph& graph);

}  // namespace phylembed
