#include "phylembed/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "phylembed/error.hpp"
#include "phylembed/rng.hpp"
#include "phylembed/tsv.hpp"

namespace phylembed {

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols,
                           std::vector<std::size_t> offsets,
                           std::vector<std::uint32_t> indices, std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)) {
  if (offsets_.size() != n_rows_ + 1 || offsets_.front() != 0 ||
      offsets_.back() != indices_.size() || indices_.size() != values_.size()) {
    throw Error("SparseMatrix: inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < n_rows_; ++r) {
    if (offsets_[r] > offsets_[r + 1]) throw Error("SparseMatrix: decreasing row offsets");
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      if (indices_[k] >= n_cols_) throw Error("SparseMatrix: column index out of range");
      if (k > offsets_[r] && indices_[k] <= indices_[k - 1]) {
        throw Error("SparseMatrix: column indices not strictly sorted");
      }
    }
  }
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto b = indices_.begin() + static_cast<long>(offsets_.at(r));
  auto e = indices_.begin() + static_cast<long>(offsets_.at(r + 1));
  auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(c));
  if (it == e || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - indices_.begin())];
}

double SparseMatrix::row_sum(std::size_t r) const {
  double s = 0.0;
  for (std::size_t k = offsets_.at(r); k < offsets_[r + 1]; ++k) s += values_[k];
  return s;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t r = 0; r < n_rows_; ++r) {
    double s = 0.0;
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) s += values_[k] * x[indices_[k]];
    y[r] = s;
  }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_rows_);
  multiply(x, y);
  return y;
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(std::size_t n_nodes,
             std::span<const std::pair<std::uint32_t, std::uint32_t>> edges) {
  std::vector<std::size_t> degree(n_nodes, 0);
  for (auto [u, v] : edges) {
    if (u >= n_nodes || v >= n_nodes) throw Error("Graph: edge endpoint out of range");
    if (u == v) throw Error("Graph: self loop on node " + std::to_string(u));
    ++degree[u];
    ++degree[v];
  }
  offsets_.assign(n_nodes + 1, 0);
  for (std::size_t v = 0; v < n_nodes; ++v) offsets_[v + 1] = offsets_[v] + degree[v];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (auto [u, v] : edges) {
    adjacency_[fill[u]++] = v;
    adjacency_[fill[v]++] = u;
  }
  for (std::size_t v = 0; v < n_nodes; ++v) {
    auto b = adjacency_.begin() + static_cast<long>(offsets_[v]);
    auto e = adjacency_.begin() + static_cast<long>(offsets_[v + 1]);
    std::sort(b, e);
    if (std::adjacent_find(b, e) != e) throw Error("Graph: duplicate edge at node " + std::to_string(v));
  }
}

bool Graph::has_edge(std::size_t u, std::size_t v) const { return arc_index(u, v) != npos; }

std::size_t Graph::arc_index(std::size_t u, std::size_t v) const {
  auto nb = neighbors(u);
  auto it = std::lower_bound(nb.begin(), nb.end(), static_cast<std::uint32_t>(v));
  if (it == nb.end() || *it != v) return npos;
  return offsets_[u] + static_cast<std::size_t>(it - nb.begin());
}

std::vector<std::uint32_t> Graph::components(std::size_t* count) const {
  const std::size_t n = n_nodes();
  constexpr std::uint32_t unset = ~std::uint32_t{0};
  std::vector<std::uint32_t> comp(n, unset);
  std::vector<std::uint32_t> stack;
  std::uint32_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(static_cast<std::uint32_t>(s));
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : neighbors(v)) {
        if (comp[w] == unset) {
          comp[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

std::vector<std::uint32_t> Graph::isolated_nodes() const {
  std::vector<std::uint32_t> out;
  for (std::size_t v = 0; v < n_nodes(); ++v) {
    if (degree(v) == 0) out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

SparseMatrix laplacian(const Graph& graph, LaplacianKind kind) {
  const std::size_t n = graph.n_nodes();
  if (n == 0) throw Error("laplacian: empty graph");
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    if (graph.degree(v) > 0) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(graph.degree(v)));
  }
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  idx.reserve(graph.n_arcs() + n);
  val.reserve(graph.n_arcs() + n);
  for (std::size_t v = 0; v < n; ++v) {
    const double d = static_cast<double>(graph.degree(v));
    const double diag = kind == LaplacianKind::Unnormalized ? d : (d > 0 ? 1.0 : 0.0);
    bool diag_done = false;
    auto emit_diag = [&] {
      idx.push_back(static_cast<std::uint32_t>(v));
      val.push_back(diag);
      diag_done = true;
    };
    for (auto w : graph.neighbors(v)) {
      if (!diag_done && w > v) emit_diag();
      idx.push_back(w);
      val.push_back(kind == LaplacianKind::Unnormalized ? -1.0 : -inv_sqrt[v] * inv_sqrt[w]);
    }
    if (!diag_done) emit_diag();
    offsets.push_back(idx.size());
  }
  return SparseMatrix(n, n, std::move(offsets), std::move(idx), std::move(val));
}

SparseMatrix random_walk_matrix(const Graph& graph) {
  const std::size_t n = graph.n_nodes();
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (std::size_t v = 0; v < n; ++v) {
    const double p = graph.degree(v) > 0 ? 1.0 / static_cast<double>(graph.degree(v)) : 0.0;
    for (auto w : graph.neighbors(v)) {
      idx.push_back(w);
      val.push_back(p);
    }
    offsets.push_back(idx.size());
  }
  return SparseMatrix(n, n, std::move(offsets), std::move(idx), std::move(val));
}

// ---------------------------------------------------------------------------
// HeteroGraph

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Gene: return "gene";
    case NodeKind::Species: return "species";
    case NodeKind::Genus: return "genus";
  }
  return "?";
}

std::string_view to_string(EdgeKind kind) {
  return kind == EdgeKind::GeneSpecies ? "gene-species" : "species-genus";
}

bool NodeSet::contains(std::uint32_t v) const {
  return std::binary_search(members.begin(), members.end(), v);
}

std::string HeteroGraph::gene_name(OmicLevel level, std::string_view feature_id) {
  std::string out(to_string(level));
  out.push_back(':');
  out.append(feature_id);
  return out;
}

std::optional<std::uint32_t> HeteroGraph::find(NodeKind kind, std::string_view name) const {
  const auto& m = by_name_[static_cast<int>(kind)];
  auto it = m.find(std::string(name));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> HeteroGraph::gene_node(OmicLevel level,
                                                    std::string_view feature_id) const {
  return find(NodeKind::Gene, gene_name(level, feature_id));
}

OmicLevel HeteroGraph::omic_of_gene(std::size_t gene) const {
  if (gene >= n_genes_) throw Error("omic_of_gene: node " + std::to_string(gene) + " is not a gene");
  return gene_omic_[gene];
}

std::uint32_t HeteroGraph::parent(std::size_t v) const {
  if (nodes_.at(v).kind == NodeKind::Genus) throw Error("parent: genus nodes have no parent");
  return parent_[v];
}

std::vector<std::uint32_t> HeteroGraph::gene_nodes(OmicLevel level) const {
  std::vector<std::uint32_t> out;
  for (std::size_t v = 0; v < n_genes_; ++v) {
    if (gene_omic_[v] == level) out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

void HeteroGraph::finalize() {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(edges_.size());
  parent_.assign(nodes_.size(), ~std::uint32_t{0});
  for (const auto& e : edges_) {
    pairs.emplace_back(e.source, e.target);
    if (parent_[e.source] != ~std::uint32_t{0}) {
      throw ParseError("node '" + nodes_.at(e.source).name + "' has more than one parent");
    }
    parent_[e.source] = e.target;
  }
  topology_ = Graph(nodes_.size(), pairs);
  for (auto& m : by_name_) m.clear();
  for (const auto& n : nodes_) by_name_[static_cast<int>(n.kind)].emplace(n.name, n.index);
}

HeteroGraph build_graph(std::span<const LevelTaxonomy> taxonomies) {
  if (taxonomies.empty()) throw ConfigError("build_graph: empty taxonomy list");
  HeteroGraph g;
  std::unordered_map<std::string, std::uint32_t> gene_ids, species_ids, genus_ids;
  std::vector<std::string> species_order, genus_order;
  std::unordered_map<std::string, std::string> genus_of_species;
  std::vector<std::pair<std::string, std::string>> gene_species;  // gene name, species

  for (const auto& lt : taxonomies) {
    if (!lt.taxonomy) throw ConfigError("build_graph: null taxonomy");
    for (const auto& r : lt.taxonomy->records()) {
      auto name = HeteroGraph::gene_name(lt.level, r.feature_id);
      auto idx = static_cast<std::uint32_t>(g.nodes_.size());
      if (!gene_ids.emplace(name, idx).second) {
        throw ParseError("build_graph: gene " + name + " listed twice");
      }
      g.nodes_.push_back({idx, NodeKind::Gene, name});
      g.gene_omic_.push_back(lt.level);
      gene_species.emplace_back(name, r.species);
      auto [it, inserted] = genus_of_species.emplace(r.species, r.genus);
      if (inserted) {
        species_order.push_back(r.species);
      } else if (it->second != r.genus) {
        throw ParseError("species " + r.species + " has conflicting genera (" + it->second +
                         ", " + r.genus + ")");
      }
    }
  }
  g.n_genes_ = g.nodes_.size();
  for (const auto& sp : species_order) {
    auto idx = static_cast<std::uint32_t>(g.nodes_.size());
    species_ids.emplace(sp, idx);
    g.nodes_.push_back({idx, NodeKind::Species, sp});
    const auto& ge = genus_of_species[sp];
    if (!genus_ids.count(ge)) {
      genus_ids.emplace(ge, 0);
      genus_order.push_back(ge);
    }
  }
  for (const auto& ge : genus_order) {
    auto idx = static_cast<std::uint32_t>(g.nodes_.size());
    genus_ids[ge] = idx;
    g.nodes_.push_back({idx, NodeKind::Genus, ge});
  }
  for (std::size_t i = 0; i < gene_species.size(); ++i) {
    g.edges_.push_back({static_cast<std::uint32_t>(i), species_ids.at(gene_species[i].second),
                        EdgeKind::GeneSpecies});
  }
  for (const auto& sp : species_order) {
    g.edges_.push_back({species_ids.at(sp), genus_ids.at(genus_of_species.at(sp)),
                        EdgeKind::SpeciesGenus});
  }
  g.finalize();
  return g;
}

NodeSet patient_node_subset(const HeteroGraph& graph, const AbundanceTable& table,
                            std::string_view sample_id) {
  auto s = table.find_sample(sample_id);
  if (!s) throw Error("unknown sample_id '" + std::string(sample_id) + "'");
  auto row = table.row(*s);
  NodeSet out;
  out.members.reserve(row.features.size());
  for (std::size_t k = 0; k < row.features.size(); ++k) {
    const auto& fid = table.feature_ids()[row.features[k]];
    auto node = graph.gene_node(table.omic_level(), fid);
    if (!node) {
      throw Error("feature '" + fid + "' (" + std::string(to_string(table.omic_level())) +
                  ") has no gene node in the graph");
    }
    out.members.push_back(*node);
  }
  std::sort(out.members.begin(), out.members.end());
  return out;
}

// ---------------------------------------------------------------------------
// Export / import

void write_node_table(std::ostream& out, const HeteroGraph& graph) {
  out << "name\tkind\tindex\n";
  for (const auto& n : graph.nodes()) out << n.name << '\t' << to_string(n.kind) << '\t' << n.index << '\n';
}

void write_edge_list(std::ostream& out, const HeteroGraph& graph) {
  out << "src_name\tdst_name\tedge_kind\n";
  for (const auto& e : graph.edges()) {
    out << graph.name(e.source) << '\t' << graph.name(e.target) << '\t' << to_string(e.kind) << '\n';
  }
}

HeteroGraph read_graph(std::istream& node_table, std::istream& edge_list) {
  HeteroGraph g;
  std::string line;
  if (!tsv::read_line(node_table, line)) throw ParseError("node table: missing header");
  std::unordered_map<std::string, std::uint32_t> by_kind_name[3];
  bool seen_non_gene = false;
  while (tsv::read_line(node_table, line)) {
    if (line.empty()) continue;
    auto cells = tsv::split(line);
    if (cells.size() != 3) throw ParseError("node table: expected 3 columns");
    long long idx = 0;
    if (!tsv::parse_int(cells[2], idx) || idx != static_cast<long long>(g.nodes_.size())) {
      throw ParseError("node table: indices must be dense and ordered");
    }
    NodeKind kind;
    if (cells[1] == "gene") kind = NodeKind::Gene;
    else if (cells[1] == "species") kind = NodeKind::Species;
    else if (cells[1] == "genus") kind = NodeKind::Genus;
    else throw ParseError("node table: unknown kind '" + std::string(cells[1]) + "'");
    if (kind == NodeKind::Gene) {
      if (seen_non_gene) throw ParseError("node table: gene nodes must precede taxa");
      auto colon = cells[0].find(':');
      if (colon == std::string_view::npos) throw ParseError("node table: gene name lacks omic prefix");
      g.gene_omic_.push_back(parse_omic_level(cells[0].substr(0, colon)));
    } else {
      seen_non_gene = true;
    }
    std::string name(cells[0]);
    if (!by_kind_name[static_cast<int>(kind)].emplace(name, static_cast<std::uint32_t>(idx)).second) {
      throw ParseError("node table: duplicate node '" + name + "'");
    }
    g.nodes_.push_back({static_cast<std::uint32_t>(idx), kind, std::move(name)});
  }
  g.n_genes_ = g.gene_omic_.size();

  if (!tsv::read_line(edge_list, line)) throw ParseError("edge list: missing header");
  while (tsv::read_line(edge_list, line)) {
    if (line.empty()) continue;
    auto cells = tsv::split(line);
    if (cells.size() != 3) throw ParseError("edge list: expected 3 columns");
    EdgeKind kind;
    NodeKind src_kind, dst_kind;
    if (cells[2] == "gene-species") {
      kind = EdgeKind::GeneSpecies;
      src_kind = NodeKind::Gene;
      dst_kind = NodeKind::Species;
    } else if (cells[2] == "species-genus") {
      kind = EdgeKind::SpeciesGenus;
      src_kind = NodeKind::Species;
      dst_kind = NodeKind::Genus;
    } else {
      throw ParseError("edge list: unknown edge kind '" + std::string(cells[2]) + "'");
    }
    auto& sm = by_kind_name[static_cast<int>(src_kind)];
    auto& dm = by_kind_name[static_cast<int>(dst_kind)];
    auto s = sm.find(std::string(cells[0]));
    auto d = dm.find(std::string(cells[1]));
    if (s == sm.end() || d == dm.end()) throw ParseError("edge list: unknown endpoint in '" + line + "'");
    g.edges_.push_back({s->second, d->second, kind});
  }
  g.finalize();
  // Re-check the structural invariants a valid build guarantees.
  for (std::size_t v = 0; v < g.n_nodes(); ++v) {
    if (g.kind(v) != NodeKind::Genus && g.parent_[v] == ~std::uint32_t{0}) {
      throw ParseError("graph import: node '" + g.name(v) + "' has no parent");
    }
  }
  return g;
}

std::uint64_t graph_hash(const HeteroGraph& graph) {
  std::ostringstream out;
  write_node_table(out, graph);
  write_edge_list(out, graph);
  return fnv1a64(out.str());
}

}  // namespace phylembed
