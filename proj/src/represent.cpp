#include "phylembed/represent.hpp"

#include <algorithm>
#include <cmath>

#include "phylembed/error.hpp"

namespace phylembed {

std::string_view to_string(Weighting w) {
  return w == Weighting::CpmWeighted ? "cpm" : "uniform";
}

Weighting parse_weighting(std::string_view text) {
  if (text == "cpm" || text == "CpmWeighted") return Weighting::CpmWeighted;
  if (text == "uniform" || text == "UniformMean") return Weighting::UniformMean;
  throw ConfigError("unknown weighting '" + std::string(text) + "'");
}

std::string_view to_string(ZeroProfilePolicy p) {
  return p == ZeroProfilePolicy::Drop ? "drop" : "zero-vector";
}

ZeroProfilePolicy parse_zero_policy(std::string_view text) {
  if (text == "drop") return ZeroProfilePolicy::Drop;
  if (text == "zero-vector" || text == "zero") return ZeroProfilePolicy::ZeroVector;
  throw ConfigError("unknown zero-profile policy '" + std::string(text) + "'");
}

void AggregationConfig::validate() const {
  if (top_k_genes < 1) throw ConfigError("aggregation: top_k_genes must be at least 1");
  if (omic_levels.empty()) throw ConfigError("aggregation: omic_levels must not be empty");
}

bool AggregationConfig::uses(OmicLevel level) const {
  return std::find(omic_levels.begin(), omic_levels.end(), level) != omic_levels.end();
}

std::vector<double> gene_embedding(const HeteroGraph& graph, const EmbeddingMatrix& emb,
                                   std::uint32_t gene) {
  if (gene >= graph.n_nodes() || graph.kind(gene) != NodeKind::Gene) {
    throw Error("gene_embedding: node " + std::to_string(gene) + " is not a gene node");
  }
  if (emb.n_nodes() != graph.n_nodes()) throw Error("gene_embedding: embedding/graph size mismatch");
  const auto species = graph.parent(gene);
  const auto genus = graph.parent(species);
  std::vector<double> out(emb.dim());
  auto a = emb.row(gene), b = emb.row(species), c = emb.row(genus);
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = (a[d] + b[d] + c[d]) / 3.0;
  return out;
}

// ---------------------------------------------------------------------------
// Representer

namespace {
constexpr std::uint32_t kNoNode = ~std::uint32_t{0};
}

Representer::Representer(const HeteroGraph& graph, const EmbeddingMatrix& emb,
                         std::vector<const AbundanceTable*> tables)
    : graph_(graph), tables_(std::move(tables)) {
  if (emb.n_nodes() != graph.n_nodes()) throw Error("Representer: embedding/graph size mismatch");
  gene_vectors_ = Matrix(graph.n_genes(), emb.dim());
  for (std::uint32_t g = 0; g < graph.n_genes(); ++g) {
    auto v = gene_embedding(graph, emb, g);
    std::copy(v.begin(), v.end(), gene_vectors_.row(g).begin());
  }
  for (const auto* t : tables_) {
    if (!t) throw ConfigError("Representer: null abundance table");
    std::vector<std::uint32_t> map(t->n_features(), kNoNode);
    for (std::size_t f = 0; f < t->n_features(); ++f) {
      if (auto node = graph.gene_node(t->omic_level(), t->feature_ids()[f])) map[f] = *node;
    }
    feature_node_.push_back(std::move(map));
  }
}

bool Representer::collect(std::string_view sample_id, const AggregationConfig& cfg,
                          std::vector<Candidate>& pool) const {
  pool.clear();
  bool found = false;
  for (std::size_t ti = 0; ti < tables_.size(); ++ti) {
    const auto& t = *tables_[ti];
    if (!cfg.uses(t.omic_level())) continue;
    auto s = t.find_sample(sample_id);
    if (!s) continue;
    found = true;
    auto row = t.row(*s);
    for (std::size_t k = 0; k < row.features.size(); ++k) {
      const auto node = feature_node_[ti][row.features[k]];
      if (node == kNoNode) {
        throw Error("feature '" + t.feature_ids()[row.features[k]] + "' (" +
                    std::string(to_string(t.omic_level())) + ") has no gene node in the graph");
      }
      pool.push_back({row.values[k], node});
    }
  }
  return found;
}

PatientRepresentation Representer::represent(std::string_view sample_id,
                                             const AggregationConfig& cfg) const {
  cfg.validate();
  std::vector<Candidate> pool;
  if (!collect(sample_id, cfg, pool)) {
    throw Error("sample '" + std::string(sample_id) + "' is absent from every selected omic table");
  }
  PatientRepresentation rep;
  rep.sample_id = std::string(sample_id);
  rep.vector.assign(dim(), 0.0);
  if (pool.empty()) {
    rep.zero_profile = true;
    return rep;
  }
  auto ranks_before = [](const Candidate& a, const Candidate& b) {
    return a.cpm != b.cpm ? a.cpm > b.cpm : a.node < b.node;
  };
  const std::size_t keep = std::min(cfg.top_k_genes, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<long>(keep), pool.end(), ranks_before);
  pool.resize(keep);

  double total = 0.0;
  for (const auto& c : pool) total += c.cpm;
  for (const auto& c : pool) {
    const double w = cfg.weighting == Weighting::CpmWeighted ? c.cpm / total
                                                             : 1.0 / static_cast<double>(keep);
    auto g = gene_vectors_.row(c.node);
    for (std::size_t d = 0; d < rep.vector.size(); ++d) rep.vector[d] += w * g[d];
    rep.genes_used.push_back(c.node);
  }
  return rep;
}

DesignMatrix Representer::design_matrix(const LabelTable& labels, const AggregationConfig& cfg) const {
  cfg.validate();
  DesignMatrix dm;
  dm.X = Matrix(0, dim());
  for (const auto& [id, label] : labels.entries()) {
    std::vector<Candidate> pool;
    if (!collect(id, cfg, pool)) {
      dm.dropped_missing.push_back(id);
      continue;
    }
    auto rep = represent(id, cfg);
    if (rep.zero_profile && cfg.zero_profile == ZeroProfilePolicy::Drop) {
      dm.dropped_zero_profile.push_back(id);
      continue;
    }
    dm.X.append_row(rep.vector);
    dm.y.push_back(label);
    dm.sample_ids.push_back(id);
  }
  if (dm.sample_ids.empty()) {
    throw Error("build_design_matrix: no labeled sample has a representable profile");
  }
  return dm;
}

PatientRepresentation patient_representation(const HeteroGraph& graph, const EmbeddingMatrix& emb,
                                             std::span<const AbundanceTable* const> tables,
                                             std::string_view sample_id,
                                             const AggregationConfig& cfg) {
  Representer r(graph, emb, {tables.begin(), tables.end()});
  return r.represent(sample_id, cfg);
}

DesignMatrix build_design_matrix(const HeteroGraph& graph, const EmbeddingMatrix& emb,
                                 std::span<const AbundanceTable* const> tables,
                                 const LabelTable& labels, const AggregationConfig& cfg) {
  Representer r(graph, emb, {tables.begin(), tables.end()});
  return r.design_matrix(labels, cfg);
}

}  // namespace phylembed
