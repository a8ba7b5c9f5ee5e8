#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phylembed/embed.hpp"
#include "phylembed/graph.hpp"
#include "phylembed/ingest.hpp"
#include "phylembed/matrix.hpp"

namespace phylembed {

enum class Weighting : std::uint8_t { CpmWeighted, UniformMean };
enum class ZeroProfilePolicy : std::uint8_t { Drop, ZeroVector };

std::string_view to_string(Weighting w);
Weighting parse_weighting(std::string_view text);
std::string_view to_string(ZeroProfilePolicy p);
ZeroProfilePolicy parse_zero_policy(std::string_view text);

struct AggregationConfig {
  std::size_t top_k_genes = 200;
  Weighting weighting = Weighting::CpmWeighted;
  std::vector<OmicLevel> omic_levels{OmicLevel::MGX};
  ZeroProfilePolicy zero_profile = ZeroProfilePolicy::Drop;

  void validate() const;
  bool uses(OmicLevel level) const;
};

struct PatientRepresentation {
  std::string sample_id;
  std::vector<double> vector;
  std::vector<std::uint32_t> genes_used;
  bool zero_profile = false;
};

/// Mean of the embeddings of a gene, its species and its genus.
std::vector<double> gene_embedding(const HeteroGraph& graph, const EmbeddingMatrix& emb,
                                   std::uint32_t gene);

/// Pools expressed genes over the selected omic levels, keeps the top_k by CPM
/// (ties by node index) and combines their gene embeddings.
/// An all-zero profile yields a zero vector with `zero_profile` set.
PatientRepresentation patient_representation(const HeteroGraph& graph, const EmbeddingMatrix& emb,
                                             std::span<const AbundanceTable* const> tables,
                                             std::string_view sample_id,
                                             const AggregationConfig& cfg);

struct DesignMatrix {
  Matrix X;
  std::vector<int> y;  // 0/1
  std::vector<std::string> sample_ids;
  std::vector<std::string> dropped_zero_profile;
  std::vector<std::string> dropped_missing;  // labeled but absent from every selected table
};

/// Precomputes gene embeddings and feature-to-node lookups so many patients
/// (or many design matrices) can be built cheaply from one embedding.
class Representer {
 public:
  Representer(const HeteroGraph& graph, const EmbeddingMatrix& emb,
              std::vector<const AbundanceTable*> tables);

  std::size_t dim() const noexcept { return gene_vectors_.cols(); }
  /// Throws when `sample_id` is absent from every selected table.
  PatientRepresentation represent(std::string_view sample_id, const AggregationConfig& cfg) const;
  DesignMatrix design_matrix(const LabelTable& labels, const AggregationConfig& cfg) const;

 private:
  struct Candidate {
    double cpm;
    std::uint32_t node;
  };
  bool collect(std::string_view sample_id, const AggregationConfig& cfg,
               std::vector<Candidate>& pool) const;

  const HeteroGraph& graph_;
  std::vector<const AbundanceTable*> tables_;
  std::vector<std::vector<std::uint32_t>> feature_node_;  // per table, per feature column
  Matrix gene_vectors_;                                   // rows = gene nodes
};

DesignMatrix build_design_matrix(const HeteroGraph& graph, const EmbeddingMatrix& emb,
                                 std::span<const AbundanceTable* const> tables,
                                 const LabelTable& labels, const AggregationConfig& cfg);

}  // namespace phylembed
