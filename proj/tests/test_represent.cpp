#include <doctest.h>

#include <random>

#include "phylembed/error.hpp"
#include "phylembed/represent.hpp"
#include "support.hpp"

using namespace phylembed;

namespace {

// g1,g2 under spA/genX; g3 under spB/genX.
const char* kTax = "feature_id\tspecies\tgenus\ng1\tspA\tgenX\ng2\tspA\tgenX\ng3\tspB\tgenX\n";

struct Small {
  TaxonomyMap tax = parse_taxonomy_map(kTax);
  HeteroGraph graph;
  EmbeddingMatrix emb;
  Small() {
    std::vector<LevelTaxonomy> levels{{&tax, OmicLevel::MGX}, {&tax, OmicLevel::MTX}};
    graph = build_graph(levels);
    emb.vectors = Matrix(graph.n_nodes(), 2);
    for (std::size_t v = 0; v < graph.n_nodes(); ++v) {
      emb.vectors(v, 0) = static_cast<double>(v);
      emb.vectors(v, 1) = static_cast<double>(v * v) / 10.0;
    }
  }
  std::uint32_t gene(OmicLevel l, const char* f) const { return *graph.gene_node(l, f); }
};

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

EmbeddingMatrix random_embedding(const HeteroGraph& g, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  EmbeddingMatrix e;
  e.vectors = Matrix(g.n_nodes(), dim);
  for (double& x : e.vectors.data()) x = z(gen);
  return e;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("gene_embedding: mean of gene, species and genus") {
  Small s;
  const auto g1 = s.gene(OmicLevel::MGX, "g1");
  const auto sp = s.graph.parent(g1), ge = s.graph.parent(sp);
  s.emb.vectors(g1, 0) = 1;
  s.emb.vectors(g1, 1) = 0;
  s.emb.vectors(sp, 0) = 0;
  s.emb.vectors(sp, 1) = 1;
  s.emb.vectors(ge, 0) = -1;
  s.emb.vectors(ge, 1) = -1;
  CHECK(gene_embedding(s.graph, s.emb, g1) == std::vector<double>{0.0, 0.0});
  for (std::size_t v = 0; v < s.graph.n_nodes(); ++v) {
    s.emb.vectors(v, 0) = 0.25;
    s.emb.vectors(v, 1) = -3.0;
  }
  CHECK(gene_embedding(s.graph, s.emb, g1) == std::vector<double>{0.25, -3.0});
  CHECK_THROWS_AS(gene_embedding(s.graph, s.emb, sp), Error);
}

TEST_CASE("gene_embedding: brute-force path mean on a random graph") {
  auto g = fixture::random_phylo_graph(45, 11, 4, 3);
  auto e = random_embedding(g, 5, 1);
  for (std::uint32_t v = 0; v < g.n_genes(); ++v) {
    // Walk the explicit path through the adjacency instead of using parent().
    const auto sp = g.topology().neighbors(v)[0];
    std::uint32_t ge = 0;
    for (auto w : g.topology().neighbors(sp)) {
      if (g.kind(w) == NodeKind::Genus) ge = w;
    }
    std::vector<double> ref(5);
    for (std::size_t d = 0; d < 5; ++d) ref[d] = (e.vectors(v, d) + e.vectors(sp, d) + e.vectors(ge, d)) / 3.0;
    check_close(gene_embedding(g, e, v), ref, 1e-15);
  }
}

TEST_CASE("patient_representation: weighting") {
  Small s;
  auto t = parse_abundance_table("sample_id\tg1\tg2\tg3\ns1\t0\t7\t0\ns2\t300\t0\t100\n", OmicLevel::MGX);
  std::vector<const AbundanceTable*> tables{&t};
  AggregationConfig cfg;
  for (auto w : {Weighting::CpmWeighted, Weighting::UniformMean}) {
    cfg.weighting = w;
    auto r = patient_representation(s.graph, s.emb, tables, "s1", cfg);
    CHECK(r.vector == gene_embedding(s.graph, s.emb, s.gene(OmicLevel::MGX, "g2")));
    CHECK(r.genes_used.size() == 1);
  }
  cfg.weighting = Weighting::CpmWeighted;
  auto r = patient_representation(s.graph, s.emb, tables, "s2", cfg);
  auto e1 = gene_embedding(s.graph, s.emb, s.gene(OmicLevel::MGX, "g1"));
  auto e3 = gene_embedding(s.graph, s.emb, s.gene(OmicLevel::MGX, "g3"));
  check_close(r.vector, {0.75 * e1[0] + 0.25 * e3[0], 0.75 * e1[1] + 0.25 * e3[1]});
  cfg.top_k_genes = 1;
  r = patient_representation(s.graph, s.emb, tables, "s2", cfg);
  CHECK(r.vector == e1);
}

TEST_CASE("patient_representation: ties broken by node index") {
  Small s;
  auto t = parse_abundance_table("sample_id\tg3\tg2\tg1\ns1\t5\t5\t5\n", OmicLevel::MGX);
  std::vector<const AbundanceTable*> tables{&t};
  AggregationConfig cfg;
  cfg.top_k_genes = 2;
  auto r = patient_representation(s.graph, s.emb, tables, "s1", cfg);
  CHECK(r.genes_used == std::vector<std::uint32_t>{s.gene(OmicLevel::MGX, "g1"), s.gene(OmicLevel::MGX, "g2")});
}

TEST_CASE("patient_representation: missing omic level contributes nothing") {
  Small s;
  auto mgx = parse_abundance_table("sample_id\tg1\tg2\tg3\ns1\t1\t2\t3\ns2\t1\t0\t0\n", OmicLevel::MGX);
  auto mtx = parse_abundance_table("sample_id\tg1\tg2\tg3\ns2\t9\t0\t0\n", OmicLevel::MTX);
  std::vector<const AbundanceTable*> both{&mgx, &mtx}, only{&mgx};
  AggregationConfig multi, single;
  multi.omic_levels = {OmicLevel::MGX, OmicLevel::MTX};
  CHECK(patient_representation(s.graph, s.emb, both, "s1", multi).vector ==
        patient_representation(s.graph, s.emb, only, "s1", single).vector);
  // s2 pools one gene from each level.
  auto r = patient_representation(s.graph, s.emb, both, "s2", multi);
  CHECK(r.genes_used.size() == 2);
  CHECK_THROWS_AS(patient_representation(s.graph, s.emb, both, "nobody", multi), Error);
}

TEST_CASE("patient_representation: zero profile is flagged") {
  Small s;
  auto t = parse_abundance_table("sample_id\tg1\tg2\tg3\ns1\t0\t0\t0\n", OmicLevel::MGX);
  std::vector<const AbundanceTable*> tables{&t};
  auto r = patient_representation(s.graph, s.emb, tables, "s1", {});
  CHECK(r.zero_profile);
  CHECK(r.vector == std::vector<double>{0.0, 0.0});
}

TEST_CASE("build_design_matrix: order, drop policy and errors") {
  Small s;
  std::string text = "sample_id\tg1\tg2\tg3\n";
  std::string labels = "sample_id\tlabel\n";
  for (int i = 0; i < 10; ++i) {
    text += "s" + std::to_string(i) + "\t" + std::to_string(i + 1) + "\t" + std::to_string(10 - i) + "\t0\n";
    labels += "s" + std::to_string(9 - i) + "\t" + std::to_string(i % 2) + "\n";
  }
  auto t = parse_abundance_table(text, OmicLevel::MGX);
  std::vector<const AbundanceTable*> tables{&t};
  auto l = parse_labels(labels);
  auto d = build_design_matrix(s.graph, s.emb, tables, l, {});
  CHECK(d.X.rows() == 10);
  CHECK(d.X.cols() == 2);
  CHECK(d.sample_ids.front() == "s9");
  CHECK(d.y.front() == 0);

  auto z = parse_abundance_table(text + "sz\t0\t0\t0\n", OmicLevel::MGX);
  std::vector<const AbundanceTable*> zt{&z};
  auto lz = parse_labels(labels + "sz\t1\nghost\t0\n");
  AggregationConfig drop;
  auto dd = build_design_matrix(s.graph, s.emb, zt, lz, drop);
  CHECK(dd.X.rows() == 10);
  CHECK(dd.dropped_zero_profile == std::vector<std::string>{"sz"});
  CHECK(dd.dropped_missing == std::vector<std::string>{"ghost"});
  AggregationConfig keep;
  keep.zero_profile = ZeroProfilePolicy::ZeroVector;
  CHECK(build_design_matrix(s.graph, s.emb, zt, lz, keep).X.rows() == 11);

  auto none = parse_labels("sample_id\tlabel\nghost\t1\n");
  CHECK_THROWS_AS(build_design_matrix(s.graph, s.emb, tables, none, {}), Error);

  AggregationConfig huge;
  huge.top_k_genes = 3568;
  CHECK_NOTHROW(huge.validate());
  AggregationConfig zero;
  zero.top_k_genes = 0;
  CHECK_THROWS_AS(zero.validate(), ConfigError);
}

namespace {

struct RandomCase {
  TaxonomyMap tax;
  HeteroGraph graph;
  EmbeddingMatrix emb;
  std::vector<std::string> features;
  std::vector<double> row;
};

RandomCase random_case(std::uint64_t seed) {
  RandomCase c;
  c.tax = fixture::random_taxonomy(80, 12, 3, seed);
  std::vector<LevelTaxonomy> levels{{&c.tax, OmicLevel::MGX}};
  c.graph = build_graph(levels);
  c.emb = random_embedding(c.graph, 4, seed + 1);
  std::mt19937_64 gen(seed + 2);
  for (const auto& r : c.tax.records()) {
    c.features.push_back(r.feature_id);
    // Coarse values so that ties occur.
    c.row.push_back(gen() % 3 == 0 ? 0.0 : static_cast<double>(1 + gen() % 6));
  }
  return c;
}

PatientRepresentation rep_of(const RandomCase& c, const std::vector<std::string>& features,
                             const std::vector<double>& row, const AggregationConfig& cfg) {
  AbundanceTable t(OmicLevel::MGX, {"s"}, features, {row});
  std::vector<const AbundanceTable*> tables{&t};
  return patient_representation(c.graph, c.emb, tables, "s", cfg);
}

}  // namespace

TEST_CASE("property: column order does not matter") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = random_case(seed);
    std::vector<std::size_t> perm(c.features.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(seed));
    std::vector<std::string> f2;
    std::vector<double> r2;
    for (auto i : perm) {
      f2.push_back(c.features[i]);
      r2.push_back(c.row[i]);
    }
    AggregationConfig cfg;
    cfg.top_k_genes = 5 + seed % 20;
    auto a = rep_of(c, c.features, c.row, cfg);
    auto b = rep_of(c, f2, r2, cfg);
    CHECK(a.genes_used == b.genes_used);
    check_close(a.vector, b.vector, 1e-12);
  }
}

TEST_CASE("property: scaling a profile changes nothing") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = random_case(seed);
    AggregationConfig cfg;
    cfg.top_k_genes = 10;
    auto scaled = c.row;
    for (auto& x : scaled) x *= 3.7;
    auto a = rep_of(c, c.features, c.row, cfg);
    auto b = rep_of(c, c.features, scaled, cfg);
    CHECK(a.genes_used == b.genes_used);
    check_close(a.vector, b.vector, 1e-12);
  }
}

TEST_CASE("property: coverage saturates at the expressed gene count") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c = random_case(seed);
    std::size_t expressed = 0;
    double total = 0.0;
    std::vector<double> full(4, 0.0);
    for (std::size_t f = 0; f < c.row.size(); ++f) {
      if (c.row[f] <= 0) continue;
      ++expressed;
      total += c.row[f];
      auto ge = gene_embedding(c.graph, c.emb, *c.graph.gene_node(OmicLevel::MGX, c.features[f]));
      for (std::size_t d = 0; d < 4; ++d) full[d] += c.row[f] * ge[d];
    }
    for (auto& x : full) x /= total;
    AggregationConfig cfg;
    cfg.top_k_genes = expressed;
    auto at = rep_of(c, c.features, c.row, cfg);
    check_close(at.vector, full, 1e-12);
    for (std::size_t k : {expressed + 1, expressed * 2, std::size_t{10000}}) {
      cfg.top_k_genes = k;
      CHECK(rep_of(c, c.features, c.row, cfg).vector == at.vector);
    }
  }
}

TEST_CASE("property: identical gene embeddings give that vector") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = random_case(seed);
    for (std::size_t v = 0; v < c.graph.n_nodes(); ++v) {
      for (std::size_t d = 0; d < 4; ++d) c.emb.vectors(v, d) = 0.5 * static_cast<double>(d) - 0.3;
    }
    const std::vector<double> e{-0.3, 0.2, 0.7, 1.2};
    for (auto w : {Weighting::CpmWeighted, Weighting::UniformMean}) {
      for (std::size_t k : {1, 7, 1000}) {
        AggregationConfig cfg;
        cfg.weighting = w;
        cfg.top_k_genes = k;
        check_close(rep_of(c, c.features, c.row, cfg).vector, e, 1e-14);
      }
    }
  }
}
