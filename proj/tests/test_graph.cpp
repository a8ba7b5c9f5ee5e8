#include <doctest.h>

#include <random>
#include <sstream>

#include "phylembed/eigensolver.hpp"
#include "phylembed/error.hpp"
#include "phylembed/graph.hpp"
#include "support.hpp"

using namespace phylembed;

namespace {

HeteroGraph graph_of(const TaxonomyMap& m, OmicLevel level = OmicLevel::MGX) {
  std::vector<LevelTaxonomy> levels{{&m, level}};
  return build_graph(levels);
}

}  // namespace

TEST_CASE("build_graph: two genes under one species") {
  auto m = parse_taxonomy_map("feature_id\tspecies\tgenus\ng1\tspA\tgenX\ng2\tspA\tgenX\n");
  auto g = graph_of(m);
  CHECK(g.n_nodes() == 4);
  CHECK(g.n_edges() == 3);
  CHECK(g.n_genes() == 2);
  CHECK(g.name(0) == "MGX:g1");
  CHECK(g.name(1) == "MGX:g2");
  CHECK(g.kind(2) == NodeKind::Species);
  CHECK(g.kind(3) == NodeKind::Genus);
  CHECK(g.topology().has_edge(0, 2));
  CHECK(g.topology().has_edge(1, 2));
  CHECK(g.topology().has_edge(2, 3));
  CHECK(g.edges()[2].kind == EdgeKind::SpeciesGenus);
}

TEST_CASE("build_graph: omic levels get distinct gene nodes sharing taxa") {
  auto m = parse_taxonomy_map("feature_id\tspecies\tgenus\ng1\tspA\tgenX\n");
  std::vector<LevelTaxonomy> levels{{&m, OmicLevel::MGX}, {&m, OmicLevel::MTX}};
  auto g = build_graph(levels);
  auto a = g.find(NodeKind::Gene, "MGX:g1");
  auto b = g.find(NodeKind::Gene, "MTX:g1");
  auto sp = g.find(NodeKind::Species, "spA");
  REQUIRE(a);
  REQUIRE(b);
  REQUIRE(sp);
  CHECK(*a != *b);
  CHECK(g.topology().has_edge(*a, *sp));
  CHECK(g.topology().has_edge(*b, *sp));
  CHECK(g.omic_of_gene(*b) == OmicLevel::MTX);
  CHECK(g.n_nodes() == 4);
  CHECK_THROWS_AS(build_graph(std::vector<LevelTaxonomy>{}), ConfigError);
}

TEST_CASE("build_graph: node and edge counts") {
  auto g = fixture::random_phylo_graph(50, 10, 3, 1);
  CHECK(g.n_nodes() == 63);
  CHECK(g.n_edges() == 60);
}

TEST_CASE("build_graph: degree census and edge kinds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = fixture::random_phylo_graph(40 + seed * 7, 9 + seed, 2 + seed % 4, seed);
    const auto& t = g.topology();
    std::vector<std::size_t> genes_of(g.n_nodes(), 0), species_of(g.n_nodes(), 0);
    for (std::size_t v = 0; v < g.n_nodes(); ++v) {
      if (g.kind(v) == NodeKind::Gene) ++genes_of[g.parent(v)];
      if (g.kind(v) == NodeKind::Species) ++species_of[g.parent(v)];
    }
    for (std::size_t v = 0; v < g.n_nodes(); ++v) {
      switch (g.kind(v)) {
        case NodeKind::Gene: CHECK(t.degree(v) == 1); break;
        case NodeKind::Species: CHECK(t.degree(v) == genes_of[v] + 1); break;
        case NodeKind::Genus: CHECK(t.degree(v) == species_of[v]); break;
      }
      for (auto w : t.neighbors(v)) {
        CHECK(t.has_edge(w, v));
        const auto a = g.kind(v), b = g.kind(w);
        const bool ok = (a == NodeKind::Gene && b == NodeKind::Species) ||
                        (a == NodeKind::Species && (b == NodeKind::Gene || b == NodeKind::Genus)) ||
                        (a == NodeKind::Genus && b == NodeKind::Species);
        CHECK(ok);
      }
    }
    CHECK(t.isolated_nodes().empty());
  }
}

TEST_CASE("graph export round-trips with identical order and hash") {
  auto g = fixture::random_phylo_graph(30, 8, 3, 9);
  std::ostringstream nodes, edges;
  write_node_table(nodes, g);
  write_edge_list(edges, g);
  CHECK(nodes.str().rfind("name\tkind\tindex\n", 0) == 0);
  CHECK(edges.str().rfind("src_name\tdst_name\tedge_kind\n", 0) == 0);
  std::istringstream ni(nodes.str()), ei(edges.str());
  auto back = read_graph(ni, ei);
  CHECK(back.n_nodes() == g.n_nodes());
  for (std::size_t v = 0; v < g.n_nodes(); ++v) CHECK(back.name(v) == g.name(v));
  CHECK(graph_hash(back) == graph_hash(g));
}

TEST_CASE("patient_node_subset") {
  auto m = parse_taxonomy_map("feature_id\tspecies\tgenus\ng1\ta\tx\ng2\ta\tx\ng3\tb\tx\ng4\tb\tx\n");
  auto g = graph_of(m);
  auto t = parse_abundance_table("sample_id\tg1\tg2\tg3\tg4\ns1\t0\t5.2\t0\t1.1\ns2\t0\t0\t0\t0\n", OmicLevel::MGX);
  auto s1 = patient_node_subset(g, t, "s1");
  CHECK(s1.members == std::vector<std::uint32_t>{*g.gene_node(OmicLevel::MGX, "g2"), *g.gene_node(OmicLevel::MGX, "g4")});
  CHECK(patient_node_subset(g, t, "s2").empty());
  CHECK_THROWS_AS(patient_node_subset(g, t, "nope"), Error);
  auto bad = parse_abundance_table("sample_id\tg1\tg9\ns1\t1\t1\n", OmicLevel::MGX);
  CHECK_THROWS_AS(patient_node_subset(g, bad, "s1"), Error);
}

TEST_CASE("patient_node_subset: counts nonzeros and stays within its level") {
  const auto tax = fixture::random_taxonomy(1000, 50, 5, 2);
  std::vector<LevelTaxonomy> levels{{&tax, OmicLevel::MGX}, {&tax, OmicLevel::MTX}};
  const auto g = build_graph(levels);
  std::mt19937_64 gen(3);
  std::vector<std::string> features;
  for (const auto& r : tax.records()) features.push_back(r.feature_id);
  std::vector<double> row(1000, 0.0);
  std::size_t nonzero = 0;
  for (auto& x : row) {
    if (gen() % 10 == 0) {
      x = 1.0 + static_cast<double>(gen() % 100);
      ++nonzero;
    }
  }
  AbundanceTable t(OmicLevel::MTX, {"s"}, features, {row});
  auto sub = patient_node_subset(g, t, "s");
  CHECK(sub.size() == nonzero);
  for (auto v : sub.members) {
    CHECK(g.kind(v) == NodeKind::Gene);
    CHECK(g.omic_of_gene(v) == OmicLevel::MTX);
  }
}

TEST_CASE("laplacian: star") {
  // center 0, leaves 1 and 2
  auto star = fixture::make_graph(3, {{0, 1}, {0, 2}});
  auto l = laplacian(star, LaplacianKind::Unnormalized);
  CHECK(l.at(0, 0) == 2.0);
  CHECK(l.at(1, 1) == 1.0);
  CHECK(l.at(2, 2) == 1.0);
  CHECK(l.at(0, 1) == -1.0);
  CHECK(l.at(2, 0) == -1.0);
  CHECK(l.at(1, 2) == 0.0);
}

TEST_CASE("laplacian: unnormalized rows sum to zero and the form is PSD") {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> z;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto g = fixture::random_phylo_graph(60, 12, 4, seed);
    auto l = laplacian(g.topology(), LaplacianKind::Unnormalized);
    for (std::size_t r = 0; r < l.n_rows(); ++r) CHECK(l.row_sum(r) == 0.0);
    for (int k = 0; k < 10; ++k) {
      std::vector<double> x(l.n_rows());
      for (auto& v : x) v = z(gen);
      auto lx = l.multiply(x);
      double q = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) q += x[i] * lx[i];
      CHECK(q >= -1e-10);
    }
  }
}

TEST_CASE("laplacian: symmetric spectrum in [0,2]") {
  auto g = fixture::random_phylo_graph(35, 10, 5, 4);
  REQUIRE(g.n_nodes() == 50);
  auto eig = oracle::jacobi(oracle::sym_laplacian(g.topology()));
  for (double v : eig.values) {
    CHECK(v >= -1e-10);
    CHECK(v <= 2.0 + 1e-10);
  }
  // Library operator agrees with the oracle matrix.
  auto l = laplacian(g.topology());
  auto dense = oracle::sym_laplacian(g.topology());
  for (std::size_t i = 0; i < g.n_nodes(); ++i) {
    for (std::size_t j = 0; j < g.n_nodes(); ++j) CHECK(l.at(i, j) == doctest::Approx(dense[i][j]).epsilon(1e-14));
  }
}

TEST_CASE("laplacian: zero eigenvalues count connected components") {
  for (std::size_t genera = 1; genera <= 4; ++genera) {
    auto g = fixture::random_phylo_graph(30, 8, genera, genera);
    std::size_t comps = 0;
    g.topology().components(&comps);
    CHECK(comps == genera);
    auto eig = oracle::jacobi(oracle::sym_laplacian(g.topology()));
    std::size_t zeros = 0;
    for (double v : eig.values) zeros += std::abs(v) < 1e-8;
    CHECK(zeros == genera);
    auto lib = dense_symmetric_eigen(laplacian(g.topology(), LaplacianKind::Unnormalized));
    zeros = 0;
    for (double v : lib.values) zeros += std::abs(v) < 1e-8;
    CHECK(zeros == genera);
  }
}

TEST_CASE("laplacian: isolated node convention") {
  auto g = fixture::make_graph(3, {{0, 1}});
  auto l = laplacian(g);
  CHECK(l.at(2, 2) == 0.0);
  CHECK(g.isolated_nodes() == std::vector<std::uint32_t>{2});
  auto rw = random_walk_matrix(g);
  CHECK(rw.row_sum(2) == 0.0);
}

TEST_CASE("random_walk_matrix") {
  auto edge = fixture::make_graph(2, {{0, 1}});
  auto rw = random_walk_matrix(edge);
  CHECK(rw.at(0, 0) == 0.0);
  CHECK(rw.at(0, 1) == 1.0);
  CHECK(rw.at(1, 0) == 1.0);
  CHECK(rw.at(1, 1) == 0.0);

  auto star = fixture::make_graph(4, {{0, 1}, {0, 2}, {0, 3}});
  auto s = random_walk_matrix(star);
  for (std::uint32_t leaf = 1; leaf <= 3; ++leaf) CHECK(s.at(0, leaf) == 1.0 / 3.0);

  std::mt19937_64 gen(5);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
  for (std::uint32_t i = 1; i < 100; ++i) e.emplace_back(static_cast<std::uint32_t>(gen() % i), i);
  for (int k = 0; k < 150; ++k) {
    std::uint32_t a = gen() % 100, b = gen() % 100;
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (std::find(e.begin(), e.end(), std::make_pair(a, b)) == e.end() &&
        std::find(e.begin(), e.end(), std::make_pair(b, a)) == e.end()) {
      e.emplace_back(a, b);
    }
  }
  auto big = random_walk_matrix(fixture::make_graph(100, e));
  double worst = 0.0;
  for (std::size_t r = 0; r < 100; ++r) worst = std::max(worst, std::abs(big.row_sum(r) - 1.0));
  CHECK(worst < 1e-12);
}

TEST_CASE("graph construction rejects malformed input") {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> loop{{0, 0}};
  CHECK_THROWS_AS(Graph(2, loop), Error);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dup{{0, 1}, {1, 0}};
  CHECK_THROWS_AS(Graph(2, dup), Error);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out_of_range{{0, 5}};
  CHECK_THROWS_AS(Graph(2, out_of_range), Error);
}
