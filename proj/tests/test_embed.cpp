#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "phylembed/embed.hpp"
#include "phylembed/error.hpp"
#include "support.hpp"

using namespace phylembed;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

double residual(const Graph& g, const EmbeddingMatrix& e, std::size_t col, double lambda) {
  auto l = laplacian(g);
  std::vector<double> v(e.n_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = e.vectors(i, col);
  auto lv = l.multiply(v);
  double r = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) r += (lv[i] - lambda * v[i]) * (lv[i] - lambda * v[i]);
  return std::sqrt(r);
}

/// Checks LPE columns against the Jacobi oracle: simple eigenvalues entrywise after the
/// sign rule, clusters by projecting each column onto the oracle eigenspace.
void check_against_oracle(const Graph& g, const EmbeddingMatrix& e, double tol) {
  const auto eig = oracle::jacobi(oracle::sym_laplacian(g));
  const std::size_t n = g.n_nodes();
  std::vector<std::size_t> nontrivial;
  for (std::size_t j = 0; j < n; ++j) {
    if (eig.values[j] > 1e-8) nontrivial.push_back(j);
  }
  for (std::size_t c = 0; c < e.dim(); ++c) {
    const double lambda = eig.values[nontrivial[c]];
    CHECK(e.info.eigenvalues[c] == doctest::Approx(lambda).epsilon(1e-9));
    std::vector<std::size_t> cluster;
    for (auto j : nontrivial) {
      if (std::abs(eig.values[j] - lambda) < 1e-8) cluster.push_back(j);
    }
    if (cluster.size() == 1) {
      std::vector<double> ref(n);
      for (std::size_t i = 0; i < n; ++i) ref[i] = eig.vectors[i][cluster[0]];
      // first entry whose magnitude ties the maximum decides the sign
      double top = 0.0;
      for (double x : ref) top = std::max(top, std::abs(x));
      std::size_t big = 0;
      while (std::abs(ref[big]) < top * (1.0 - 1e-9)) ++big;
      const double s = ref[big] < 0 ? -1.0 : 1.0;
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(e.vectors(i, c) - s * ref[i]));
      CHECK(worst < tol);
    } else {
      // ||P v|| = 1 for the oracle projector P of this eigenspace.
      double norm2 = 0.0;
      for (auto j : cluster) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += eig.vectors[i][j] * e.vectors(i, c);
        norm2 += dot * dot;
      }
      CHECK(std::abs(norm2 - 1.0) < tol);
    }
  }
}

void check_lpe_invariants(const Graph& g, const EmbeddingMatrix& e) {
  REQUIRE(e.info.eigenvalues.size() == e.dim());
  for (std::size_t c = 0; c < e.dim(); ++c) {
    CHECK(residual(g, e, c, e.info.eigenvalues[c]) < 1e-6);
    if (c > 0) CHECK(e.info.eigenvalues[c] >= e.info.eigenvalues[c - 1]);
    for (std::size_t d = 0; d < c; ++d) {
      double dot = 0.0;
      for (std::size_t i = 0; i < e.n_nodes(); ++i) dot += e.vectors(i, c) * e.vectors(i, d);
      CHECK(std::abs(dot) < 1e-8);
    }
  }
  if (e.dim() > 0) CHECK(e.info.eigenvalues[0] > 1e-8);
}

}  // namespace

TEST_CASE("lpe: k = 0 gives an empty embedding") {
  auto g = fixture::random_phylo_graph(10, 3, 2, 1);
  auto e = compute_lpe(g.topology(), 0);
  CHECK(e.dim() == 0);
  CHECK(e.n_nodes() == g.n_nodes());
}

TEST_CASE("lpe: K3 eigenspace treats every vertex alike") {
  auto k3 = fixture::make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  auto e = compute_lpe(k3, 2);
  CHECK(e.info.eigenvalues[0] == doctest::Approx(1.5));
  CHECK(e.info.eigen_cluster[0] == e.info.eigen_cluster[1]);
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t d = 0; d < 2; ++d) s += std::pow(e.vectors(a, d) - e.vectors(b, d), 2);
    return std::sqrt(s);
  };
  CHECK(std::abs(dist(0, 1) - dist(1, 2)) < 1e-9);
  CHECK(std::abs(dist(0, 1) - dist(0, 2)) < 1e-9);
  auto one = compute_lpe(k3, 1);
  CHECK(one.info.truncated_cluster);
}

TEST_CASE("lpe: 60-node phylo graph matches the dense oracle") {
  auto g = fixture::random_phylo_graph(45, 11, 4, 8);
  REQUIRE(g.n_nodes() == 60);
  auto e = compute_lpe(g.topology(), 8);
  CHECK(e.info.solver == "dense");
  check_against_oracle(g.topology(), e, 1e-6);
  check_lpe_invariants(g.topology(), e);
}

TEST_CASE("lpe: Lanczos path matches the dense oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto g = fixture::random_phylo_graph(40 + 10 * seed, 10 + seed, 1 + seed % 3, 100 + seed);
    LpeOptions o;
    o.dense_threshold = 0;
    o.seed = seed;
    auto e = compute_lpe(g.topology(), 6, o);
    CHECK(e.info.solver == "lanczos");
    check_against_oracle(g.topology(), e, 1e-6);
    check_lpe_invariants(g.topology(), e);
  }
}

TEST_CASE("lpe: sign rule and column norms") {
  auto g = fixture::random_phylo_graph(30, 6, 2, 3);
  auto e = compute_lpe(g.topology(), 5);
  for (std::size_t c = 0; c < e.dim(); ++c) {
    double norm = 0.0, top = 0.0;
    for (std::size_t i = 0; i < e.n_nodes(); ++i) {
      norm += e.vectors(i, c) * e.vectors(i, c);
      top = std::max(top, std::abs(e.vectors(i, c)));
    }
    std::size_t big = 0;
    while (std::abs(e.vectors(big, c)) < top * (1.0 - 1e-9)) ++big;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.vectors(big, c) > 0.0);
  }
  std::vector<double> v{0.1, -0.9, 0.9};
  fix_sign(v);
  CHECK(v == std::vector<double>{-0.1, 0.9, -0.9});
  // magnitudes equal up to rounding count as a tie
  std::vector<double> w{0.5, -0.5 - 1e-15};
  fix_sign(w);
  CHECK(w[0] == 0.5);
}

TEST_CASE("lpe: k beyond the non-trivial spectrum is an error") {
  auto g = fixture::random_phylo_graph(10, 3, 2, 1);  // 15 nodes, 2 components
  CHECK_NOTHROW(compute_lpe(g.topology(), 13));
  CHECK_THROWS_AS(compute_lpe(g.topology(), 14), ConfigError);
}

TEST_CASE("lpe: Lanczos iteration budget is enforced") {
  auto g = fixture::random_phylo_graph(80, 20, 3, 5);
  LpeOptions o;
  o.dense_threshold = 0;
  o.max_iterations = 3;
  try {
    compute_lpe(g.topology(), 6, o);
    FAIL("expected non-convergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("rwpe: small cases") {
  auto edge = fixture::make_graph(2, {{0, 1}});
  auto e = compute_rwpe(edge, 4);
  for (std::size_t v = 0; v < 2; ++v) {
    CHECK(std::vector<double>(e.row(v).begin(), e.row(v).end()) == std::vector<double>{0, 1, 0, 1});
  }
  auto tri = compute_rwpe(fixture::make_graph(3, {{0, 1}, {1, 2}, {0, 2}}), 3);
  for (std::size_t v = 0; v < 3; ++v) {
    CHECK(std::abs(tri.vectors(v, 0) - 0.0) < 1e-12);
    CHECK(std::abs(tri.vectors(v, 1) - 0.5) < 1e-12);
    CHECK(std::abs(tri.vectors(v, 2) - 0.25) < 1e-12);
  }
}

TEST_CASE("rwpe: matches dense matrix powers") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto g = fixture::random_phylo_graph(60 + 15 * seed, 15 + seed, 2 + seed % 3, seed);
    auto e = compute_rwpe(g.topology(), 8, 1 + seed % 3);
    auto ref = oracle::rw_diagonals(g.topology(), 8);
    double worst = 0.0;
    for (std::size_t v = 0; v < g.n_nodes(); ++v) {
      for (std::size_t l = 0; l < 8; ++l) {
        worst = std::max(worst, std::abs(e.vectors(v, l) - ref[v][l]));
        CHECK(e.vectors(v, l) >= 0.0);
        CHECK(e.vectors(v, l) <= 1.0);
      }
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("walk: single edge alternates") {
  auto g = fixture::make_graph(2, {{0, 1}});
  N2VConfig cfg;
  cfg.walk_length = 9;
  Rng rng(1);
  auto w = biased_random_walk(g, 0, cfg, rng);
  REQUIRE(w.size() == 9);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == i % 2);
}

TEST_CASE("walk: return bias on a path") {
  // a=0, b=1, c=2
  auto g = fixture::make_graph(3, {{0, 1}, {1, 2}});
  BiasedWalker walker(g, 0.25, 4.0);
  auto w = walker.transition_weights(0, 1);
  const auto nb = g.neighbors(1);
  double to_a = 0.0, total = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    total += w[i];
    if (nb[i] == 0) to_a = w[i];
  }
  CHECK(to_a / total == doctest::Approx(16.0 / 17.0).epsilon(1e-14));

  // Empirically, from (a, b) the walk returns to a about 16/17 of the time.
  Rng rng(2);
  std::size_t back = 0;
  const std::size_t trials = 20000;
  for (std::size_t t = 0; t < trials; ++t) {
    auto walk = walker.walk(0, 3, rng);
    back += walk[2] == 0;
  }
  const double p = 16.0 / 17.0;
  const double sigma = std::sqrt(trials * p * (1 - p));
  CHECK(std::abs(static_cast<double>(back) - trials * p) < 4 * sigma);
}

TEST_CASE("walk: p = q = 1 is a uniform first-order walk") {
  auto g = fixture::random_phylo_graph(40, 6, 2, 21);
  N2VConfig cfg;
  cfg.walk_length = 10001;
  Rng rng(3);
  std::map<std::uint32_t, std::map<std::uint32_t, std::size_t>> counts;
  for (std::uint32_t start = 0; start < 3; ++start) {
    auto w = biased_random_walk(g.topology(), start, cfg, rng);
    CHECK(w.size() == 10001);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      CHECK(g.topology().has_edge(w[i], w[i + 1]));
      ++counts[w[i]][w[i + 1]];
    }
  }
  // Chi-square per frequently visited node, critical value at p = 0.001.
  std::size_t tested = 0;
  for (const auto& [v, next] : counts) {
    const auto deg = g.topology().degree(v);
    std::size_t n = 0;
    for (const auto& kv : next) n += kv.second;
    if (deg < 2 || n < 50 * deg) continue;
    double chi2 = 0.0;
    const double expect = static_cast<double>(n) / static_cast<double>(deg);
    for (auto w : g.topology().neighbors(v)) {
      const double c = next.count(w) ? static_cast<double>(next.at(w)) : 0.0;
      chi2 += (c - expect) * (c - expect) / expect;
    }
    const double df = static_cast<double>(deg - 1);
    // Wilson-Hilferty approximation of the 0.999 quantile.
    const double z = 3.09, h = 2.0 / (9.0 * df);
    const double crit = df * std::pow(1.0 - h + z * std::sqrt(h), 3);
    CHECK(chi2 < crit);
    ++tested;
  }
  CHECK(tested > 0);
}

TEST_CASE("alias table frequencies") {
  std::vector<double> w{1.0, 2.0, 3.0, 4.0};
  AliasTable t(w);
  Rng rng(9);
  std::vector<std::size_t> c(4, 0);
  for (int i = 0; i < 100000; ++i) ++c[t.sample(rng)];
  for (std::size_t i = 0; i < 4; ++i) CHECK(c[i] / 100000.0 == doctest::Approx(w[i] / 10.0).epsilon(0.03));
}

TEST_CASE("n2v: deterministic mode is bit-reproducible") {
  auto g = fixture::barbell();
  N2VConfig cfg;
  cfg.seed = 3;
  cfg.dim = 8;
  cfg.epochs = 2;
  auto a = train_node2vec(g, cfg);
  auto b = train_node2vec(g, cfg);
  CHECK(a.vectors == b.vectors);
  CHECK(a.info.epoch_losses == b.info.epoch_losses);
  cfg.seed = 4;
  CHECK_FALSE(train_node2vec(g, cfg).vectors == a.vectors);
}

TEST_CASE("n2v: epochs = 0 returns the initialisation") {
  auto g = fixture::barbell();
  N2VConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 0;
  auto e = train_node2vec(g, cfg);
  CHECK(e.dim() == 16);
  bool varied = false;
  for (double x : e.vectors.data()) {
    CHECK(x >= -0.5 / 16);
    CHECK(x <= 0.5 / 16);
    varied = varied || x != e.vectors.data()[0];
  }
  CHECK(varied);
}

TEST_CASE("n2v: barbell communities separate and loss decreases") {
  auto g = fixture::barbell();
  N2VConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 5;
  cfg.seed = 1;
  auto e = train_node2vec(g, cfg);
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (std::uint32_t a = 0; a < 13; ++a) {
    for (std::uint32_t b = a + 1; b < 13; ++b) {
      const bool ca = a < 5, cb = b < 5, da = a > 7, db = b > 7;
      if (!(ca || da) || !(cb || db)) continue;
      const double c = cosine(e.row(a), e.row(b));
      if (ca == cb) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++nx;
      }
    }
  }
  CHECK(intra / ni > inter / nx);
  REQUIRE(e.info.epoch_losses.size() == 5);
  CHECK(e.info.epoch_losses.back() < e.info.epoch_losses.front());
}

TEST_CASE("n2v: parallel mode produces a finite embedding") {
  auto g = fixture::random_phylo_graph(200, 30, 4, 2);
  N2VConfig cfg;
  cfg.dim = 8;
  cfg.deterministic = false;
  cfg.workers = 4;
  auto e = train_node2vec(g.topology(), cfg);
  CHECK(e.n_nodes() == g.n_nodes());
  for (double x : e.vectors.data()) CHECK(std::isfinite(x));
}

TEST_CASE("n2v: config validation") {
  N2VConfig cfg;
  cfg.window = cfg.walk_length;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.return_param_p = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.walk_length = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("backends share node order and export round-trips") {
  auto g = fixture::random_phylo_graph(50, 10, 3, 6);
  N2VConfig cfg;
  cfg.dim = 4;
  std::vector<EmbeddingMatrix> all{compute_lpe(g.topology(), 4), compute_rwpe(g.topology(), 4),
                                   train_node2vec(g.topology(), cfg)};
  for (const auto& e : all) {
    CHECK(e.n_nodes() == g.n_nodes());
    std::ostringstream os;
    write_embedding(os, g, e);
    std::istringstream is(os.str());
    auto back = read_embedding(is, g, e.method);
    CHECK(back.vectors == e.vectors);
    CHECK(os.str().rfind("node_name\tv1\tv2\tv3\tv4\n", 0) == 0);
  }
}
