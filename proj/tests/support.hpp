#pragma once

// Independent reference implementations used as test oracles, plus small
// fixture builders. Nothing here calls into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "phylembed/graph.hpp"
#include "phylembed/ingest.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t n, std::size_t m) { return Dense(n, std::vector<double>(m, 0.0)); }

inline Dense adjacency(const phylembed::Graph& g) {
  Dense a = zeros(g.n_nodes(), g.n_nodes());
  for (std::size_t u = 0; u < g.n_nodes(); ++u) {
    for (auto v : g.neighbors(u)) a[u][v] = 1.0;
  }
  return a;
}

/// I - D^-1/2 A D^-1/2 built directly from the adjacency.
inline Dense sym_laplacian(const phylembed::Graph& g) {
  const auto a = adjacency(g);
  const std::size_t n = a.size();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double x : a[i]) deg[i] += x;
  }
  Dense l = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i][i] = deg[i] > 0 ? 1.0 : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (a[i][j] != 0.0) l[i][j] -= a[i][j] / std::sqrt(deg[i] * deg[j]);
    }
  }
  return l;
}

struct Eig {
  std::vector<double> values;  // ascending
  Dense vectors;               // vectors[i][j] = entry i of eigenvector j
};

/// Cyclic Jacobi rotations; slow but simple and accurate for n <= a few hundred.
inline Eig jacobi(Dense a) {
  const std::size_t n = a.size();
  Dense v = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x][x] < a[y][y]; });
  Eig out;
  out.vectors = zeros(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values.push_back(a[order[j]][order[j]]);
    for (std::size_t i = 0; i < n; ++i) out.vectors[i][j] = v[i][order[j]];
  }
  return out;
}

inline Dense multiply(const Dense& a, const Dense& b) {
  const std::size_t n = a.size(), m = b[0].size(), k = b.size();
  Dense c = zeros(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      if (a[i][t] == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][t] * b[t][j];
    }
  }
  return c;
}

/// Row i = diag of (D^-1 A)^1..k, by explicit dense powers.
inline Dense rw_diagonals(const phylembed::Graph& g, std::size_t k) {
  auto a = adjacency(g);
  const std::size_t n = a.size();
  for (auto& row : a) {
    double s = 0.0;
    for (double x : row) s += x;
    if (s > 0) {
      for (double& x : row) x /= s;
    }
  }
  Dense out = zeros(n, k);
  Dense power = a;
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t i = 0; i < n; ++i) out[i][l] = power[i][i];
    if (l + 1 < k) power = multiply(power, a);
  }
  return out;
}

/// Pairwise Mann-Whitney count.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double dual_objective(const Dense& k, const std::vector<int>& y, const std::vector<double>& alpha) {
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    lin += alpha[i];
    for (std::size_t j = 0; j < alpha.size(); ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
  }
  return lin - 0.5 * quad;
}

/// Euclidean projection onto {0 <= a_i <= box_i, sum a_i y_i = 0}: a_i = clip(z_i - mu y_i),
/// with mu found by bisection (the constraint sum is monotone in mu).
inline std::vector<double> project(const std::vector<double>& z, const std::vector<int>& y,
                                   const std::vector<double>& box) {
  auto at = [&](double mu) {
    std::vector<double> a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::clamp(z[i] - mu * y[i], 0.0, box[i]);
    return a;
  };
  auto g = [&](double mu) {
    double s = 0.0;
    auto a = at(mu);
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * y[i];
    return s;
  };
  double lo = -1e6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0) lo = mid;
    else hi = mid;
  }
  return at(0.5 * (lo + hi));
}

/// Accelerated projected gradient ascent on the SVM dual.
inline double pg_dual_optimum(const Dense& k, const std::vector<int>& y, const std::vector<double>& box,
                              int iterations = 20000) {
  const std::size_t n = y.size();
  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) lip += k[i][j] * k[i][j];
  }
  lip = std::sqrt(lip);
  const double step = 1.0 / std::max(lip, 1e-12);
  std::vector<double> x(n, 0.0), prev = x, w = x;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> grad(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) grad[i] -= y[i] * y[j] * k[i][j] * w[j];
    }
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = w[i] + step * grad[i];
    prev = x;
    x = project(z, y, box);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) w[i] = x[i] + (t - 1.0) / t_next * (x[i] - prev[i]);
    t = t_next;
  }
  return dual_objective(k, y, x);
}

}  // namespace oracle

namespace fixture {

/// Random consistent taxonomy: genes over species over genera, every group non-empty.
inline phylembed::TaxonomyMap random_taxonomy(std::size_t genes, std::size_t species, std::size_t genera,
                                              std::uint64_t seed, const std::string& prefix = "g") {
  std::mt19937_64 gen(seed);
  auto assign = [&](std::size_t items, std::size_t groups) {
    std::vector<std::size_t> of(items);
    for (std::size_t i = 0; i < items; ++i) of[i] = i < groups ? i : gen() % groups;
    std::shuffle(of.begin(), of.end(), gen);
    return of;
  };
  const auto species_of = assign(genes, species);
  const auto genus_of = assign(species, genera);
  std::vector<phylembed::TaxonRecord> recs;
  for (std::size_t g = 0; g < genes; ++g) {
    const auto s = species_of[g];
    recs.push_back({prefix + std::to_string(g), "sp" + std::to_string(s), "gen" + std::to_string(genus_of[s])});
  }
  return phylembed::TaxonomyMap(std::move(recs));
}

inline phylembed::HeteroGraph random_phylo_graph(std::size_t genes, std::size_t species, std::size_t genera,
                                                 std::uint64_t seed) {
  const auto tax = random_taxonomy(genes, species, genera, seed);
  std::vector<phylembed::LevelTaxonomy> levels{{&tax, phylembed::OmicLevel::MGX}};
  return phylembed::build_graph(levels);
}

inline phylembed::Graph make_graph(std::size_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges) {
  return phylembed::Graph(n, edges);
}

/// Two K5 cliques (0-4, 8-12) joined through the path 4-5-6-7-8.
inline phylembed::Graph barbell() {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
  for (std::uint32_t base : {0u, 8u}) {
    for (std::uint32_t i = 0; i < 5; ++i) {
      for (std::uint32_t j = i + 1; j < 5; ++j) e.emplace_back(base + i, base + j);
    }
  }
  e.emplace_back(4, 5);
  e.emplace_back(5, 6);
  e.emplace_back(6, 7);
  e.emplace_back(7, 8);
  return phylembed::Graph(13, e);
}

}  // namespace fixture
