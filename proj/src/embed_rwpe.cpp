#include <algorithm>

#include "phylembed/embed.hpp"
#include "phylembed/error.hpp"
#include "phylembed/parallel.hpp"

namespace phylembed {

namespace {

constexpr std::size_t kBatch = 32;

struct Job {
  std::uint32_t component;
  std::size_t first;  // offset into the component's member list
};

}  // namespace

EmbeddingMatrix compute_rwpe(const Graph& graph, std::size_t k, std::size_t workers) {
  if (k == 0) throw ConfigError("compute_rwpe: k must be at least 1");
  const std::size_t n = graph.n_nodes();
  EmbeddingMatrix out;
  out.method = EmbedMethod::RWPE;
  out.vectors = Matrix(n, k, 0.0);
  out.info.isolated_nodes = graph.isolated_nodes();

  // A walk never leaves its component, so each start node only needs the
  // power iteration restricted to the rows of its own component.
  std::size_t n_comp = 0;
  auto comp = graph.components(&n_comp);
  out.info.components = n_comp;
  std::vector<std::vector<std::uint32_t>> members(n_comp);
  std::vector<std::uint32_t> local(n);
  for (std::size_t v = 0; v < n; ++v) {
    local[v] = static_cast<std::uint32_t>(members[comp[v]].size());
    members[comp[v]].push_back(static_cast<std::uint32_t>(v));
  }
  std::vector<Job> jobs;
  for (std::uint32_t c = 0; c < n_comp; ++c) {
    for (std::size_t f = 0; f < members[c].size(); f += kBatch) jobs.push_back({c, f});
  }
  std::vector<double> inv_degree(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    if (graph.degree(v) > 0) inv_degree[v] = 1.0 / static_cast<double>(graph.degree(v));
  }

  parallel_for(jobs.size(), workers, [&](std::size_t jid) {
    const auto& nodes = members[jobs[jid].component];
    const std::size_t m = nodes.size();
    const std::size_t first = jobs[jid].first;
    const std::size_t b = std::min(kBatch, m - first);
    // Block of b column vectors over the component, row-major (m x b).
    std::vector<double> cur(m * b, 0.0), next(m * b, 0.0);
    for (std::size_t j = 0; j < b; ++j) cur[(first + j) * b + j] = 1.0;
    for (std::size_t step = 0; step < k; ++step) {
      // next = RW * cur, RW = D^-1 A
      for (std::size_t r = 0; r < m; ++r) {
        double* dst = &next[r * b];
        std::fill(dst, dst + b, 0.0);
        const auto u = nodes[r];
        for (auto w : graph.neighbors(u)) {
          const double* src = &cur[static_cast<std::size_t>(local[w]) * b];
          for (std::size_t j = 0; j < b; ++j) dst[j] += src[j];
        }
        const double s = inv_degree[u];
        for (std::size_t j = 0; j < b; ++j) dst[j] *= s;
      }
      std::swap(cur, next);
      for (std::size_t j = 0; j < b; ++j) {
        out.vectors(nodes[first + j], step) = cur[(first + j) * b + j];
      }
    }
  });
  return out;
}

}  // namespace phylembed
