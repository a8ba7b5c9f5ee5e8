#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include "phylembed/embed.hpp"
#include "phylembed/error.hpp"
#include "phylembed/parallel.hpp"

namespace phylembed {

void N2VConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("node2vec config: " + msg); };
  if (dim == 0) fail("dim must be positive");
  if (walks_per_node == 0) fail("walks_per_node must be positive");
  if (walk_length < 2) fail("walk_length must be at least 2");
  if (!(return_param_p > 0.0) || !(inout_param_q > 0.0)) fail("p and q must be positive");
  if (window == 0 || window >= walk_length) fail("window must lie in [1, walk_length)");
  if (negatives_per_positive == 0) fail("negatives_per_positive must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (workers == 0) fail("workers must be positive");
}

// ---------------------------------------------------------------------------
// AliasTable

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t n = weights.size();
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  if (n == 0) return;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error("AliasTable: weights must have a positive sum");
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    auto s = small.back();
    small.pop_back();
    auto l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto l : large) prob_[l] = 1.0;
  for (auto s : small) prob_[s] = 1.0;
}

std::size_t AliasTable::sample(Rng& rng) const {
  const std::size_t i = rng.below(prob_.size());
  return rng.uniform() < prob_[i] ? i : alias_[i];
}

// ---------------------------------------------------------------------------
// BiasedWalker

BiasedWalker::BiasedWalker(const Graph& graph, double p, double q)
    : graph_(graph),
      p_(p),
      q_(q),
      once_(new std::once_flag[graph.n_arcs()]),
      tables_(new AliasTable[graph.n_arcs()]) {}

std::vector<double> BiasedWalker::transition_weights(std::uint32_t prev, std::uint32_t cur) const {
  auto nb = graph_.neighbors(cur);
  std::vector<double> w(nb.size());
  for (std::size_t i = 0; i < nb.size(); ++i) {
    if (nb[i] == prev) w[i] = 1.0 / p_;
    else if (graph_.has_edge(nb[i], prev)) w[i] = 1.0;
    else w[i] = 1.0 / q_;
  }
  return w;
}

const AliasTable& BiasedWalker::table(std::size_t arc, std::uint32_t prev, std::uint32_t cur) const {
  std::call_once(once_[arc], [&] { tables_[arc] = AliasTable(transition_weights(prev, cur)); });
  return tables_[arc];
}

std::vector<std::uint32_t> BiasedWalker::walk(std::uint32_t start, std::size_t length, Rng& rng) const {
  std::vector<std::uint32_t> path;
  path.reserve(length);
  path.push_back(start);
  if (length <= 1) return path;
  if (graph_.degree(start) == 0) {
    path.resize(length, start);
    return path;
  }
  auto nb = graph_.neighbors(start);
  path.push_back(nb[rng.below(nb.size())]);
  while (path.size() < length) {
    const auto prev = path[path.size() - 2];
    const auto cur = path.back();
    const auto arc = graph_.arc_index(prev, cur);
    const auto& t = table(arc, prev, cur);
    path.push_back(graph_.neighbors(cur)[t.sample(rng)]);
  }
  return path;
}

std::vector<std::uint32_t> biased_random_walk(const Graph& graph, std::uint32_t start,
                                              const N2VConfig& cfg, Rng& rng) {
  if (start >= graph.n_nodes()) throw ConfigError("biased_random_walk: start node out of range");
  if (cfg.walk_length < 2) throw ConfigError("biased_random_walk: walk_length must be at least 2");
  BiasedWalker walker(graph, cfg.return_param_p, cfg.inout_param_q);
  return walker.walk(start, cfg.walk_length, rng);
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// -log(sigmoid(x))
double neg_log_sigmoid(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(-x, 0.0); }

struct SgnsState {
  Matrix& center;
  Matrix& context;
  const AliasTable& noise;
  std::size_t negatives;
  std::size_t window;
};

struct Tally {
  double loss = 0.0;
  std::size_t pairs = 0;
};

/// Updates for every (center, context) pair of one walk at a fixed rate schedule.
void train_walk(const std::vector<std::uint32_t>& walk, SgnsState& s, Rng& rng, Tally& tally,
                std::vector<double>& grad, const std::function<double()>& next_rate) {
  const std::size_t len = walk.size();
  const std::size_t dim = s.center.cols();
  for (std::size_t i = 0; i < len; ++i) {
    const double lr = next_rate();
    auto u = s.center.row(walk[i]);
    const std::size_t lo = i >= s.window ? i - s.window : 0;
    const std::size_t hi = std::min(len - 1, i + s.window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j == i) continue;
      const auto ctx = walk[j];
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t t = 0; t <= s.negatives; ++t) {
        std::uint32_t target;
        double label;
        if (t == 0) {
          target = ctx;
          label = 1.0;
        } else {
          target = static_cast<std::uint32_t>(s.noise.sample(rng));
          if (target == ctx) continue;
          label = 0.0;
        }
        auto v = s.context.row(target);
        double f = 0.0;
        for (std::size_t d = 0; d < dim; ++d) f += u[d] * v[d];
        tally.loss += label > 0.0 ? neg_log_sigmoid(f) : neg_log_sigmoid(-f);
        const double g = (label - sigmoid(f)) * lr;
        for (std::size_t d = 0; d < dim; ++d) {
          grad[d] += g * v[d];
          v[d] += g * u[d];
        }
      }
      for (std::size_t d = 0; d < dim; ++d) u[d] += grad[d];
      ++tally.pairs;
    }
  }
}

}  // namespace

EmbeddingMatrix train_node2vec(const Graph& graph, const N2VConfig& cfg) {
  cfg.validate();
  const std::size_t n = graph.n_nodes();
  if (n == 0) throw ConfigError("train_node2vec: empty graph");
  EmbeddingMatrix out;
  out.method = EmbedMethod::N2V;
  out.info.seed = cfg.seed;
  out.vectors = Matrix(n, cfg.dim);
  Matrix context(n, cfg.dim, 0.0);
  {
    Rng init(derive_seed(cfg.seed, "n2v/init"));
    const double half = 0.5 / static_cast<double>(cfg.dim);
    for (auto& x : out.vectors.data()) x = init.uniform(-half, half);
  }
  if (cfg.epochs == 0) return out;

  BiasedWalker walker(graph, cfg.return_param_p, cfg.inout_param_q);
  const std::size_t walks_per_epoch = cfg.walks_per_node * n;
  const std::uint64_t walk_seed = derive_seed(cfg.seed, "n2v/walks");
  const double total_positions =
      static_cast<double>(cfg.epochs) * static_cast<double>(walks_per_epoch * cfg.walk_length);
  constexpr double kFinalRateFraction = 1e-4;
  std::atomic<std::size_t> progress{0};
  auto schedule = [&](std::size_t pos) {
    const double frac = std::min(1.0, static_cast<double>(pos) / total_positions);
    return cfg.learning_rate * (1.0 - (1.0 - kFinalRateFraction) * frac);
  };
  const std::size_t workers = cfg.deterministic ? 1 : cfg.workers;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Start order per round is a seeded permutation; each walk draws from its
    // own stream so the walk set does not depend on the worker count.
    std::vector<std::uint32_t> starts(walks_per_epoch);
    Rng order_rng(derive_seed(walk_seed, epoch, ~std::uint64_t{0}));
    for (std::size_t r = 0; r < cfg.walks_per_node; ++r) {
      auto first = starts.begin() + static_cast<long>(r * n);
      std::iota(first, first + static_cast<long>(n), 0u);
      order_rng.shuffle(first, first + static_cast<long>(n));
    }
    std::vector<std::vector<std::uint32_t>> walks(walks_per_epoch);
    parallel_for(walks_per_epoch, workers, [&](std::size_t w) {
      Rng rng(derive_seed(walk_seed, epoch + 1, w));
      walks[w] = walker.walk(starts[w], cfg.walk_length, rng);
    });

    std::vector<double> counts(n, 0.0);
    for (const auto& w : walks) {
      for (auto v : w) counts[v] += 1.0;
    }
    for (auto& c : counts) c = std::pow(c, 0.75);
    AliasTable noise(counts);
    SgnsState state{out.vectors, context, noise, cfg.negatives_per_positive, cfg.window};

    const std::uint64_t neg_seed = derive_seed(cfg.seed, "n2v/negatives");
    std::vector<Tally> tallies(workers);
    parallel_for(workers, workers, [&](std::size_t t) {
      Rng rng(derive_seed(neg_seed, epoch, t));
      std::vector<double> grad(cfg.dim);
      auto next_rate = [&] { return schedule(progress.fetch_add(1, std::memory_order_relaxed)); };
      const std::size_t begin = walks_per_epoch * t / workers;
      const std::size_t end = walks_per_epoch * (t + 1) / workers;
      for (std::size_t w = begin; w < end; ++w) train_walk(walks[w], state, rng, tallies[t], grad, next_rate);
    });
    Tally total;
    for (const auto& t : tallies) {
      total.loss += t.loss;
      total.pairs += t.pairs;
    }
    const double mean = total.pairs ? total.loss / static_cast<double>(total.pairs) : 0.0;
    if (!std::isfinite(mean)) {
      throw NumericError("train_node2vec: non-finite loss in epoch " + std::to_string(epoch) +
                         " (learning rate " + std::to_string(cfg.learning_rate) + ")");
    }
    out.info.epoch_losses.push_back(mean);
  }
  for (double x : out.vectors.data()) {
    if (!std::isfinite(x)) throw NumericError("train_node2vec: non-finite embedding entry");
  }
  return out;
}

}  // namespace phylembed
