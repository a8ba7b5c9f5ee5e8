#include <cmath>
#include <map>
#include <mutex>

#include <json.hpp>

#include "phylembed/error.hpp"
#include "phylembed/evaluate.hpp"
#include "phylembed/parallel.hpp"

namespace phylembed {

void SearchSpace::validate() const {
  if (!(c_min > 0.0 && c_min <= c_max)) throw ConfigError("search: invalid C range");
  const bool has_gamma_range = gamma_max > 0.0;
  if (has_gamma_range && !(gamma_min > 0.0 && gamma_min <= gamma_max)) {
    throw ConfigError("search: invalid gamma range");
  }
  if (!has_gamma_range && !allow_scale_gamma) throw ConfigError("search: no gamma option available");
  if (methods.empty() || dims.empty() || top_k.empty()) throw ConfigError("search: empty grid");
  for (auto d : dims) {
    if (d == 0) throw ConfigError("search: embedding dims must be positive");
  }
  for (auto k : top_k) {
    if (k == 0) throw ConfigError("search: top_k values must be positive");
  }
  if (trials == 0) throw ConfigError("search: trials must be at least 1");
}

namespace {

double log_uniform(double lo, double hi, double u) {
  if (lo == hi) return lo;
  return std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
}

}  // namespace

TrialConfig sample_trial(const SearchSpace& space, Rng& rng) {
  TrialConfig t;
  t.method = space.methods[rng.below(space.methods.size())];
  t.dim = space.dims[rng.below(space.dims.size())];
  t.top_k_genes = space.top_k[rng.below(space.top_k.size())];
  t.C = log_uniform(space.c_min, space.c_max, rng.uniform());
  const double pick = rng.uniform();
  const double u = rng.uniform();
  const bool has_range = space.gamma_max > 0.0;
  const bool use_scale = space.allow_scale_gamma && (!has_range || pick < 0.5);
  if (!use_scale) t.gamma = log_uniform(space.gamma_min, space.gamma_max, u);
  return t;
}

std::string to_json(const TrialConfig& cfg) {
  nlohmann::json j = {{"method", to_string(cfg.method)},
                      {"dim", cfg.dim},
                      {"top_k_genes", cfg.top_k_genes},
                      {"C", cfg.C}};
  if (cfg.gamma) j["gamma"] = *cfg.gamma;
  else j["gamma"] = "scale";
  return j.dump();
}

std::string to_json_line(const TrialRecord& rec) {
  nlohmann::json j = {{"trial_id", rec.trial_id},
                      {"config", nlohmann::json::parse(to_json(rec.config))},
                      {"status", rec.status}};
  if (rec.val_auc) j["val_auc"] = *rec.val_auc;
  else j["val_auc"] = nullptr;
  return j.dump();
}

SearchResult random_search(const SearchSpace& space, const Objective& objective,
                           std::size_t workers, std::ostream* log) {
  space.validate();
  Rng rng(derive_seed(space.seed, "search"));
  SearchResult result;
  result.trials.resize(space.trials);
  for (std::size_t t = 0; t < space.trials; ++t) {
    result.trials[t].trial_id = t;
    result.trials[t].config = sample_trial(space, rng);
  }

  // Records reach the log in trial order no matter which worker finishes first.
  std::mutex log_mutex;
  std::size_t next_to_write = 0;
  std::vector<char> done(space.trials, 0);
  auto flush = [&] {
    while (next_to_write < space.trials && done[next_to_write]) {
      if (log) *log << to_json_line(result.trials[next_to_write]) << '\n';
      ++next_to_write;
    }
    if (log) log->flush();
  };

  parallel_for(space.trials, workers, [&](std::size_t t) {
    auto& rec = result.trials[t];
    try {
      const double score = objective(rec.config);
      if (!std::isfinite(score)) throw NumericError("objective returned a non-finite score");
      rec.val_auc = score;
      rec.status = "ok";
    } catch (const std::exception& e) {
      rec.status = std::string("failed: ") + e.what();
    }
    std::lock_guard lock(log_mutex);
    done[t] = 1;
    flush();
  });

  bool any = false;
  for (const auto& rec : result.trials) {
    if (rec.val_auc && (!any || *rec.val_auc > result.best_score)) {
      any = true;
      result.best_score = *rec.val_auc;
      result.best = rec.config;
      result.best_trial = rec.trial_id;
    }
  }
  if (!any) {
    throw Error("random_search: all " + std::to_string(space.trials) + " trials failed (first: " +
                result.trials.front().status + ")");
  }
  return result;
}

}  // namespace phylembed
