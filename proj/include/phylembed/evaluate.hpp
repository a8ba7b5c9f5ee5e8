#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "phylembed/embed.hpp"

namespace phylembed {

// ---------------------------------------------------------------------------
// Metrics

/// F1 of the positive class; predictions and labels are 0/1. Zero when P+R = 0.
double f1_score(std::span<const int> predictions, std::span<const int> labels);

/// Mann-Whitney ROC AUC, ties counted one half. Labels 0/1, both present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

double mean(std::span<const double> xs);
/// Sample standard deviation; 0 for fewer than two values.
double stddev(std::span<const double> xs);

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Index split of `labels` (0/1). Within each class the counts follow the
/// largest-remainder apportionment of the ratios, so each is within one of
/// exact proportionality. Index lists come out sorted.
Split stratified_split(std::span<const int> labels, const SplitSpec& spec);

struct IdSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};
IdSplit stratified_split(std::span<const std::string> ids, std::span<const int> labels,
                         const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Random search

struct TrialConfig {
  EmbedMethod method = EmbedMethod::LPE;
  std::size_t dim = 16;
  std::size_t top_k_genes = 200;
  double C = 1.0;
  std::optional<double> gamma;  // empty = scale

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

std::string to_json(const TrialConfig& cfg);

struct SearchSpace {
  double c_min = 1e-2;
  double c_max = 1e3;
  /// Log-uniform gamma range; disabled when gamma_max <= 0.
  double gamma_min = 1e-4;
  double gamma_max = 1e1;
  bool allow_scale_gamma = true;
  std::vector<EmbedMethod> methods{EmbedMethod::LPE, EmbedMethod::RWPE, EmbedMethod::N2V};
  std::vector<std::size_t> dims{8, 16, 32};
  std::vector<std::size_t> top_k{50, 200, 1000};
  std::size_t trials = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Draws one configuration; every field uses its own draw so the stream layout
/// does not depend on which ranges are degenerate.
TrialConfig sample_trial(const SearchSpace& space, Rng& rng);

struct TrialRecord {
  std::size_t trial_id = 0;
  TrialConfig config;
  std::optional<double> val_auc;
  std::string status;  // "ok" or "failed: <reason>"
};

struct SearchResult {
  TrialConfig best;
  double best_score = 0.0;
  std::size_t best_trial = 0;
  std::vector<TrialRecord> trials;
};

using Objective = std::function<double(const TrialConfig&)>;

/// Evaluates `space.trials` i.i.d. configurations, up to `workers` at a time.
/// Failed trials are logged and skipped; ties go to the earliest trial. When
/// `log` is set each record is written as one JSON line, in trial order.
SearchResult random_search(const SearchSpace& space, const Objective& objective,
                           std::size_t workers = 1, std::ostream* log = nullptr);

std::string to_json_line(const TrialRecord& rec);

}  // namespace phylembed
