#pragma once

#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "phylembed/embed.hpp"
#include "phylembed/evaluate.hpp"
#include "phylembed/graph.hpp"
#include "phylembed/ingest.hpp"
#include "phylembed/represent.hpp"
#include "phylembed/svm.hpp"

namespace phylembed {

/// Everything held fixed while trial-level knobs (method, dim, top-k, C, gamma) vary.
struct ExperimentSettings {
  AggregationConfig aggregation;
  SvmConfig svm;
  SplitSpec split;
  LpeOptions lpe;
  N2VConfig n2v;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Borrowed inputs of one experimental arm; must outlive the Experiment.
struct ExperimentInputs {
  std::vector<LevelTaxonomy> taxonomies;
  std::vector<const AbundanceTable*> tables;
  const LabelTable* labels = nullptr;
};

struct RunMetrics {
  std::size_t run = 0;
  std::uint64_t split_seed = 0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
};

struct EvalReport {
  std::string label;
  TrialConfig config;
  std::vector<RunMetrics> runs;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double mean_auc = 0.0;
  double std_auc = 0.0;
  std::size_t n_samples = 0;
  std::size_t dropped_zero_profile = 0;
  std::size_t dropped_missing = 0;
};

std::string to_json(const EvalReport& report);
std::string to_text(const EvalReport& report);

struct SweepPoint {
  std::size_t k = 0;
  double mean_auc = 0.0;
  double std_auc = 0.0;
};

/// TSV `k<TAB>mean_auc<TAB>std_auc`.
void write_sweep(std::ostream& out, const std::vector<SweepPoint>& curve);
/// Index of the best mean AUC; earliest on ties.
std::size_t sweep_argmax(const std::vector<SweepPoint>& curve);

/// Builds the graph of one arm and runs the selection / evaluation protocol on it.
/// Embeddings are computed once per (method, dim, seed) and shared between
/// concurrent trials and runs.
class Experiment {
 public:
  Experiment(ExperimentInputs inputs, ExperimentSettings settings);

  const HeteroGraph& graph() const noexcept { return graph_; }
  const ExperimentSettings& settings() const noexcept { return settings_; }

  /// N2V embeddings take a per-run seed index; LPE and RWPE ignore it.
  std::shared_ptr<const EmbeddingMatrix> embedding(EmbedMethod method, std::size_t dim,
                                                   std::size_t seed_index = 0);

  DesignMatrix design_matrix(const TrialConfig& trial, std::size_t seed_index = 0);

  /// Validation ROC AUC on a fixed search split: the search objective.
  double validation_auc(const TrialConfig& trial);

  /// Run r splits with seed base_seed + r, retrains and reports test metrics.
  EvalReport repeated_eval(const TrialConfig& trial, std::size_t n_runs, std::uint64_t base_seed,
                           const std::string& label = "");

  std::vector<SweepPoint> topk_sweep(const std::vector<std::size_t>& ks, const TrialConfig& trial,
                                     std::size_t n_runs, std::uint64_t base_seed);

 private:
  SvmConfig svm_config(const TrialConfig& trial) const;
  AggregationConfig aggregation_config(const TrialConfig& trial) const;

  ExperimentInputs inputs_;
  ExperimentSettings settings_;
  HeteroGraph graph_;
  std::mutex cache_mutex_;
  std::map<std::tuple<EmbedMethod, std::size_t, std::size_t>,
           std::shared_future<std::shared_ptr<const EmbeddingMatrix>>>
      cache_;
};

/// Paired reports of an MGX-only and an MGX+MTX arm, per embedding method.
struct OmicComparison {
  std::vector<EmbedMethod> methods;
  std::vector<EvalReport> mgx_only;
  std::vector<EvalReport> mgx_mtx;
};

/// Runs repeated_eval on both arms with the same seed schedule. `configs`
/// holds one trial per method (arm-specific configs may differ only in what
/// the caller puts in them).
OmicComparison compare_omic_levels(Experiment& mgx_only, Experiment& mgx_mtx,
                                   const std::vector<TrialConfig>& mgx_configs,
                                   const std::vector<TrialConfig>& mgx_mtx_configs,
                                   std::size_t n_runs, std::uint64_t base_seed);

std::string to_json(const OmicComparison& cmp);
/// Two rows (MGX only, MGX+MTX); F1 block then ROC AUC block, one column per method.
std::string to_table(const OmicComparison& cmp);

}  // namespace phylembed
