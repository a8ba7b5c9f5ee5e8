#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "phylembed/embed.hpp"
#include "phylembed/evaluate.hpp"
#include "phylembed/ingest.hpp"
#include "phylembed/represent.hpp"
#include "phylembed/svm.hpp"

namespace phylembed {

/// Full configuration of a CLI run. Input paths have no defaults; everything
/// else does.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool deterministic = true;

  // Inputs, keyed by omic level.
  std::map<OmicLevel, std::string> abundance_paths;
  std::map<OmicLevel, std::string> taxonomy_paths;
  std::string labels_path;
  /// Optional precomputed embedding for `represent`.
  std::string embedding_path;
  std::string out_dir = "out";

  SynthConfig synth;

  EmbedMethod method = EmbedMethod::LPE;
  std::size_t dim = 16;
  LaplacianKind laplacian = LaplacianKind::SymmetricNormalized;
  N2VConfig n2v;

  AggregationConfig aggregation;
  SvmConfig svm;

  SplitSpec split;
  std::size_t trials = 20;
  std::size_t n_runs = 10;
  std::vector<std::size_t> ks{10, 50, 200, 1000, 2000};
  SearchSpace search;

  void validate() const;
};

/// Accepts either a config object or a run manifest (its "config" member).
/// `overrides` is merged on top first, so its keys win. Unknown keys are errors.
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::string& overrides_json = "{}");
std::string pipeline_config_to_json(const PipelineConfig& cfg);

/// The configuration a fixed (non-searched) run uses.
TrialConfig fixed_trial(const PipelineConfig& cfg);

/// Where graph and embedding artifacts are cached: $PHYLEMBED_CACHE_DIR, else <out>/cache.
std::string cache_dir(const PipelineConfig& cfg);

/// Subcommands. Each takes exclusive ownership of cfg.out_dir, reads and
/// validates every input before writing, writes its artifacts atomically
/// and finishes with manifest.json. Progress lines go to `log`.
void cmd_synth(const PipelineConfig& cfg, std::ostream& log);
void cmd_build_graph(const PipelineConfig& cfg, std::ostream& log);
void cmd_embed(const PipelineConfig& cfg, std::ostream& log);
void cmd_represent(const PipelineConfig& cfg, std::ostream& log);
void cmd_train_eval(const PipelineConfig& cfg, std::ostream& log);
void cmd_sweep(const PipelineConfig& cfg, std::ostream& log);
void cmd_compare_omics(const PipelineConfig& cfg, std::ostream& log);

}  // namespace phylembed
