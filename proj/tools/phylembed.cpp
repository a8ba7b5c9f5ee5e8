#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "phylembed/error.hpp"
#include "phylembed/pipeline.hpp"
#include "phylembed/tsv.hpp"

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string method;
  std::size_t dim = 0;
  std::size_t top_k = 0;
  std::string omic;
  std::size_t trials = 0;
  std::size_t runs = 0;
  std::string out;
  std::string deterministic;
  std::size_t workers = 0;
  std::string ks;
  std::string labels, mgx_abundance, mtx_abundance, mgx_taxonomy, mtx_taxonomy, embedding;
};

json csv_list(const std::string& text, bool numeric) {
  json a = json::array();
  for (auto& item : phylembed::tsv::split(text, ',')) {
    if (item.empty()) continue;
    if (!numeric) {
      a.push_back(std::string(item));
      continue;
    }
    long long v = 0;
    if (!phylembed::tsv::parse_int(item, v) || v <= 0) {
      throw phylembed::ConfigError("expected a positive integer list, got '" + text + "'");
    }
    a.push_back(static_cast<std::size_t>(v));
  }
  return a;
}

/// Flag values as a JSON merge patch over the config file.
json overrides(const CLI::App& cmd, const Flags& f) {
  json o = json::object();
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--seed")) o["seed"] = f.seed;
  if (given("--workers")) o["workers"] = f.workers;
  if (given("--deterministic")) o["deterministic"] = f.deterministic == "true";
  if (given("--method")) {
    o["embed"]["method"] = f.method;
    o["eval"]["search"]["methods"] = json::array({f.method});
  }
  if (given("--dim")) {
    o["embed"]["dim"] = f.dim;
    o["eval"]["search"]["dims"] = json::array({f.dim});
  }
  if (given("--top-k")) {
    o["aggregation"]["top_k_genes"] = f.top_k;
    o["eval"]["search"]["top_k"] = json::array({f.top_k});
  }
  if (given("--omic")) o["aggregation"]["omic_levels"] = csv_list(f.omic, false);
  if (given("--trials")) o["eval"]["trials"] = f.trials;
  if (given("--runs")) o["eval"]["n_runs"] = f.runs;
  if (given("--ks")) o["eval"]["ks"] = csv_list(f.ks, true);
  if (given("--out")) o["paths"]["out"] = f.out;
  if (given("--labels")) o["paths"]["labels"] = f.labels;
  if (given("--embedding")) o["paths"]["embedding"] = f.embedding;
  if (given("--mgx-abundance")) o["paths"]["abundance"]["mgx"] = f.mgx_abundance;
  if (given("--mtx-abundance")) o["paths"]["abundance"]["mtx"] = f.mtx_abundance;
  if (given("--mgx-taxonomy")) o["paths"]["taxonomy"]["mgx"] = f.mgx_taxonomy;
  if (given("--mtx-taxonomy")) o["paths"]["taxonomy"]["mtx"] = f.mtx_taxonomy;
  return o;
}

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file or a previous run's manifest.json");
  cmd->add_option("--seed", f.seed, "Root seed");
  cmd->add_option("--method", f.method, "Embedding method")->check(CLI::IsMember({"lpe", "rwpe", "n2v"}, CLI::ignore_case));
  cmd->add_option("--dim", f.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--top-k", f.top_k, "Genes kept per patient")->check(CLI::PositiveNumber);
  cmd->add_option("--omic", f.omic, "Omic levels, e.g. mgx or mgx,mtx");
  cmd->add_option("--trials", f.trials, "Random-search trials (0 = use the fixed config)");
  cmd->add_option("--runs", f.runs, "Repeated evaluation runs")->check(CLI::PositiveNumber);
  cmd->add_option("--ks", f.ks, "Comma-separated top-k values for sweep");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--deterministic", f.deterministic, "Bit-reproducible N2V")->check(CLI::IsMember({"true", "false"}));
  cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--labels", f.labels, "Labels TSV");
  cmd->add_option("--mgx-abundance", f.mgx_abundance, "MGX abundance TSV");
  cmd->add_option("--mtx-abundance", f.mtx_abundance, "MTX abundance TSV");
  cmd->add_option("--mgx-taxonomy", f.mgx_taxonomy, "MGX taxonomy TSV");
  cmd->add_option("--mtx-taxonomy", f.mtx_taxonomy, "MTX taxonomy TSV");
  cmd->add_option("--embedding", f.embedding, "Precomputed embedding TSV (represent)");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw phylembed::ConfigError("cannot read config " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phylogenetic-graph embeddings and SVM phenotype prediction from microbiome profiles"};
  app.require_subcommand(1);

  using Command = void (*)(const phylembed::PipelineConfig&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands{
      {"synth", "Generate a synthetic planted-signal dataset", phylembed::cmd_synth},
      {"build-graph", "Build and export the gene-species-genus graph", phylembed::cmd_build_graph},
      {"embed", "Compute node embeddings", phylembed::cmd_embed},
      {"represent", "Build per-patient feature vectors", phylembed::cmd_represent},
      {"train-eval", "Search hyperparameters, then evaluate over repeated splits", phylembed::cmd_train_eval},
      {"sweep", "Evaluate over a list of top-k gene counts", phylembed::cmd_sweep},
      {"compare-omics", "Compare MGX-only and MGX+MTX models", phylembed::cmd_compare_omics},
  };
  Flags flags;
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_flags(sub, flags);
    subs.emplace_back(sub, fn);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [sub, fn] : subs) {
      if (!sub->parsed()) continue;
      const auto text = flags.config.empty() ? std::string("{}") : slurp(flags.config);
      const auto cfg = phylembed::parse_pipeline_config(text, overrides(*sub, flags).dump());
      fn(cfg, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
