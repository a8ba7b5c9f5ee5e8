#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include "phylembed/error.hpp"
#include "phylembed/experiment.hpp"
#include "phylembed/graph.hpp"
#include "phylembed/pipeline.hpp"
#include "phylembed/tsv.hpp"

namespace phylembed {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kGraphFormat = 1;
constexpr int kEmbeddingFormat = 1;

// ---------------------------------------------------------------------------
// Config (de)serialisation

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config " + where + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError("unknown config key " + where + "." + item.key());
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string name = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError("config " + name + ": expected true/false");
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_unsigned()) throw ConfigError("config " + name + ": expected a non-negative integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ConfigError("config " + name + ": expected a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) throw ConfigError("config " + name + ": expected a string");
  }
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config " + name + ": " + e.what());
  }
}

template <typename Parse>
void read_enum(const json& j, const char* key, Parse parse, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_string()) throw ConfigError("config " + where + "." + key + ": expected a string");
  parse(it->get<std::string>());
}

std::string_view laplacian_name(LaplacianKind k) {
  return k == LaplacianKind::Unnormalized ? "unnormalized" : "sym";
}

LaplacianKind parse_laplacian(std::string_view s) {
  if (s == "sym" || s == "symmetric") return LaplacianKind::SymmetricNormalized;
  if (s == "unnormalized" || s == "combinatorial") return LaplacianKind::Unnormalized;
  throw ConfigError("unknown laplacian '" + std::string(s) + "' (expected sym or unnormalized)");
}

json gamma_json(const std::optional<double>& g) { return g ? json(*g) : json("scale"); }

std::optional<double> parse_gamma(const json& v, const std::string& where) {
  if (v.is_string() && v.get<std::string>() == "scale") return std::nullopt;
  if (v.is_number()) return v.get<double>();
  throw ConfigError("config " + where + ": expected a number or \"scale\"");
}

std::string level_key(OmicLevel l) { return l == OmicLevel::MGX ? "mgx" : "mtx"; }

json levels_json(const std::vector<OmicLevel>& levels) {
  json a = json::array();
  for (auto l : levels) a.push_back(level_key(l));
  return a;
}

json to_json_obj(const PipelineConfig& c) {
  json paths = {{"labels", c.labels_path}, {"embedding", c.embedding_path}, {"out", c.out_dir}};
  json abundance = json::object(), taxonomy = json::object();
  for (const auto& [l, p] : c.abundance_paths) abundance[level_key(l)] = p;
  for (const auto& [l, p] : c.taxonomy_paths) taxonomy[level_key(l)] = p;
  paths["abundance"] = abundance;
  paths["taxonomy"] = taxonomy;

  const auto& s = c.synth;
  json synth = {{"n_samples", s.n_samples},
                {"n_genes", s.n_genes},
                {"n_species", s.n_species},
                {"n_genera", s.n_genera},
                {"positive_fraction", s.positive_fraction},
                {"signal_genera", s.signal_genera},
                {"effect_size", s.effect_size},
                {"sparsity", s.sparsity},
                {"lognormal_mu", s.lognormal_mu},
                {"lognormal_sigma", s.lognormal_sigma},
                {"mtx_genes", s.mtx_genes},
                {"mtx_sample_fraction", s.mtx_sample_fraction},
                {"mtx_effect_size", s.mtx_effect_size},
                {"mtx_extra_signal_genera", s.mtx_extra_signal_genera}};

  const auto& n = c.n2v;
  json embed = {{"method", std::string(to_string(c.method))},
                {"dim", c.dim},
                {"laplacian", std::string(laplacian_name(c.laplacian))},
                {"n2v",
                 {{"walks_per_node", n.walks_per_node},
                  {"walk_length", n.walk_length},
                  {"p", n.return_param_p},
                  {"q", n.inout_param_q},
                  {"window", n.window},
                  {"negatives", n.negatives_per_positive},
                  {"epochs", n.epochs},
                  {"learning_rate", n.learning_rate}}}};

  const auto& a = c.aggregation;
  json aggregation = {{"top_k_genes", a.top_k_genes},
                      {"weighting", std::string(to_string(a.weighting))},
                      {"omic_levels", levels_json(a.omic_levels)},
                      {"zero_profile", std::string(to_string(a.zero_profile))}};

  json svm = {{"C", c.svm.C},
              {"gamma", gamma_json(c.svm.gamma)},
              {"class_weight", c.svm.class_weight == ClassWeight::Balanced ? "balanced" : "none"},
              {"tolerance", c.svm.tolerance},
              {"max_passes", c.svm.max_passes},
              {"cache_mb", c.svm.cache_mb}};

  json methods = json::array();
  for (auto m : c.search.methods) methods.push_back(std::string(to_string(m)));
  json search = {{"c_min", c.search.c_min},
                 {"c_max", c.search.c_max},
                 {"gamma_min", c.search.gamma_min},
                 {"gamma_max", c.search.gamma_max},
                 {"allow_scale_gamma", c.search.allow_scale_gamma},
                 {"methods", methods},
                 {"dims", c.search.dims},
                 {"top_k", c.search.top_k}};
  json eval = {{"split",
                {{"train", c.split.train},
                 {"val", c.split.val},
                 {"test", c.split.test},
                 {"stratified", c.split.stratified}}},
               {"trials", c.trials},
               {"n_runs", c.n_runs},
               {"ks", c.ks},
               {"search", search}};

  return {{"seed", c.seed},
          {"workers", c.workers},
          {"deterministic", c.deterministic},
          {"paths", paths},
          {"synth", synth},
          {"embed", embed},
          {"aggregation", aggregation},
          {"svm", svm},
          {"eval", eval}};
}

PipelineConfig from_json_obj(const json& j) {
  PipelineConfig c;
  check_keys(j, {"seed", "workers", "deterministic", "paths", "synth", "embed", "aggregation", "svm", "eval"},
             "");
  read(j, "seed", c.seed, "");
  read(j, "workers", c.workers, "");
  read(j, "deterministic", c.deterministic, "");

  if (auto it = j.find("paths"); it != j.end()) {
    const auto& p = *it;
    check_keys(p, {"abundance", "taxonomy", "labels", "embedding", "out"}, "paths");
    read(p, "labels", c.labels_path, "paths");
    read(p, "embedding", c.embedding_path, "paths");
    read(p, "out", c.out_dir, "paths");
    auto per_level = [&](const char* key, std::map<OmicLevel, std::string>& out) {
      auto f = p.find(key);
      if (f == p.end()) return;
      check_keys(*f, {"mgx", "mtx"}, std::string("paths.") + key);
      for (const auto& item : f->items()) {
        if (!item.value().is_string()) throw ConfigError(std::string("config paths.") + key + ": expected strings");
        const auto path = item.value().get<std::string>();
        if (!path.empty()) out[parse_omic_level(item.key())] = path;
      }
    };
    per_level("abundance", c.abundance_paths);
    per_level("taxonomy", c.taxonomy_paths);
  }

  if (auto it = j.find("synth"); it != j.end()) {
    const auto& s = *it;
    auto& o = c.synth;
    check_keys(s, {"n_samples", "n_genes", "n_species", "n_genera", "positive_fraction", "signal_genera",
                   "effect_size", "sparsity", "lognormal_mu", "lognormal_sigma", "mtx_genes",
                   "mtx_sample_fraction", "mtx_effect_size", "mtx_extra_signal_genera"},
               "synth");
    read(s, "n_samples", o.n_samples, "synth");
    read(s, "n_genes", o.n_genes, "synth");
    read(s, "n_species", o.n_species, "synth");
    read(s, "n_genera", o.n_genera, "synth");
    read(s, "positive_fraction", o.positive_fraction, "synth");
    read(s, "signal_genera", o.signal_genera, "synth");
    read(s, "effect_size", o.effect_size, "synth");
    read(s, "sparsity", o.sparsity, "synth");
    read(s, "lognormal_mu", o.lognormal_mu, "synth");
    read(s, "lognormal_sigma", o.lognormal_sigma, "synth");
    read(s, "mtx_genes", o.mtx_genes, "synth");
    read(s, "mtx_sample_fraction", o.mtx_sample_fraction, "synth");
    read(s, "mtx_effect_size", o.mtx_effect_size, "synth");
    read(s, "mtx_extra_signal_genera", o.mtx_extra_signal_genera, "synth");
  }

  if (auto it = j.find("embed"); it != j.end()) {
    const auto& e = *it;
    check_keys(e, {"method", "dim", "laplacian", "n2v"}, "embed");
    read_enum(e, "method", [&](const std::string& s) { c.method = parse_embed_method(s); }, "embed");
    read(e, "dim", c.dim, "embed");
    read_enum(e, "laplacian", [&](const std::string& s) { c.laplacian = parse_laplacian(s); }, "embed");
    if (auto n = e.find("n2v"); n != e.end()) {
      check_keys(*n, {"walks_per_node", "walk_length", "p", "q", "window", "negatives", "epochs", "learning_rate"},
                 "embed.n2v");
      read(*n, "walks_per_node", c.n2v.walks_per_node, "embed.n2v");
      read(*n, "walk_length", c.n2v.walk_length, "embed.n2v");
      read(*n, "p", c.n2v.return_param_p, "embed.n2v");
      read(*n, "q", c.n2v.inout_param_q, "embed.n2v");
      read(*n, "window", c.n2v.window, "embed.n2v");
      read(*n, "negatives", c.n2v.negatives_per_positive, "embed.n2v");
      read(*n, "epochs", c.n2v.epochs, "embed.n2v");
      read(*n, "learning_rate", c.n2v.learning_rate, "embed.n2v");
    }
  }

  if (auto it = j.find("aggregation"); it != j.end()) {
    const auto& a = *it;
    check_keys(a, {"top_k_genes", "weighting", "omic_levels", "zero_profile"}, "aggregation");
    read(a, "top_k_genes", c.aggregation.top_k_genes, "aggregation");
    read_enum(a, "weighting", [&](const std::string& s) { c.aggregation.weighting = parse_weighting(s); },
              "aggregation");
    read_enum(a, "zero_profile", [&](const std::string& s) { c.aggregation.zero_profile = parse_zero_policy(s); },
              "aggregation");
    if (auto l = a.find("omic_levels"); l != a.end()) {
      if (!l->is_array()) throw ConfigError("config aggregation.omic_levels: expected a list");
      c.aggregation.omic_levels.clear();
      for (const auto& v : *l) {
        if (!v.is_string()) throw ConfigError("config aggregation.omic_levels: expected strings");
        c.aggregation.omic_levels.push_back(parse_omic_level(v.get<std::string>()));
      }
    }
  }

  if (auto it = j.find("svm"); it != j.end()) {
    const auto& s = *it;
    check_keys(s, {"C", "gamma", "class_weight", "tolerance", "max_passes", "cache_mb"}, "svm");
    read(s, "C", c.svm.C, "svm");
    if (auto g = s.find("gamma"); g != s.end()) c.svm.gamma = parse_gamma(*g, "svm.gamma");
    read_enum(s, "class_weight",
              [&](const std::string& w) {
                if (w == "balanced") c.svm.class_weight = ClassWeight::Balanced;
                else if (w == "none") c.svm.class_weight = ClassWeight::None;
                else throw ConfigError("unknown class_weight '" + w + "' (expected balanced or none)");
              },
              "svm");
    read(s, "tolerance", c.svm.tolerance, "svm");
    read(s, "max_passes", c.svm.max_passes, "svm");
    read(s, "cache_mb", c.svm.cache_mb, "svm");
  }

  if (auto it = j.find("eval"); it != j.end()) {
    const auto& e = *it;
    check_keys(e, {"split", "trials", "n_runs", "ks", "search"}, "eval");
    if (auto s = e.find("split"); s != e.end()) {
      check_keys(*s, {"train", "val", "test", "stratified"}, "eval.split");
      read(*s, "train", c.split.train, "eval.split");
      read(*s, "val", c.split.val, "eval.split");
      read(*s, "test", c.split.test, "eval.split");
      read(*s, "stratified", c.split.stratified, "eval.split");
    }
    read(e, "trials", c.trials, "eval");
    read(e, "n_runs", c.n_runs, "eval");
    read(e, "ks", c.ks, "eval");
    if (auto s = e.find("search"); s != e.end()) {
      check_keys(*s, {"c_min", "c_max", "gamma_min", "gamma_max", "allow_scale_gamma", "methods", "dims", "top_k"},
                 "eval.search");
      read(*s, "c_min", c.search.c_min, "eval.search");
      read(*s, "c_max", c.search.c_max, "eval.search");
      read(*s, "gamma_min", c.search.gamma_min, "eval.search");
      read(*s, "gamma_max", c.search.gamma_max, "eval.search");
      read(*s, "allow_scale_gamma", c.search.allow_scale_gamma, "eval.search");
      read(*s, "dims", c.search.dims, "eval.search");
      read(*s, "top_k", c.search.top_k, "eval.search");
      if (auto m = s->find("methods"); m != s->end()) {
        if (!m->is_array()) throw ConfigError("config eval.search.methods: expected a list");
        c.search.methods.clear();
        for (const auto& v : *m) {
          if (!v.is_string()) throw ConfigError("config eval.search.methods: expected strings");
          c.search.methods.push_back(parse_embed_method(v.get<std::string>()));
        }
      }
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Files

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

/// One command invocation: owns the output directory, hashes inputs, times
/// stages and writes the manifest last.
class Run {
 public:
  Run(const PipelineConfig& cfg, std::string command, std::ostream& log)
      : cfg_(cfg), command_(std::move(command)), log_(log), out_(cfg.out_dir) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw Error("cannot create output directory " + out_.string() + ": " + ec.message());
    const auto lock_path = (out_ / ".phylembed.lock").string();
    lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (lock_fd_ < 0) throw Error("output directory " + out_.string() + " is not writable");
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(lock_fd_);
      throw Error("output directory " + out_.string() + " is in use by another run");
    }
  }
  ~Run() {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
  Run(const Run&) = delete;
  Run& operator=(const Run&) = delete;

  const PipelineConfig& cfg() const { return cfg_; }
  std::ostream& log() { return log_; }

  std::string input(const std::string& path) {
    if (path.empty()) throw ConfigError("a required input path is not configured");
    auto text = read_file(path);
    inputs_[path] = hex64(fnv1a64(text));
    return text;
  }

  void output(const std::string& name, const std::string& content) {
    write_atomic(out_ / name, content);
    outputs_[name] = hex64(fnv1a64(content));
  }

  template <typename F>
  auto stage(const std::string& name, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      stages_.push_back({{"name", name}, {"seconds", dt.count()}});
      log_ << name << ": " << std::fixed << std::setprecision(2) << dt.count() << "s\n";
      log_.unsetf(std::ios::floatfield);
    };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto r = fn();
      finish();
      return r;
    }
  }

  void note_cache(const std::string& what, bool hit) { cache_[what] = hit ? "hit" : "miss"; }
  void note_seed(const std::string& what, std::uint64_t seed) { seeds_[what] = seed; }

  void commit() {
    json m = {{"command", command_},
              {"versions",
               {{"phylembed", kVersion}, {"graph_format", kGraphFormat}, {"embedding_format", kEmbeddingFormat}}},
              {"config", to_json_obj(cfg_)},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"seeds", seeds_},
              {"cache", cache_},
              {"stages", stages_}};
    m["seeds"]["root"] = cfg_.seed;
    write_atomic(out_ / "manifest.json", m.dump(2) + "\n");
    log_ << "wrote " << (out_ / "manifest.json").string() << '\n';
  }

 private:
  const PipelineConfig& cfg_;
  std::string command_;
  std::ostream& log_;
  fs::path out_;
  int lock_fd_ = -1;
  json inputs_ = json::object();
  json outputs_ = json::object();
  json seeds_ = json::object();
  json cache_ = json::object();
  json stages_ = json::array();
};

// ---------------------------------------------------------------------------
// Inputs

struct Inputs {
  std::map<OmicLevel, TaxonomyMap> taxonomy;
  std::map<OmicLevel, AbundanceTable> abundance;
  LabelTable labels;

  std::vector<LevelTaxonomy> levels(const std::vector<OmicLevel>& which) const {
    std::vector<LevelTaxonomy> out;
    for (auto l : which) out.push_back({&taxonomy.at(l), l});
    return out;
  }
  std::vector<const AbundanceTable*> tables(const std::vector<OmicLevel>& which) const {
    std::vector<const AbundanceTable*> out;
    for (auto l : which) out.push_back(&abundance.at(l));
    return out;
  }
};

std::string path_for(const std::map<OmicLevel, std::string>& paths, OmicLevel l, const char* what) {
  auto it = paths.find(l);
  if (it == paths.end() || it->second.empty()) {
    throw ConfigError("no " + std::string(to_string(l)) + " " + what + " path configured");
  }
  return it->second;
}

Inputs load_inputs(Run& run, const std::vector<OmicLevel>& levels, bool abundance, bool labels) {
  Inputs in;
  run.stage("ingest", [&] {
    for (auto l : levels) {
      const auto tp = path_for(run.cfg().taxonomy_paths, l, "taxonomy");
      in.taxonomy.emplace(l, parse_taxonomy_map(run.input(tp)));
      if (abundance) {
        const auto ap = path_for(run.cfg().abundance_paths, l, "abundance");
        in.abundance.emplace(l, parse_abundance_table(run.input(ap), l));
      }
    }
    if (labels) in.labels = parse_labels(run.input(run.cfg().labels_path));
  });
  return in;
}

std::vector<OmicLevel> sorted_levels(std::vector<OmicLevel> levels) {
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

std::string graph_key(const Inputs& in, const std::vector<OmicLevel>& levels) {
  std::uint64_t h = fnv1a64("graph/v" + std::to_string(kGraphFormat));
  for (auto l : levels) {
    h = fnv1a64(to_string(l), h);
    h = fnv1a64(serialize(in.taxonomy.at(l)), h);
  }
  return hex64(h);
}

HeteroGraph cached_graph(Run& run, const Inputs& in, const std::vector<OmicLevel>& levels) {
  const fs::path dir = cache_dir(run.cfg());
  const auto key = graph_key(in, levels);
  const auto nodes_path = dir / ("graph-" + key + ".nodes.tsv");
  const auto edges_path = dir / ("graph-" + key + ".edges.tsv");
  if (fs::exists(nodes_path) && fs::exists(edges_path)) {
    try {
      auto g = run.stage("graph", [&] {
        std::ifstream nodes(nodes_path), edges(edges_path);
        return read_graph(nodes, edges);
      });
      run.log() << "cache hit: graph " << key << '\n';
      run.note_cache("graph", true);
      return g;
    } catch (const ParseError& e) {
      run.log() << "ignoring unreadable cached graph " << key << ": " << e.what() << '\n';
    }
  }
  auto g = run.stage("graph", [&] { return build_graph(in.levels(levels)); });
  run.note_cache("graph", false);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!ec) {
    std::ostringstream nodes, edges;
    write_node_table(nodes, g);
    write_edge_list(edges, g);
    write_atomic(nodes_path, nodes.str());
    write_atomic(edges_path, edges.str());
  } else {
    run.log() << "cache directory " << dir.string() << " unavailable: " << ec.message() << '\n';
  }
  return g;
}

std::uint64_t embed_seed(const PipelineConfig& cfg) {
  const auto root = derive_seed(cfg.seed, "embed");
  return cfg.method == EmbedMethod::N2V ? derive_seed(root, 0) : root;
}

N2VConfig n2v_config(const PipelineConfig& cfg) {
  auto n = cfg.n2v;
  n.dim = cfg.dim;
  n.deterministic = cfg.deterministic;
  n.workers = cfg.deterministic ? 1 : cfg.workers;
  return n;
}

json embed_section(const PipelineConfig& cfg) {
  auto e = to_json_obj(cfg)["embed"];
  if (cfg.method != EmbedMethod::N2V) e.erase("n2v");
  if (cfg.method != EmbedMethod::LPE) e.erase("laplacian");
  if (cfg.method == EmbedMethod::N2V) e["deterministic"] = cfg.deterministic;
  return e;
}

json sidecar_json(const PipelineConfig& cfg, const HeteroGraph& g, const EmbeddingMatrix& emb) {
  json info = {{"solver", emb.info.solver},
               {"solver_iterations", emb.info.solver_iterations},
               {"components", emb.info.components},
               {"eigenvalues", emb.info.eigenvalues},
               {"eigen_cluster", emb.info.eigen_cluster},
               {"truncated_cluster", emb.info.truncated_cluster},
               {"isolated_nodes", emb.info.isolated_nodes.size()},
               {"epoch_losses", emb.info.epoch_losses}};
  return {{"method", std::string(to_string(emb.method))},
          {"dim", emb.dim()},
          {"n_nodes", emb.n_nodes()},
          {"seed", embed_seed(cfg)},
          {"graph_hash", hex64(graph_hash(g))},
          {"config", embed_section(cfg)},
          {"info", info}};
}

struct EmbeddingArtifact {
  EmbeddingMatrix emb;
  std::string sidecar;
};

EmbeddingArtifact compute_embedding(const PipelineConfig& cfg, const HeteroGraph& g) {
  EmbeddingArtifact a;
  switch (cfg.method) {
    case EmbedMethod::LPE: {
      LpeOptions o;
      o.laplacian = cfg.laplacian;
      o.seed = embed_seed(cfg);
      a.emb = compute_lpe(g.topology(), cfg.dim, o);
      break;
    }
    case EmbedMethod::RWPE:
      a.emb = compute_rwpe(g.topology(), cfg.dim, cfg.workers);
      break;
    case EmbedMethod::N2V: {
      auto n = n2v_config(cfg);
      n.seed = embed_seed(cfg);
      a.emb = train_node2vec(g.topology(), n);
      break;
    }
  }
  a.sidecar = sidecar_json(cfg, g, a.emb).dump(2) + "\n";
  return a;
}

/// Embeddings are cached by graph hash and the effective embed settings.
/// Parallel N2V is not reproducible, so it is never served from cache.
EmbeddingArtifact cached_embedding(Run& run, const HeteroGraph& g) {
  const auto& cfg = run.cfg();
  const bool cacheable = cfg.method != EmbedMethod::N2V || cfg.deterministic;
  json key_src = {{"graph", hex64(graph_hash(g))}, {"embed", embed_section(cfg)}, {"seed", embed_seed(cfg)},
                  {"format", kEmbeddingFormat}};
  const auto key = hex64(fnv1a64(key_src.dump()));
  const fs::path dir = cache_dir(cfg);
  const auto tsv_path = dir / ("embedding-" + key + ".tsv");
  const auto side_path = dir / ("embedding-" + key + ".json");
  run.note_seed("embed", embed_seed(cfg));
  if (cacheable && fs::exists(tsv_path) && fs::exists(side_path)) {
    try {
      auto a = run.stage("embed", [&] {
        EmbeddingArtifact r;
        std::ifstream in(tsv_path);
        r.emb = read_embedding(in, g, cfg.method);
        r.sidecar = read_file(side_path.string());
        return r;
      });
      run.log() << "cache hit: embedding " << key << '\n';
      run.note_cache("embedding", true);
      return a;
    } catch (const ParseError& e) {
      run.log() << "ignoring unreadable cached embedding " << key << ": " << e.what() << '\n';
    }
  }
  auto a = run.stage("embed", [&] { return compute_embedding(cfg, g); });
  run.note_cache("embedding", false);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (cacheable && !ec) {
    std::ostringstream os;
    write_embedding(os, g, a.emb);
    write_atomic(tsv_path, os.str());
    write_atomic(side_path, a.sidecar);
  }
  return a;
}

ExperimentSettings experiment_settings(const PipelineConfig& cfg, std::vector<OmicLevel> levels) {
  ExperimentSettings s;
  s.aggregation = cfg.aggregation;
  s.aggregation.omic_levels = std::move(levels);
  s.svm = cfg.svm;
  s.split = cfg.split;
  s.lpe.laplacian = cfg.laplacian;
  s.n2v = n2v_config(cfg);
  s.seed = cfg.seed;
  s.workers = cfg.workers;
  return s;
}

struct Selection {
  TrialConfig config;
  std::optional<SearchResult> search;
  std::string log;
};

/// Random search when trials > 0, otherwise the fixed configuration.
Selection select_config(Run& run, Experiment& exp, const SearchSpace& space_in, const std::string& stage) {
  const auto& cfg = run.cfg();
  Selection sel;
  if (cfg.trials == 0) {
    sel.config = fixed_trial(cfg);
    return sel;
  }
  auto space = space_in;
  space.trials = cfg.trials;
  space.seed = derive_seed(cfg.seed, "search");
  run.note_seed("search", space.seed);
  std::ostringstream log;
  sel.search = run.stage(stage, [&] {
    return random_search(space, [&](const TrialConfig& t) { return exp.validation_auc(t); }, cfg.workers, &log);
  });
  sel.log = log.str();
  sel.config = sel.search->best;
  run.log() << stage << ": best trial " << sel.search->best_trial << " val_auc "
            << tsv::format_real(sel.search->best_score) << " " << to_json(sel.config) << '\n';
  return sel;
}

json selection_json(const Selection& sel) {
  json j = {{"config", json::parse(to_json(sel.config))}};
  if (sel.search) {
    std::size_t failed = 0;
    for (const auto& t : sel.search->trials) failed += !t.val_auc.has_value();
    j["searched"] = true;
    j["best_trial"] = sel.search->best_trial;
    j["best_val_auc"] = sel.search->best_score;
    j["trials"] = sel.search->trials.size();
    j["failed_trials"] = failed;
  } else {
    j["searched"] = false;
  }
  return j;
}

std::string absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

}  // namespace

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (dim == 0) throw ConfigError("embed.dim must be positive");
  if (n_runs == 0) throw ConfigError("eval.n_runs must be at least 1");
  if (ks.empty()) throw ConfigError("eval.ks must not be empty");
  for (auto k : ks) {
    if (k == 0) throw ConfigError("eval.ks values must be positive");
  }
  if (out_dir.empty()) throw ConfigError("paths.out must not be empty");
  synth.validate();
  auto n = n2v;
  n.dim = dim;
  n.validate();
  aggregation.validate();
  svm.validate();
  split.validate();
  if (trials > 0) {
    auto s = search;
    s.trials = trials;
    s.validate();
  }
}

PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& overrides_json) {
  json j, overrides;
  try {
    j = json_text.empty() ? json::object() : json::parse(json_text);
    overrides = json::parse(overrides_json);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON config: ") + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("command")) j = j["config"];
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  j.merge_patch(overrides);
  return from_json_obj(j);
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) { return to_json_obj(cfg).dump(2) + "\n"; }

TrialConfig fixed_trial(const PipelineConfig& cfg) {
  TrialConfig t;
  t.method = cfg.method;
  t.dim = cfg.dim;
  t.top_k_genes = cfg.aggregation.top_k_genes;
  t.C = cfg.svm.C;
  t.gamma = cfg.svm.gamma;
  return t;
}

std::string cache_dir(const PipelineConfig& cfg) {
  if (const char* env = std::getenv("PHYLEMBED_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return (fs::path(cfg.out_dir) / "cache").string();
}

void cmd_synth(const PipelineConfig& cfg, std::ostream& log) {
  Run run(cfg, "synth", log);
  auto sc = cfg.synth;
  sc.seed = derive_seed(cfg.seed, "synth");
  run.note_seed("synth", sc.seed);
  const auto data = run.stage("synth", [&] { return generate_synthetic_dataset(sc); });

  // A ready-to-use config pointing at the generated files.
  PipelineConfig next = cfg;
  next.out_dir = PipelineConfig{}.out_dir;
  next.abundance_paths.clear();
  next.taxonomy_paths.clear();
  const fs::path out(cfg.out_dir);
  for (const auto& omic : data.omics) {
    const std::string level = level_key(omic.level);
    run.output(level + "_abundance.tsv", serialize(omic.table));
    run.output(level + "_taxonomy.tsv", serialize(omic.taxonomy));
    next.abundance_paths[omic.level] = absolute_path(out / (level + "_abundance.tsv"));
    next.taxonomy_paths[omic.level] = absolute_path(out / (level + "_taxonomy.tsv"));
  }
  run.output("labels.tsv", serialize(data.labels));
  next.labels_path = absolute_path(out / "labels.tsv");

  json truth = {{"signal_genera", data.signal_genera}, {"mtx_signal_genera", data.mtx_signal_genera}};
  run.output("planted_signal.json", truth.dump(2) + "\n");
  run.output("dataset.json", pipeline_config_to_json(next));
  log << "synth: " << cfg.synth.n_samples << " samples, " << data.omics.size() << " omic level(s) in "
      << cfg.out_dir << '\n';
  run.commit();
}

void cmd_build_graph(const PipelineConfig& cfg, std::ostream& log) {
  Run run(cfg, "build-graph", log);
  const auto levels = sorted_levels(cfg.aggregation.omic_levels);
  const auto in = load_inputs(run, levels, false, false);
  const auto g = cached_graph(run, in, levels);
  std::ostringstream nodes, edges;
  write_node_table(nodes, g);
  write_edge_list(edges, g);
  run.output("graph_nodes.tsv", nodes.str());
  run.output("graph_edges.tsv", edges.str());
  log << "graph: " << g.n_nodes() << " nodes, " << g.n_edges() << " edges, hash " << hex64(graph_hash(g)) << '\n';
  run.commit();
}

void cmd_embed(const PipelineConfig& cfg, std::ostream& log) {
  Run run(cfg, "embed", log);
  const auto levels = sorted_levels(cfg.aggregation.omic_levels);
  const auto in = load_inputs(run, levels, false, false);
  const auto g = cached_graph(run, in, levels);
  const auto a = cached_embedding(run, g);
  std::ostringstream os;
  write_embedding(os, g, a.emb);
  run.output("embedding.tsv", os.str());
  run.output("embedding.json", a.sidecar);
  log << "embedding: " << to_string(a.emb.method) << ", " << a.emb.n_nodes() << " x " << a.emb.dim() << '\n';
  run.commit();
}

void cmd_represent(const PipelineConfig& cfg, std::ostream& log) {
  Run run(cfg, "represent", log);
  const auto& levels = cfg.aggregation.omic_levels;
  const auto in = load_inputs(run, sorted_levels(levels), true, true);
  const auto g = cached_graph(run, in, sorted_levels(levels));
  EmbeddingMatrix emb;
  if (!cfg.embedding_path.empty()) {
    std::istringstream is(run.input(cfg.embedding_path));
    emb = read_embedding(is, g, cfg.method);
  } else {
    emb = cached_embedding(run, g).emb;
  }
  const auto design = run.stage("represent", [&] {
    return build_design_matrix(g, emb, in.tables(levels), in.labels, cfg.aggregation);
  });
  std::ostringstream os;
  os << "sample_id\tlabel";
  for (std::size_t d = 0; d < design.X.cols(); ++d) os << "\tx" << (d + 1);
  os << '\n';
  for (std::size_t i = 0; i < design.X.rows(); ++i) {
    os << design.sample_ids[i] << '\t' << design.y[i];
    for (double x : design.X.row(i)) os << '\t' << tsv::format_real(x);
    os << '\n';
  }
  run.output("representations.tsv", os.str());
  json side = {{"n_samples", design.X.rows()},
               {"dim", design.X.cols()},
               {"aggregation", to_json_obj(cfg)["aggregation"]},
               {"dropped_zero_profile", design.dropped_zero_profile},
               {"dropped_missing", design.dropped_missing}};
  run.output("representations.json", side.dump(2) + "\n");
  log << "represent: " << design.X.rows() << " samples x " << design.X.cols() << " features ("
      << design.dropped_zero_profile.size() << " zero-profile, " << design.dropped_missing.size()
      << " missing dropped)\n";
  run.commit();
}

void cmd_train_eval(const PipelineConfig& cfg, std::ostream& log) {
  Run run(cfg, "train-eval", log);
  const auto& levels = cfg.aggregation.omic_levels;
  const auto in = load_inputs(run, sorted_levels(levels), true, true);
  Experiment exp({in.levels(sorted_levels(levels)), in.tables(levels), &in.labels},
                 experiment_settings(cfg, levels));
  auto sel = select_config(run, exp, cfg.search, "search");
  const auto runs_seed = derive_seed(cfg.seed, "runs");
  run.note_seed("runs", runs_seed);
  std::string label;
  for (auto l : levels) label += (label.empty() ? "" : "+") + std::string(to_string(l));
  const auto report = run.stage("evaluate", [&] { return exp.repeated_eval(sel.config, cfg.n_runs, runs_seed, label); });
  if (sel.search) run.output("trials.jsonl", sel.log);
  run.output("selection.json", selection_json(sel).dump(2) + "\n");
  run.output("report.json", to_json(report) + "\n");
  run.output("report.txt", to_text(report));
  log << to_text(report);
  run.commit();
}

void cmd_sweep(const PipelineConfig& cfg, std::ostream& log) {
  Run run(cfg, "sweep", log);
  const auto& levels = cfg.aggregation.omic_levels;
  const auto in = load_inputs(run, sorted_levels(levels), true, true);
  Experiment exp({in.levels(sorted_levels(levels)), in.tables(levels), &in.labels},
                 experiment_settings(cfg, levels));
  const auto runs_seed = derive_seed(cfg.seed, "runs");
  run.note_seed("runs", runs_seed);
  const auto trial = fixed_trial(cfg);
  const auto curve = run.stage("sweep", [&] { return exp.topk_sweep(cfg.ks, trial, cfg.n_runs, runs_seed); });
  std::ostringstream os;
  write_sweep(os, curve);
  run.output("sweep.tsv", os.str());
  const auto& best = curve[sweep_argmax(curve)];
  std::ostringstream summary;
  summary << "sweep maximum: k=" << best.k << " mean_auc=" << tsv::format_real(best.mean_auc)
          << " std_auc=" << tsv::format_real(best.std_auc) << '\n';
  run.output("sweep_summary.txt", summary.str());
  log << summary.str();
  run.commit();
}

void cmd_compare_omics(const PipelineConfig& cfg, std::ostream& log) {
  Run run(cfg, "compare-omics", log);
  const std::vector<OmicLevel> mgx{OmicLevel::MGX}, both{OmicLevel::MGX, OmicLevel::MTX};
  const auto in = load_inputs(run, both, true, true);
  Experiment arm_mgx({in.levels(mgx), in.tables(mgx), &in.labels}, experiment_settings(cfg, mgx));
  Experiment arm_both({in.levels(both), in.tables(both), &in.labels}, experiment_settings(cfg, both));

  std::vector<TrialConfig> cfg_mgx, cfg_both;
  json selection = json::array();
  for (auto m : cfg.search.methods) {
    auto space = cfg.search;
    space.methods = {m};
    const std::string name(to_string(m));
    auto trial = fixed_trial(cfg);
    trial.method = m;
    auto pick = [&](Experiment& exp, const std::string& arm) {
      if (cfg.trials == 0) return trial;
      auto sel = select_config(run, exp, space, "search " + arm + " " + name);
      run.output("trials_" + arm + "_" + name + ".jsonl", sel.log);
      auto j = selection_json(sel);
      j["arm"] = arm;
      selection.push_back(j);
      return sel.config;
    };
    cfg_mgx.push_back(pick(arm_mgx, "mgx"));
    cfg_both.push_back(pick(arm_both, "mgx+mtx"));
  }
  const auto runs_seed = derive_seed(cfg.seed, "runs");
  run.note_seed("runs", runs_seed);
  const auto cmp = run.stage("evaluate", [&] {
    return compare_omic_levels(arm_mgx, arm_both, cfg_mgx, cfg_both, cfg.n_runs, runs_seed);
  });
  if (!selection.empty()) run.output("selection.json", selection.dump(2) + "\n");
  run.output("compare.json", to_json(cmp) + "\n");
  run.output("compare.txt", to_table(cmp));
  log << to_table(cmp);
  run.commit();
}

}  // namespace phylembed
