#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "phylembed/error.hpp"
#include "phylembed/experiment.hpp"
#include "phylembed/parallel.hpp"
#include "phylembed/tsv.hpp"

namespace phylembed {

namespace {

nlohmann::json trial_json(const TrialConfig& t) { return nlohmann::json::parse(to_json(t)); }

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& m : r.runs) {
    runs.push_back({{"run", m.run},
                    {"split_seed", m.split_seed},
                    {"f1", m.f1},
                    {"roc_auc", m.roc_auc},
                    {"n_train", m.n_train},
                    {"n_val", m.n_val},
                    {"n_test", m.n_test}});
  }
  return {{"label", r.label},
          {"config", trial_json(r.config)},
          {"n_samples", r.n_samples},
          {"dropped_zero_profile", r.dropped_zero_profile},
          {"dropped_missing", r.dropped_missing},
          {"mean_f1", r.mean_f1},
          {"std_f1", r.std_f1},
          {"mean_roc_auc", r.mean_auc},
          {"std_roc_auc", r.std_auc},
          {"runs", runs}};
}

std::string pm(double m, double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << m << " +/- " << s;
  return os.str();
}

std::vector<int> signed_labels(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[i] == 1 ? 1 : -1);
  return out;
}

std::vector<int> subset(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

struct Scored {
  std::vector<double> scores;
  std::vector<int> predictions;
};

Scored score_rows(const SvmModel& model, const Matrix& X, const std::vector<std::size_t>& idx) {
  Scored s;
  for (auto i : idx) {
    const double d = decision_function(model, X.row(i));
    s.scores.push_back(d);
    s.predictions.push_back(d >= 0.0 ? 1 : 0);
  }
  return s;
}

}  // namespace

std::string to_json(const EvalReport& report) { return report_json(report).dump(2); }

std::string to_text(const EvalReport& report) {
  std::ostringstream os;
  if (!report.label.empty()) os << report.label << '\n';
  os << "config   " << to_json(report.config) << '\n';
  os << "samples  " << report.n_samples << " (dropped: " << report.dropped_zero_profile
     << " zero profile, " << report.dropped_missing << " missing)\n";
  os << "runs     " << report.runs.size() << '\n';
  os << "F1       " << pm(report.mean_f1, report.std_f1) << '\n';
  os << "ROC AUC  " << pm(report.mean_auc, report.std_auc) << '\n';
  return os.str();
}

void write_sweep(std::ostream& out, const std::vector<SweepPoint>& curve) {
  out << "k\tmean_auc\tstd_auc\n";
  for (const auto& p : curve) {
    out << p.k << '\t' << tsv::format_real(p.mean_auc) << '\t' << tsv::format_real(p.std_auc) << '\n';
  }
}

std::size_t sweep_argmax(const std::vector<SweepPoint>& curve) {
  if (curve.empty()) throw ConfigError("sweep_argmax: empty curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].mean_auc > curve[best].mean_auc) best = i;
  }
  return best;
}

Experiment::Experiment(ExperimentInputs inputs, ExperimentSettings settings)
    : inputs_(std::move(inputs)), settings_(std::move(settings)) {
  if (inputs_.labels == nullptr) throw ConfigError("experiment: labels are required");
  if (inputs_.tables.empty()) throw ConfigError("experiment: at least one abundance table is required");
  settings_.aggregation.validate();
  settings_.svm.validate();
  settings_.split.validate();
  settings_.n2v.validate();
  graph_ = build_graph(inputs_.taxonomies);
}

std::shared_ptr<const EmbeddingMatrix> Experiment::embedding(EmbedMethod method, std::size_t dim,
                                                             std::size_t seed_index) {
  if (method != EmbedMethod::N2V) seed_index = 0;
  const auto key = std::make_tuple(method, dim, seed_index);
  std::promise<std::shared_ptr<const EmbeddingMatrix>> promise;
  std::shared_future<std::shared_ptr<const EmbeddingMatrix>> pending;
  {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) pending = it->second;
    else cache_.emplace(key, promise.get_future().share());
  }
  // Another caller owns the computation; wait outside the lock.
  if (pending.valid()) return pending.get();
  try {
    EmbeddingMatrix emb;
    switch (method) {
      case EmbedMethod::LPE: {
        auto opts = settings_.lpe;
        opts.seed = derive_seed(settings_.seed, "embed");
        emb = compute_lpe(graph_.topology(), dim, opts);
        break;
      }
      case EmbedMethod::RWPE:
        emb = compute_rwpe(graph_.topology(), dim, settings_.workers);
        break;
      case EmbedMethod::N2V: {
        auto cfg = settings_.n2v;
        cfg.dim = dim;
        cfg.seed = derive_seed(derive_seed(settings_.seed, "embed"), seed_index);
        emb = train_node2vec(graph_.topology(), cfg);
        break;
      }
    }
    auto value = std::make_shared<const EmbeddingMatrix>(std::move(emb));
    promise.set_value(value);
    return value;
  } catch (...) {
    promise.set_exception(std::current_exception());
    throw;
  }
}

SvmConfig Experiment::svm_config(const TrialConfig& trial) const {
  auto cfg = settings_.svm;
  cfg.C = trial.C;
  cfg.gamma = trial.gamma;
  return cfg;
}

AggregationConfig Experiment::aggregation_config(const TrialConfig& trial) const {
  auto cfg = settings_.aggregation;
  cfg.top_k_genes = trial.top_k_genes;
  return cfg;
}

DesignMatrix Experiment::design_matrix(const TrialConfig& trial, std::size_t seed_index) {
  auto emb = embedding(trial.method, trial.dim, seed_index);
  Representer rep(graph_, *emb, inputs_.tables);
  return rep.design_matrix(*inputs_.labels, aggregation_config(trial));
}

double Experiment::validation_auc(const TrialConfig& trial) {
  const auto design = design_matrix(trial, 0);
  auto spec = settings_.split;
  spec.seed = derive_seed(settings_.seed, "search-split");
  const auto split = stratified_split(design.y, spec);
  const auto train_X = design.X.select_rows(split.train);
  const auto model = train_svm(train_X, signed_labels(design.y, split.train), svm_config(trial));
  const auto scored = score_rows(model, design.X, split.val);
  return roc_auc(scored.scores, subset(design.y, split.val));
}

EvalReport Experiment::repeated_eval(const TrialConfig& trial, std::size_t n_runs,
                                     std::uint64_t base_seed, const std::string& label) {
  if (n_runs == 0) throw ConfigError("repeated_eval: n_runs must be at least 1");
  EvalReport report;
  report.label = label;
  report.config = trial;
  report.runs.resize(n_runs);

  parallel_for(n_runs, settings_.workers, [&](std::size_t r) {
    // N2V is re-initialised per run; LPE and RWPE share one embedding.
    const auto design = design_matrix(trial, r + 1);
    auto spec = settings_.split;
    spec.seed = base_seed + r;
    const auto split = stratified_split(design.y, spec);
    const auto train_X = design.X.select_rows(split.train);
    const auto model = train_svm(train_X, signed_labels(design.y, split.train), svm_config(trial));
    const auto scored = score_rows(model, design.X, split.test);
    const auto truth = subset(design.y, split.test);

    auto& m = report.runs[r];
    m.run = r;
    m.split_seed = spec.seed;
    m.f1 = f1_score(scored.predictions, truth);
    m.roc_auc = roc_auc(scored.scores, truth);
    m.n_train = split.train.size();
    m.n_val = split.val.size();
    m.n_test = split.test.size();
    if (r == 0) {
      report.n_samples = design.sample_ids.size();
      report.dropped_zero_profile = design.dropped_zero_profile.size();
      report.dropped_missing = design.dropped_missing.size();
    }
  });

  std::vector<double> f1s, aucs;
  for (const auto& m : report.runs) {
    f1s.push_back(m.f1);
    aucs.push_back(m.roc_auc);
  }
  report.mean_f1 = mean(f1s);
  report.std_f1 = stddev(f1s);
  report.mean_auc = mean(aucs);
  report.std_auc = stddev(aucs);
  return report;
}

std::vector<SweepPoint> Experiment::topk_sweep(const std::vector<std::size_t>& ks,
                                               const TrialConfig& trial, std::size_t n_runs,
                                               std::uint64_t base_seed) {
  std::vector<SweepPoint> curve;
  for (auto k : ks) {
    if (k == 0) throw ConfigError("topk_sweep: k must be positive");
    auto t = trial;
    t.top_k_genes = k;
    const auto rep = repeated_eval(t, n_runs, base_seed);
    curve.push_back({k, rep.mean_auc, rep.std_auc});
  }
  return curve;
}

OmicComparison compare_omic_levels(Experiment& mgx_only, Experiment& mgx_mtx,
                                   const std::vector<TrialConfig>& mgx_configs,
                                   const std::vector<TrialConfig>& mgx_mtx_configs,
                                   std::size_t n_runs, std::uint64_t base_seed) {
  if (mgx_configs.size() != mgx_mtx_configs.size() || mgx_configs.empty()) {
    throw ConfigError("compare_omic_levels: need one config per method for each arm");
  }
  OmicComparison out;
  for (std::size_t i = 0; i < mgx_configs.size(); ++i) {
    if (mgx_configs[i].method != mgx_mtx_configs[i].method) {
      throw ConfigError("compare_omic_levels: arm configs disagree on the method");
    }
    out.methods.push_back(mgx_configs[i].method);
    out.mgx_only.push_back(mgx_only.repeated_eval(mgx_configs[i], n_runs, base_seed, "MGX only"));
    out.mgx_mtx.push_back(mgx_mtx.repeated_eval(mgx_mtx_configs[i], n_runs, base_seed, "MGX+MTX"));
  }
  return out;
}

std::string to_json(const OmicComparison& cmp) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < cmp.methods.size(); ++i) {
    j.push_back({{"method", to_string(cmp.methods[i])},
                 {"mgx_only", report_json(cmp.mgx_only[i])},
                 {"mgx_mtx", report_json(cmp.mgx_mtx[i])}});
  }
  return j.dump(2);
}

std::string to_table(const OmicComparison& cmp) {
  constexpr int cell = 16;
  std::ostringstream os;
  auto header_block = [&](const char* name) {
    os << " | " << std::left << std::setw(cell * static_cast<int>(cmp.methods.size())) << name;
  };
  os << std::left << std::setw(10) << "";
  header_block("F1");
  header_block("ROC AUC");
  os << '\n' << std::setw(10) << "Dataset";
  for (int block = 0; block < 2; ++block) {
    os << " | ";
    for (auto m : cmp.methods) os << std::setw(cell) << to_string(m);
  }
  os << '\n';
  auto row = [&](const char* name, const std::vector<EvalReport>& reps) {
    os << std::setw(10) << name << " | ";
    for (const auto& r : reps) os << std::setw(cell) << pm(r.mean_f1, r.std_f1);
    os << " | ";
    for (const auto& r : reps) os << std::setw(cell) << pm(r.mean_auc, r.std_auc);
    os << '\n';
  };
  row("MGX only", cmp.mgx_only);
  row("MGX+MTX", cmp.mgx_mtx);
  return os.str();
}

}  // namespace phylembed
