#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "phylembed/error.hpp"
#include "phylembed/ingest.hpp"
#include "phylembed/rng.hpp"

namespace phylembed {

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synth config: " + msg); };
  if (n_samples == 0) fail("n_samples must be positive");
  if (n_genes == 0 || n_species == 0 || n_genera == 0) fail("gene/species/genus counts must be positive");
  if (!(n_genera <= n_species && n_species <= n_genes)) fail("need n_genera <= n_species <= n_genes");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) fail("positive_fraction must lie in (0,1)");
  if (signal_genera < 1 || signal_genera > n_genera) fail("signal_genera must lie in [1, n_genera]");
  if (!(effect_size > 0.0) || !std::isfinite(effect_size)) fail("effect_size must be positive");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) fail("sparsity must lie in [0,1)");
  if (!(lognormal_sigma >= 0.0) || !std::isfinite(lognormal_mu)) fail("invalid log-normal parameters");
  if (mtx_genes > 0) {
    if (!(mtx_sample_fraction > 0.0 && mtx_sample_fraction <= 1.0)) fail("mtx_sample_fraction must lie in (0,1]");
    if (!(mtx_effect_size > 0.0)) fail("mtx_effect_size must be positive");
    if (signal_genera + mtx_extra_signal_genera > n_genera) fail("too many MTX signal genera");
  }
}

const OmicData* SynthDataset::find(OmicLevel level) const {
  for (const auto& o : omics) {
    if (o.level == level) return &o;
  }
  return nullptr;
}

namespace {

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

int width_for(std::size_t n) {
  int w = 1;
  while (n >= 10) {
    n /= 10;
    ++w;
  }
  return std::max(w, 3);
}

/// Surjective random assignment of n items onto m groups: a shuffled prefix
/// covers every group once, the remainder is uniform.
std::vector<std::size_t> partition(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::size_t> group(n);
  for (std::size_t r = 0; r < n; ++r) {
    group[order[r]] = r < m ? r : rng.below(m);
  }
  return group;
}

std::vector<std::vector<double>> draw_cpms(std::size_t n_samples, std::size_t n_genes,
                                           const SynthConfig& cfg, Rng& rng) {
  std::vector<std::vector<double>> rows(n_samples, std::vector<double>(n_genes, 0.0));
  for (auto& row : rows) {
    for (auto& v : row) {
      // Draw both variates unconditionally so the stream layout does not
      // depend on the sparsity pattern.
      double z = rng.normal();
      bool zero = rng.uniform() < cfg.sparsity;
      v = zero ? 0.0 : std::exp(cfg.lognormal_mu + cfg.lognormal_sigma * z);
    }
  }
  return rows;
}

void normalize_to_cpm(std::vector<double>& row) {
  double total = std::accumulate(row.begin(), row.end(), 0.0);
  if (total <= 0.0) return;
  const double scale = 1.0e6 / total;
  for (auto& v : row) v *= scale;
}

}  // namespace

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Rng tax_rng(derive_seed(cfg.seed, "synth/taxonomy"));
  Rng label_rng(derive_seed(cfg.seed, "synth/labels"));
  Rng cpm_rng(derive_seed(cfg.seed, "synth/cpm"));

  const int gw = width_for(std::max(cfg.n_genes, cfg.mtx_genes));
  std::vector<std::string> genus_names(cfg.n_genera), species_names(cfg.n_species);
  for (std::size_t g = 0; g < cfg.n_genera; ++g) genus_names[g] = numbered("genus_", g, width_for(cfg.n_genera));
  for (std::size_t s = 0; s < cfg.n_species; ++s) species_names[s] = numbered("sp_", s, width_for(cfg.n_species));

  const auto genus_of_species = partition(cfg.n_species, cfg.n_genera, tax_rng);
  const auto species_of_gene = partition(cfg.n_genes, cfg.n_species, tax_rng);

  std::vector<std::size_t> genus_order(cfg.n_genera);
  std::iota(genus_order.begin(), genus_order.end(), 0);
  tax_rng.shuffle(genus_order.begin(), genus_order.end());
  std::vector<char> is_signal(cfg.n_genera, 0), is_mtx_signal(cfg.n_genera, 0);
  SynthDataset ds;
  for (std::size_t r = 0; r < cfg.signal_genera; ++r) {
    is_signal[genus_order[r]] = 1;
    is_mtx_signal[genus_order[r]] = 1;
  }
  if (cfg.mtx_genes > 0) {
    for (std::size_t r = cfg.signal_genera; r < cfg.signal_genera + cfg.mtx_extra_signal_genera; ++r) {
      is_mtx_signal[genus_order[r]] = 1;
    }
  }
  for (std::size_t g = 0; g < cfg.n_genera; ++g) {
    if (is_signal[g]) ds.signal_genera.push_back(genus_names[g]);
    if (is_mtx_signal[g]) ds.mtx_signal_genera.push_back(genus_names[g]);
  }

  std::vector<std::string> samples(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) samples[i] = numbered("s", i, width_for(cfg.n_samples));

  std::vector<std::size_t> shuffled(cfg.n_samples);
  std::iota(shuffled.begin(), shuffled.end(), 0);
  label_rng.shuffle(shuffled.begin(), shuffled.end());
  const auto n_pos = static_cast<std::size_t>(
      std::llround(static_cast<double>(cfg.n_samples) * cfg.positive_fraction));
  std::vector<int> label(cfg.n_samples, 0);
  for (std::size_t r = 0; r < n_pos; ++r) label[shuffled[r]] = 1;

  // MGX
  {
    std::vector<TaxonRecord> records;
    std::vector<std::string> features(cfg.n_genes);
    std::vector<char> signal_gene(cfg.n_genes, 0);
    for (std::size_t j = 0; j < cfg.n_genes; ++j) {
      features[j] = numbered("g", j, gw);
      const auto sp = species_of_gene[j];
      const auto ge = genus_of_species[sp];
      records.push_back({features[j], species_names[sp], genus_names[ge]});
      signal_gene[j] = is_signal[ge];
    }
    auto rows = draw_cpms(cfg.n_samples, cfg.n_genes, cfg, cpm_rng);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
      if (label[i] == 1) {
        for (std::size_t j = 0; j < cfg.n_genes; ++j) {
          if (signal_gene[j]) rows[i][j] *= cfg.effect_size;
        }
      }
      normalize_to_cpm(rows[i]);
    }
    ds.omics.push_back({OmicLevel::MGX, AbundanceTable(OmicLevel::MGX, samples, features, rows),
                        TaxonomyMap(std::move(records))});
  }

  // MTX: genes hang off the existing species; only a subset of samples is profiled.
  if (cfg.mtx_genes > 0) {
    Rng mtx_tax_rng(derive_seed(cfg.seed, "synth/mtx-taxonomy"));
    Rng mtx_cpm_rng(derive_seed(cfg.seed, "synth/mtx-cpm"));
    std::vector<TaxonRecord> records;
    std::vector<std::string> features(cfg.mtx_genes);
    std::vector<char> signal_gene(cfg.mtx_genes, 0);
    for (std::size_t j = 0; j < cfg.mtx_genes; ++j) {
      features[j] = numbered("t", j, gw);
      const auto sp = mtx_tax_rng.below(cfg.n_species);
      const auto ge = genus_of_species[sp];
      records.push_back({features[j], species_names[sp], genus_names[ge]});
      signal_gene[j] = is_mtx_signal[ge];
    }
    std::vector<std::size_t> order(cfg.n_samples);
    std::iota(order.begin(), order.end(), 0);
    mtx_tax_rng.shuffle(order.begin(), order.end());
    auto n_mtx = static_cast<std::size_t>(
        std::llround(static_cast<double>(cfg.n_samples) * cfg.mtx_sample_fraction));
    n_mtx = std::max<std::size_t>(1, n_mtx);
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<long>(n_mtx));
    std::sort(chosen.begin(), chosen.end());

    auto rows = draw_cpms(chosen.size(), cfg.mtx_genes, cfg, mtx_cpm_rng);
    std::vector<std::string> mtx_samples;
    for (std::size_t r = 0; r < chosen.size(); ++r) {
      const auto i = chosen[r];
      mtx_samples.push_back(samples[i]);
      if (label[i] == 1) {
        for (std::size_t j = 0; j < cfg.mtx_genes; ++j) {
          if (signal_gene[j]) rows[r][j] *= cfg.mtx_effect_size;
        }
      }
      normalize_to_cpm(rows[r]);
    }
    ds.omics.push_back({OmicLevel::MTX,
                        AbundanceTable(OmicLevel::MTX, std::move(mtx_samples), features, rows),
                        TaxonomyMap(std::move(records))});
  }

  std::vector<std::pair<std::string, int>> entries;
  entries.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) entries.emplace_back(samples[i], label[i]);
  ds.labels = LabelTable(std::move(entries));
  return ds;
}

}  // namespace phylembed
