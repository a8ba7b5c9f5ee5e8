#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace phylembed {

enum class OmicLevel : std::uint8_t { MGX, MTX };

std::string_view to_string(OmicLevel level);
/// Accepts "MGX"/"mgx"/"MTX"/"mtx".
OmicLevel parse_omic_level(std::string_view text);

/// Non-zero entries of one sample, sorted by feature index.
struct SparseRow {
  std::span<const std::uint32_t> features;
  std::span<const double> values;
};

/// Samples x features CPM matrix of one omic level. Zero entries are not
/// stored. Immutable once constructed.
class AbundanceTable {
 public:
  AbundanceTable() = default;

  /// Validates ids and values; `rows` is dense, one vector per sample.
  AbundanceTable(OmicLevel level, std::vector<std::string> sample_ids,
                 std::vector<std::string> feature_ids,
                 const std::vector<std::vector<double>>& rows);

  OmicLevel omic_level() const noexcept { return level_; }
  const std::vector<std::string>& sample_ids() const noexcept { return samples_; }
  const std::vector<std::string>& feature_ids() const noexcept { return features_; }
  std::size_t n_samples() const noexcept { return samples_.size(); }
  std::size_t n_features() const noexcept { return features_.size(); }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::optional<std::size_t> find_sample(std::string_view id) const;
  std::optional<std::size_t> find_feature(std::string_view id) const;

  double value(std::size_t sample, std::size_t feature) const;
  SparseRow row(std::size_t sample) const;
  std::vector<double> dense_row(std::size_t sample) const;

 private:
  OmicLevel level_ = OmicLevel::MGX;
  std::vector<std::string> samples_;
  std::vector<std::string> features_;
  std::unordered_map<std::string, std::size_t> sample_index_;
  std::unordered_map<std::string, std::size_t> feature_index_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> columns_;
  std::vector<double> values_;
};

struct TaxonRecord {
  std::string feature_id;
  std::string species;
  std::string genus;
  friend bool operator==(const TaxonRecord&, const TaxonRecord&) = default;
};

/// feature -> (species, genus) assignments, insertion ordered.
class TaxonomyMap {
 public:
  TaxonomyMap() = default;
  explicit TaxonomyMap(std::vector<TaxonRecord> records);

  const std::vector<TaxonRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  const TaxonRecord* find(std::string_view feature_id) const;
  std::optional<std::string> genus_of(std::string_view species) const;

 private:
  std::vector<TaxonRecord> records_;
  std::unordered_map<std::string, std::size_t> by_feature_;
  std::unordered_map<std::string, std::string> genus_of_species_;
};

/// sample -> binary phenotype label (1 = present), file ordered.
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(std::vector<std::pair<std::string, int>> entries);

  const std::vector<std::pair<std::string, int>>& entries() const noexcept {
    return entries_;
  }
  std::size_t size() const noexcept { return entries_.size(); }
  std::optional<int> find(std::string_view sample_id) const;
  double positive_rate() const;

 private:
  std::vector<std::pair<std::string, int>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

AbundanceTable parse_abundance_table(std::istream& in, OmicLevel level);
AbundanceTable parse_abundance_table(std::string_view text, OmicLevel level);
TaxonomyMap parse_taxonomy_map(std::istream& in);
TaxonomyMap parse_taxonomy_map(std::string_view text);
LabelTable parse_labels(std::istream& in);
LabelTable parse_labels(std::string_view text);

void write_abundance_table(std::ostream& out, const AbundanceTable& table);
void write_taxonomy_map(std::ostream& out, const TaxonomyMap& taxonomy);
void write_labels(std::ostream& out, const LabelTable& labels);
std::string serialize(const AbundanceTable& table);
std::string serialize(const TaxonomyMap& taxonomy);
std::string serialize(const LabelTable& labels);

// ---------------------------------------------------------------------------
// Synthetic planted-signal datasets

struct SynthConfig {
  std::size_t n_samples = 200;
  std::size_t n_genes = 500;
  std::size_t n_species = 50;
  std::size_t n_genera = 10;
  double positive_fraction = 0.17;
  std::size_t signal_genera = 2;
  double effect_size = 3.0;
  double sparsity = 0.8;
  std::uint64_t seed = 0;

  // Log-normal baseline for non-zero CPMs before row normalisation.
  double lognormal_mu = 2.0;
  double lognormal_sigma = 1.0;

  // Optional metatranscriptomic level; disabled when mtx_genes == 0.
  std::size_t mtx_genes = 0;
  double mtx_sample_fraction = 0.45;
  double mtx_effect_size = 3.0;
  // Genera carrying signal in MTX only, on top of the shared signal genera.
  std::size_t mtx_extra_signal_genera = 0;

  void validate() const;
};

struct OmicData {
  OmicLevel level;
  AbundanceTable table;
  TaxonomyMap taxonomy;
};

struct SynthDataset {
  std::vector<OmicData> omics;  // MGX first, then MTX when enabled
  LabelTable labels;
  std::vector<std::string> signal_genera;
  std::vector<std::string> mtx_signal_genera;

  const OmicData* find(OmicLevel level) const;
};

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg);

}  // namespace phylembed
