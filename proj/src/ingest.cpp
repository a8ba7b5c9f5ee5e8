#include "phylembed/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phylembed/error.hpp"
#include "phylembed/tsv.hpp"

namespace phylembed {

std::string_view to_string(OmicLevel level) {
  return level == OmicLevel::MGX ? "MGX" : "MTX";
}

OmicLevel parse_omic_level(std::string_view text) {
  if (text == "MGX" || text == "mgx") return OmicLevel::MGX;
  if (text == "MTX" || text == "mtx") return OmicLevel::MTX;
  throw ConfigError("unknown omic level '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// AbundanceTable

AbundanceTable::AbundanceTable(OmicLevel level, std::vector<std::string> sample_ids,
                               std::vector<std::string> feature_ids,
                               const std::vector<std::vector<double>>& rows)
    : level_(level), samples_(std::move(sample_ids)), features_(std::move(feature_ids)) {
  if (rows.size() != samples_.size()) {
    throw ParseError("abundance table has " + std::to_string(rows.size()) +
                     " rows for " + std::to_string(samples_.size()) + " sample ids");
  }
  sample_index_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!sample_index_.emplace(samples_[i], i).second) {
      throw ParseError("duplicate sample id '" + samples_[i] + "'");
    }
  }
  feature_index_.reserve(features_.size());
  for (std::size_t j = 0; j < features_.size(); ++j) {
    if (!feature_index_.emplace(features_[j], j).second) {
      throw ParseError("duplicate feature id '" + features_[j] + "'");
    }
  }
  offsets_.reserve(samples_.size() + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != features_.size()) {
      throw ParseError("row for sample '" + samples_[i] + "' has " +
                       std::to_string(rows[i].size()) + " values, expected " +
                       std::to_string(features_.size()));
    }
    for (std::size_t j = 0; j < features_.size(); ++j) {
      double v = rows[i][j];
      if (!std::isfinite(v)) {
        throw ParseError("non-finite CPM at (" + samples_[i] + "," + features_[j] + ")");
      }
      if (v < 0.0) {
        throw ParseError("negative CPM at (" + samples_[i] + "," + features_[j] + ")");
      }
      if (v != 0.0) {
        columns_.push_back(static_cast<std::uint32_t>(j));
        values_.push_back(v);
      }
    }
    offsets_.push_back(values_.size());
  }
}

std::optional<std::size_t> AbundanceTable::find_sample(std::string_view id) const {
  auto it = sample_index_.find(std::string(id));
  if (it == sample_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> AbundanceTable::find_feature(std::string_view id) const {
  auto it = feature_index_.find(std::string(id));
  if (it == feature_index_.end()) return std::nullopt;
  return it->second;
}

SparseRow AbundanceTable::row(std::size_t sample) const {
  const std::size_t b = offsets_.at(sample), e = offsets_.at(sample + 1);
  return {std::span(columns_).subspan(b, e - b), std::span(values_).subspan(b, e - b)};
}

double AbundanceTable::value(std::size_t sample, std::size_t feature) const {
  auto r = row(sample);
  auto it = std::lower_bound(r.features.begin(), r.features.end(),
                             static_cast<std::uint32_t>(feature));
  if (it == r.features.end() || *it != feature) return 0.0;
  return r.values[static_cast<std::size_t>(it - r.features.begin())];
}

std::vector<double> AbundanceTable::dense_row(std::size_t sample) const {
  std::vector<double> out(features_.size(), 0.0);
  auto r = row(sample);
  for (std::size_t k = 0; k < r.features.size(); ++k) out[r.features[k]] = r.values[k];
  return out;
}

// ---------------------------------------------------------------------------
// TaxonomyMap / LabelTable

TaxonomyMap::TaxonomyMap(std::vector<TaxonRecord> records) : records_(std::move(records)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.feature_id.empty() || r.species.empty() || r.genus.empty()) {
      throw ParseError("taxonomy record " + std::to_string(i + 1) + " has an empty field");
    }
    if (!by_feature_.emplace(r.feature_id, i).second) {
      throw ParseError("duplicate feature_id '" + r.feature_id + "' in taxonomy");
    }
    auto [it, inserted] = genus_of_species_.emplace(r.species, r.genus);
    if (!inserted && it->second != r.genus) {
      throw ParseError("species " + r.species + " has conflicting genera (" + it->second +
                       ", " + r.genus + ")");
    }
  }
}

const TaxonRecord* TaxonomyMap::find(std::string_view feature_id) const {
  auto it = by_feature_.find(std::string(feature_id));
  return it == by_feature_.end() ? nullptr : &records_[it->second];
}

std::optional<std::string> TaxonomyMap::genus_of(std::string_view species) const {
  auto it = genus_of_species_.find(std::string(species));
  if (it == genus_of_species_.end()) return std::nullopt;
  return it->second;
}

LabelTable::LabelTable(std::vector<std::pair<std::string, int>> entries)
    : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [id, label] = entries_[i];
    if (label != 0 && label != 1) {
      throw ParseError("label out of range for sample '" + id + "': " + std::to_string(label));
    }
    if (!index_.emplace(id, i).second) {
      throw ParseError("duplicate sample_id '" + id + "' in labels");
    }
  }
}

std::optional<int> LabelTable::find(std::string_view sample_id) const {
  auto it = index_.find(std::string(sample_id));
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].second;
}

double LabelTable::positive_rate() const {
  if (entries_.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& e : entries_) pos += static_cast<std::size_t>(e.second);
  return static_cast<double>(pos) / static_cast<double>(entries_.size());
}

// ---------------------------------------------------------------------------
// Parsers

namespace {

std::string at_line(std::size_t line_no) { return " (line " + std::to_string(line_no) + ")"; }

std::vector<std::string_view> expect_columns(const std::string& line, std::size_t n,
                                             std::size_t line_no, const char* what) {
  auto cells = tsv::split(line);
  if (cells.size() != n) {
    throw ParseError(std::string(what) + ": expected " + std::to_string(n) + " columns, got " +
                     std::to_string(cells.size()) + at_line(line_no));
  }
  return cells;
}

}  // namespace

AbundanceTable parse_abundance_table(std::istream& in, OmicLevel level) {
  std::string line;
  if (!tsv::read_line(in, line)) throw ParseError("abundance table: missing header");
  auto header = tsv::split(line);
  if (header.size() < 2) throw ParseError("abundance table: header has no feature columns");
  std::vector<std::string> features;
  features.reserve(header.size() - 1);
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j].empty()) throw ParseError("abundance table: empty feature id in header");
    features.emplace_back(header[j]);
  }

  std::vector<std::string> samples;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = tsv::split(line);
    if (cells.size() != header.size()) {
      throw ParseError("ragged row: expected " + std::to_string(header.size()) +
                       " cells, got " + std::to_string(cells.size()) + at_line(line_no));
    }
    std::string sample(cells[0]);
    if (sample.empty()) throw ParseError("empty sample id" + at_line(line_no));
    std::vector<double> row(features.size());
    for (std::size_t j = 0; j < features.size(); ++j) {
      double v = 0.0;
      if (!tsv::parse_real(cells[j + 1], v) || !std::isfinite(v)) {
        throw ParseError("non-numeric CPM '" + std::string(cells[j + 1]) + "' at (" + sample +
                         "," + features[j] + ")" + at_line(line_no));
      }
      if (v < 0.0) {
        throw ParseError("negative CPM at (" + sample + "," + features[j] + ")" +
                         at_line(line_no));
      }
      row[j] = v;
    }
    samples.push_back(std::move(sample));
    rows.push_back(std::move(row));
  }
  return AbundanceTable(level, std::move(samples), std::move(features), rows);
}

AbundanceTable parse_abundance_table(std::string_view text, OmicLevel level) {
  std::istringstream in{std::string(text)};
  return parse_abundance_table(in, level);
}

TaxonomyMap parse_taxonomy_map(std::istream& in) {
  std::string line;
  if (!tsv::read_line(in, line)) throw ParseError("taxonomy: missing header");
  auto header = tsv::split(line);
  if (header.size() != 3) {
    throw ParseError("taxonomy: missing column, header must be feature_id, species, genus");
  }
  std::vector<TaxonRecord> records;
  std::size_t line_no = 1;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = expect_columns(line, 3, line_no, "taxonomy");
    records.push_back({std::string(cells[0]), std::string(cells[1]), std::string(cells[2])});
  }
  return TaxonomyMap(std::move(records));
}

TaxonomyMap parse_taxonomy_map(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_taxonomy_map(in);
}

LabelTable parse_labels(std::istream& in) {
  std::string line;
  if (!tsv::read_line(in, line)) throw ParseError("labels: missing header");
  if (tsv::split(line).size() != 2) {
    throw ParseError("labels: header must be sample_id, label");
  }
  std::vector<std::pair<std::string, int>> entries;
  std::size_t line_no = 1;
  while (tsv::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = expect_columns(line, 2, line_no, "labels");
    long long label = 0;
    if (!tsv::parse_int(cells[1], label)) {
      throw ParseError("non-integer label '" + std::string(cells[1]) + "'" + at_line(line_no));
    }
    if (label != 0 && label != 1) {
      throw ParseError("label out of range for sample '" + std::string(cells[0]) + "': " +
                       std::to_string(label) + at_line(line_no));
    }
    entries.emplace_back(std::string(cells[0]), static_cast<int>(label));
  }
  return LabelTable(std::move(entries));
}

LabelTable parse_labels(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_labels(in);
}

// ---------------------------------------------------------------------------
// Writers

void write_abundance_table(std::ostream& out, const AbundanceTable& table) {
  out << "sample_id";
  for (const auto& f : table.feature_ids()) out << '\t' << f;
  out << '\n';
  for (std::size_t i = 0; i < table.n_samples(); ++i) {
    out << table.sample_ids()[i];
    auto r = table.row(i);
    std::size_t k = 0;
    for (std::size_t j = 0; j < table.n_features(); ++j) {
      out << '\t';
      if (k < r.features.size() && r.features[k] == j) {
        out << tsv::format_real(r.values[k++]);
      } else {
        out << '0';
      }
    }
    out << '\n';
  }
}

void write_taxonomy_map(std::ostream& out, const TaxonomyMap& taxonomy) {
  out << "feature_id\tspecies\tgenus\n";
  for (const auto& r : taxonomy.records()) {
    out << r.feature_id << '\t' << r.species << '\t' << r.genus << '\n';
  }
}

void write_labels(std::ostream& out, const LabelTable& labels) {
  out << "sample_id\tlabel\n";
  for (const auto& [id, label] : labels.entries()) out << id << '\t' << label << '\n';
}

std::string serialize(const AbundanceTable& table) {
  std::ostringstream out;
  write_abundance_table(out, table);
  return out.str();
}

std::string serialize(const TaxonomyMap& taxonomy) {
  std::ostringstream out;
  write_taxonomy_map(out, taxonomy);
  return out.str();
}

std::string serialize(const LabelTable& labels) {
  std::ostringstream out;
  write_labels(out, labels);
  return out.str();
}

}  // namespace phylembed
