#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace disc {

enum class Source { Real, Reference, Synthetic };

std::string_view source_name(Source s);
Source parse_source(std::string_view s);

struct Provenance {
  Source source = Source::Real;
  std::string policy;  // generator policy name; empty for real data
  int neg_class = -1;  // negative class used by the generator, -1 if none

  bool operator==(const Provenance&) const = default;
};

/// Points with class labels and per-row provenance; the unit exchanged
/// between pipeline stages. Coordinates are stored row-major.
class LabeledSampleSet {
 public:
  LabeledSampleSet() = default;
  LabeledSampleSet(int dim, int num_classes);

  int dim() const { return dim_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  /// Appends one row. `soft_label` is either empty or a probability vector
  /// over all classes; a set holds soft labels for all rows or for none.
  void add(std::span<const double> x, int label, const Provenance& prov, std::uint64_t seed,
           std::span<const double> soft_label = {});
  void append(const LabeledSampleSet& other);
  void reserve(std::size_t rows);

  std::span<const double> x(std::size_t i) const;
  int label(std::size_t i) const { return labels_.at(i); }
  const Provenance& provenance(std::size_t i) const { return provenance_.at(i); }
  std::uint64_t seed(std::size_t i) const { return seeds_.at(i); }
  std::span<const double> soft_label(std::size_t i) const;
  bool has_soft_labels() const { return !soft_.empty(); }

  std::span<const double> coords() const { return coords_; }
  std::span<const int> labels() const { return labels_; }

  LabeledSampleSet filter_class(int c) const;
  std::vector<std::size_t> class_counts() const;

  bool operator==(const LabeledSampleSet&) const = default;

 private:
  int dim_ = 0;
  int num_classes_ = 0;
  std::vector<double> coords_;
  std::vector<int> labels_;
  std::vector<Provenance> provenance_;
  std::vector<std::uint64_t> seeds_;
  std::vector<double> soft_;
};

/// Columnar text format: a `#` header carrying dim, classes, soft-label flag
/// and config hash, a column-name line, then one tab-separated row per
/// sample. Reals use the shortest round-trip representation, so
/// write -> read reproduces every bit.
void write_samples(std::ostream& os, const LabeledSampleSet& set, std::string_view config_hash);
LabeledSampleSet read_samples(std::istream& is, std::string* config_hash = nullptr);

void save_samples(const std::filesystem::path& path, const LabeledSampleSet& set,
                  std::string_view config_hash);
LabeledSampleSet load_samples(const std::filesystem::path& path, std::string* config_hash = nullptr);

std::string format_double(double v);

}  // namespace disc
