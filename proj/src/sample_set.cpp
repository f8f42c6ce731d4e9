#include "disc/sample_set.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "disc/errors.hpp"

namespace disc {

std::string_view source_name(Source s) {
  switch (s) {
    case Source::Real:
      return "real";
    case Source::Reference:
      return "reference";
    case Source::Synthetic:
      return "synthetic";
  }
  return "?";
}

Source parse_source(std::string_view s) {
  if (s == "real") return Source::Real;
  if (s == "reference") return Source::Reference;
  if (s == "synthetic") return Source::Synthetic;
  throw DataError("unknown sample source '" + std::string(s) + "'");
}

LabeledSampleSet::LabeledSampleSet(int dim, int num_classes) : dim_(dim), num_classes_(num_classes) {
  if (dim < 1) throw std::invalid_argument("sample set dimension must be positive");
  if (num_classes < 1) throw std::invalid_argument("sample set needs at least one class");
}

void LabeledSampleSet::add(std::span<const double> x, int label, const Provenance& prov,
                           std::uint64_t seed, std::span<const double> soft_label) {
  if (x.size() != static_cast<std::size_t>(dim_)) {
    throw std::invalid_argument("sample dimension mismatch");
  }
  if (label < 0 || label >= num_classes_) {
    throw std::invalid_argument("label out of range: " + std::to_string(label));
  }
  const bool want_soft = !soft_label.empty();
  if (!labels_.empty() && want_soft != has_soft_labels()) {
    throw std::invalid_argument("soft labels must be present on all rows or none");
  }
  if (want_soft) {
    if (soft_label.size() != static_cast<std::size_t>(num_classes_)) {
      throw std::invalid_argument("soft label length must equal the class count");
    }
    double sum = 0.0;
    for (double p : soft_label) {
      if (p < 0.0) throw std::invalid_argument("soft label entries must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("soft label must sum to 1");
    soft_.insert(soft_.end(), soft_label.begin(), soft_label.end());
  }
  coords_.insert(coords_.end(), x.begin(), x.end());
  labels_.push_back(label);
  provenance_.push_back(prov);
  seeds_.push_back(seed);
}

void LabeledSampleSet::append(const LabeledSampleSet& other) {
  if (other.empty()) return;
  if (empty() && dim_ == 0) {
    *this = other;
    return;
  }
  if (other.dim_ != dim_ || other.num_classes_ != num_classes_) {
    throw std::invalid_argument("cannot append sample sets of different shape");
  }
  if (!empty() && other.has_soft_labels() != has_soft_labels()) {
    throw std::invalid_argument("cannot mix soft-labelled and hard-labelled sets");
  }
  coords_.insert(coords_.end(), other.coords_.begin(), other.coords_.end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
  provenance_.insert(provenance_.end(), other.provenance_.begin(), other.provenance_.end());
  seeds_.insert(seeds_.end(), other.seeds_.begin(), other.seeds_.end());
  soft_.insert(soft_.end(), other.soft_.begin(), other.soft_.end());
}

void LabeledSampleSet::reserve(std::size_t rows) {
  coords_.reserve(rows * static_cast<std::size_t>(dim_));
  labels_.reserve(rows);
  provenance_.reserve(rows);
  seeds_.reserve(rows);
}

std::span<const double> LabeledSampleSet::x(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("sample index out of range");
  return std::span<const double>(coords_).subspan(i * static_cast<std::size_t>(dim_),
                                                  static_cast<std::size_t>(dim_));
}

std::span<const double> LabeledSampleSet::soft_label(std::size_t i) const {
  if (!has_soft_labels()) return {};
  if (i >= size()) throw std::out_of_range("sample index out of range");
  const auto c = static_cast<std::size_t>(num_classes_);
  return std::span<const double>(soft_).subspan(i * c, c);
}

LabeledSampleSet LabeledSampleSet::filter_class(int c) const {
  LabeledSampleSet out(dim_, num_classes_);
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels_[i] == c) out.add(x(i), c, provenance_[i], seeds_[i], soft_label(i));
  }
  return out;
}

std::vector<std::size_t> LabeledSampleSet::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int l : labels_) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr std::string_view kMagic = "# disc-samples v1";

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no, std::string_view what) {
  T value{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + std::string(what) +
                    " from '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

void write_samples(std::ostream& os, const LabeledSampleSet& set, std::string_view config_hash) {
  os << kMagic << '\n';
  os << "# dim=" << set.dim() << " classes=" << set.num_classes()
     << " soft=" << (set.has_soft_labels() ? 1 : 0)
     << " config_hash=" << (config_hash.empty() ? "-" : config_hash) << '\n';
  for (int j = 0; j < set.dim(); ++j) os << 'x' << j << '\t';
  os << "label\tsource\tpolicy\tneg\tseed";
  if (set.has_soft_labels()) {
    for (int c = 0; c < set.num_classes(); ++c) os << "\tp" << c;
  }
  os << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double v : set.x(i)) os << format_double(v) << '\t';
    const auto& prov = set.provenance(i);
    os << set.label(i) << '\t' << source_name(prov.source) << '\t'
       << (prov.policy.empty() ? "-" : prov.policy) << '\t' << prov.neg_class << '\t'
       << set.seed(i);
    for (double p : set.soft_label(i)) os << '\t' << format_double(p);
    os << '\n';
  }
}

LabeledSampleSet read_samples(std::istream& is, std::string* config_hash) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line) || line != kMagic) {
    throw DataError("line 1: not a sample file (missing '" + std::string(kMagic) + "' header)");
  }
  ++line_no;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
    throw DataError("line 2: missing shape header");
  }
  int dim = 0, classes = 0, soft = 0;
  std::string hash;
  {
    std::istringstream hs(line.substr(2));
    std::string kv;
    while (hs >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw DataError("line 2: malformed header field '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const std::string_view val = std::string_view(kv).substr(eq + 1);
      if (key == "dim") dim = parse_number<int>(val, 2, "dim");
      else if (key == "classes") classes = parse_number<int>(val, 2, "classes");
      else if (key == "soft") soft = parse_number<int>(val, 2, "soft");
      else if (key == "config_hash") hash = std::string(val);
    }
  }
  if (dim < 1 || classes < 1) throw DataError("line 2: header must declare positive dim and classes");
  if (config_hash) *config_hash = hash == "-" ? std::string() : hash;

  ++line_no;
  if (!std::getline(is, line)) throw DataError("line 3: missing column header");
  const std::size_t ncols = static_cast<std::size_t>(dim) + 5 +
                            (soft ? static_cast<std::size_t>(classes) : 0);
  if (split_tabs(line).size() != ncols) throw DataError("line 3: unexpected column count");

  LabeledSampleSet set(dim, classes);
  std::vector<double> x(static_cast<std::size_t>(dim));
  std::vector<double> p(soft ? static_cast<std::size_t>(classes) : 0);
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != ncols) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(ncols) +
                      " columns, found " + std::to_string(cols.size()));
    }
    std::size_t k = 0;
    for (auto& v : x) v = parse_number<double>(cols[k++], line_no, "coordinate");
    const int label = parse_number<int>(cols[k++], line_no, "label");
    Provenance prov;
    try {
      prov.source = parse_source(cols[k++]);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    prov.policy = cols[k] == "-" ? std::string() : std::string(cols[k]);
    ++k;
    prov.neg_class = parse_number<int>(cols[k++], line_no, "negative class");
    const auto seed = parse_number<std::uint64_t>(cols[k++], line_no, "seed");
    for (auto& v : p) v = parse_number<double>(cols[k++], line_no, "soft label");
    if (label < 0 || label >= classes) {
      throw DataError("line " + std::to_string(line_no) + ": label " + std::to_string(label) +
                      " out of range");
    }
    try {
      set.add(x, label, prov, seed, p);
    } catch (const std::invalid_argument& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return set;
}

void save_samples(const std::filesystem::path& path, const LabeledSampleSet& set,
                  std::string_view config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  write_samples(os, set, config_hash);
  if (!os) throw DataError("write failed: " + path.string());
}

LabeledSampleSet load_samples(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open sample file: " + path.string());
  try {
    return read_samples(is, config_hash);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace disc
