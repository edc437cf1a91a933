#include "rifair/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace rifair {
namespace {

using nlohmann::json;

std::vector<std::string> bin_labels(const std::vector<double>& edges) {
  auto fmt = [](double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  };
  std::vector<std::string> labels;
  labels.push_back("<" + fmt(edges.front()));
  for (std::size_t i = 1; i < edges.size(); ++i) {
    labels.push_back("[" + fmt(edges[i - 1]) + "," + fmt(edges[i]) + ")");
  }
  labels.push_back(">=" + fmt(edges.back()));
  return labels;
}

std::size_t bin_of(const std::vector<double>& edges, double x) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Double-quoted cells may contain commas and "" escapes.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.emplace_back(trim(cur));
  return cells;
}

FeatureSpec feature_from_json(const json& j) {
  FeatureSpec f;
  f.name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  f.sensitive = j.value("sensitive", false);
  if (kind == "categorical") {
    f.kind = FeatureKind::kCategorical;
    f.categories = j.at("domain").get<std::vector<std::string>>();
  } else if (kind == "continuous") {
    const auto bounds = j.at("domain").get<std::vector<double>>();
    if (bounds.size() != 2) throw DataError("feature '" + f.name + "': continuous domain must be [min, max]");
    f.kind = FeatureKind::kContinuous;
    f.min = bounds[0];
    f.max = bounds[1];
    f.integer = j.value("integer", false);
    if (j.contains("bin_edges")) f.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    // A sensitive continuous attribute needs a finite domain to enumerate.
    if (f.sensitive && f.bin_edges.empty()) f.bin_edges = {40.0};
    if (!f.bin_edges.empty()) {
      if (!std::is_sorted(f.bin_edges.begin(), f.bin_edges.end()) ||
          std::adjacent_find(f.bin_edges.begin(), f.bin_edges.end()) != f.bin_edges.end()) {
        throw DataError("feature '" + f.name + "': bin_edges must be strictly increasing");
      }
      f.kind = FeatureKind::kCategorical;
      f.categories = bin_labels(f.bin_edges);
    }
  } else {
    throw DataError("feature '" + f.name + "': unknown kind '" + kind + "'");
  }
  return f;
}

json feature_to_json(const FeatureSpec& f) {
  json j;
  j["name"] = f.name;
  if (!f.bin_edges.empty()) {
    j["kind"] = "continuous";
    j["domain"] = {f.min, f.max};
    j["bin_edges"] = f.bin_edges;
  } else if (f.categorical()) {
    j["kind"] = "categorical";
    j["domain"] = f.categories;
  } else {
    j["kind"] = "continuous";
    j["domain"] = {f.min, f.max};
    if (f.integer) j["integer"] = true;
  }
  j["sensitive"] = f.sensitive;
  return j;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

std::optional<std::size_t> FeatureSpec::category_index(std::string_view label) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == label) return i;
  }
  return std::nullopt;
}

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features, std::string label_name,
                             std::vector<std::string> label_domain)
    : features_(std::move(features)),
      label_name_(std::move(label_name)),
      label_domain_(std::move(label_domain)) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const FeatureSpec& f = features_[i];
    if (f.name.empty()) throw DataError("feature " + std::to_string(i) + " has no name");
    if (!names.insert(f.name).second) throw DataError("duplicate feature name '" + f.name + "'");
    if (f.categorical()) {
      // Singleton domains are allowed: a sensitive attribute may be fixed.
      std::set<std::string> labels(f.categories.begin(), f.categories.end());
      if (labels.empty() || labels.size() != f.categories.size()) {
        throw DataError("feature '" + f.name + "': categorical domain must be non-empty and distinct");
      }
    } else if (!(f.min < f.max)) {
      throw DataError("feature '" + f.name + "': continuous bounds need min < max");
    }
    (f.sensitive ? sensitive_ : non_sensitive_).push_back(i);
  }
  if (sensitive_.empty()) throw DataError("schema declares no sensitive feature");
  if (non_sensitive_.empty()) throw DataError("schema declares no non-sensitive feature");
  if (label_name_.empty()) throw DataError("schema has no label name");
  if (names.count(label_name_)) throw DataError("label '" + label_name_ + "' is also listed as a feature");
  std::set<std::string> classes(label_domain_.begin(), label_domain_.end());
  if (classes.size() < 2 || classes.size() != label_domain_.size()) {
    throw DataError("label domain needs at least two distinct classes");
  }
}

FeatureSchema FeatureSchema::from_json(const json& j) {
  try {
    std::vector<FeatureSpec> features;
    for (const auto& f : j.at("features")) features.push_back(feature_from_json(f));
    return FeatureSchema(std::move(features), j.at("label_name").get<std::string>(),
                         j.at("label_domain").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed schema: ") + e.what());
  }
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("schema file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json FeatureSchema::to_json() const {
  json features = json::array();
  for (const auto& f : features_) features.push_back(feature_to_json(f));
  return json{{"features", features}, {"label_name", label_name_}, {"label_domain", label_domain_}};
}

std::string FeatureSchema::hash() const { return fnv1a_hex(to_json().dump()); }

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureSchema::label_index(std::string_view label) const {
  for (std::size_t i = 0; i < label_domain_.size(); ++i) {
    if (label_domain_[i] == label) return i;
  }
  return std::nullopt;
}

std::string format_value(const FeatureSpec& spec, double value) {
  if (spec.categorical()) {
    const auto idx = static_cast<std::size_t>(value);
    return idx < spec.categories.size() ? spec.categories[idx] : "?";
  }
  std::ostringstream os;
  os << std::setprecision(10) << value;
  return os.str();
}

void validate_instance(const Instance& instance, const FeatureSchema& schema) {
  if (instance.values.size() != schema.size()) {
    throw DataError("instance " + std::to_string(instance.id) + " has " +
                    std::to_string(instance.values.size()) + " values, schema has " +
                    std::to_string(schema.size()));
  }
  if (instance.label < 0 || static_cast<std::size_t>(instance.label) >= schema.num_classes()) {
    throw DataError("instance " + std::to_string(instance.id) + " has label outside the label domain");
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const FeatureSpec& f = schema.feature(i);
    const double v = instance.values[i];
    if (f.categorical()) {
      if (v < 0 || v != std::floor(v) || v >= static_cast<double>(f.domain_size())) {
        throw DataError("instance " + std::to_string(instance.id) + ": '" + f.name + "' outside its domain");
      }
    } else if (!(v >= f.min && v <= f.max)) {
      throw DataError("instance " + std::to_string(instance.id) + ": '" + f.name + "' outside its bounds");
    }
  }
}

json LoadReport::to_json() const {
  auto issues = [](const std::vector<RowIssue>& list) {
    json a = json::array();
    for (const auto& r : list) a.push_back({{"row", r.row}, {"reason", r.reason}});
    return a;
  };
  return json{{"accepted", accepted}, {"rejected", issues(rejected)}, {"clamped", issues(clamped)}};
}

Dataset parse_csv(std::istream& in, const FeatureSchema& schema) {
  Dataset out;
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_record(line);

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);
  std::vector<std::size_t> feature_col(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    auto it = column.find(schema.feature(i).name);
    if (it == column.end()) throw DataError("dataset is missing column '" + schema.feature(i).name + "'");
    feature_col[i] = it->second;
  }
  auto label_it = column.find(schema.label_name());
  if (label_it == column.end()) throw DataError("dataset is missing label column '" + schema.label_name() + "'");
  const std::size_t label_col = label_it->second;

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_record(line);
    if (cells.size() != header.size()) {
      out.report.rejected.push_back({row, "expected " + std::to_string(header.size()) + " fields, found " +
                                              std::to_string(cells.size())});
      continue;
    }
    Instance inst;
    inst.id = static_cast<std::int64_t>(row);
    inst.values.resize(schema.size());
    std::string reason;
    std::vector<RowIssue> clamps;
    for (std::size_t i = 0; i < schema.size() && reason.empty(); ++i) {
      const FeatureSpec& f = schema.feature(i);
      const std::string& cell = cells[feature_col[i]];
      if (!f.bin_edges.empty()) {
        if (auto x = parse_double(cell)) {
          inst.values[i] = static_cast<double>(bin_of(f.bin_edges, *x));
        } else if (auto k = f.category_index(cell)) {
          inst.values[i] = static_cast<double>(*k);
        } else {
          reason = "unparseable value '" + cell + "' for binned feature '" + f.name + "'";
        }
      } else if (f.categorical()) {
        if (auto k = f.category_index(cell)) {
          inst.values[i] = static_cast<double>(*k);
        } else {
          reason = "unknown category '" + cell + "' for feature '" + f.name + "'";
        }
      } else if (auto x = parse_double(cell)) {
        double v = *x;
        if (v < f.min || v > f.max) {
          clamps.push_back({row, "feature '" + f.name + "' value " + cell + " clamped to bounds"});
          v = std::clamp(v, f.min, f.max);
        }
        inst.values[i] = v;
      } else {
        reason = "non-numeric value '" + cell + "' for feature '" + f.name + "'";
      }
    }
    if (reason.empty()) {
      if (auto y = schema.label_index(cells[label_col])) {
        inst.label = static_cast<int>(*y);
      } else {
        reason = "unknown label '" + cells[label_col] + "'";
      }
    }
    if (!reason.empty()) {
      out.report.rejected.push_back({row, reason});
      continue;
    }
    out.report.clamped.insert(out.report.clamped.end(), clamps.begin(), clamps.end());
    out.instances.push_back(std::move(inst));
  }
  out.report.accepted = out.instances.size();
  if (row > 0 && out.instances.empty()) {
    throw DataError("every one of " + std::to_string(row) + " rows violates the schema (first: row " +
                    std::to_string(out.report.rejected.front().row) + ": " +
                    out.report.rejected.front().reason + ")");
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_csv(in, schema);
}

Encoder::Encoder(FeatureSchema schema) : schema_(std::move(schema)) {
  for (const auto& f : schema_.features()) {
    const std::size_t width = f.categorical() ? f.domain_size() : 1;
    group_map_.push_back({dim_, width});
    dim_ += width;
  }
}

EncodedVector Encoder::encode(const Instance& instance) const {
  if (instance.values.size() != schema_.size()) {
    throw DataError("instance " + std::to_string(instance.id) + " does not match the schema width");
  }
  EncodedVector out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_)), false};
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    const FeatureSpec& f = schema_.feature(i);
    const Slice& s = group_map_[i];
    const double v = instance.values[i];
    if (f.categorical()) {
      const auto k = static_cast<std::size_t>(v);
      if (v < 0 || k >= f.domain_size() || v != std::floor(v)) {
        throw DataError("instance " + std::to_string(instance.id) + ": category index out of range for '" +
                        f.name + "'");
      }
      out.dense[static_cast<Eigen::Index>(s.offset + k)] = 1.0;
    } else {
      double z = (v - f.min) / (f.max - f.min);
      if (z < 0.0 || z > 1.0) {
        out.clamped = true;
        z = std::clamp(z, 0.0, 1.0);
      }
      out.dense[static_cast<Eigen::Index>(s.offset)] = z;
    }
  }
  return out;
}

std::vector<double> Encoder::decode(const Eigen::VectorXd& dense) const {
  if (static_cast<std::size_t>(dense.size()) != dim_) throw DataError("decode: dimension mismatch");
  std::vector<double> values(schema_.size());
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    const FeatureSpec& f = schema_.feature(i);
    const Slice& s = group_map_[i];
    if (f.categorical()) {
      Eigen::Index best = 0;
      dense.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.width)).maxCoeff(&best);
      values[i] = static_cast<double>(best);
    } else {
      values[i] = f.min + dense[static_cast<Eigen::Index>(s.offset)] * (f.max - f.min);
    }
  }
  return values;
}

bool share_non_sensitive(const Instance& a, const Instance& b, const FeatureSchema& schema) {
  for (std::size_t i : schema.non_sensitive_indices()) {
    if (a.values.at(i) != b.values.at(i)) return false;
  }
  return true;
}

double distance_d(const Instance& a, const Instance& b, const FeatureSchema& schema) {
  if (!share_non_sensitive(a, b, schema)) {
    throw DataError("instances " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                    " differ on a non-sensitive attribute and are not similar");
  }
  std::size_t differing = 0;
  for (std::size_t i : schema.sensitive_indices()) {
    if (a.values.at(i) != b.values.at(i)) ++differing;
  }
  return static_cast<double>(differing) / static_cast<double>(schema.num_sensitive());
}

SimilarSet enumerate_similar(const Instance& instance, const FeatureSchema& schema, std::size_t cap,
                             std::uint64_t seed, bool include_base) {
  if (cap == 0) throw DataError("similar-set cap must be positive");
  const auto& sens = schema.sensitive_indices();
  std::vector<std::size_t> radix;
  std::size_t total = 1;
  std::size_t base_code = 0;
  bool saturated = false;
  for (std::size_t i : sens) {
    const std::size_t r = schema.feature(i).domain_size();
    radix.push_back(r);
    if (total > std::numeric_limits<std::size_t>::max() / r) saturated = true;
    total = saturated ? std::numeric_limits<std::size_t>::max() : total * r;
  }
  for (std::size_t k = 0; k < sens.size(); ++k) {
    base_code = base_code * radix[k] + static_cast<std::size_t>(instance.values.at(sens[k]));
  }

  std::vector<std::size_t> codes;
  if (total <= cap) {
    codes.resize(total);
    std::iota(codes.begin(), codes.end(), std::size_t{0});
  } else {
    // Floyd's sampling of cap-1 distinct codes from the non-base codes.
    std::uint64_t s = seed;
    for (double v : instance.values) s = mix(s, std::hash<double>{}(v));
    std::mt19937_64 rng(s);
    const std::size_t pool = total - 1;
    std::set<std::size_t> picked;
    for (std::size_t j = pool - (cap - 1); j < pool; ++j) {
      std::uniform_int_distribution<std::size_t> dist(0, j);
      const std::size_t t = dist(rng);
      if (!picked.insert(t).second) picked.insert(j);
    }
    codes.push_back(base_code);
    for (std::size_t t : picked) codes.push_back(t >= base_code ? t + 1 : t);
    std::sort(codes.begin(), codes.end());
  }

  SimilarSet out{instance, {}};
  out.members.reserve(codes.size());
  for (std::size_t code : codes) {
    if (!include_base && code == base_code) continue;
    Instance m = instance;
    std::size_t c = code;
    for (std::size_t k = sens.size(); k-- > 0;) {
      m.values[sens[k]] = static_cast<double>(c % radix[k]);
      c /= radix[k];
    }
    out.members.push_back(std::move(m));
  }
  return out;
}

std::pair<std::vector<Instance>, std::vector<Instance>> split(const std::vector<Instance>& data,
                                                              double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DataError("test fraction must lie in (0, 1)");
  if (data.empty()) throw DataError("cannot split an empty dataset");

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].label].push_back(i);

  std::mt19937_64 rng(seed);
  for (auto& [label, idx] : by_label) std::shuffle(idx.begin(), idx.end(), rng);

  // Largest-remainder allocation keeps the test size at round(f * N).
  const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));
  std::vector<std::pair<double, int>> remainders;
  std::map<int, std::size_t> quota;
  std::size_t assigned = 0;
  for (const auto& [label, idx] : by_label) {
    const double exact = test_fraction * static_cast<double>(idx.size());
    quota[label] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[label];
    remainders.emplace_back(exact - std::floor(exact), label);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < target && k < remainders.size(); ++k, ++assigned) {
    ++quota[remainders[k].second];
  }

  std::vector<Instance> train, test;
  for (const auto& [label, idx] : by_label) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < quota[label] ? test : train).push_back(data[idx[k]]);
    }
  }
  std::shuffle(train.begin(), train.end(), rng);
  std::shuffle(test.begin(), test.end(), rng);
  return {std::move(train), std::move(test)};
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return fnv1a_hex(os.str());
}

}  // namespace rifair
