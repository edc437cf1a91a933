#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace rifair {

// Raised for malformed schemas, unreadable files, and instances that do not
// conform to a schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FeatureKind { kCategorical, kContinuous };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kCategorical;
  std::vector<std::string> categories;  // categorical domain, in encoding order
  double min = 0.0;                     // continuous bounds
  double max = 1.0;
  bool sensitive = false;
  // Continuous values are whole numbers; replacement candidates are rounded.
  bool integer = false;
  // Set for continuous attributes that were binned into categories at load
  // time. A raw value x falls in category k where k = #{edges <= x}.
  std::vector<double> bin_edges;

  bool categorical() const { return kind == FeatureKind::kCategorical; }
  std::size_t domain_size() const { return categories.size(); }
  std::optional<std::size_t> category_index(std::string_view label) const;
};

// Ordered attribute declarations plus the label. Immutable once built; the
// constructor enforces every structural invariant.
class FeatureSchema {
 public:
  FeatureSchema(std::vector<FeatureSpec> features, std::string label_name,
                std::vector<std::string> label_domain);

  static FeatureSchema from_json(const nlohmann::json& j);
  static FeatureSchema load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Stable hex digest of the canonical JSON form. Binds checkpoints to the
  // encoding they were trained on.
  std::string hash() const;

  const std::vector<FeatureSpec>& features() const { return features_; }
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
  std::size_t size() const { return features_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  const std::string& label_name() const { return label_name_; }
  const std::vector<std::string>& label_domain() const { return label_domain_; }
  std::size_t num_classes() const { return label_domain_.size(); }
  std::optional<std::size_t> label_index(std::string_view label) const;

  const std::vector<std::size_t>& sensitive_indices() const { return sensitive_; }
  const std::vector<std::size_t>& non_sensitive_indices() const { return non_sensitive_; }
  std::size_t num_sensitive() const { return sensitive_.size(); }
  std::size_t num_non_sensitive() const { return non_sensitive_.size(); }

 private:
  std::vector<FeatureSpec> features_;
  std::string label_name_;
  std::vector<std::string> label_domain_;
  std::vector<std::size_t> sensitive_;
  std::vector<std::size_t> non_sensitive_;
};

// One labeled individual. Categorical values hold the category index, so
// values[i] is integral whenever feature i is categorical.
struct Instance {
  std::int64_t id = 0;
  std::vector<double> values;
  int label = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

std::string format_value(const FeatureSpec& spec, double value);

// Throws DataError when a value is outside its declared domain.
void validate_instance(const Instance& instance, const FeatureSchema& schema);

struct RowIssue {
  std::size_t row = 0;  // 1-based data row, header excluded
  std::string reason;
};

struct LoadReport {
  std::size_t accepted = 0;
  std::vector<RowIssue> rejected;
  std::vector<RowIssue> clamped;

  nlohmann::json to_json() const;
};

struct Dataset {
  std::vector<Instance> instances;
  LoadReport report;
};

// Reads a comma-delimited file with a header row. Columns are matched by name
// so their order does not matter. Rows that break the schema are skipped and
// listed in the report; the load only fails outright when no row survives.
Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
Dataset parse_csv(std::istream& in, const FeatureSchema& schema);

struct Slice {
  std::size_t offset = 0;
  std::size_t width = 0;
};

struct EncodedVector {
  Eigen::VectorXd dense;
  bool clamped = false;  // some continuous value was outside its bounds
};

// One-hot blocks for categorical features, min-max scaled scalars for
// continuous ones, laid out in schema order.
class Encoder {
 public:
  explicit Encoder(FeatureSchema schema);

  const FeatureSchema& schema() const { return schema_; }
  std::size_t dim() const { return dim_; }
  const std::vector<Slice>& group_map() const { return group_map_; }
  const Slice& slice(std::size_t feature) const { return group_map_.at(feature); }

  EncodedVector encode(const Instance& instance) const;
  // Inverse of encode: argmax per one-hot block, de-normalised scalars.
  std::vector<double> decode(const Eigen::VectorXd& dense) const;

 private:
  FeatureSchema schema_;
  std::vector<Slice> group_map_;
  std::size_t dim_ = 0;
};

inline constexpr std::size_t kDefaultSimilarCap = 64;

struct SimilarSet {
  Instance base;
  std::vector<Instance> members;
};

// Cartesian product over the sensitive domains with non-sensitive values held
// fixed. When the product exceeds `cap`, a seeded uniform subsample is drawn
// that always keeps the base combination. Members are in enumeration order.
SimilarSet enumerate_similar(const Instance& instance, const FeatureSchema& schema,
                             std::size_t cap = kDefaultSimilarCap, std::uint64_t seed = 0,
                             bool include_base = true);

bool share_non_sensitive(const Instance& a, const Instance& b, const FeatureSchema& schema);

// Normalised Hamming distance over sensitive attributes. Throws DataError when
// the instances differ on a non-sensitive attribute.
double distance_d(const Instance& a, const Instance& b, const FeatureSchema& schema);

// Label-stratified, seeded split. Returns (train, test).
std::pair<std::vector<Instance>, std::vector<Instance>> split(
    const std::vector<Instance>& data, double test_fraction, std::uint64_t seed);

// FNV-1a over raw bytes, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace rifair
