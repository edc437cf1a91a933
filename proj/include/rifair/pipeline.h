#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rifair/attack.h"
#include "rifair/dataset.h"
#include "rifair/evaluation.h"
#include "rifair/model.h"

namespace rifair {

struct AttackSelection {
  bool fgsm = true;
  bool adf = true;
  std::array<bool, 3> rifair{true, true, true};  // TB, FB, FF

  // "all", "fgsm", "adf", or a mode name ("tb", "fb", "ff").
  static std::optional<AttackSelection> parse(std::string_view mode);
};

struct AttackOptions {
  AttackSelection selection;
  int steps = 10;
  int grid_points = 5;
  double tau_dec = 0.5;
  double epsilon = 0.1;
  std::size_t similar_cap = kDefaultSimilarCap;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct FgsmOutcome {
  Instance adv;
  int label = 0;
  bool success = false;  // the perturbed instance is misclassified
};

// Everything recorded for one attacked test instance.
struct InstanceBundle {
  Instance base;
  int clean_label = 0;
  double clean_positive = 0.0;
  std::vector<int> clean_similar_labels;
  std::optional<FgsmOutcome> fgsm;
  std::optional<AdfResult> adf;
  std::array<std::optional<AttackResult>, 3> rifair;
  // Per RIFair mode: label and d(v_adv, .) for each member of I(v_adv).
  std::array<std::vector<RifMember>, 3> members;

  std::size_t attack_count() const;
};

InstanceBundle attack_instance(const Classifier& model, const Encoder& encoder, const Instance& v,
                               const AttackOptions& options);

// Runs attack_instance over the set on a worker pool. Output order follows the
// input order regardless of thread count.
std::vector<InstanceBundle> attack_all(const Classifier& model, const Encoder& encoder,
                                       std::span<const Instance> instances, const AttackOptions& options);

// Throws std::invalid_argument if the bundle lacks any of the five attacks.
InstanceSummary summarize(const InstanceBundle& bundle);

nlohmann::json to_json(const InstanceBundle& bundle);
InstanceBundle bundle_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AttackResult& r);
AttackResult attack_result_from_json(const nlohmann::json& j);

// step, feature, old, new, delta_norm, f_v, f_v', pii_v, pid_v, pii_v', pid_v'
std::string trajectory_csv(const AttackResult& r, const FeatureSchema& schema);

// Line chart of f(v) and f(v') against step with the decision threshold.
std::string trajectory_svg(const AttackResult& r, double tau_dec);

}  // namespace rifair
