#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rifair/taxonomy.h"

namespace rifair {

// 0/1 disagreement between two labels.
constexpr double label_distance(int a, int b) { return a == b ? 0.0 : 1.0; }

struct RifCheckConfig {
  double tolerance = 0.5;   // tau; on the 0/1 scale any value below 1 forbids disagreement
  double percentile = 0.95;
};

// A similar adversarial member v'_adv of I(v_adv): its predicted label and its
// distance d(v_adv, v'_adv). The member equal to v_adv has d = 0.
struct RifMember {
  int label = 0;
  double d = 0.0;
};

// Nearest-rank percentile of r = D/d over pairs with d > 0. Each pair is
// (D, d). Throws std::invalid_argument when no pair has d > 0.
double estimate_k_emp(std::span<const std::pair<double, double>> pairs, double percentile = 0.95);

// D(y, label(v'_adv)) <= min(k_emp * d, tau) for every member.
bool check_rif(int y, std::span<const RifMember> members, double k_emp, double tau);

struct RifRecord {
  int y = 0;
  int label_adv = 0;
  std::vector<RifMember> members;
  bool rif_pass = false;
};

// The implication of a passing RIF check: v_adv is predicted correctly and
// every other member stays within min(k_emp * d, tau) of v_adv's label.
// Returns false when a record flagged as passing breaks either clause.
bool check_rif_implication(const RifRecord& record, double k_emp, double tau);

// What aggregation needs from one attacked test instance.
struct InstanceSummary {
  std::int64_t id = 0;
  int y = 0;
  int clean_label = 0;
  std::vector<int> clean_similar_labels;
  bool fgsm_success = false;
  bool adf_success = false;
  std::array<bool, 3> mode_success{};           // TB, FB, FF
  std::array<OutcomeClass, 3> mode_outcome{};
  std::array<int, 3> mode_label_adv{};
  std::array<std::vector<RifMember>, 3> mode_members;
};

struct InstanceRecord {
  std::int64_t id = 0;
  int clean_label = 0;
  int y = 0;
  std::array<bool, 3> success{};
  int n_attack = 0;
  bool rif_pass = false;
  bool implication_ok = true;
};

struct EvalReport {
  std::size_t n = 0;
  double acc = 0.0;
  double fta = 0.0;
  double ar_attack = 0.0;         // FGSM produced an inaccurate instance
  double if_attack = 0.0;         // ADF produced a biased pair
  double rif_attack = 0.0;        // at least one RIFair mode succeeded
  double rifair_ar_attack = 0.0;  // FB or FF succeeded
  double rifair_if_attack = 0.0;  // TB or FB succeeded
  double tbr = 0.0;
  double fbr = 0.0;
  double ffr = 0.0;
  double tfr = 0.0;
  std::array<std::size_t, 4> n_attack_hist{};
  double k_emp = 0.0;
  double rif_pass_rate = 0.0;
  std::size_t implication_violations = 0;
  std::vector<InstanceRecord> records;  // sorted by id

  nlohmann::json to_json() const;
  std::string records_csv() const;
};

// Folds per-instance summaries into the report. Order of `items` does not
// matter. Throws std::invalid_argument on an empty input or a summary missing
// its similar-set labels.
EvalReport aggregate(std::span<const InstanceSummary> items, const RifCheckConfig& config = {});

}  // namespace rifair
