#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rifair/attack.h"
#include "rifair/dataset.h"
#include "rifair/model.h"
#include "rifair/taxonomy.h"

namespace rifair {

enum class Strategy { kAccUp, kFairUp, kBothUp, kAccUpFairDown, kAccDownFairUp };

inline constexpr std::array<Strategy, 5> kAllStrategies{Strategy::kAccUp, Strategy::kFairUp, Strategy::kBothUp,
                                                        Strategy::kAccUpFairDown, Strategy::kAccDownFairUp};

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

// Which clean classes a strategy replaces, and which adversarial classes it
// may replace them with (in order of preference).
struct StrategyRule {
  std::vector<OutcomeClass> sources;
  std::vector<OutcomeClass> targets;
};
StrategyRule strategy_rule(Strategy s);

struct PoolItem {
  Instance instance;  // the perturbed v_adv, carrying its base's ground truth
  OutcomeClass outcome = OutcomeClass::kTF;
  std::int64_t source_id = 0;
  AttackMode mode = AttackMode::kTrueBias;
};

struct AdversarialPool {
  std::array<std::vector<PoolItem>, 4> by_class;

  const std::vector<PoolItem>& of(OutcomeClass c) const { return by_class[index_of(c)]; }
  std::size_t size() const;
};

// Successful attacks are filed under the class their v_adv realises; failed
// attacks contribute only when they ended in TF.
AdversarialPool build_pool(std::span<const AttackResult> results);

struct TestItem {
  Instance instance;
  OutcomeClass outcome = OutcomeClass::kTF;  // clean class under the current model
};

struct Provenance {
  bool replaced = false;
  std::int64_t item_id = 0;
  std::int64_t source_id = 0;
  AttackMode mode = AttackMode::kTrueBias;
  OutcomeClass from = OutcomeClass::kTF;
  OutcomeClass to = OutcomeClass::kTF;
};

struct ManipulatedSet {
  std::vector<Instance> items;
  std::vector<Provenance> provenance;
  std::size_t budget_used = 0;
  std::vector<std::string> warnings;

  std::string provenance_csv() const;
};

// Replaces up to `budget` items whose clean class is one of the strategy's
// sources, scanning in a seeded order. Each replacement prefers a pool item of
// a target class derived from the same base instance. Throws
// std::invalid_argument when budget exceeds the test-set size.
ManipulatedSet manipulate(std::span<const TestItem> test_set, const AdversarialPool& pool, Strategy strategy,
                          std::size_t budget, std::uint64_t seed);

struct PerformanceRow {
  std::size_t n = 0;
  double acc = 0.0;
  double fta = 0.0;
  double fbr = 0.0;
  double ffr = 0.0;
  double tbr = 0.0;
  double tfr = 0.0;

  nlohmann::json to_json() const;
};

PerformanceRow performance_of(std::span<const OutcomeClass> outcomes);

// Recomputes ACC, FTA and the class rates with every item's similar set
// re-enumerated under the current model.
PerformanceRow evaluate_manipulated(const Classifier& model, const Encoder& encoder,
                                    std::span<const Instance> items, std::size_t similar_cap = kDefaultSimilarCap,
                                    std::uint64_t seed = 0, double tau_dec = 0.5);

}  // namespace rifair
