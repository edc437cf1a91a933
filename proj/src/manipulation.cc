#include "rifair/manipulation.h"

#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rifair {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kAccUp: return "acc_up";
    case Strategy::kFairUp: return "fair_up";
    case Strategy::kBothUp: return "both_up";
    case Strategy::kAccUpFairDown: return "acc_up_fair_down";
    case Strategy::kAccDownFairUp: return "acc_down_fair_up";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view s) {
  for (Strategy st : kAllStrategies) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

StrategyRule strategy_rule(Strategy s) {
  using C = OutcomeClass;
  switch (s) {
    case Strategy::kAccUp: return {{C::kFB, C::kFF}, {C::kTB, C::kTF}};
    case Strategy::kFairUp: return {{C::kTB, C::kFB}, {C::kFF, C::kTF}};
    case Strategy::kBothUp: return {{C::kFF, C::kFB, C::kTB}, {C::kTF}};
    case Strategy::kAccUpFairDown: return {{C::kFF, C::kTF}, {C::kTB}};
    case Strategy::kAccDownFairUp: return {{C::kTB, C::kTF}, {C::kFF}};
  }
  throw std::invalid_argument("unknown strategy");
}

std::size_t AdversarialPool::size() const {
  std::size_t n = 0;
  for (const auto& v : by_class) n += v.size();
  return n;
}

AdversarialPool build_pool(std::span<const AttackResult> results) {
  AdversarialPool pool;
  for (const auto& r : results) {
    if (!r.success && r.outcome != OutcomeClass::kTF) continue;
    pool.by_class[index_of(r.outcome)].push_back({r.v_adv, r.outcome, r.v.id, r.mode});
  }
  return pool;
}

std::string ManipulatedSet::provenance_csv() const {
  std::ostringstream os;
  os << "item_id,replaced,source_id,mode,from,to\n";
  for (const auto& p : provenance) {
    os << p.item_id << ',' << (p.replaced ? "replaced" : "original") << ',';
    if (p.replaced) {
      os << p.source_id << ',' << to_string(p.mode) << ',' << to_string(p.from) << ',' << to_string(p.to);
    } else {
      os << ",,,";
    }
    os << '\n';
  }
  return os.str();
}

ManipulatedSet manipulate(std::span<const TestItem> test_set, const AdversarialPool& pool, Strategy strategy,
                          std::size_t budget, std::uint64_t seed) {
  if (budget > test_set.size()) throw std::invalid_argument("budget exceeds the test-set size");
  const StrategyRule rule = strategy_rule(strategy);

  ManipulatedSet out;
  out.items.reserve(test_set.size());
  for (const auto& t : test_set) {
    out.items.push_back(t.instance);
    out.provenance.push_back({false, t.instance.id, 0, AttackMode::kTrueBias, t.outcome, t.outcome});
  }
  if (budget == 0) return out;

  // Same-base lookup per target class.
  std::map<std::pair<std::int64_t, OutcomeClass>, const PoolItem*> same_base;
  std::vector<const PoolItem*> any_target;
  for (OutcomeClass c : rule.targets) {
    for (const auto& p : pool.of(c)) {
      same_base.try_emplace({p.source_id, c}, &p);
      any_target.push_back(&p);
    }
  }
  if (any_target.empty()) {
    out.warnings.push_back("pool has no item of the classes required by " + std::string(to_string(strategy)) +
                           "; nothing replaced");
    return out;
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    if (std::find(rule.sources.begin(), rule.sources.end(), test_set[i].outcome) != rule.sources.end()) {
      order.push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t fallback = 0;
  for (std::size_t i : order) {
    if (out.budget_used == budget) break;
    const PoolItem* chosen = nullptr;
    for (OutcomeClass c : rule.targets) {
      auto it = same_base.find({test_set[i].instance.id, c});
      if (it != same_base.end()) {
        chosen = it->second;
        break;
      }
    }
    if (!chosen) chosen = any_target[fallback++ % any_target.size()];
    out.items[i] = chosen->instance;
    out.provenance[i] = {true, test_set[i].instance.id, chosen->source_id, chosen->mode, test_set[i].outcome,
                         chosen->outcome};
    ++out.budget_used;
  }
  if (out.budget_used < budget) {
    out.warnings.push_back("only " + std::to_string(out.budget_used) + " of " + std::to_string(budget) +
                           " items had a replaceable class");
  }
  return out;
}

PerformanceRow performance_of(std::span<const OutcomeClass> outcomes) {
  PerformanceRow row;
  row.n = outcomes.size();
  if (outcomes.empty()) return row;
  std::array<std::size_t, 4> count{};
  for (OutcomeClass c : outcomes) ++count[index_of(c)];
  const double n = static_cast<double>(row.n);
  row.tfr = static_cast<double>(count[index_of(OutcomeClass::kTF)]) / n;
  row.ffr = static_cast<double>(count[index_of(OutcomeClass::kFF)]) / n;
  row.tbr = static_cast<double>(count[index_of(OutcomeClass::kTB)]) / n;
  row.fbr = static_cast<double>(count[index_of(OutcomeClass::kFB)]) / n;
  row.acc = static_cast<double>(count[index_of(OutcomeClass::kTF)] + count[index_of(OutcomeClass::kTB)]) / n;
  row.fta = static_cast<double>(count[index_of(OutcomeClass::kTF)] + count[index_of(OutcomeClass::kFF)]) / n;
  return row;
}

PerformanceRow evaluate_manipulated(const Classifier& model, const Encoder& encoder,
                                    std::span<const Instance> items, std::size_t similar_cap, std::uint64_t seed,
                                    double tau_dec) {
  std::vector<OutcomeClass> outcomes;
  outcomes.reserve(items.size());
  for (const auto& x : items) outcomes.push_back(assess_outcome(model, encoder, x, similar_cap, seed, tau_dec));
  return performance_of(outcomes);
}

nlohmann::json PerformanceRow::to_json() const {
  return nlohmann::json{{"n", n},     {"acc", acc}, {"fta", fta}, {"fbr", fbr},
                        {"ffr", ffr}, {"tbr", tbr}, {"tfr", tfr}};
}

}  // namespace rifair
