#pragma once

// Brute-force references for the greedy attacks. Written against the model
// and encoder only; nothing here calls into the attack code.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rifair/attack.h"
#include "rifair/dataset.h"
#include "rifair/model.h"

namespace rifair::testing {

inline int oracle_label(const Classifier& m, const Encoder& enc, const Instance& x, double tau) {
  return m.forward(enc.encode(x).dense).probs[1] >= tau ? 1 : 0;
}

inline bool oracle_pattern(AttackMode mode, int lv, int lvp, int y, int y_diff) {
  switch (mode) {
    case AttackMode::kTrueBias: return lv == y && lvp == y_diff;
    case AttackMode::kFalseBias: return lv == y_diff && lvp == y;
    case AttackMode::kFalseFair: return lv == y_diff && lvp == y_diff;
  }
  return false;
}

// Every value a feature may take: all categories, or the G-point grid.
inline std::vector<double> oracle_domain(const FeatureSpec& f, int grid_points) {
  std::vector<double> out;
  if (f.categorical()) {
    for (std::size_t k = 0; k < f.domain_size(); ++k) out.push_back(static_cast<double>(k));
  } else {
    for (int k = 0; k < grid_points; ++k) out.push_back(f.min + (f.max - f.min) * k / (grid_points - 1));
  }
  return out;
}

// Whether some sequence of at most `depth` shared edits to non-sensitive
// features realises the mode's label pattern.
inline bool exhaustive_reachable(const Classifier& m, const Encoder& enc, Instance v, Instance vp, AttackMode mode,
                                 int y, int y_diff, int depth, int grid_points, double tau) {
  if (oracle_pattern(mode, oracle_label(m, enc, v, tau), oracle_label(m, enc, vp, tau), y, y_diff)) return true;
  if (depth == 0) return false;
  const FeatureSchema& s = enc.schema();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.feature(i).sensitive) continue;
    const double keep = v.values[i];
    for (double r : oracle_domain(s.feature(i), grid_points)) {
      if (r == keep) continue;
      v.values[i] = vp.values[i] = r;
      if (exhaustive_reachable(m, enc, v, vp, mode, y, y_diff, depth - 1, grid_points, tau)) return true;
    }
    v.values[i] = vp.values[i] = keep;
  }
  return false;
}

// Replays the recorded edits from the base pair and checks that they land on
// the reported final pair and realise the pattern under fresh predictions.
inline bool replay_confirms(const Classifier& m, const Encoder& enc, const AttackResult& r, double tau) {
  Instance v = r.v, vp = r.v_prime;
  for (const auto& st : r.steps) {
    if (enc.schema().feature(st.feature_index).sensitive) return false;
    if (v.values[st.feature_index] != st.old_value) return false;
    v.values[st.feature_index] = vp.values[st.feature_index] = st.new_value;
  }
  if (!(v == r.v_adv) || !(vp == r.v_prime_adv)) return false;
  return oracle_pattern(r.mode, oracle_label(m, enc, v, tau), oracle_label(m, enc, vp, tau), r.y, r.y_diff);
}

struct TinyCase {
  FeatureSchema schema;
  Mlp model;
  Instance v;
  Instance v_prime;
};

// One sensitive binary attribute plus 1-3 perturbable features, each with at
// most three values (continuous ones sit on a 3-point grid).
inline TinyCase random_tiny_case(std::mt19937_64& rng) {
  std::vector<FeatureSpec> f;
  FeatureSpec s;
  s.name = "s";
  s.categories = {"p", "q"};
  s.sensitive = true;
  f.push_back(s);
  const int m = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < m; ++i) {
    FeatureSpec x;
    x.name = "x" + std::to_string(i);
    if (rng() % 2) {
      x.kind = FeatureKind::kContinuous;
      x.min = 0.0;
      x.max = 1.0;
    } else {
      const int width = 2 + static_cast<int>(rng() % 2);
      for (int k = 0; k < width; ++k) x.categories.push_back("c" + std::to_string(k));
    }
    f.push_back(x);
  }
  FeatureSchema schema(f, "y", {"0", "1"});
  Encoder enc(schema);
  const int hidden = 2 + static_cast<int>(rng() % 4);
  Mlp model = Mlp::glorot({static_cast<int>(enc.dim()), hidden, 2}, rng());
  // Spread the weights so labels actually vary across the tiny domain.
  for (auto& w : model.mutable_params().weights) w *= 3.0;
  std::normal_distribution<double> n01;
  for (auto& b : model.mutable_params().biases) {
    for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = n01(rng);
  }

  Instance v;
  v.id = static_cast<std::int64_t>(rng() % 100000);
  for (const auto& spec : schema.features()) {
    const auto dom = oracle_domain(spec, 3);
    v.values.push_back(dom[rng() % dom.size()]);
  }
  v.label = static_cast<int>(rng() % 2);
  Instance vp = v;
  vp.values[0] = 1.0 - v.values[0];
  return {std::move(schema), std::move(model), std::move(v), std::move(vp)};
}

}  // namespace rifair::testing
