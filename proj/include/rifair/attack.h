#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rifair/dataset.h"
#include "rifair/diagnostics.h"
#include "rifair/model.h"
#include "rifair/taxonomy.h"

namespace rifair {

enum class AttackMode { kTrueBias, kFalseBias, kFalseFair };

inline constexpr std::array<AttackMode, 3> kAllModes{AttackMode::kTrueBias, AttackMode::kFalseBias,
                                                     AttackMode::kFalseFair};

std::string_view to_string(AttackMode mode);
std::optional<AttackMode> parse_attack_mode(std::string_view s);

// Loss targets (L_v, L_v') for a mode:
//   TrueBias  -> (y, y_diff)
//   FalseBias -> (y_diff, y)
//   FalseFair -> (y_diff, y_diff)
struct LossTargets {
  int v = 0;
  int v_prime = 0;
};
LossTargets loss_targets(AttackMode mode, int y, int y_diff);

// Predicted-label pattern that counts as success for a mode.
bool outcome_realized(AttackMode mode, int label_v, int label_v_prime, int y, int y_diff);

// Sum of clipped cross-entropies toward the mode's loss targets. Throws
// std::invalid_argument when y_diff == y.
double joint_loss(AttackMode mode, const Prediction& pred_v, const Prediction& pred_v_prime, int y, int y_diff);

struct PerturbationStep {
  std::size_t step_index = 0;  // 1-based
  std::size_t feature_index = 0;
  double old_value = 0.0;
  double new_value = 0.0;
  double delta_norm = 1.0;
};

// 1 for a categorical flip, |new - old| / (max - min) for a continuous move.
double perturbation_norm(const FeatureSpec& spec, double old_value, double new_value);

struct AttackConfig {
  AttackMode mode = AttackMode::kTrueBias;
  int max_steps = 10;
  int grid_points = 5;
  std::optional<int> y_diff;  // defaults to the other class of a binary task
  double tau_dec = 0.5;
  std::size_t similar_cap = kDefaultSimilarCap;
  std::uint64_t seed = 0;
};

enum class StopReason { kSuccess, kNoImprovement, kStepLimit };
std::string_view to_string(StopReason r);

struct AttackResult {
  AttackMode mode = AttackMode::kTrueBias;
  int y = 0;
  int y_diff = 1;
  Instance v;
  Instance v_prime;
  Instance v_adv;
  Instance v_prime_adv;
  std::vector<PerturbationStep> steps;
  std::vector<TrajectoryStep> trajectory_v;
  std::vector<TrajectoryStep> trajectory_v_prime;
  double f_v_initial = 0.0;
  double f_v_prime_initial = 0.0;
  double f_v_final = 0.0;
  double f_v_prime_final = 0.0;
  std::vector<double> joint_losses;  // initial value, then one per accepted step
  bool success = false;
  StopReason stop = StopReason::kStepLimit;
  int label_v_adv = 0;
  int label_v_prime_adv = 0;
  OutcomeClass outcome = OutcomeClass::kTF;  // of v_adv over I(v_adv)
};

// Argmax over non-sensitive features of max_k |grad_v[k] + grad_v'[k]| within
// the feature's slice. Ties go to the lowest feature index. Throws
// std::invalid_argument on mismatched dimensions.
std::size_t select_feature(const Eigen::VectorXd& grad_v, const Eigen::VectorXd& grad_v_prime,
                           const Encoder& encoder);

// Realistic replacement values for a feature currently at `current`:
// every other category, or a `grid_points` grid over the bounds plus the
// current value's neighbours one grid step away.
std::vector<double> candidate_values(const FeatureSpec& spec, double current, int grid_points);

struct Replacement {
  double value = 0.0;
  double loss = 0.0;
};

// Candidate that most lowers the joint loss when written into both v and v'.
// Empty when no candidate strictly improves on the current loss. Throws
// std::invalid_argument when the feature is sensitive or has no candidates.
std::optional<Replacement> select_replacement(const Classifier& model, const Encoder& encoder, const Instance& v,
                                              const Instance& v_prime, std::size_t feature, AttackMode mode, int y,
                                              int y_diff, int grid_points);

// Greedy gradient-guided search that applies identical non-sensitive edits to
// a similar pair until the mode's label pattern appears, no candidate lowers
// the joint loss, or max_steps edits have been made.
AttackResult rifair_attack(const Classifier& model, const Encoder& encoder, const Instance& v,
                           const Instance& v_prime, const AttackConfig& config);

// Similar-set member with the largest clean |f(v) - f(member)|; ties by
// enumeration order. Throws std::invalid_argument if no member differs from v.
const Instance& choose_counterpart(const Classifier& model, const Encoder& encoder, const Instance& v,
                                   const SimilarSet& similar);

// One signed-gradient step on every non-sensitive feature toward a higher
// loss on the true label.
Instance fgsm_baseline(const Classifier& model, const Encoder& encoder, const Instance& v, double epsilon);

struct AdfResult {
  Instance v_adv;
  Instance v_prime_adv;
  bool success = false;
  int steps = 0;
};

// Global phase of a discrimination finder: pick the member with the largest
// prediction gap, then repeatedly move the non-sensitive feature on which both
// gradients agree in sign, keeping moves that widen the gap.
AdfResult adf_baseline(const Classifier& model, const Encoder& encoder, const Instance& v,
                       const SimilarSet& similar, int max_steps, double tau_dec = 0.5, int grid_points = 5);

// Predicted label of every member of I(x) (capped) under threshold tau_dec.
std::vector<int> similar_labels(const Classifier& model, const Encoder& encoder, const Instance& x,
                                std::size_t cap, std::uint64_t seed, double tau_dec);

OutcomeClass assess_outcome(const Classifier& model, const Encoder& encoder, const Instance& x, std::size_t cap,
                            std::uint64_t seed, double tau_dec);

}  // namespace rifair
