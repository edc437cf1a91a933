#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace rifair {

// One perturbation's effect on the positive-class score f.
//
// pii = |f_after - f_before| / delta_norm and pid = sign(f_after - f_before).
// pid is empty when the score did not move; such steps contribute nothing to
// cumulative sums.
struct TrajectoryStep {
  double f_before = 0.0;
  double f_after = 0.0;
  double delta_norm = 1.0;
  double pii = 0.0;
  std::optional<int> pid;

  // pii * delta_norm * pid, or 0 when pid is undefined.
  double impact() const { return pid ? pii * delta_norm * static_cast<double>(*pid) : 0.0; }
};

struct ImpactMeasure {
  double pii = 0.0;
  std::optional<int> pid;
};

// Throws std::invalid_argument when delta_norm <= 0.
ImpactMeasure compute_pii_pid(double f_before, double f_after, double delta_norm);
TrajectoryStep make_step(double f_before, double f_after, double delta_norm);

struct DecompositionCheck {
  bool ok = false;
  double residual = 0.0;
};

inline constexpr double kDecompositionTolerance = 1e-9;

// Checks f_final == f_initial + sum of step impacts. Throws
// std::invalid_argument if the steps are not chained (each f_before equal to
// the previous f_after, the first equal to f_initial).
DecompositionCheck verify_decomposition(std::span<const TrajectoryStep> trajectory, double f_initial,
                                        double f_final);

// tau_dec - f_v: the signed cumulative impact needed to reach the threshold.
double flip_margin(double f_v, double tau_dec);

// For every prefix of the path: the predicted label changed iff the cumulative
// impact crossed flip_margin (>= from below, < from above), and prefixes that
// keep the label stay strictly inside the margin in the direction of the
// threshold.
bool check_flip_theorems(std::span<const TrajectoryStep> trajectory, double f_initial, double tau_dec);

// Fraction of steps where both members of a pair moved in the same direction.
// Steps where either pid is undefined are skipped; empty when none remain.
std::optional<double> shared_pid_fraction(std::span<const TrajectoryStep> a, std::span<const TrajectoryStep> b);

}  // namespace rifair
