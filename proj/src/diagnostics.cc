#include "rifair/diagnostics.h"

#include <cmath>
#include <string>

namespace rifair {

ImpactMeasure compute_pii_pid(double f_before, double f_after, double delta_norm) {
  if (!(delta_norm > 0.0)) throw std::invalid_argument("perturbation norm must be positive");
  const double change = f_after - f_before;
  ImpactMeasure m;
  m.pii = std::abs(change) / delta_norm;
  if (change > 0.0) {
    m.pid = 1;
  } else if (change < 0.0) {
    m.pid = -1;
  }
  return m;
}

TrajectoryStep make_step(double f_before, double f_after, double delta_norm) {
  const ImpactMeasure m = compute_pii_pid(f_before, f_after, delta_norm);
  return TrajectoryStep{f_before, f_after, delta_norm, m.pii, m.pid};
}

DecompositionCheck verify_decomposition(std::span<const TrajectoryStep> trajectory, double f_initial,
                                        double f_final) {
  double expected_before = f_initial;
  double total = 0.0;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    if (trajectory[i].f_before != expected_before) {
      throw std::invalid_argument("trajectory step " + std::to_string(i) + " is not chained to its predecessor");
    }
    expected_before = trajectory[i].f_after;
    total += trajectory[i].impact();
  }
  const double residual = std::abs(f_final - (f_initial + total));
  return {residual < kDecompositionTolerance, residual};
}

double flip_margin(double f_v, double tau_dec) { return tau_dec - f_v; }

bool check_flip_theorems(std::span<const TrajectoryStep> trajectory, double f_initial, double tau_dec) {
  const double margin = flip_margin(f_initial, tau_dec);
  const bool start_positive = f_initial >= tau_dec;
  double cumulative = 0.0;
  for (const auto& step : trajectory) {
    cumulative += step.impact();
    const bool label_changed = (step.f_after >= tau_dec) != start_positive;
    // Below the threshold a flip needs impact >= margin; at or above it a flip
    // needs impact < margin (margin <= 0 there).
    const bool crossed = start_positive ? cumulative < margin : cumulative >= margin;
    if (label_changed != crossed) return false;
    if (!label_changed) {
      // Tolerance before a flip: the impact toward the threshold stays inside
      // the remaining distance.
      const double toward = start_positive ? -cumulative : cumulative;
      const double distance = std::abs(margin);
      const bool inside = start_positive ? toward <= distance : toward < distance;
      if (!inside) return false;
    }
  }
  return true;
}

std::optional<double> shared_pid_fraction(std::span<const TrajectoryStep> a, std::span<const TrajectoryStep> b) {
  const std::size_t n = std::min(a.size(), b.size());
  std::size_t counted = 0;
  std::size_t shared = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!a[i].pid || !b[i].pid) continue;
    ++counted;
    if (*a[i].pid == *b[i].pid) ++shared;
  }
  if (counted == 0) return std::nullopt;
  return static_cast<double>(shared) / static_cast<double>(counted);
}

}  // namespace rifair
