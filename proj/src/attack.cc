#include "rifair/attack.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rifair {
namespace {

int label_of(const Classifier& model, const Encoder& encoder, const Instance& x, double tau_dec) {
  return predict_label(model.forward(encoder.encode(x).dense), tau_dec);
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

void require_similar_pair(const Instance& v, const Instance& v_prime, const FeatureSchema& schema) {
  if (!share_non_sensitive(v, v_prime, schema)) {
    throw std::invalid_argument("counterpart differs from the instance on a non-sensitive attribute");
  }
  if (distance_d(v, v_prime, schema) == 0.0) {
    throw std::invalid_argument("counterpart must differ from the instance on a sensitive attribute");
  }
}

}  // namespace

std::string_view to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::kTrueBias: return "tb";
    case AttackMode::kFalseBias: return "fb";
    case AttackMode::kFalseFair: return "ff";
  }
  return "?";
}

std::optional<AttackMode> parse_attack_mode(std::string_view s) {
  for (AttackMode m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kSuccess: return "success";
    case StopReason::kNoImprovement: return "no_improvement";
    case StopReason::kStepLimit: return "step_limit";
  }
  return "?";
}

LossTargets loss_targets(AttackMode mode, int y, int y_diff) {
  switch (mode) {
    case AttackMode::kTrueBias: return {y, y_diff};
    case AttackMode::kFalseBias: return {y_diff, y};
    case AttackMode::kFalseFair: return {y_diff, y_diff};
  }
  throw std::invalid_argument("unknown attack mode");
}

bool outcome_realized(AttackMode mode, int label_v, int label_v_prime, int y, int y_diff) {
  const LossTargets t = loss_targets(mode, y, y_diff);
  return label_v == t.v && label_v_prime == t.v_prime;
}

double joint_loss(AttackMode mode, const Prediction& pred_v, const Prediction& pred_v_prime, int y, int y_diff) {
  if (y == y_diff) throw std::invalid_argument("y_diff must differ from y");
  const LossTargets t = loss_targets(mode, y, y_diff);
  return cross_entropy(pred_v, t.v) + cross_entropy(pred_v_prime, t.v_prime);
}

double perturbation_norm(const FeatureSpec& spec, double old_value, double new_value) {
  if (spec.categorical()) return 1.0;
  return std::abs(new_value - old_value) / (spec.max - spec.min);
}

std::size_t select_feature(const Eigen::VectorXd& grad_v, const Eigen::VectorXd& grad_v_prime,
                           const Encoder& encoder) {
  if (grad_v.size() != grad_v_prime.size() || static_cast<std::size_t>(grad_v.size()) != encoder.dim()) {
    throw std::invalid_argument("gradient dimensions do not match the encoding");
  }
  const auto& candidates = encoder.schema().non_sensitive_indices();
  if (candidates.empty()) throw std::invalid_argument("no non-sensitive feature to perturb");
  const Eigen::VectorXd g = grad_v + grad_v_prime;
  std::size_t best = candidates.front();
  double best_score = -1.0;
  for (std::size_t i : candidates) {
    const Slice& s = encoder.slice(i);
    const double score =
        g.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.width)).cwiseAbs().maxCoeff();
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

std::vector<double> candidate_values(const FeatureSpec& spec, double current, int grid_points) {
  std::vector<double> out;
  if (spec.categorical()) {
    for (std::size_t k = 0; k < spec.domain_size(); ++k) {
      if (static_cast<double>(k) != current) out.push_back(static_cast<double>(k));
    }
    return out;
  }
  if (grid_points < 2) throw std::invalid_argument("continuous grid needs at least two points");
  const double step = (spec.max - spec.min) / (grid_points - 1);
  auto realise = [&](double x) {
    if (spec.integer) x = std::round(x);
    return std::clamp(x, spec.min, spec.max);
  };
  for (int k = 0; k < grid_points; ++k) {
    out.push_back(realise(k + 1 == grid_points ? spec.max : spec.min + k * step));
  }
  if (current - step >= spec.min) out.push_back(realise(current - step));
  if (current + step <= spec.max) out.push_back(realise(current + step));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  std::erase(out, current);
  return out;
}

std::optional<Replacement> select_replacement(const Classifier& model, const Encoder& encoder, const Instance& v,
                                              const Instance& v_prime, std::size_t feature, AttackMode mode, int y,
                                              int y_diff, int grid_points) {
  const FeatureSpec& spec = encoder.schema().feature(feature);
  if (spec.sensitive) throw std::invalid_argument("sensitive feature '" + spec.name + "' cannot be perturbed");
  const auto candidates = candidate_values(spec, v.values.at(feature), grid_points);
  if (candidates.empty()) throw std::invalid_argument("feature '" + spec.name + "' has no replacement candidates");

  const double current = joint_loss(mode, model.forward(encoder.encode(v).dense),
                                    model.forward(encoder.encode(v_prime).dense), y, y_diff);
  std::optional<Replacement> best;
  Instance a = v;
  Instance b = v_prime;
  for (double r : candidates) {
    a.values[feature] = r;
    b.values[feature] = r;
    const double loss = joint_loss(mode, model.forward(encoder.encode(a).dense),
                                   model.forward(encoder.encode(b).dense), y, y_diff);
    if (!best || loss < best->loss) best = Replacement{r, loss};
  }
  if (best && best->loss < current) return best;
  return std::nullopt;
}

AttackResult rifair_attack(const Classifier& model, const Encoder& encoder, const Instance& v,
                           const Instance& v_prime, const AttackConfig& config) {
  const FeatureSchema& schema = encoder.schema();
  require_similar_pair(v, v_prime, schema);
  if (config.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (schema.num_classes() != 2) throw std::invalid_argument("attacks need a binary task");

  AttackResult r;
  r.mode = config.mode;
  r.y = v.label;
  r.y_diff = config.y_diff.value_or(1 - v.label);
  if (r.y_diff == r.y) throw std::invalid_argument("y_diff must differ from y");
  r.v = v;
  r.v_prime = v_prime;
  r.v_adv = v;
  r.v_prime_adv = v_prime;

  const LossTargets targets = loss_targets(config.mode, r.y, r.y_diff);
  Eigen::VectorXd x_v = encoder.encode(r.v_adv).dense;
  Eigen::VectorXd x_vp = encoder.encode(r.v_prime_adv).dense;
  Prediction p_v = model.forward(x_v);
  Prediction p_vp = model.forward(x_vp);
  r.f_v_initial = p_v.positive();
  r.f_v_prime_initial = p_vp.positive();
  r.joint_losses.push_back(joint_loss(config.mode, p_v, p_vp, r.y, r.y_diff));

  auto realized = [&] {
    return outcome_realized(config.mode, predict_label(p_v, config.tau_dec), predict_label(p_vp, config.tau_dec),
                            r.y, r.y_diff);
  };

  r.success = realized();
  if (r.success) r.stop = StopReason::kSuccess;
  for (int t = 1; t <= config.max_steps && !r.success; ++t) {
    const Eigen::VectorXd g_v = model.input_gradient(x_v, targets.v);
    const Eigen::VectorXd g_vp = model.input_gradient(x_vp, targets.v_prime);
    const std::size_t feature = select_feature(g_v, g_vp, encoder);
    const auto rep = select_replacement(model, encoder, r.v_adv, r.v_prime_adv, feature, config.mode, r.y, r.y_diff,
                                        config.grid_points);
    if (!rep) {
      r.stop = StopReason::kNoImprovement;
      break;
    }
    const FeatureSpec& spec = schema.feature(feature);
    const double old_value = r.v_adv.values[feature];
    const double norm = perturbation_norm(spec, old_value, rep->value);
    r.v_adv.values[feature] = rep->value;
    r.v_prime_adv.values[feature] = rep->value;
    x_v = encoder.encode(r.v_adv).dense;
    x_vp = encoder.encode(r.v_prime_adv).dense;
    const double f_v_before = p_v.positive();
    const double f_vp_before = p_vp.positive();
    p_v = model.forward(x_v);
    p_vp = model.forward(x_vp);

    r.steps.push_back({static_cast<std::size_t>(t), feature, old_value, rep->value, norm});
    r.trajectory_v.push_back(make_step(f_v_before, p_v.positive(), norm));
    r.trajectory_v_prime.push_back(make_step(f_vp_before, p_vp.positive(), norm));
    r.joint_losses.push_back(rep->loss);

    if (realized()) {
      r.success = true;
      r.stop = StopReason::kSuccess;
    }
  }

  r.f_v_final = p_v.positive();
  r.f_v_prime_final = p_vp.positive();
  r.label_v_adv = predict_label(p_v, config.tau_dec);
  r.label_v_prime_adv = predict_label(p_vp, config.tau_dec);
  r.outcome = assess_outcome(model, encoder, r.v_adv, config.similar_cap, config.seed, config.tau_dec);
  return r;
}

const Instance& choose_counterpart(const Classifier& model, const Encoder& encoder, const Instance& v,
                                   const SimilarSet& similar) {
  const FeatureSchema& schema = encoder.schema();
  const double f_v = model.forward(encoder.encode(v).dense).positive();
  const Instance* best = nullptr;
  double best_gap = -1.0;
  for (const auto& m : similar.members) {
    if (distance_d(v, m, schema) == 0.0) continue;
    const double gap = std::abs(model.forward(encoder.encode(m).dense).positive() - f_v);
    if (gap > best_gap) {
      best_gap = gap;
      best = &m;
    }
  }
  if (!best) throw std::invalid_argument("similar set has no member other than the instance itself");
  return *best;
}

Instance fgsm_baseline(const Classifier& model, const Encoder& encoder, const Instance& v, double epsilon) {
  if (model.num_classes() != 2) throw std::invalid_argument("FGSM baseline needs a binary task");
  Instance adv = v;
  if (!(epsilon > 0.0)) return adv;
  const Eigen::VectorXd g = model.input_gradient(encoder.encode(v).dense, v.label);
  const FeatureSchema& schema = encoder.schema();
  for (std::size_t i : schema.non_sensitive_indices()) {
    const FeatureSpec& f = schema.feature(i);
    const Slice& s = encoder.slice(i);
    const auto off = static_cast<Eigen::Index>(s.offset);
    if (f.categorical()) {
      const auto cur = static_cast<Eigen::Index>(v.values[i]);
      Eigen::Index best = 0;
      const double top = g.segment(off, static_cast<Eigen::Index>(s.width)).maxCoeff(&best);
      if (top > 0.0 && top > g[off + cur]) adv.values[i] = static_cast<double>(best);
    } else {
      adv.values[i] = std::clamp(v.values[i] + epsilon * (f.max - f.min) * sign(g[off]), f.min, f.max);
    }
  }
  return adv;
}

AdfResult adf_baseline(const Classifier& model, const Encoder& encoder, const Instance& v,
                       const SimilarSet& similar, int max_steps, double tau_dec, int grid_points) {
  const FeatureSchema& schema = encoder.schema();
  AdfResult r;
  r.v_adv = v;
  r.v_prime_adv = choose_counterpart(model, encoder, v, similar);

  Prediction p_v = model.forward(encoder.encode(r.v_adv).dense);
  Prediction p_vp = model.forward(encoder.encode(r.v_prime_adv).dense);
  r.success = predict_label(p_v, tau_dec) != predict_label(p_vp, tau_dec);

  while (!r.success && r.steps < max_steps) {
    const Eigen::VectorXd x_v = encoder.encode(r.v_adv).dense;
    const Eigen::VectorXd x_vp = encoder.encode(r.v_prime_adv).dense;
    const int target = predict_label(p_v, tau_dec);
    const Eigen::VectorXd g_v = model.input_gradient(x_v, target);
    const Eigen::VectorXd g_vp = model.input_gradient(x_vp, target);

    std::optional<std::size_t> feature;
    double best_score = 0.0;
    for (std::size_t i : schema.non_sensitive_indices()) {
      const Slice& s = encoder.slice(i);
      for (std::size_t k = s.offset; k < s.offset + s.width; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (sign(g_v[kk]) == 0.0 || sign(g_v[kk]) != sign(g_vp[kk])) continue;
        const double score = std::abs(g_v[kk] + g_vp[kk]);
        if (score > best_score) {
          best_score = score;
          feature = i;
        }
      }
    }
    if (!feature) break;

    const double gap = std::abs(p_v.positive() - p_vp.positive());
    std::optional<double> best_value;
    double best_gap = gap;
    Instance a = r.v_adv;
    Instance b = r.v_prime_adv;
    for (double c : candidate_values(schema.feature(*feature), r.v_adv.values[*feature], grid_points)) {
      a.values[*feature] = c;
      b.values[*feature] = c;
      const double g = std::abs(model.forward(encoder.encode(a).dense).positive() -
                                model.forward(encoder.encode(b).dense).positive());
      if (g > best_gap) {
        best_gap = g;
        best_value = c;
      }
    }
    if (!best_value) break;
    r.v_adv.values[*feature] = *best_value;
    r.v_prime_adv.values[*feature] = *best_value;
    ++r.steps;
    p_v = model.forward(encoder.encode(r.v_adv).dense);
    p_vp = model.forward(encoder.encode(r.v_prime_adv).dense);
    r.success = predict_label(p_v, tau_dec) != predict_label(p_vp, tau_dec);
  }
  return r;
}

std::vector<int> similar_labels(const Classifier& model, const Encoder& encoder, const Instance& x,
                                std::size_t cap, std::uint64_t seed, double tau_dec) {
  const SimilarSet set = enumerate_similar(x, encoder.schema(), cap, seed, true);
  std::vector<int> labels;
  labels.reserve(set.members.size());
  for (const auto& m : set.members) labels.push_back(label_of(model, encoder, m, tau_dec));
  return labels;
}

OutcomeClass assess_outcome(const Classifier& model, const Encoder& encoder, const Instance& x, std::size_t cap,
                            std::uint64_t seed, double tau_dec) {
  const auto labels = similar_labels(model, encoder, x, cap, seed, tau_dec);
  return classify_outcome(x.label, label_of(model, encoder, x, tau_dec), labels);
}

}  // namespace rifair
