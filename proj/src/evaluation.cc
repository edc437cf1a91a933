#include "rifair/evaluation.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace rifair {

std::string_view to_string(OutcomeClass c) {
  switch (c) {
    case OutcomeClass::kTF: return "TF";
    case OutcomeClass::kFF: return "FF";
    case OutcomeClass::kTB: return "TB";
    case OutcomeClass::kFB: return "FB";
  }
  return "?";
}

std::optional<OutcomeClass> parse_outcome(std::string_view s) {
  for (OutcomeClass c : kAllOutcomes) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

OutcomeClass classify_outcome(int y, int pred_label_adv, std::span<const int> similar_labels) {
  if (similar_labels.empty()) throw std::invalid_argument("similar-set labels are empty");
  const bool fair = std::all_of(similar_labels.begin(), similar_labels.end(),
                                [&](int l) { return l == similar_labels.front(); }) &&
                    pred_label_adv == similar_labels.front();
  const bool accurate = pred_label_adv == y;
  if (accurate) return fair ? OutcomeClass::kTF : OutcomeClass::kTB;
  return fair ? OutcomeClass::kFF : OutcomeClass::kFB;
}

double estimate_k_emp(std::span<const std::pair<double, double>> pairs, double percentile) {
  if (!(percentile > 0.0 && percentile < 1.0)) throw std::invalid_argument("percentile must lie in (0, 1)");
  std::vector<double> r;
  for (const auto& [D, d] : pairs) {
    if (d > 0.0) r.push_back(D / d);
  }
  if (r.empty()) throw std::invalid_argument("no pair with d > 0; K_emp is undefined");
  std::sort(r.begin(), r.end());
  // Nearest rank; the epsilon keeps p*M from landing one rank high through
  // representation error (0.95 * 20 must give rank 19).
  const double rank = std::ceil(percentile * static_cast<double>(r.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(r.size())));
  return r[idx - 1];
}

bool check_rif(int y, std::span<const RifMember> members, double k_emp, double tau) {
  return std::all_of(members.begin(), members.end(), [&](const RifMember& m) {
    return label_distance(y, m.label) <= std::min(k_emp * m.d, tau);
  });
}

bool check_rif_implication(const RifRecord& record, double k_emp, double tau) {
  if (!record.rif_pass) return true;
  if (record.label_adv != record.y) return false;
  for (const auto& m : record.members) {
    if (m.d == 0.0) continue;
    if (label_distance(record.label_adv, m.label) > std::min(k_emp * m.d, tau)) return false;
  }
  return true;
}

EvalReport aggregate(std::span<const InstanceSummary> items, const RifCheckConfig& config) {
  if (items.empty()) throw std::invalid_argument("nothing to aggregate");
  if (!(config.tolerance > 0.0)) throw std::invalid_argument("RIF tolerance must be positive");

  std::vector<std::pair<double, double>> pairs;
  for (const auto& it : items) {
    if (it.clean_similar_labels.empty()) {
      throw std::invalid_argument("instance " + std::to_string(it.id) + " has no clean similar-set labels");
    }
    for (const auto& members : it.mode_members) {
      for (const auto& m : members) pairs.emplace_back(label_distance(it.y, m.label), m.d);
    }
  }
  EvalReport rep;
  rep.n = items.size();
  // With no off-diagonal pairs K_emp is undefined; 0 forbids any disagreement.
  const bool any_pair = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.second > 0.0; });
  rep.k_emp = any_pair ? estimate_k_emp(pairs, config.percentile) : 0.0;

  std::size_t acc = 0, fta = 0, ar = 0, adf = 0, rif = 0, rifair_ar = 0, rifair_if = 0, passes = 0;
  std::array<std::size_t, 3> per_mode{};
  for (const auto& it : items) {
    InstanceRecord rec;
    rec.id = it.id;
    rec.y = it.y;
    rec.clean_label = it.clean_label;
    rec.success = it.mode_success;
    if (it.clean_label == it.y) ++acc;
    if (std::all_of(it.clean_similar_labels.begin(), it.clean_similar_labels.end(),
                    [&](int l) { return l == it.clean_similar_labels.front(); })) {
      ++fta;
    }
    if (it.fgsm_success) ++ar;
    if (it.adf_success) ++adf;
    for (std::size_t k = 0; k < 3; ++k) {
      if (it.mode_success[k]) {
        ++per_mode[k];
        ++rec.n_attack;
      }
    }
    if (rec.n_attack > 0) ++rif;
    if (it.mode_success[1] || it.mode_success[2]) ++rifair_ar;
    if (it.mode_success[0] || it.mode_success[1]) ++rifair_if;
    ++rep.n_attack_hist[static_cast<std::size_t>(rec.n_attack)];

    rec.rif_pass = true;
    for (std::size_t k = 0; k < 3; ++k) {
      const bool pass = check_rif(it.y, it.mode_members[k], rep.k_emp, config.tolerance);
      rec.rif_pass = rec.rif_pass && pass;
      const RifRecord r{it.y, it.mode_label_adv[k], it.mode_members[k], pass};
      if (!check_rif_implication(r, rep.k_emp, config.tolerance)) rec.implication_ok = false;
    }
    if (rec.rif_pass) ++passes;
    if (!rec.implication_ok) ++rep.implication_violations;
    rep.records.push_back(rec);
  }
  const double n = static_cast<double>(rep.n);
  rep.acc = static_cast<double>(acc) / n;
  rep.fta = static_cast<double>(fta) / n;
  rep.ar_attack = static_cast<double>(ar) / n;
  rep.if_attack = static_cast<double>(adf) / n;
  rep.rif_attack = static_cast<double>(rif) / n;
  rep.rifair_ar_attack = static_cast<double>(rifair_ar) / n;
  rep.rifair_if_attack = static_cast<double>(rifair_if) / n;
  rep.tbr = static_cast<double>(per_mode[0]) / n;
  rep.fbr = static_cast<double>(per_mode[1]) / n;
  rep.ffr = static_cast<double>(per_mode[2]) / n;
  rep.tfr = static_cast<double>(rep.n_attack_hist[0]) / n;
  rep.rif_pass_rate = static_cast<double>(passes) / n;
  std::sort(rep.records.begin(), rep.records.end(),
            [](const InstanceRecord& a, const InstanceRecord& b) { return a.id < b.id; });
  return rep;
}

nlohmann::json EvalReport::to_json() const {
  return nlohmann::json{{"n", n},
                        {"acc", acc},
                        {"fta", fta},
                        {"ar_attack", ar_attack},
                        {"if_attack", if_attack},
                        {"rif_attack", rif_attack},
                        {"rifair_ar_attack", rifair_ar_attack},
                        {"rifair_if_attack", rifair_if_attack},
                        {"tbr", tbr},
                        {"fbr", fbr},
                        {"ffr", ffr},
                        {"tfr", tfr},
                        {"n_attack_hist", n_attack_hist},
                        {"k_emp", k_emp},
                        {"rif_pass_rate", rif_pass_rate},
                        {"implication_violations", implication_violations}};
}

std::string EvalReport::records_csv() const {
  std::ostringstream os;
  os << "id,clean_label,y,tb_success,fb_success,ff_success,n_attack,rif_pass\n";
  for (const auto& r : records) {
    os << r.id << ',' << r.clean_label << ',' << r.y << ',' << r.success[0] << ',' << r.success[1] << ','
       << r.success[2] << ',' << r.n_attack << ',' << r.rif_pass << '\n';
  }
  return os.str();
}

}  // namespace rifair
