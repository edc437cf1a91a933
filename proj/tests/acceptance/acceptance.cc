// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "../oracles.h"
#include "../test_util.h"
#include "rifair/commands.h"
#include "rifair/diagnostics.h"
#include "rifair/evaluation.h"
#include "rifair/manipulation.h"
#include "rifair/pipeline.h"

using namespace rifair;
using namespace rifair::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

// Shared artifacts of one full default-config Adult run.
struct AdultRun {
  fs::path dir;
  FeatureSchema schema;
  Checkpoint ck;
  std::vector<InstanceBundle> bundles;
  json report;
  json manipulation;
};

constexpr long long kBudget = 500;

RunConfig adult_config(const fs::path& dir) {
  RunConfig cfg;
  cfg.schema = kDataDir / "adult" / "schema.json";
  cfg.data = kDataDir / "adult" / "adult.csv";
  cfg.out = dir;
  cfg.model = dir / "model.json";
  cfg.budget = kBudget;
  return cfg;
}

void run_pipeline(const RunConfig& cfg) {
  std::ostringstream log;
  for (auto* cmd : {cmd_train, cmd_attack, cmd_evaluate, cmd_manipulate}) {
    if (cmd(cfg, log) != kExitOk) throw std::runtime_error("pipeline step failed:\n" + log.str());
  }
}

AdultRun load_run(const fs::path& dir) {
  AdultRun r{dir, FeatureSchema::load(kDataDir / "adult" / "schema.json"), read_checkpoint(dir / "model.json"), {}, {}, {}};
  std::ifstream in(dir / "results.jsonl");
  for (std::string line; std::getline(in, line);) r.bundles.push_back(bundle_from_json(json::parse(line)));
  r.report = json::parse(read_file(dir / "report.json"));
  r.manipulation = json::parse(read_file(dir / "manipulation.json"));
  return r;
}

template <typename F>
void for_each_result(const AdultRun& run, F f) {
  for (const auto& b : run.bundles) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (b.rifair[k]) f(b, k, *b.rifair[k]);
    }
  }
}

// --- 1 -----------------------------------------------------------------------

Verdict gradient_check() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  constexpr double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (int net = 0; net < 10; ++net) {
    const int dim = 4 + static_cast<int>(rng() % 20);
    std::vector<int> dims{dim};
    const int depth = 1 + static_cast<int>(rng() % 2);
    for (int l = 0; l < depth; ++l) dims.push_back(3 + static_cast<int>(rng() % 16));
    dims.push_back(2);
    Mlp m = Mlp::glorot(dims, rng());
    for (auto& b : m.mutable_params().biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.3 * n01(rng);
    }
    for (int s = 0; s < 20; ++s) {
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x[i] = u01(rng);
      const int target = static_cast<int>(rng() % 2);
      const Eigen::VectorXd g = m.input_gradient(x, target);
      const auto base_pre = m.pre_activations(x);
      for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        // Skip coordinates whose +-h probe crosses a ReLU kink.
        bool kink = false;
        for (const auto& probe : {m.pre_activations(xp), m.pre_activations(xm)}) {
          for (std::size_t l = 0; l < probe.size(); ++l) {
            for (Eigen::Index j = 0; j < probe[l].size(); ++j) {
              if ((probe[l][j] > 0) != (base_pre[l][j] > 0)) kink = true;
            }
          }
        }
        if (kink) {
          ++skipped;
          continue;
        }
        const double fd =
            (cross_entropy(m.forward(xp), target) - cross_entropy(m.forward(xm), target)) / (2.0 * h);
        const double rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-8});
        worst = std::max(worst, rel);
        ++checked;
      }
    }
  }
  return {worst < 1e-4 && checked > 0,
          "max rel err " + fmt(worst) + " over " + std::to_string(checked) + " coords (" + std::to_string(skipped) +
              " at kinks)"};
}

// --- 2 -----------------------------------------------------------------------

Verdict step_identity(const AdultRun& run) {
  std::size_t steps = 0, bad = 0, undefined = 0;
  double worst = 0.0;
  for_each_result(run, [&](const InstanceBundle&, std::size_t, const AttackResult& r) {
    for (const auto* t : {&r.trajectory_v, &r.trajectory_v_prime}) {
      for (const auto& s : *t) {
        ++steps;
        const double df = s.f_after - s.f_before;
        if (!s.pid) {
          ++undefined;
          if (df != 0.0) ++bad;
          continue;
        }
        const double err = std::abs(df - s.pii * s.delta_norm * *s.pid);
        worst = std::max(worst, err);
        if (err > 1e-12) ++bad;
      }
    }
  });
  return {steps >= 1000 && bad == 0, std::to_string(steps) + " steps, " + std::to_string(undefined) +
                                         " with undefined PID, max err " + fmt(worst) + ", violations " +
                                         std::to_string(bad)};
}

// --- 3 -----------------------------------------------------------------------

Verdict telescoping(const AdultRun& run) {
  const Encoder enc(run.schema);
  std::size_t paths = 0, bad = 0, replay_mismatch = 0;
  double worst = 0.0;
  for_each_result(run, [&](const InstanceBundle&, std::size_t, const AttackResult& r) {
    const std::pair<const std::vector<TrajectoryStep>*, std::pair<double, double>> sides[] = {
        {&r.trajectory_v, {r.f_v_initial, r.f_v_final}}, {&r.trajectory_v_prime, {r.f_v_prime_initial, r.f_v_prime_final}}};
    for (const auto& [t, ends] : sides) {
      ++paths;
      const auto c = verify_decomposition(*t, ends.first, ends.second);
      worst = std::max(worst, c.residual);
      if (!(c.residual < 1e-9)) ++bad;
    }
    // Recorded scores must match fresh forward passes along the replayed edits.
    Instance v = r.v, vp = r.v_prime;
    auto score = [&](const Instance& x) { return run.ck.model.forward(enc.encode(x).dense).positive(); };
    if (score(v) != r.f_v_initial || score(vp) != r.f_v_prime_initial) ++replay_mismatch;
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
      v.values[r.steps[k].feature_index] = vp.values[r.steps[k].feature_index] = r.steps[k].new_value;
      if (score(v) != r.trajectory_v[k].f_after || score(vp) != r.trajectory_v_prime[k].f_after) ++replay_mismatch;
    }
  });
  return {paths > 0 && bad == 0 && replay_mismatch == 0,
          std::to_string(paths) + " paths, max residual " + fmt(worst) + ", failures " + std::to_string(bad) +
              ", replay mismatches " + std::to_string(replay_mismatch)};
}

// --- 4 -----------------------------------------------------------------------

Verdict flip_equivalence(const AdultRun& run, double tau) {
  std::size_t paths = 0, bad = 0, flipped = 0;
  for_each_result(run, [&](const InstanceBundle&, std::size_t, const AttackResult& r) {
    const std::pair<const std::vector<TrajectoryStep>*, double> sides[] = {{&r.trajectory_v, r.f_v_initial},
                                                                           {&r.trajectory_v_prime, r.f_v_prime_initial}};
    for (const auto& [t, f0] : sides) {
      ++paths;
      if (!check_flip_theorems(*t, f0, tau)) ++bad;
      for (const auto& s : *t) {
        if ((s.f_before >= tau) != (s.f_after >= tau)) ++flipped;
      }
    }
  });
  return {paths > 0 && bad == 0, std::to_string(paths) + " paths, " + std::to_string(flipped) +
                                     " label-flipping steps, failures " + std::to_string(bad)};
}

// --- 5 -----------------------------------------------------------------------

Verdict rif_implication(const AdultRun& run, double tolerance, double percentile) {
  // Independent nearest-rank K over every (D, d) pair with d > 0.
  std::vector<double> ratios;
  for_each_result(run, [&](const InstanceBundle& b, std::size_t k, const AttackResult&) {
    for (const auto& m : b.members[k]) {
      if (m.d > 0) ratios.push_back((b.base.label == m.label ? 0.0 : 1.0) / m.d);
    }
  });
  std::sort(ratios.begin(), ratios.end());
  const std::size_t rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(ratios.size()) - 1e-9));
  const double k_emp = ratios.at(std::max<std::size_t>(rank, 1) - 1);

  std::size_t passing = 0, violations = 0;
  for_each_result(run, [&](const InstanceBundle& b, std::size_t k, const AttackResult& r) {
    bool pass = true;
    for (const auto& m : b.members[k]) {
      if ((b.base.label == m.label ? 0.0 : 1.0) > std::min(k_emp * m.d, tolerance)) pass = false;
    }
    if (!pass) return;
    ++passing;
    const bool accurate = r.label_v_adv == b.base.label;
    bool pairwise = true;
    for (const auto& m : b.members[k]) {
      if ((m.label == r.label_v_adv ? 0.0 : 1.0) > std::min(k_emp * m.d, tolerance)) pairwise = false;
    }
    if (!accurate || !pairwise) ++violations;
  });
  const bool k_match = k_emp == run.report.at("k_emp").get<double>();
  const auto reported = run.report.at("implication_violations").get<std::size_t>();
  return {passing > 0 && violations == 0 && reported == 0 && k_match,
          std::to_string(passing) + " passing attacked pairs, K_emp " + fmt(k_emp) + (k_match ? "" : " (report differs)") +
              ", violations " + std::to_string(violations) + ", reported " + std::to_string(reported)};
}

// --- 6 -----------------------------------------------------------------------

Verdict taxonomy_and_union(const AdultRun& run) {
  std::size_t pairs = 0, misfiled = 0;
  std::array<std::size_t, 3> per_mode{};
  std::size_t any = 0;
  for (const auto& b : run.bundles) {
    bool hit = false;
    for (std::size_t k = 0; k < 3; ++k) {
      if (!b.rifair[k]) continue;
      const AttackResult& r = *b.rifair[k];
      ++pairs;
      const bool accurate = r.label_v_adv == b.base.label;
      const bool fair = std::all_of(b.members[k].begin(), b.members[k].end(),
                                    [&](const RifMember& m) { return m.label == r.label_v_adv; });
      int matches = 0;
      for (OutcomeClass c : kAllOutcomes) matches += (is_accurate(c) == accurate && is_fair(c) == fair);
      if (matches != 1 || is_accurate(r.outcome) != accurate || is_fair(r.outcome) != fair) ++misfiled;
      if (r.success) {
        ++per_mode[k];
        hit = true;
      }
    }
    any += hit;
  }
  const double n = static_cast<double>(run.bundles.size());
  const double tbr = run.report.at("tbr"), fbr = run.report.at("fbr"), ffr = run.report.at("ffr");
  const double rif = run.report.at("rif_attack");
  const bool recount = tbr == per_mode[0] / n && fbr == per_mode[1] / n && ffr == per_mode[2] / n && rif == any / n;
  const bool bounds = rif >= std::max({tbr, fbr, ffr}) && rif <= tbr + fbr + ffr;
  return {pairs > 0 && misfiled == 0 && recount && bounds,
          std::to_string(pairs) + " pairs, misfiled " + std::to_string(misfiled) + ", max(tbr,fbr,ffr) " +
              fmt(std::max({tbr, fbr, ffr})) + " <= rif " + fmt(rif) + " <= sum " + fmt(tbr + fbr + ffr) +
              (recount ? "" : ", report disagrees with recount")};
}

// --- 7 -----------------------------------------------------------------------

Verdict oracle_soundness() {
  std::mt19937_64 rng(4242);
  std::size_t successes = 0, unsound = 0, attacks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const TinyCase c = random_tiny_case(rng);
    const Encoder enc(c.schema);
    for (AttackMode mode : kAllModes) {
      AttackConfig cfg;
      cfg.mode = mode;
      cfg.max_steps = 1 + static_cast<int>(rng() % 2);
      cfg.grid_points = 3;
      const AttackResult r = rifair_attack(c.model, enc, c.v, c.v_prime, cfg);
      ++attacks;
      if (!r.success) continue;
      ++successes;
      const bool ok = replay_confirms(c.model, enc, r, cfg.tau_dec) &&
                      exhaustive_reachable(c.model, enc, c.v, c.v_prime, mode, r.y, r.y_diff,
                                           static_cast<int>(r.steps.size()), cfg.grid_points, cfg.tau_dec);
      if (!ok) ++unsound;
    }
  }
  return {successes > 0 && unsound == 0, std::to_string(attacks) + " attacks on 200 instances, " +
                                             std::to_string(successes) + " successes, unsound " +
                                             std::to_string(unsound)};
}

// --- 8 -----------------------------------------------------------------------

Verdict directional_reproduction(const AdultRun& run) {
  const double tbr = run.report.at("tbr"), fbr = run.report.at("fbr"), ffr = run.report.at("ffr");
  const double rif = run.report.at("rif_attack"), ar = run.report.at("rifair_ar_attack");
  const bool a = tbr > fbr && tbr > ffr;
  const bool b = rif > ar;
  return {a && b, std::string("(a) ") + (a ? "holds" : "fails") + ": tbr " + fmt(tbr) + ", fbr " + fmt(fbr) +
                      ", ffr " + fmt(ffr) + "; (b) " + (b ? "holds" : "fails") + ": rif_attack " + fmt(rif) +
                      ", FB|FF " + fmt(ar) + "; test acc " + fmt(run.report.at("acc").get<double>())};
}

// --- 9 -----------------------------------------------------------------------

bool directional(Strategy s, const json& clean, const json& after, bool moved) {
  const double a0 = clean.at("acc"), f0 = clean.at("fta"), a1 = after.at("acc"), f1 = after.at("fta");
  if (!moved) return a0 == a1 && f0 == f1;
  switch (s) {
    case Strategy::kAccUp: return a1 > a0;
    case Strategy::kFairUp: return f1 > f0;
    case Strategy::kBothUp: return a1 >= a0 && f1 >= f0 && (a1 > a0 || f1 > f0);
    case Strategy::kAccUpFairDown: return a1 >= a0 && f1 <= f0 && (a1 > a0 || f1 < f0);
    case Strategy::kAccDownFairUp: return a1 <= a0 && f1 >= f0 && (a1 < a0 || f1 > f0);
  }
  return false;
}

Verdict manipulation_directionality(const AdultRun& run, const RunConfig& cfg) {
  std::size_t checked = 0, moved_runs = 0, bad = 0;
  std::ostringstream detail;
  const json& clean = run.manipulation.at("clean");
  for (const auto& row : run.manipulation.at("strategies")) {
    const Strategy s = *parse_strategy(row.at("strategy").get<std::string>());
    const bool moved = row.at("budget_used").get<std::size_t>() > 0;
    ++checked;
    moved_runs += moved;
    if (!directional(s, clean, row.at("performance"), moved)) {
      ++bad;
      detail << " " << to_string(s) << " violates;";
    }
  }

  // Smaller budgets and other seeds, recomputed in-process.
  const Encoder enc(run.schema);
  std::vector<TestItem> items;
  std::vector<AttackResult> results;
  std::vector<OutcomeClass> clean_outcomes;
  for (const auto& b : run.bundles) {
    const OutcomeClass c = classify_outcome(b.base.label, b.clean_label, b.clean_similar_labels);
    items.push_back({b.base, c});
    clean_outcomes.push_back(c);
    for (const auto& r : b.rifair) {
      if (r) results.push_back(*r);
    }
  }
  const AdversarialPool pool = build_pool(results);
  const PerformanceRow clean_row = performance_of(clean_outcomes);
  std::size_t replaced_total = 0, replaced_fb = 0;
  for (std::size_t budget : {1, 25, 200}) {
    for (std::uint64_t seed : {1, 2}) {
      for (Strategy s : kAllStrategies) {
        const ManipulatedSet m = manipulate(items, pool, s, budget, seed);
        const PerformanceRow row =
            evaluate_manipulated(run.ck.model, enc, m.items, cfg.similar_cap, cfg.seed, cfg.tau_dec);
        ++checked;
        moved_runs += m.budget_used > 0;
        if (!directional(s, clean_row.to_json(), row.to_json(), m.budget_used > 0)) {
          ++bad;
          detail << " " << to_string(s) << "@" << budget << " violates;";
        }
        if (s != Strategy::kAccUp) continue;
        // FBR among the replaced items, from fresh predictions.
        std::vector<Instance> replaced;
        for (std::size_t i = 0; i < m.items.size(); ++i) {
          if (m.provenance[i].replaced) replaced.push_back(m.items[i]);
        }
        if (replaced.empty()) continue;
        const PerformanceRow r = evaluate_manipulated(run.ck.model, enc, replaced, cfg.similar_cap, cfg.seed, cfg.tau_dec);
        replaced_total += replaced.size();
        replaced_fb += static_cast<std::size_t>(std::llround(r.fbr * static_cast<double>(replaced.size())));
      }
    }
  }
  return {bad == 0 && moved_runs > 0 && replaced_total > 0 && replaced_fb == 0,
          std::to_string(checked) + " strategy runs (" + std::to_string(moved_runs) + " with replacements), violations " +
              std::to_string(bad) + ";" + detail.str() + " acc_up FBR among " + std::to_string(replaced_total) +
              " replaced items " + fmt(replaced_total ? static_cast<double>(replaced_fb) / replaced_total : 0.0)};
}

// --- 10 ----------------------------------------------------------------------

std::map<std::string, std::string> normalised_outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string body = read_file(e.path());
    if (e.path().extension() == ".json") {
      json j = json::parse(body);
      j.erase("metadata");
      body = j.dump();
    }
    out[fs::relative(e.path(), dir).string()] = std::move(body);
  }
  return out;
}

Verdict determinism(const fs::path& a, const fs::path& b) {
  const auto x = normalised_outputs(a), y = normalised_outputs(b);
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, body] : x) {
    auto it = y.find(name);
    if (it == y.end() || it->second != body) {
      if (first.empty()) first = name;
      ++differing;
    }
  }
  for (const auto& [name, body] : y) {
    if (!x.count(name)) {
      if (first.empty()) first = name;
      ++differing;
    }
  }
  return {differing == 0 && !x.empty(), std::to_string(x.size()) + " files compared, " + std::to_string(differing) +
                                            " differ" + (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "rifair_acceptance";
  fs::remove_all(root);
  const RunConfig cfg_a = adult_config(root / "run_a");
  const RunConfig cfg_b = adult_config(root / "run_b");

  const std::string names[] = {
      "gradient vs finite differences",
      "single-step impact identity",
      "telescoping decomposition",
      "flip equivalence",
      "RIF implication",
      "taxonomy partition and union bound",
      "oracle soundness",
      "directional reproduction on Adult",
      "manipulation directionality",
      "determinism",
  };
  std::vector<Verdict> verdicts(10);
  std::vector<double> seconds(10, 0.0);
  auto timed = [&](std::size_t i, auto f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      verdicts[i] = f();
    } catch (const std::exception& e) {
      verdicts[i] = {false, std::string("exception: ") + e.what()};
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  timed(0, gradient_check);
  timed(6, oracle_soundness);

  std::optional<AdultRun> run;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    run_pipeline(cfg_a);
    run = load_run(cfg_a.out);
  } catch (const std::exception& e) {
    for (std::size_t i : {1, 2, 3, 4, 5, 7, 8}) verdicts[i] = {false, std::string("Adult run failed: ") + e.what()};
  }
  const double pipeline_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (run) {
    timed(1, [&] { return step_identity(*run); });
    timed(2, [&] { return telescoping(*run); });
    timed(3, [&] { return flip_equivalence(*run, cfg_a.tau_dec); });
    timed(4, [&] { return rif_implication(*run, cfg_a.rif_tolerance, cfg_a.percentile); });
    timed(5, [&] { return taxonomy_and_union(*run); });
    timed(7, [&] { return directional_reproduction(*run); });
    timed(8, [&] { return manipulation_directionality(*run, cfg_a); });
  }
  timed(9, [&] {
    run_pipeline(cfg_b);
    return determinism(cfg_a.out, cfg_b.out);
  });
  std::printf("Adult pipeline (train, attack, evaluate, manipulate): %.1fs\n", pipeline_s);

  bool all = true;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    all = all && verdicts[i].pass;
    std::printf("%s criterion %zu (%s) [%.1fs]: %s\n", verdicts[i].pass ? "PASS" : "FAIL", i + 1, names[i].c_str(),
                seconds[i], verdicts[i].detail.c_str());
  }
  return all ? 0 : 1;
}
