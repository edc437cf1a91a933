#include "rifair/commands.h"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rifair/attack.h"
#include "rifair/dataset.h"
#include "rifair/diagnostics.h"
#include "rifair/evaluation.h"
#include "rifair/manipulation.h"
#include "rifair/pipeline.h"

namespace rifair {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
  if (!f) throw DataError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json metadata(const RunConfig& cfg) {
  json m = json::object();
  if (cfg.timestamps) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    m["created"] = os.str();
  }
  return m;
}

FeatureSchema load_schema(const RunConfig& cfg) {
  require(!cfg.schema.empty(), "--schema is required");
  return FeatureSchema::load(cfg.schema);
}

Dataset load_data(const RunConfig& cfg, const FeatureSchema& schema) {
  require(!cfg.data.empty(), "--data is required");
  return load_csv(cfg.data, schema);
}

fs::path results_path(const RunConfig& cfg) {
  return cfg.results.empty() ? cfg.out / "results.jsonl" : cfg.results;
}

std::vector<InstanceBundle> read_results(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<InstanceBundle> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(bundle_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError(path.string() + " holds no results");
  return out;
}

// The checkpoint's test split of the dataset, after checking the model was
// trained on this schema and file.
std::vector<Instance> test_split(const Checkpoint& ck, const Dataset& data, const FeatureSchema& schema,
                                 const RunConfig& cfg) {
  if (ck.model.params().schema_hash != schema.hash()) {
    throw DataError("checkpoint schema hash " + ck.model.params().schema_hash + " does not match schema " +
                    schema.hash());
  }
  if (!ck.dataset_hash.empty() && ck.dataset_hash != file_hash(cfg.data)) {
    throw DataError("checkpoint was trained on a different data file than " + cfg.data.string());
  }
  return split(data.instances, ck.test_fraction, ck.split_seed).second;
}

}  // namespace

json checkpoint_json(const Checkpoint& c) {
  json j = c.model.to_json();
  j["split"] = {{"test_fraction", c.test_fraction}, {"seed", c.split_seed}};
  j["dataset_hash"] = c.dataset_hash;
  j["train_config"] = c.train_config;
  return j;
}

Checkpoint read_checkpoint(const fs::path& path) {
  const json j = read_json(path);
  try {
    Checkpoint c{Mlp::from_json(j), 0.2, 0, {}, json::object()};
    c.test_fraction = j.at("split").at("test_fraction").get<double>();
    c.split_seed = j.at("split").at("seed").get<std::uint64_t>();
    c.dataset_hash = j.value("dataset_hash", std::string{});
    c.train_config = j.value("train_config", json::object());
    return c;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  const FeatureSchema schema = load_schema(cfg);
  const Dataset data = load_data(cfg, schema);
  const Encoder encoder(schema);
  auto [train_set, test_set] = split(data.instances, cfg.test_fraction, cfg.seed);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  TrainResult tr = train(train_set, encoder, tc);

  const double train_acc = accuracy(tr.model, encoder, train_set, cfg.tau_dec);
  const double test_acc = accuracy(tr.model, encoder, test_set, cfg.tau_dec);
  Checkpoint ck{std::move(tr.model), cfg.test_fraction, cfg.seed, file_hash(cfg.data), tc.to_json()};
  write_json(cfg.out / "model.json", checkpoint_json(ck));
  write_json(cfg.out / "load_report.json", data.report.to_json());

  std::ostringstream loss;
  loss << std::setprecision(17) << "epoch,loss\n";
  for (std::size_t e = 0; e < tr.epoch_loss.size(); ++e) loss << e + 1 << ',' << tr.epoch_loss[e] << '\n';
  write_text(cfg.out / "train_log.csv", loss.str());

  log << "rows accepted " << data.report.accepted << ", rejected " << data.report.rejected.size() << ", clamped "
      << data.report.clamped.size() << "\n";
  log << "train " << train_set.size() << " test " << test_set.size() << "\n";
  log << std::fixed << std::setprecision(4) << "train acc " << train_acc << " test acc " << test_acc << "\n";
  return kExitOk;
}

int cmd_attack(const RunConfig& cfg, std::ostream& log) {
  const auto selection = AttackSelection::parse(cfg.mode);
  require(selection.has_value(), "unknown --mode " + cfg.mode + " (tb|fb|ff|fgsm|adf|all)");
  require(cfg.steps >= 1, "--steps must be >= 1");
  require(cfg.tau_dec > 0.0 && cfg.tau_dec < 1.0, "--tau-dec must lie in (0, 1)");
  require(!cfg.model.empty(), "--model is required");

  const FeatureSchema schema = load_schema(cfg);
  const Dataset data = load_data(cfg, schema);
  const Checkpoint ck = read_checkpoint(cfg.model);
  const Encoder encoder(schema);
  if (static_cast<std::size_t>(ck.model.input_dim()) != encoder.dim()) {
    throw DataError("checkpoint input width does not match the schema encoding");
  }
  std::vector<Instance> test = test_split(ck, data, schema, cfg);
  if (cfg.limit > 0 && cfg.limit < test.size()) test.resize(cfg.limit);

  AttackOptions o;
  o.selection = *selection;
  o.steps = cfg.steps;
  o.grid_points = cfg.grid_points;
  o.tau_dec = cfg.tau_dec;
  o.epsilon = cfg.epsilon;
  o.similar_cap = cfg.similar_cap;
  o.seed = cfg.seed;
  o.threads = cfg.threads;
  const std::vector<InstanceBundle> bundles = attack_all(ck.model, encoder, test, o);

  std::string lines;
  for (const auto& b : bundles) lines += to_json(b).dump() + "\n";
  write_text(cfg.out / "results.jsonl", lines);

  std::size_t plotted = 0;
  for (const auto& b : bundles) {
    if (plotted == cfg.plots) break;
    bool any = false;
    for (const auto& r : b.rifair) {
      if (!r || !r->success || r->steps.empty()) continue;
      const std::string stem = std::to_string(b.base.id) + "_" + std::string(to_string(r->mode));
      write_text(cfg.out / "trajectories" / (stem + ".csv"), trajectory_csv(*r, schema));
      write_text(cfg.out / "trajectories" / (stem + ".svg"), trajectory_svg(*r, cfg.tau_dec));
      any = true;
    }
    if (any) ++plotted;
  }

  json manifest{{"mode", cfg.mode},
                {"steps", cfg.steps},
                {"tau_dec", cfg.tau_dec},
                {"seed", cfg.seed},
                {"grid_points", cfg.grid_points},
                {"epsilon", cfg.epsilon},
                {"similar_cap", cfg.similar_cap},
                {"instances", bundles.size()},
                {"model_checkpoint_hash", file_hash(cfg.model)},
                {"dataset_hash", file_hash(cfg.data)},
                {"schema_hash", schema.hash()},
                {"metadata", metadata(cfg)}};
  write_json(cfg.out / "manifest.json", manifest);
  log << "attacked " << bundles.size() << " test instances\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  require(cfg.rif_tolerance > 0.0, "--rif-tolerance must be positive");
  const std::vector<InstanceBundle> bundles = read_results(results_path(cfg));
  std::vector<InstanceSummary> summaries;
  summaries.reserve(bundles.size());
  for (const auto& b : bundles) {
    try {
      summaries.push_back(summarize(b));
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string(e.what()) + "; evaluate needs a run with --mode all");
    }
  }
  const EvalReport rep = aggregate(summaries, {cfg.rif_tolerance, cfg.percentile});

  std::size_t paths = 0, decomposition_failures = 0, flip_failures = 0, shared_n = 0;
  double max_residual = 0.0, shared_sum = 0.0;
  for (const auto& b : bundles) {
    for (const auto& r : b.rifair) {
      for (int side = 0; side < 2; ++side) {
        const auto& t = side == 0 ? r->trajectory_v : r->trajectory_v_prime;
        const double f0 = side == 0 ? r->f_v_initial : r->f_v_prime_initial;
        const double f1 = side == 0 ? r->f_v_final : r->f_v_prime_final;
        ++paths;
        const DecompositionCheck dc = verify_decomposition(t, f0, f1);
        max_residual = std::max(max_residual, dc.residual);
        if (!dc.ok) ++decomposition_failures;
        if (!check_flip_theorems(t, f0, cfg.tau_dec)) ++flip_failures;
      }
      if (r->mode == AttackMode::kTrueBias && r->success) {
        if (auto s = shared_pid_fraction(r->trajectory_v, r->trajectory_v_prime)) {
          shared_sum += *s;
          ++shared_n;
        }
      }
    }
  }

  json j = rep.to_json();
  j["diagnostics"] = {{"paths", paths},
                      {"decomposition_failures", decomposition_failures},
                      {"max_decomposition_residual", max_residual},
                      {"flip_check_failures", flip_failures},
                      {"tb_shared_pid_fraction", shared_n ? json(shared_sum / static_cast<double>(shared_n))
                                                          : json(nullptr)}};
  json meta = metadata(cfg);
  meta["denominator"] = "all attacked test instances";
  meta["rif_tolerance"] = cfg.rif_tolerance;
  meta["percentile"] = cfg.percentile;
  j["metadata"] = meta;
  write_json(cfg.out / "report.json", j);
  write_text(cfg.out / "instances.csv", rep.records_csv());

  log << std::fixed << std::setprecision(4);
  log << "n " << rep.n << " acc " << rep.acc << " fta " << rep.fta << "\n";
  log << "ar_attack " << rep.ar_attack << " if_attack " << rep.if_attack << " rif_attack " << rep.rif_attack
      << "\n";
  log << "tbr " << rep.tbr << " fbr " << rep.fbr << " ffr " << rep.ffr << " tfr " << rep.tfr << "\n";
  log << "k_emp " << rep.k_emp << " rif_pass_rate " << rep.rif_pass_rate << " implication_violations "
      << rep.implication_violations << "\n";
  return kExitOk;
}

int cmd_manipulate(const RunConfig& cfg, std::ostream& log) {
  require(cfg.budget >= 0, "--budget is required for manipulate");
  std::vector<Strategy> strategies;
  if (cfg.strategy == "all") {
    strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
  } else {
    const auto s = parse_strategy(cfg.strategy);
    require(s.has_value(), "unknown --strategy " + cfg.strategy +
                               " (acc_up|fair_up|both_up|acc_up_fair_down|acc_down_fair_up|all)");
    strategies.push_back(*s);
  }
  require(!cfg.model.empty(), "--model is required");
  const FeatureSchema schema = load_schema(cfg);
  const Checkpoint ck = read_checkpoint(cfg.model);
  if (ck.model.params().schema_hash != schema.hash()) throw DataError("checkpoint schema hash does not match schema");
  const Encoder encoder(schema);
  const std::vector<InstanceBundle> bundles = read_results(results_path(cfg));

  std::vector<TestItem> items;
  std::vector<AttackResult> results;
  std::vector<OutcomeClass> clean;
  for (const auto& b : bundles) {
    const OutcomeClass c = classify_outcome(b.base.label, b.clean_label, b.clean_similar_labels);
    items.push_back({b.base, c});
    clean.push_back(c);
    for (const auto& r : b.rifair) {
      if (r) results.push_back(*r);
    }
  }
  if (static_cast<std::size_t>(cfg.budget) > items.size()) {
    throw UsageError("--budget " + std::to_string(cfg.budget) + " exceeds the " + std::to_string(items.size()) +
                     " attacked test instances");
  }
  const AdversarialPool pool = build_pool(results);

  json rows = json::array();
  const PerformanceRow base = performance_of(clean);
  for (Strategy s : strategies) {
    const ManipulatedSet m = manipulate(items, pool, s, static_cast<std::size_t>(cfg.budget), cfg.seed);
    const PerformanceRow row = evaluate_manipulated(ck.model, encoder, m.items, cfg.similar_cap, cfg.seed, cfg.tau_dec);
    rows.push_back({{"strategy", to_string(s)},
                    {"budget_used", m.budget_used},
                    {"performance", row.to_json()},
                    {"warnings", m.warnings}});
    write_text(cfg.out / ("provenance_" + std::string(to_string(s)) + ".csv"), m.provenance_csv());
    for (const auto& w : m.warnings) log << "warning: " << w << "\n";
    log << to_string(s) << std::fixed << std::setprecision(4) << " acc " << base.acc << " -> " << row.acc << " fta "
        << base.fta << " -> " << row.fta << "\n";
  }
  json pool_sizes = json::object();
  for (OutcomeClass c : kAllOutcomes) pool_sizes[std::string(to_string(c))] = pool.of(c).size();
  write_json(cfg.out / "manipulation.json", {{"budget", cfg.budget},
                                             {"seed", cfg.seed},
                                             {"clean", base.to_json()},
                                             {"pool", pool_sizes},
                                             {"strategies", rows},
                                             {"metadata", metadata(cfg)}});
  return kExitOk;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    if (name == "train") return cmd_train(cfg, log);
    if (name == "attack") return cmd_attack(cfg, log);
    if (name == "evaluate") return cmd_evaluate(cfg, log);
    if (name == "manipulate") return cmd_manipulate(cfg, log);
    err << "unknown command " << name << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericAbort& e) {
    err << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace rifair
