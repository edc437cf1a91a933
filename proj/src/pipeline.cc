#include "rifair/pipeline.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rifair {

namespace {

using nlohmann::json;

json instance_json(const Instance& x) { return json{{"id", x.id}, {"values", x.values}, {"label", x.label}}; }

Instance instance_from(const json& j) {
  Instance x;
  x.id = j.at("id").get<std::int64_t>();
  x.values = j.at("values").get<std::vector<double>>();
  x.label = j.at("label").get<int>();
  return x;
}

json trajectory_json(const std::vector<TrajectoryStep>& t) {
  json a = json::array();
  for (const auto& s : t) {
    a.push_back({{"f_before", s.f_before},
                 {"f_after", s.f_after},
                 {"delta_norm", s.delta_norm},
                 {"pii", s.pii},
                 {"pid", s.pid ? json(*s.pid) : json(nullptr)}});
  }
  return a;
}

std::vector<TrajectoryStep> trajectory_from(const json& a) {
  std::vector<TrajectoryStep> t;
  for (const auto& s : a) {
    TrajectoryStep step;
    step.f_before = s.at("f_before").get<double>();
    step.f_after = s.at("f_after").get<double>();
    step.delta_norm = s.at("delta_norm").get<double>();
    step.pii = s.at("pii").get<double>();
    if (!s.at("pid").is_null()) step.pid = s.at("pid").get<int>();
    t.push_back(step);
  }
  return t;
}

json members_json(const std::vector<RifMember>& m) {
  json a = json::array();
  for (const auto& x : m) a.push_back({{"label", x.label}, {"d", x.d}});
  return a;
}

std::vector<RifMember> members_from(const json& a) {
  std::vector<RifMember> m;
  for (const auto& x : a) m.push_back({x.at("label").get<int>(), x.at("d").get<double>()});
  return m;
}

StopReason parse_stop(const std::string& s) {
  for (StopReason r : {StopReason::kSuccess, StopReason::kNoImprovement, StopReason::kStepLimit}) {
    if (to_string(r) == s) return r;
  }
  throw std::invalid_argument("unknown stop reason: " + s);
}

template <typename E, typename F>
E parse_or_throw(const json& j, F parse, const char* what) {
  const auto s = j.get<std::string>();
  const auto v = parse(s);
  if (!v) throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
  return *v;
}

std::vector<RifMember> rif_members(const Classifier& model, const Encoder& encoder, const Instance& v_adv,
                                   const AttackOptions& o) {
  const SimilarSet set = enumerate_similar(v_adv, encoder.schema(), o.similar_cap, o.seed);
  std::vector<RifMember> out;
  out.reserve(set.members.size());
  for (const auto& m : set.members) {
    const int label = predict_label(model.forward(encoder.encode(m).dense), o.tau_dec);
    out.push_back({label, distance_d(v_adv, m, encoder.schema())});
  }
  return out;
}

}  // namespace

std::optional<AttackSelection> AttackSelection::parse(std::string_view mode) {
  AttackSelection s;
  if (mode == "all") return s;
  s.fgsm = false;
  s.adf = false;
  s.rifair = {false, false, false};
  if (mode == "fgsm") {
    s.fgsm = true;
    return s;
  }
  if (mode == "adf") {
    s.adf = true;
    return s;
  }
  if (auto m = parse_attack_mode(mode)) {
    s.rifair[static_cast<std::size_t>(*m)] = true;
    return s;
  }
  return std::nullopt;
}

std::size_t InstanceBundle::attack_count() const {
  std::size_t n = (fgsm ? 1 : 0) + (adf ? 1 : 0);
  for (const auto& r : rifair) n += r ? 1 : 0;
  return n;
}

InstanceBundle attack_instance(const Classifier& model, const Encoder& encoder, const Instance& v,
                               const AttackOptions& o) {
  InstanceBundle b;
  b.base = v;
  const Prediction clean = model.forward(encoder.encode(v).dense);
  b.clean_positive = clean.positive();
  b.clean_label = predict_label(clean, o.tau_dec);
  b.clean_similar_labels = similar_labels(model, encoder, v, o.similar_cap, o.seed, o.tau_dec);

  const SimilarSet similar = enumerate_similar(v, encoder.schema(), o.similar_cap, o.seed);

  if (o.selection.fgsm) {
    FgsmOutcome f;
    f.adv = fgsm_baseline(model, encoder, v, o.epsilon);
    f.label = predict_label(model.forward(encoder.encode(f.adv).dense), o.tau_dec);
    f.success = f.label != v.label;
    b.fgsm = std::move(f);
  }
  if (o.selection.adf) b.adf = adf_baseline(model, encoder, v, similar, o.steps, o.tau_dec, o.grid_points);

  if (std::any_of(o.selection.rifair.begin(), o.selection.rifair.end(), [](bool x) { return x; })) {
    const Instance& v_prime = choose_counterpart(model, encoder, v, similar);
    for (AttackMode mode : kAllModes) {
      const auto k = static_cast<std::size_t>(mode);
      if (!o.selection.rifair[k]) continue;
      AttackConfig cfg;
      cfg.mode = mode;
      cfg.max_steps = o.steps;
      cfg.grid_points = o.grid_points;
      cfg.tau_dec = o.tau_dec;
      cfg.similar_cap = o.similar_cap;
      cfg.seed = o.seed;
      b.rifair[k] = rifair_attack(model, encoder, v, v_prime, cfg);
      b.members[k] = rif_members(model, encoder, b.rifair[k]->v_adv, o);
    }
  }
  return b;
}

std::vector<InstanceBundle> attack_all(const Classifier& model, const Encoder& encoder,
                                       std::span<const Instance> instances, const AttackOptions& options) {
  std::vector<InstanceBundle> out(instances.size());
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(instances.size(), 1)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      try {
        out[i] = attack_instance(model, encoder, instances[i], options);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = instances.size();
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

InstanceSummary summarize(const InstanceBundle& b) {
  if (b.attack_count() != 5) {
    throw std::invalid_argument("instance " + std::to_string(b.base.id) + " is missing attack results");
  }
  InstanceSummary s;
  s.id = b.base.id;
  s.y = b.base.label;
  s.clean_label = b.clean_label;
  s.clean_similar_labels = b.clean_similar_labels;
  s.fgsm_success = b.fgsm->success;
  s.adf_success = b.adf->success;
  for (std::size_t k = 0; k < 3; ++k) {
    const AttackResult& r = *b.rifair[k];
    s.mode_success[k] = r.success;
    s.mode_outcome[k] = r.outcome;
    s.mode_label_adv[k] = r.label_v_adv;
    s.mode_members[k] = b.members[k];
  }
  return s;
}

json to_json(const AttackResult& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step_index},
                     {"feature", s.feature_index},
                     {"old", s.old_value},
                     {"new", s.new_value},
                     {"delta_norm", s.delta_norm}});
  }
  return json{{"mode", to_string(r.mode)},
              {"y", r.y},
              {"y_diff", r.y_diff},
              {"v", instance_json(r.v)},
              {"v_prime", instance_json(r.v_prime)},
              {"v_adv", instance_json(r.v_adv)},
              {"v_prime_adv", instance_json(r.v_prime_adv)},
              {"steps", steps},
              {"trajectory_v", trajectory_json(r.trajectory_v)},
              {"trajectory_v_prime", trajectory_json(r.trajectory_v_prime)},
              {"f_v_initial", r.f_v_initial},
              {"f_v_prime_initial", r.f_v_prime_initial},
              {"f_v_final", r.f_v_final},
              {"f_v_prime_final", r.f_v_prime_final},
              {"joint_losses", r.joint_losses},
              {"success", r.success},
              {"stop", to_string(r.stop)},
              {"label_v_adv", r.label_v_adv},
              {"label_v_prime_adv", r.label_v_prime_adv},
              {"outcome", to_string(r.outcome)}};
}

AttackResult attack_result_from_json(const json& j) {
  AttackResult r;
  r.mode = parse_or_throw<AttackMode>(j.at("mode"), parse_attack_mode, "attack mode");
  r.y = j.at("y").get<int>();
  r.y_diff = j.at("y_diff").get<int>();
  r.v = instance_from(j.at("v"));
  r.v_prime = instance_from(j.at("v_prime"));
  r.v_adv = instance_from(j.at("v_adv"));
  r.v_prime_adv = instance_from(j.at("v_prime_adv"));
  for (const auto& s : j.at("steps")) {
    r.steps.push_back({s.at("step").get<std::size_t>(), s.at("feature").get<std::size_t>(), s.at("old").get<double>(),
                       s.at("new").get<double>(), s.at("delta_norm").get<double>()});
  }
  r.trajectory_v = trajectory_from(j.at("trajectory_v"));
  r.trajectory_v_prime = trajectory_from(j.at("trajectory_v_prime"));
  r.f_v_initial = j.at("f_v_initial").get<double>();
  r.f_v_prime_initial = j.at("f_v_prime_initial").get<double>();
  r.f_v_final = j.at("f_v_final").get<double>();
  r.f_v_prime_final = j.at("f_v_prime_final").get<double>();
  r.joint_losses = j.at("joint_losses").get<std::vector<double>>();
  r.success = j.at("success").get<bool>();
  r.stop = parse_stop(j.at("stop").get<std::string>());
  r.label_v_adv = j.at("label_v_adv").get<int>();
  r.label_v_prime_adv = j.at("label_v_prime_adv").get<int>();
  r.outcome = parse_or_throw<OutcomeClass>(j.at("outcome"), parse_outcome, "outcome class");
  return r;
}

json to_json(const InstanceBundle& b) {
  json j{{"base", instance_json(b.base)},
         {"clean_label", b.clean_label},
         {"clean_positive", b.clean_positive},
         {"clean_similar_labels", b.clean_similar_labels}};
  j["fgsm"] = b.fgsm ? json{{"adv", instance_json(b.fgsm->adv)}, {"label", b.fgsm->label}, {"success", b.fgsm->success}}
                     : json(nullptr);
  j["adf"] = b.adf ? json{{"v_adv", instance_json(b.adf->v_adv)},
                          {"v_prime_adv", instance_json(b.adf->v_prime_adv)},
                          {"success", b.adf->success},
                          {"steps", b.adf->steps}}
                   : json(nullptr);
  json modes = json::object();
  for (AttackMode mode : kAllModes) {
    const auto k = static_cast<std::size_t>(mode);
    if (!b.rifair[k]) continue;
    json r = to_json(*b.rifair[k]);
    r["rif_members"] = members_json(b.members[k]);
    modes[std::string(to_string(mode))] = std::move(r);
  }
  j["rifair"] = std::move(modes);
  return j;
}

InstanceBundle bundle_from_json(const json& j) {
  InstanceBundle b;
  b.base = instance_from(j.at("base"));
  b.clean_label = j.at("clean_label").get<int>();
  b.clean_positive = j.at("clean_positive").get<double>();
  b.clean_similar_labels = j.at("clean_similar_labels").get<std::vector<int>>();
  if (const auto& f = j.at("fgsm"); !f.is_null()) {
    b.fgsm = FgsmOutcome{instance_from(f.at("adv")), f.at("label").get<int>(), f.at("success").get<bool>()};
  }
  if (const auto& a = j.at("adf"); !a.is_null()) {
    b.adf = AdfResult{instance_from(a.at("v_adv")), instance_from(a.at("v_prime_adv")), a.at("success").get<bool>(),
                      a.at("steps").get<int>()};
  }
  for (const auto& [name, r] : j.at("rifair").items()) {
    const auto mode = parse_attack_mode(name);
    if (!mode) throw std::invalid_argument("unknown attack mode: " + name);
    const auto k = static_cast<std::size_t>(*mode);
    b.rifair[k] = attack_result_from_json(r);
    b.members[k] = members_from(r.at("rif_members"));
  }
  return b;
}

std::string trajectory_csv(const AttackResult& r, const FeatureSchema& schema) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "step,feature,old,new,delta_norm,f_v,f_v_prime,pii_v,pid_v,pii_v_prime,pid_v_prime\n";
  auto pid = [](const TrajectoryStep& t) { return t.pid ? std::to_string(*t.pid) : std::string(); };
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto& s = r.steps[i];
    const FeatureSpec& spec = schema.feature(s.feature_index);
    const auto& a = r.trajectory_v[i];
    const auto& b = r.trajectory_v_prime[i];
    os << s.step_index << ',' << spec.name << ',' << format_value(spec, s.old_value) << ','
       << format_value(spec, s.new_value) << ',' << s.delta_norm << ',' << a.f_after << ',' << b.f_after << ','
       << a.pii << ',' << pid(a) << ',' << b.pii << ',' << pid(b) << '\n';
  }
  return os.str();
}

std::string trajectory_svg(const AttackResult& r, double tau_dec) {
  constexpr double kW = 480, kH = 300, kL = 50, kR = 20, kT = 30, kB = 40;
  const std::size_t n = r.steps.size();
  const double span = static_cast<double>(std::max<std::size_t>(n, 1));
  auto px = [&](std::size_t step) { return kL + (kW - kL - kR) * static_cast<double>(step) / span; };
  auto py = [&](double f) { return kT + (kH - kT - kB) * (1.0 - f); };

  auto polyline = [&](double f0, const std::vector<TrajectoryStep>& t, const char* colour) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"" << px(0) << ','
       << py(f0);
    for (std::size_t i = 0; i < t.size(); ++i) os << ' ' << px(i + 1) << ',' << py(t[i].f_after);
    os << "\"/>\n";
    return os.str();
  };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  os << "<text x=\"" << kL << "\" y=\"18\" font-size=\"13\">" << to_string(r.mode) << " id " << r.v.id
     << (r.success ? " (success)" : " (no success)") << "</text>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << py(0) << "\" x2=\"" << kW - kR << "\" y2=\"" << py(0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << py(0) << "\" x2=\"" << kL << "\" y2=\"" << py(1)
     << "\" stroke=\"black\"/>\n";
  for (double f : {0.0, 0.5, 1.0}) {
    os << "<text x=\"" << kL - 30 << "\" y=\"" << py(f) + 4 << "\" font-size=\"11\">" << f << "</text>\n";
  }
  for (std::size_t s = 0; s <= n; ++s) {
    os << "<text x=\"" << px(s) - 3 << "\" y=\"" << kH - kB + 15 << "\" font-size=\"11\">" << s << "</text>\n";
  }
  os << "<text x=\"" << (kW / 2) << "\" y=\"" << kH - 5 << "\" font-size=\"11\">step</text>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << py(tau_dec) << "\" x2=\"" << kW - kR << "\" y2=\"" << py(tau_dec)
     << "\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n";
  os << polyline(r.f_v_initial, r.trajectory_v, "#1f77b4");
  os << polyline(r.f_v_prime_initial, r.trajectory_v_prime, "#d62728");
  os << "<text x=\"" << kW - 110 << "\" y=\"18\" font-size=\"11\" fill=\"#1f77b4\">f(v)</text>\n";
  os << "<text x=\"" << kW - 60 << "\" y=\"18\" font-size=\"11\" fill=\"#d62728\">f(v')</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace rifair
