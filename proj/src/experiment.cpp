#include "ipsg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ipsg/optimizer.hpp"
#include "ipsg/parallel.hpp"

namespace ipsg {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict JSON readers

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) +
                      "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) {
      std::string msg = "unknown key '" + join_path(path, key) + "'; allowed:";
      for (const char* a : allowed) msg += std::string(" ") + a;
      throw ConfigError(msg);
    }
  }
}

[[noreturn]] void type_error(const std::string& where, const char* expected) {
  throw ConfigError("'" + where + "' must be " + expected);
}

double as_real(const json& v, const std::string& where) {
  if (!v.is_number()) type_error(where, "a number");
  return v.get<double>();
}

std::int64_t as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) type_error(where, "an integer");
  return v.get<std::int64_t>();
}

std::uint64_t as_uint(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) type_error(where, "a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::size_t as_count(const json& v, const std::string& where) {
  const auto n = as_uint(v, where);
  if (n < 1) type_error(where, "a positive integer");
  return static_cast<std::size_t>(n);
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) type_error(where, "true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) type_error(where, "a string");
  return v.get<std::string>();
}

Vector as_reals(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) type_error(where, "a number or an array of numbers");
  Vector out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_real(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

// Calls fn(value, path) when the key is present and not null.
template <typename F>
void with(const json& obj, const std::string& path, const char* key, F&& fn) {
  auto it = obj.find(key);
  if (it != obj.end() && !it->is_null()) fn(*it, join_path(path, key));
}

template <typename F>
auto enum_value(const json& v, const std::string& where, F&& parse) {
  const std::string name = as_string(v, where);
  try {
    return parse(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("'" + where + "': " + e.what());
  }
}

const std::set<std::string>& problem_kinds() {
  static const std::set<std::string> kinds{"phase_retrieval",
                                           "smooth_synthetic", "sparse_blr",
                                           "quadratic"};
  return kinds;
}

Regularizer parse_regularizer(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "lambda", "lo", "hi", "radius"});
  Regularizer r;
  with(j, path, "kind", [&](const json& v, const std::string& w) {
    r.kind = enum_value(v, w, regularizer_kind_from_string);
  });
  with(j, path, "lambda",
       [&](const json& v, const std::string& w) { r.lambda = as_real(v, w); });
  with(j, path, "lo",
       [&](const json& v, const std::string& w) { r.lo = as_reals(v, w); });
  with(j, path, "hi",
       [&](const json& v, const std::string& w) { r.hi = as_reals(v, w); });
  with(j, path, "radius",
       [&](const json& v, const std::string& w) { r.radius = as_real(v, w); });
  try {
    r.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
  return r;
}

Schedule parse_schedule(const json& j, const std::string& path) {
  check_keys(j, path,
             {"kind", "alpha", "beta", "beta_cap", "shift", "epoch_based",
              "coupled_base"});
  Schedule s;
  s.alpha = 0.01;
  with(j, path, "kind", [&](const json& v, const std::string& w) {
    s.kind = enum_value(v, w, schedule_kind_from_string);
  });
  with(j, path, "alpha",
       [&](const json& v, const std::string& w) { s.alpha = as_real(v, w); });
  with(j, path, "beta",
       [&](const json& v, const std::string& w) { s.beta = as_real(v, w); });
  with(j, path, "beta_cap", [&](const json& v, const std::string& w) {
    s.beta_cap = as_real(v, w);
  });
  with(j, path, "shift",
       [&](const json& v, const std::string& w) { s.shift = as_int(v, w); });
  with(j, path, "epoch_based", [&](const json& v, const std::string& w) {
    s.epoch_based = as_bool(v, w);
  });
  with(j, path, "coupled_base", [&](const json& v, const std::string& w) {
    s.coupled_base = enum_value(v, w, schedule_kind_from_string);
  });
  return s;
}

DelayModel parse_delay(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "tau", "probs"});
  DelayModel d;
  with(j, path, "kind", [&](const json& v, const std::string& w) {
    d.kind = enum_value(v, w, delay_kind_from_string);
  });
  with(j, path, "tau",
       [&](const json& v, const std::string& w) { d.tau = as_int(v, w); });
  with(j, path, "probs",
       [&](const json& v, const std::string& w) { d.probs = as_reals(v, w); });
  if (d.kind == DelayKind::StaticDistribution) {
    if (d.probs.empty()) {
      if (d.tau < 0) throw ConfigError("'" + path + ".tau' must be >= 0");
      d = DelayModel::uniform(d.tau);
    } else if (!j.contains("tau")) {
      d.tau = static_cast<std::int64_t>(d.probs.size()) - 1;
    }
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
  return d;
}

json regularizer_json(const Regularizer& r) {
  json j{{"kind", std::string(to_string(r.kind))}};
  switch (r.kind) {
    case RegularizerKind::L1:
      j["lambda"] = r.lambda;
      break;
    case RegularizerKind::Box:
      j["lo"] = r.lo;
      j["hi"] = r.hi;
      break;
    case RegularizerKind::Ball:
      j["radius"] = r.radius;
      break;
    case RegularizerKind::BoxL1:
      j["lambda"] = r.lambda;
      j["lo"] = r.lo;
      j["hi"] = r.hi;
      break;
    case RegularizerKind::Zero:
      break;
  }
  return j;
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string beta_label(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", beta);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// parse_config

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  check_keys(root, "",
             {"problem", "m", "d", "K", "epochs", "blr", "quadratic",
              "instance_file", "instance_seed", "regularizer", "method",
              "schedule", "delay", "batch_size", "seeds", "repeats", "mode",
              "workers", "tau_max_discard", "async_rendezvous",
              "simulated_cost_ms", "objective_every", "wall_clock",
              "output_dir", "beta_sweep", "worker_sweep", "moreau",
              "conditions"});

  ExperimentConfig cfg;
  auto& p = cfg.problem;
  auto& rc = cfg.base;
  rc.batch_size = 100;
  rc.schedule.alpha = 0.01;

  with(root, "", "problem", [&](const json& v, const std::string& w) {
    p.kind = as_string(v, w);
    if (!problem_kinds().count(p.kind))
      throw ConfigError("'problem': invalid value '" + p.kind +
                        "'; valid options: phase_retrieval, smooth_synthetic, "
                        "sparse_blr, quadratic");
  });
  with(root, "", "m",
       [&](const json& v, const std::string& w) { p.m = as_count(v, w); });
  with(root, "", "d",
       [&](const json& v, const std::string& w) { p.d = as_count(v, w); });
  with(root, "", "blr", [&](const json& j, const std::string& path) {
    check_keys(j, path, {"s", "t", "classes", "rank", "lambda", "noise_std"});
    with(j, path, "s",
         [&](const json& v, const std::string& w) { p.s = as_count(v, w); });
    with(j, path, "t",
         [&](const json& v, const std::string& w) { p.t = as_count(v, w); });
    with(j, path, "classes", [&](const json& v, const std::string& w) {
      p.classes = as_count(v, w);
    });
    with(j, path, "rank",
         [&](const json& v, const std::string& w) { p.rank = as_count(v, w); });
    with(j, path, "lambda", [&](const json& v, const std::string& w) {
      p.lambda = as_real(v, w);
    });
    with(j, path, "noise_std", [&](const json& v, const std::string& w) {
      p.noise_std = as_real(v, w);
    });
  });
  with(root, "", "quadratic", [&](const json& j, const std::string& path) {
    check_keys(j, path, {"diag", "center", "samples"});
    with(j, path, "diag",
         [&](const json& v, const std::string& w) { p.diag = as_reals(v, w); });
    with(j, path, "center", [&](const json& v, const std::string& w) {
      p.center = as_reals(v, w);
    });
    with(j, path, "samples", [&](const json& v, const std::string& w) {
      p.samples = as_count(v, w);
    });
  });
  with(root, "", "instance_file", [&](const json& v, const std::string& w) {
    p.instance_file = as_string(v, w);
  });
  with(root, "", "instance_seed", [&](const json& v, const std::string& w) {
    p.instance_seed = as_uint(v, w);
  });
  with(root, "", "regularizer", [&](const json& v, const std::string& w) {
    if (p.kind == "sparse_blr")
      throw ConfigError(
          "'regularizer' is fixed to l1 for sparse_blr; set blr.lambda");
    p.regularizer = parse_regularizer(v, w);
  });
  if (p.kind == "sparse_blr") p.regularizer = Regularizer::l1(p.lambda);
  if (p.kind == "quadratic" && !p.instance_file) {
    if (p.diag.empty())
      throw ConfigError("'quadratic.diag' is required for problem quadratic");
    if (p.center.empty()) p.center.assign(p.diag.size(), 0.0);
  }

  with(root, "", "method", [&](const json& v, const std::string& w) {
    rc.method = enum_value(v, w, method_from_string);
  });
  with(root, "", "schedule", [&](const json& v, const std::string& w) {
    rc.schedule = parse_schedule(v, w);
  });
  with(root, "", "delay", [&](const json& v, const std::string& w) {
    rc.delay = parse_delay(v, w);
  });
  with(root, "", "batch_size", [&](const json& v, const std::string& w) {
    rc.batch_size = static_cast<std::int64_t>(as_count(v, w));
  });

  const bool has_k = root.contains("K") && !root["K"].is_null();
  const bool has_epochs = root.contains("epochs") && !root["epochs"].is_null();
  if (has_k == has_epochs)
    throw ConfigError("exactly one of 'K' or 'epochs' must be given");
  with(root, "", "K", [&](const json& v, const std::string& w) {
    rc.iterations = static_cast<std::int64_t>(as_count(v, w));
  });
  with(root, "", "epochs", [&](const json& v, const std::string& w) {
    cfg.epochs = static_cast<std::int64_t>(as_count(v, w));
  });

  if (root.contains("seeds") && root.contains("repeats"))
    throw ConfigError("give either 'seeds' or 'repeats', not both");
  with(root, "", "seeds", [&](const json& v, const std::string& w) {
    if (!v.is_array() || v.empty()) type_error(w, "a nonempty array");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < v.size(); ++i)
      cfg.seeds.push_back(as_uint(v[i], w + "[" + std::to_string(i) + "]"));
  });
  with(root, "", "repeats", [&](const json& v, const std::string& w) {
    const auto n = as_count(v, w);
    cfg.seeds.clear();
    for (std::size_t i = 1; i <= n; ++i) cfg.seeds.push_back(i);
  });

  with(root, "", "mode", [&](const json& v, const std::string& w) {
    cfg.modes.clear();
    if (v.is_array()) {
      if (v.empty()) type_error(w, "a nonempty list");
      for (std::size_t i = 0; i < v.size(); ++i)
        cfg.modes.push_back(enum_value(
            v[i], w + "[" + std::to_string(i) + "]", run_mode_from_string));
    } else {
      cfg.modes.push_back(enum_value(v, w, run_mode_from_string));
    }
  });
  with(root, "", "workers", [&](const json& v, const std::string& w) {
    rc.workers = static_cast<int>(as_uint(v, w));
  });
  // An empty sweep means "no sweep", which is how the resolved form writes it.
  with(root, "", "worker_sweep", [&](const json& v, const std::string& w) {
    if (!v.is_array()) type_error(w, "an array");
    for (std::size_t i = 0; i < v.size(); ++i)
      cfg.worker_sweep.push_back(static_cast<int>(
          as_count(v[i], w + "[" + std::to_string(i) + "]")));
  });
  with(root, "", "beta_sweep", [&](const json& v, const std::string& w) {
    if (!v.is_array()) type_error(w, "an array");
    cfg.beta_sweep = as_reals(v, w);
  });
  with(root, "", "tau_max_discard", [&](const json& v, const std::string& w) {
    rc.tau_max_discard = static_cast<std::int64_t>(as_uint(v, w));
  });
  with(root, "", "async_rendezvous", [&](const json& v, const std::string& w) {
    rc.rendezvous = as_bool(v, w);
  });
  with(root, "", "simulated_cost_ms", [&](const json& v, const std::string& w) {
    rc.simulated_cost_ms = as_real(v, w);
  });
  with(root, "", "objective_every", [&](const json& v, const std::string& w) {
    rc.objective_every = static_cast<std::int64_t>(as_uint(v, w));
  });
  with(root, "", "wall_clock", [&](const json& v, const std::string& w) {
    rc.wall_clock = as_bool(v, w);
  });
  with(root, "", "output_dir", [&](const json& v, const std::string& w) {
    cfg.output_dir = as_string(v, w);
  });

  with(root, "", "moreau", [&](const json& j, const std::string& path) {
    check_keys(j, path,
               {"enabled", "rho", "rho_bar", "inner_budget", "inner_tol", "k0"});
    auto& m = cfg.moreau;
    m.enabled = true;
    with(j, path, "enabled", [&](const json& v, const std::string& w) {
      m.enabled = as_bool(v, w);
    });
    with(j, path, "rho",
         [&](const json& v, const std::string& w) { m.rho = as_real(v, w); });
    with(j, path, "rho_bar", [&](const json& v, const std::string& w) {
      m.rho_bar = as_real(v, w);
    });
    with(j, path, "inner_budget", [&](const json& v, const std::string& w) {
      m.inner_budget = static_cast<std::int64_t>(as_count(v, w));
    });
    with(j, path, "inner_tol", [&](const json& v, const std::string& w) {
      m.inner_tol = as_real(v, w);
    });
    with(j, path, "k0", [&](const json& v, const std::string& w) {
      m.k0 = static_cast<std::int64_t>(as_count(v, w));
    });
  });
  with(root, "", "conditions", [&](const json& j, const std::string& path) {
    check_keys(j, path, {"regime", "rho", "rho_bar", "tau"});
    auto& c = cfg.conditions;
    with(j, path, "regime", [&](const json& v, const std::string& w) {
      c.regime = enum_value(v, w, regime_from_string);
    });
    if (!c.regime) throw ConfigError("'conditions.regime' is required");
    with(j, path, "rho",
         [&](const json& v, const std::string& w) { c.rho = as_real(v, w); });
    with(j, path, "rho_bar", [&](const json& v, const std::string& w) {
      c.rho_bar = as_real(v, w);
    });
    with(j, path, "tau",
         [&](const json& v, const std::string& w) { c.tau = as_real(v, w); });
  });

  // Cross-field checks; per-run validation happens again in expand_runs.
  for (RunMode mode : cfg.modes) {
    if (mode == RunMode::Sequential) continue;
    if (cfg.worker_sweep.empty() && rc.workers < 1)
      throw ConfigError("parallel modes need 'workers' >= 1 or 'worker_sweep'");
  }
  try {
    RunConfig probe = rc;
    probe.mode = RunMode::Sequential;
    if (probe.delay.kind == DelayKind::Observed) probe.delay = DelayModel::none();
    // With epochs the horizon is only known once the instance exists.
    probe.schedule.horizon =
        cfg.epochs ? std::int64_t{1} << 40 : probe.iterations;
    for (double b : cfg.beta_sweep.empty() ? Vector{rc.schedule.beta}
                                           : cfg.beta_sweep) {
      probe.schedule.beta = b;
      probe.validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  const auto& p = cfg.problem;
  const auto& rc = cfg.base;
  json j;
  j["problem"] = p.kind;
  j["m"] = p.m;
  j["d"] = p.d;
  j["blr"] = {{"s", p.s},           {"t", p.t},
              {"classes", p.classes}, {"rank", p.rank},
              {"lambda", p.lambda}, {"noise_std", p.noise_std}};
  j["quadratic"] = {
      {"diag", p.diag}, {"center", p.center}, {"samples", p.samples}};
  j["instance_file"] = opt(p.instance_file);
  j["instance_seed"] = p.instance_seed;
  j["regularizer"] = regularizer_json(p.regularizer);
  j["method"] = std::string(to_string(rc.method));
  j["schedule"] = {{"kind", std::string(to_string(rc.schedule.kind))},
                   {"alpha", rc.schedule.alpha},
                   {"beta", rc.schedule.beta},
                   {"beta_cap", rc.schedule.beta_cap},
                   {"shift", rc.schedule.shift},
                   {"epoch_based", rc.schedule.epoch_based},
                   {"coupled_base",
                    std::string(to_string(rc.schedule.coupled_base))}};
  j["delay"] = {{"kind", std::string(to_string(rc.delay.kind))},
                {"tau", rc.delay.tau},
                {"probs", rc.delay.probs}};
  j["batch_size"] = rc.batch_size;
  if (cfg.epochs)
    j["epochs"] = *cfg.epochs;
  else
    j["K"] = rc.iterations;
  j["seeds"] = cfg.seeds;
  json modes = json::array();
  for (auto m : cfg.modes) modes.push_back(std::string(to_string(m)));
  j["mode"] = modes;
  j["workers"] = rc.workers;
  j["worker_sweep"] = cfg.worker_sweep;
  j["beta_sweep"] = cfg.beta_sweep;
  j["tau_max_discard"] = opt(rc.tau_max_discard);
  j["async_rendezvous"] = rc.rendezvous;
  j["simulated_cost_ms"] = rc.simulated_cost_ms;
  j["objective_every"] = rc.objective_every;
  j["wall_clock"] = rc.wall_clock;
  j["output_dir"] = cfg.output_dir;
  j["moreau"] = {{"enabled", cfg.moreau.enabled},
                 {"rho", opt(cfg.moreau.rho)},
                 {"rho_bar", opt(cfg.moreau.rho_bar)},
                 {"inner_budget", cfg.moreau.inner_budget},
                 {"inner_tol", cfg.moreau.inner_tol},
                 {"k0", cfg.moreau.k0}};
  if (cfg.conditions.regime)
    j["conditions"] = {
        {"regime", std::string(to_string(*cfg.conditions.regime))},
        {"rho", opt(cfg.conditions.rho)},
        {"rho_bar", opt(cfg.conditions.rho_bar)},
        {"tau", opt(cfg.conditions.tau)}};
  else
    j["conditions"] = nullptr;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Instances

InstanceData make_instance(const ProblemSpec& spec) {
  if (spec.instance_file) {
    InstanceData data = load_instance_file(*spec.instance_file);
    const bool pr_family =
        spec.kind == "phase_retrieval" || spec.kind == "smooth_synthetic";
    const bool file_pr_family =
        data.kind == "phase_retrieval" || data.kind == "smooth_synthetic";
    if (data.kind != spec.kind && !(pr_family && file_pr_family))
      throw ConfigError("instance file holds a " + data.kind +
                        " instance, config asks for " + spec.kind);
    data.kind = spec.kind;
    return data;
  }
  const std::uint64_t seed = derive_seed(spec.instance_seed, streams::kInstance);
  InstanceData data;
  data.kind = spec.kind;
  if (spec.kind == "phase_retrieval" || spec.kind == "smooth_synthetic") {
    data.measurements = generate_phase_retrieval(spec.m, spec.d, seed);
  } else if (spec.kind == "sparse_blr") {
    data.blr = generate_blr_synthetic(spec.m, spec.s, spec.t, spec.classes,
                                      spec.rank, seed, spec.noise_std);
  } else if (spec.kind == "quadratic") {
    data.diag = spec.diag;
    data.center = spec.center;
    data.samples = spec.samples;
  } else {
    throw ConfigError("unknown problem kind " + spec.kind);
  }
  return data;
}

std::unique_ptr<Problem> build_problem(const InstanceData& data,
                                       const ProblemSpec& spec) {
  const Regularizer& r = spec.regularizer;
  std::unique_ptr<Problem> problem;
  if (data.kind == "phase_retrieval")
    problem = std::make_unique<PhaseRetrievalProblem>(data.measurements, r);
  else if (data.kind == "smooth_synthetic")
    problem = std::make_unique<SmoothPhaseProblem>(data.measurements, r);
  else if (data.kind == "sparse_blr")
    problem = std::make_unique<SparseBlrProblem>(data.blr, spec.lambda);
  else if (data.kind == "quadratic")
    problem = std::make_unique<QuadraticProblem>(data.diag, data.center, r,
                                                 data.samples);
  else
    throw ConfigError("unknown problem kind " + data.kind);

  const std::size_t n = problem->dim();
  const auto bad = [n](const Vector& v) {
    return !v.empty() && v.size() != 1 && v.size() != n;
  };
  if (bad(r.lo) || bad(r.hi))
    throw ConfigError("regularizer bounds must have 1 or " + std::to_string(n) +
                      " entries");
  return problem;
}

std::optional<double> default_rho(const Problem& problem) {
  if (const auto* pr = dynamic_cast<const PhaseRetrievalProblem*>(&problem))
    return phase_retrieval_rho(pr->data());
  if (const auto* q = dynamic_cast<const QuadraticProblem*>(&problem))
    return *std::max_element(q->diag().begin(), q->diag().end());
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Runs

std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg,
                                 std::size_t num_samples) {
  const Vector betas =
      cfg.beta_sweep.empty() ? Vector{cfg.base.schedule.beta} : cfg.beta_sweep;
  std::vector<RunSpec> runs;
  for (RunMode mode : cfg.modes) {
    std::vector<int> worker_counts{0};
    if (mode != RunMode::Sequential)
      worker_counts = cfg.worker_sweep.empty() ? std::vector<int>{cfg.base.workers}
                                               : cfg.worker_sweep;
    for (int w : worker_counts) {
      for (double beta : betas) {
        for (std::uint64_t seed : cfg.seeds) {
          RunSpec spec;
          RunConfig& rc = spec.cfg;
          rc = cfg.base;
          rc.mode = mode;
          rc.workers = w;
          rc.seed = seed;
          rc.schedule.beta = beta;
          // Parallel runs observe their delays instead of simulating them.
          if (mode == RunMode::AsyncParallel)
            rc.delay = DelayModel::observed();
          else if (mode == RunMode::SyncParallel)
            rc.delay = DelayModel::none();
          if (cfg.epochs) {
            const auto spu = samples_per_update(rc);
            const auto total =
                *cfg.epochs * static_cast<std::int64_t>(num_samples);
            rc.iterations = (total + spu - 1) / spu;
          }
          rc.schedule.horizon = rc.iterations;
          try {
            rc.validate();
          } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
          }
          spec.id = std::string(to_string(mode)) + "_w" + std::to_string(w) +
                    "_beta" + beta_label(beta) + "_seed" + std::to_string(seed);
          runs.push_back(std::move(spec));
        }
      }
    }
  }
  return runs;
}

std::optional<ConditionReport> run_conditions(const ExperimentConfig& cfg,
                                              const RunConfig& run,
                                              const Problem& problem) {
  const auto& c = cfg.conditions;
  if (!c.regime) return std::nullopt;
  ConditionParams p;
  p.alpha = run.schedule.alpha;
  p.beta = run.schedule.beta;
  p.beta_cap = run.schedule.beta_cap;
  p.K = static_cast<double>(run.iterations);
  p.a = static_cast<double>(run.schedule.shift);
  p.rho = c.rho ? c.rho : default_rho(problem);
  if (p.rho) p.rho_bar = c.rho_bar.value_or(2.0 * *p.rho);
  if (c.tau)
    p.tau = c.tau;
  else if (run.mode == RunMode::Sequential)
    p.tau = static_cast<double>(run.delay.tau);
  else if (run.mode == RunMode::SyncParallel)
    p.tau = 0.0;
  else if (run.tau_max_discard)
    p.tau = static_cast<double>(*run.tau_max_discard);
  return check_parameter_conditions(*c.regime, p);
}

RunOutcome execute_run(const ExperimentConfig& cfg, const Problem& problem,
                       const RunSpec& spec) {
  RunOutcome out;
  out.spec = spec;
  const RunConfig& rc = spec.cfg;

  try {
    if (auto report = run_conditions(cfg, rc, problem)) {
      out.conditions = report->feasible ? "feasible" : "infeasible:";
      if (!report->feasible)
        for (std::size_t i = 0; i < report->violated.size(); ++i)
          out.conditions += (i ? ";" : "") + report->violated[i];
    }
  } catch (const std::invalid_argument& e) {
    out.conditions = std::string("unchecked: ") + e.what();
  }

  // The output index depends only on the schedule, so it is drawn up front
  // and x^(T) is captured while the run proceeds.
  const auto alphas = step_sizes(rc, problem);
  Rng rng(derive_seed(rc.seed, streams::kOutputIndex));
  const std::int64_t k0 =
      std::min<std::int64_t>(cfg.moreau.k0, static_cast<std::int64_t>(alphas.size()));
  const std::int64_t T = select_T(alphas, k0, rng);
  Vector x_T;
  RunHooks hooks;
  hooks.on_iterate = [&](std::int64_t j, std::span<const double> x) {
    if (j == T) x_T.assign(x.begin(), x.end());
  };

  const auto start = std::chrono::steady_clock::now();
  try {
    out.trace = run(rc, problem, hooks);
  } catch (const DivergenceError& e) {
    out.status = "diverged";
    out.failed_k = e.k();
    out.error = e.what();
  } catch (const std::exception& e) {
    out.status = "error";
    out.error = e.what();
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  if (!out.trace) return out;

  out.output_T = T;
  out.output_objective = problem.full_objective(x_T);
  if (cfg.moreau.enabled) {
    MoreauConfig mc;
    const auto rho = cfg.moreau.rho ? cfg.moreau.rho : default_rho(problem);
    if (!rho) {
      out.status = "error";
      out.error = "moreau: rho is required for problem " +
                  std::string(problem.kind());
      return out;
    }
    mc.rho = *rho;
    mc.rho_bar = cfg.moreau.rho_bar;
    mc.inner_budget = cfg.moreau.inner_budget;
    mc.inner_tol = cfg.moreau.inner_tol;
    try {
      out.moreau_estimate = moreau_grad_norm(problem, x_T, mc).estimate;
    } catch (const std::exception& e) {
      out.status = "error";
      out.error = e.what();
    }
  }
  return out;
}

bool ExperimentResult::ok() const {
  return std::all_of(runs.begin(), runs.end(),
                     [](const RunOutcome& r) { return r.status == "ok"; });
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  namespace fs = std::filesystem;
  ExperimentResult result;
  result.output_dir = cfg.output_dir;
  if (const char* env = std::getenv("IPSG_OUTPUT_DIR"); env && *env)
    result.output_dir = env;
  const fs::path dir(result.output_dir);
  fs::create_directories(dir / "traces");

  const InstanceData data = make_instance(cfg.problem);
  const auto problem = build_problem(data, cfg.problem);
  const auto runs = expand_runs(cfg, problem->num_samples());

  {
    json header = json::parse(resolved_config_json(cfg));
    header["version"] = IPSG_VERSION;
    header["output_dir"] = result.output_dir;
    header["runs"] = runs.size();
    std::ofstream out(dir / "run_header.json");
    if (!out)
      throw std::runtime_error("cannot write to output directory " +
                               result.output_dir);
    out << header.dump(2) << '\n';
  }

  for (const auto& spec : runs) {
    if (log) *log << "run " << spec.id << " (K=" << spec.cfg.iterations << ")";
    RunOutcome outcome = execute_run(cfg, *problem, spec);
    if (outcome.trace) {
      std::ofstream out(dir / "traces" / (spec.id + ".csv"));
      write_trace_csv(*outcome.trace, out);
    }
    if (log) {
      *log << ": " << outcome.status;
      if (outcome.trace && outcome.trace->final_objective())
        *log << ", final objective " << format_real(*outcome.trace->final_objective());
      if (!outcome.error.empty()) *log << " (" << outcome.error << ")";
      *log << '\n';
    }
    result.runs.push_back(std::move(outcome));
  }

  std::ofstream summary(dir / "summary.csv");
  write_summary_csv(result.runs, summary);
  return result;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string histogram_text(const DelayStats& s) {
  std::string out;
  for (const auto& [tau, count] : s.histogram) {
    if (!out.empty()) out += ';';
    out += std::to_string(tau) + ":" + std::to_string(count);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw std::runtime_error("trace csv line " + std::to_string(line) +
                             ": bad number '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw std::runtime_error("trace csv line " + std::to_string(line) +
                             ": bad integer '" + s + "'");
  return v;
}

}  // namespace

void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.k << ',' << r.epoch << ',';
    if (r.objective) out << format_real(*r.objective);
    out << ',' << format_real(r.step_norm) << ',' << r.observed_delay << ','
        << format_real(r.wall_ms) << '\n';
  }
  if (trace.delays) {
    const auto& s = *trace.delays;
    out << "# delay_stats min=" << s.min << " max=" << s.max
        << " mean=" << format_real(s.mean) << " discarded=" << s.discarded
        << " histogram=" << histogram_text(s) << '\n';
  }
}

ParsedTrace read_trace_csv(std::istream& in) {
  ParsedTrace out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::runtime_error("trace csv: missing header '" +
                             std::string(kTraceHeader) + "'");
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# delay_stats", 0) == 0) {
      DelayStats s;
      std::istringstream ss(line.substr(14));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "min") s.min = parse_int(val, lineno);
        else if (key == "max") s.max = parse_int(val, lineno);
        else if (key == "mean") s.mean = parse_real(val, lineno);
        else if (key == "discarded") s.discarded = parse_int(val, lineno);
        else if (key == "histogram" && !val.empty())
          for (const auto& pair : split(val, ';')) {
            const auto colon = pair.find(':');
            s.histogram[parse_int(pair.substr(0, colon), lineno)] =
                parse_int(pair.substr(colon + 1), lineno);
          }
      }
      out.delays = s;
      continue;
    }
    if (line[0] == '#') continue;
    const auto f = split(line, ',');
    if (f.size() != 6)
      throw std::runtime_error("trace csv line " + std::to_string(lineno) +
                               ": expected 6 fields");
    TraceRecord r;
    r.k = parse_int(f[0], lineno);
    r.epoch = parse_int(f[1], lineno);
    if (!f[2].empty()) r.objective = parse_real(f[2], lineno);
    r.step_norm = parse_real(f[3], lineno);
    r.observed_delay = parse_int(f[4], lineno);
    r.wall_ms = parse_real(f[5], lineno);
    out.records.push_back(r);
  }
  return out;
}

void write_summary_csv(const std::vector<RunOutcome>& runs, std::ostream& out) {
  out << "run_id,mode,workers,beta,seed,K,status,failed_k,initial_objective,"
         "final_objective,best_objective,wall_ms,delay_min,delay_mean,"
         "delay_max,delay_histogram,discarded,output_T,output_objective,"
         "moreau_estimate,conditions,error\n";
  const auto real_or_empty = [](const std::optional<double>& v) {
    return v ? format_real(*v) : std::string();
  };
  for (const auto& r : runs) {
    const auto& c = r.spec.cfg;
    out << csv_field(r.spec.id) << ',' << to_string(c.mode) << ','
        << c.workers << ',' << format_real(c.schedule.beta) << ',' << c.seed
        << ',' << c.iterations << ',' << r.status << ',';
    if (r.failed_k) out << *r.failed_k;
    out << ',';
    if (r.trace) {
      const auto& t = *r.trace;
      out << format_real(t.initial_objective) << ','
          << real_or_empty(t.final_objective()) << ','
          << real_or_empty(t.best_objective()) << ',';
    } else {
      out << ",,,";
    }
    out << format_real(r.wall_ms) << ',';
    if (r.trace && r.trace->delays) {
      const auto& s = *r.trace->delays;
      out << s.min << ',' << format_real(s.mean) << ',' << s.max << ','
          << histogram_text(s) << ',' << s.discarded << ',';
    } else {
      out << ",,,,,";
    }
    if (r.output_T) out << *r.output_T;
    out << ',' << real_or_empty(r.output_objective) << ','
        << real_or_empty(r.moreau_estimate) << ',' << csv_field(r.conditions)
        << ',' << csv_field(r.error) << '\n';
  }
}

}  // namespace ipsg
