/*
 * pilotkit
 * Copyright (c) The pilotkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */

#include "pilotkit/miniapp/miniapp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pilotkit/backend/kernels.hpp"
#include "pilotkit/backend/sim_backend.hpp"
#include "pilotkit/errors.hpp"
#include "pilotkit/hash.hpp"
#include "pilotkit/stats.hpp"

namespace pilotkit {

namespace {

using json = nlohmann::ordered_json;

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw ManifestError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ManifestError("unknown field '" + key + "' in " + where);
    }
  }
}

std::string stringify(const json& value, const std::string& where) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number() || value.is_boolean()) return value.dump();
  throw ManifestError(where + " must be a string, number, or boolean");
}

int64_t to_int(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ManifestError("parameter '" + key + "' must be an integer, got '" +
                        value + "'");
  }
}

double to_double(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ManifestError("parameter '" + key + "' must be a number, got '" +
                        value + "'");
  }
}

using ParamMap = std::map<std::string, std::string>;

int64_t param_int(const ParamMap& params, const std::string& key,
                  int64_t fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : to_int(it->second, key);
}

double param_double(const ParamMap& params, const std::string& key,
                    double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : to_double(it->second, key);
}

int64_t required_int(const ParamMap& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) {
    throw ManifestError("scenario parameter '" + key + "' is required");
  }
  return to_int(it->second, key);
}

double required_double(const ParamMap& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) {
    throw ManifestError("scenario parameter '" + key + "' is required");
  }
  return to_double(it->second, key);
}

// Splits "NAME" or "NAME(a,b)" into the name and raw argument list.
std::pair<std::string, std::vector<std::string>> split_call(
    const std::string& text) {
  size_t open = text.find('(');
  if (open == std::string::npos) return {text, {}};
  if (text.back() != ')') {
    throw ManifestError("cannot parse '" + text + "'");
  }
  std::string name = text.substr(0, open);
  std::string args = text.substr(open + 1, text.size() - open - 2);
  std::vector<std::string> out;
  std::istringstream is(args);
  std::string token;
  while (std::getline(is, token, ',')) out.push_back(token);
  return {name, out};
}

double positive_arg(const std::vector<std::string>& args,
                    const std::string& text) {
  if (args.size() != 1) {
    throw ManifestError("'" + text + "' takes exactly one argument");
  }
  double v = to_double(args[0], text);
  if (v <= 0) throw ManifestError("'" + text + "' needs a positive argument");
  return v;
}

int64_t round_non_negative(double v) {
  return v <= 0 ? 0 : static_cast<int64_t>(std::llround(v));
}

KernelSpec sleep_kernel(int64_t duration_ms) {
  return KernelSpec::builtin("sleep",
                             {{"duration_ms", std::to_string(duration_ms)},
                              {"sim_duration_ms", std::to_string(duration_ms)}});
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

// ---------------------------------------------------------------------------
// Workload generation
// ---------------------------------------------------------------------------

std::pair<WorkloadGenSpec::Arrival, double> WorkloadGenSpec::parse_arrival(
    const std::string& text) {
  auto [name, args] = split_call(text);
  if (name == "BULK") {
    if (!args.empty()) throw ManifestError("BULK takes no arguments");
    return {Arrival::BULK, 0};
  }
  if (name == "POISSON") return {Arrival::POISSON, positive_arg(args, text)};
  throw ManifestError("unknown arrival schedule '" + text + "'");
}

std::pair<WorkloadGenSpec::DagShape, int> WorkloadGenSpec::parse_dag_shape(
    const std::string& text) {
  auto [name, args] = split_call(text);
  if (name == "NONE" || name.empty()) {
    if (!args.empty()) throw ManifestError("NONE takes no arguments");
    return {DagShape::NONE, 0};
  }
  if (name == "DIAMOND") {
    if (!args.empty()) throw ManifestError("DIAMOND takes no arguments");
    return {DagShape::DIAMOND, 0};
  }
  if (name == "CHAIN" || name == "FANOUT") {
    double v = positive_arg(args, text);
    if (v != std::floor(v)) {
      throw ManifestError("'" + text + "' needs an integer argument");
    }
    return {name == "CHAIN" ? DagShape::CHAIN : DagShape::FANOUT,
            static_cast<int>(v)};
  }
  throw ManifestError("unknown dag shape '" + text + "'");
}

void WorkloadGenSpec::validate() const {
  if (n_tasks < 0) throw ManifestError("n_tasks must be >= 0");
  if (arrival == Arrival::POISSON) {
    if (arrival_rate <= 0) throw ManifestError("POISSON rate must be positive");
    if (dag_shape != DagShape::NONE) {
      throw ManifestError("POISSON arrival requires independent tasks");
    }
  }
  if ((dag_shape == DagShape::CHAIN || dag_shape == DagShape::FANOUT) &&
      dag_param < 1) {
    throw ManifestError("dag shape parameter must be >= 1");
  }
}

WorkloadGraph generate_workload(const WorkloadGenSpec& spec, uint64_t seed) {
  spec.validate();
  WorkloadGraph graph;
  if (spec.n_tasks == 0) return graph;

  std::mt19937_64 rng(seed);
  std::vector<ComputeUnitDescription> units(
      static_cast<size_t>(spec.n_tasks));

  for (int i = 0; i < spec.n_tasks; ++i) {
    auto& unit = units[static_cast<size_t>(i)];
    unit.kernel = sleep_kernel(round_non_negative(spec.duration_dist.draw(rng)));
    int64_t bytes = round_non_negative(spec.data_size_dist.draw(rng));
    if (bytes > 0) {
      DataUnitDescription du;
      du.graph_id = "data" + std::to_string(i);
      du.source = DataSource::generated("zero_bytes",
                                        static_cast<uint64_t>(bytes), rng());
      graph.add_data(du);
      unit.input_data.push_back(du.graph_id);
    }
    switch (spec.dag_shape) {
      case WorkloadGenSpec::DagShape::NONE:
        break;
      case WorkloadGenSpec::DagShape::CHAIN:
        if (i % spec.dag_param != 0) {
          unit.depends_on.push_back("task" + std::to_string(i - 1));
        }
        break;
      case WorkloadGenSpec::DagShape::FANOUT: {
        int r = i % (spec.dag_param + 1);
        if (r != 0) unit.depends_on.push_back("task" + std::to_string(i - r));
        break;
      }
      case WorkloadGenSpec::DagShape::DIAMOND: {
        int g = (i / 4) * 4;
        int r = i % 4;
        if (r == 1 || r == 2) {
          unit.depends_on.push_back("task" + std::to_string(g));
        } else if (r == 3) {
          unit.depends_on.push_back("task" + std::to_string(g + 1));
          unit.depends_on.push_back("task" + std::to_string(g + 2));
        }
        break;
      }
    }
  }

  if (spec.arrival == WorkloadGenSpec::Arrival::POISSON) {
    DurationDist gap{DurationDist::Kind::EXP, 1000.0 / spec.arrival_rate, 0};
    double t = 0;
    for (auto& unit : units) {
      t += gap.draw(rng);
      unit.kernel.parameters["arrival_ms"] =
          std::to_string(static_cast<int64_t>(std::floor(t)));
    }
  }

  for (int i = 0; i < spec.n_tasks; ++i) {
    graph.add_unit("task" + std::to_string(i),
                   std::move(units[static_cast<size_t>(i)]));
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

BackendDescriptor parse_backend_json(const json& obj) {
  require_keys(obj, {"backend_id", "kind", "parameters"}, "manifest backend");
  if (!obj.contains("kind") || !obj["kind"].is_string()) {
    throw ManifestError("manifest backend needs a string 'kind'");
  }
  BackendDescriptor bd;
  std::string kind = obj["kind"].get<std::string>();
  auto parsed = parse_backend_kind(kind);
  if (!parsed) throw ManifestError("unknown backend kind '" + kind + "'");
  bd.kind = *parsed;
  if (obj.contains("backend_id")) {
    if (!obj["backend_id"].is_string()) {
      throw ManifestError("manifest backend_id must be a string");
    }
    bd.backend_id = obj["backend_id"].get<std::string>();
  } else {
    std::string name = to_string(bd.kind);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    bd.backend_id = name;
  }
  if (obj.contains("parameters")) {
    if (!obj["parameters"].is_object()) {
      throw ManifestError("manifest backend parameters must be an object");
    }
    for (const auto& [key, value] : obj["parameters"].items()) {
      bd.parameters[key] = stringify(value, "backend parameter '" + key + "'");
    }
  }
  return bd;
}

PilotDescription parse_pilot_json(const json& obj, const std::string& where) {
  require_keys(obj,
               {"slots", "cores_per_slot", "walltime_limit_s", "queue_name",
                "work_dir"},
               where);
  PilotDescription pd;
  if (obj.contains("slots")) {
    if (!obj["slots"].is_number_integer()) {
      throw ManifestError(where + " slots must be an integer");
    }
    pd.slots = obj["slots"].get<int>();
  }
  if (obj.contains("cores_per_slot")) {
    if (!obj["cores_per_slot"].is_number_integer()) {
      throw ManifestError(where + " cores_per_slot must be an integer");
    }
    pd.cores_per_slot = obj["cores_per_slot"].get<int>();
  }
  if (obj.contains("walltime_limit_s")) {
    if (!obj["walltime_limit_s"].is_number_integer()) {
      throw ManifestError(where + " walltime_limit_s must be an integer");
    }
    pd.walltime_limit_s = obj["walltime_limit_s"].get<int64_t>();
  }
  if (obj.contains("queue_name")) {
    if (!obj["queue_name"].is_string()) {
      throw ManifestError(where + " queue_name must be a string");
    }
    pd.queue_name = obj["queue_name"].get<std::string>();
  }
  if (obj.contains("work_dir")) {
    if (!obj["work_dir"].is_string()) {
      throw ManifestError(where + " work_dir must be a string");
    }
    pd.work_dir = obj["work_dir"].get<std::string>();
  }
  return pd;
}

ScenarioSpec parse_scenario_json(const json& obj) {
  require_keys(obj, {"scenario", "parameters"}, "manifest scenario");
  if (!obj.contains("scenario") || !obj["scenario"].is_string()) {
    throw ManifestError("manifest scenario needs a string 'scenario'");
  }
  ScenarioSpec spec;
  std::string name = obj["scenario"].get<std::string>();
  auto parsed = parse_scenario(name);
  if (!parsed) throw ManifestError("unknown scenario '" + name + "'");
  spec.scenario = *parsed;
  if (obj.contains("parameters")) {
    if (!obj["parameters"].is_object()) {
      throw ManifestError("manifest scenario parameters must be an object");
    }
    for (const auto& [key, value] : obj["parameters"].items()) {
      spec.parameters[key] =
          stringify(value, "scenario parameter '" + key + "'");
    }
  }
  return spec;
}

// Scenario parameter vocabulary. "slots" is accepted everywhere: it
// overrides every pilot's slot count, which is what slot-scaling sweeps vary.
const std::map<Scenario, std::pair<std::set<std::string>, std::set<std::string>>>&
scenario_keys() {
  static const auto* keys = new std::map<
      Scenario, std::pair<std::set<std::string>, std::set<std::string>>>{
      {Scenario::TASK_PARALLEL,
       {{"n_tasks", "duration_ms", "duration_dist", "slots"}, {"n_tasks"}}},
      {Scenario::MAPREDUCE,
       {{"corpus_bytes", "n_mappers", "n_reducers", "slots"},
        {"corpus_bytes"}}},
      {Scenario::DATAFLOW,
       {{"n_tasks", "duration_dist", "data_size_dist", "arrival", "dag_shape",
         "slots"},
        {"n_tasks"}}},
      {Scenario::ITERATIVE,
       {{"n_points", "k", "max_iters", "epsilon", "n_partitions", "slots"},
        {"n_points", "k"}}},
      {Scenario::STREAMING,
       {{"rate", "duration_s", "message_size", "n_consumers", "batch_ms",
         "queue_bound", "slots"},
        {"rate", "duration_s"}}},
  };
  return *keys;
}

void check_scenario_parameters(const ScenarioSpec& spec) {
  const auto& [allowed, required] = scenario_keys().at(spec.scenario);
  for (const auto& [key, value] : spec.parameters) {
    (void)value;
    if (!allowed.count(key)) {
      throw ManifestError("unknown parameter '" + key + "' for scenario " +
                          to_string(spec.scenario));
    }
  }
  for (const auto& key : required) {
    if (!spec.parameters.count(key)) {
      throw ManifestError("scenario " + std::string(to_string(spec.scenario)) +
                          " needs parameter '" + key + "'");
    }
  }
  if (spec.scenario == Scenario::TASK_PARALLEL) {
    bool has_ms = spec.parameters.count("duration_ms") > 0;
    bool has_dist = spec.parameters.count("duration_dist") > 0;
    if (has_ms == has_dist) {
      throw ManifestError(
          "TASK_PARALLEL needs exactly one of duration_ms or duration_dist");
    }
  }
}

std::string manifest_to_json(const ExperimentManifest& m) {
  json root;
  root["name"] = m.name;
  root["seed"] = m.seed;
  json backend;
  backend["backend_id"] = m.backend.backend_id;
  backend["kind"] = to_string(m.backend.kind);
  if (!m.backend.parameters.empty()) {
    backend["parameters"] = m.backend.parameters;
  }
  root["backend"] = std::move(backend);
  root["pilots"] = json::array();
  for (const auto& pd : m.pilots) {
    json p;
    p["slots"] = pd.slots;
    p["cores_per_slot"] = pd.cores_per_slot;
    p["walltime_limit_s"] = pd.walltime_limit_s;
    if (!pd.queue_name.empty()) p["queue_name"] = pd.queue_name;
    if (!pd.work_dir.empty()) p["work_dir"] = pd.work_dir.string();
    root["pilots"].push_back(std::move(p));
  }
  root["policy"] = to_string(m.policy);
  json scenario;
  scenario["scenario"] = to_string(m.scenario.scenario);
  scenario["parameters"] = m.scenario.parameters;
  root["scenario"] = std::move(scenario);
  root["trials"] = m.trials;
  if (!m.sweep.empty()) {
    json sweep;
    for (const auto& [key, values] : m.sweep) sweep[key] = values;
    root["sweep"] = std::move(sweep);
  }
  root["output_dir"] = m.output_dir.string();
  return root.dump(2) + "\n";
}

}  // namespace

void ExperimentManifest::validate() const {
  if (name.empty()) throw ManifestError("experiment name must not be empty");
  // A simulation seed may be omitted: the runner derives one per run.
  BackendDescriptor bd = backend;
  if (bd.kind != BackendKind::LOCAL && !bd.parameters.count("seed")) {
    bd.parameters["seed"] = "0";
  }
  bd.validate();
  if (pilots.empty()) throw ManifestError("experiment needs at least one pilot");
  if (trials < 1) throw ManifestError("trials must be >= 1");
  if (output_dir.empty()) throw ManifestError("output_dir must not be empty");
  std::set<std::string> seen;
  for (const auto& [key, values] : sweep) {
    if (!seen.insert(key).second) {
      throw ManifestError("duplicate sweep key '" + key + "'");
    }
    if (values.empty()) {
      throw ManifestError("sweep key '" + key + "' has no values");
    }
    if (!scenario.parameters.count(key)) {
      throw ManifestError("sweep key '" + key +
                          "' is not a scenario parameter");
    }
  }
  check_scenario_parameters(scenario);
}

ExperimentManifest ExperimentManifest::from_json(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ManifestError(std::string("manifest is not valid JSON: ") + e.what());
  }
  require_keys(root,
               {"name", "seed", "backend", "pilots", "policy", "scenario",
                "trials", "sweep", "output_dir"},
               "manifest");

  ExperimentManifest m;
  m.source_text = json_text;
  if (!root.contains("name") || !root["name"].is_string()) {
    throw ManifestError("manifest needs a string 'name'");
  }
  m.name = root["name"].get<std::string>();
  if (!root.contains("seed") || !root["seed"].is_number_integer() ||
      (root["seed"].is_number_integer() && !root["seed"].is_number_unsigned() &&
       root["seed"].get<int64_t>() < 0)) {
    throw ManifestError("manifest needs a non-negative integer 'seed'");
  }
  m.seed = root["seed"].get<uint64_t>();
  if (!root.contains("backend")) {
    throw ManifestError("manifest needs a 'backend' object");
  }
  m.backend = parse_backend_json(root["backend"]);
  if (!root.contains("pilots") || !root["pilots"].is_array() ||
      root["pilots"].empty()) {
    throw ManifestError("manifest needs a non-empty 'pilots' array");
  }
  for (size_t i = 0; i < root["pilots"].size(); ++i) {
    auto pd = parse_pilot_json(root["pilots"][i],
                               "manifest pilot " + std::to_string(i));
    pd.backend_id = m.backend.backend_id;
    m.pilots.push_back(std::move(pd));
  }
  if (root.contains("policy")) {
    if (!root["policy"].is_string()) {
      throw ManifestError("manifest policy must be a string");
    }
    std::string name = root["policy"].get<std::string>();
    auto parsed = parse_scheduling_policy(name);
    if (!parsed) throw ManifestError("unknown scheduling policy '" + name + "'");
    m.policy = *parsed;
  }
  if (!root.contains("scenario")) {
    throw ManifestError("manifest needs a 'scenario' object");
  }
  m.scenario = parse_scenario_json(root["scenario"]);
  if (root.contains("trials")) {
    if (!root["trials"].is_number_integer()) {
      throw ManifestError("manifest trials must be an integer");
    }
    m.trials = root["trials"].get<int>();
  }
  if (root.contains("sweep")) {
    if (!root["sweep"].is_object()) {
      throw ManifestError("manifest sweep must be an object");
    }
    std::map<std::string, std::vector<std::string>> sorted;
    for (const auto& [key, values] : root["sweep"].items()) {
      if (!values.is_array() || values.empty()) {
        throw ManifestError("sweep key '" + key +
                            "' needs a non-empty value array");
      }
      std::vector<std::string> list;
      for (const auto& value : values) {
        list.push_back(stringify(value, "sweep value for '" + key + "'"));
      }
      sorted[key] = std::move(list);
    }
    m.sweep.assign(sorted.begin(), sorted.end());
  }
  if (!root.contains("output_dir") || !root["output_dir"].is_string()) {
    throw ManifestError("manifest needs a string 'output_dir'");
  }
  m.output_dir = root["output_dir"].get<std::string>();
  m.validate();
  return m;
}

ExperimentManifest ExperimentManifest::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

// ---------------------------------------------------------------------------
// Metric derivation
// ---------------------------------------------------------------------------

DerivedMetrics derive_metrics(const std::vector<EventRecord>& events) {
  if (events.empty()) throw MalformedLog("empty event log");

  struct PilotSpan {
    int64_t submitted = -1;
    int64_t active = -1;
    int64_t terminal = -1;
    int slots = 1;
  };
  std::map<std::string, PilotSpan> pilots;
  std::map<std::string, int64_t> running_ts;
  std::map<std::string, int64_t> done_ts;
  std::vector<double> latencies;
  int64_t first_submit = -1;
  int64_t last_terminal = -1;
  int64_t last_ts = 0;
  int64_t units_done = 0;
  int64_t consumed = 0;

  for (const auto& e : events) {
    last_ts = std::max(last_ts, e.timestamp_ms);
    switch (e.entity_type) {
      case EntityType::PILOT: {
        auto& span = pilots[e.entity_id];
        if (e.event == "NEW") {
          std::string slots = detail_get(e.detail, "slots");
          if (!slots.empty()) span.slots = static_cast<int>(to_int(slots, "slots"));
        } else if (e.event == "SUBMITTED" && span.submitted < 0) {
          span.submitted = e.timestamp_ms;
        } else if (e.event == "ACTIVE" && span.active < 0) {
          span.active = e.timestamp_ms;
        } else if (e.event == "DONE" || e.event == "FAILED" ||
                   e.event == "CANCELED") {
          span.terminal = e.timestamp_ms;
        }
        break;
      }
      case EntityType::UNIT: {
        if (e.event == "NEW") {
          first_submit = first_submit < 0
                             ? e.timestamp_ms
                             : std::min(first_submit, e.timestamp_ms);
        } else if (e.event == "RUNNING") {
          running_ts.emplace(e.entity_id, e.timestamp_ms);
        } else if (e.event == "DONE" || e.event == "FAILED" ||
                   e.event == "CANCELED") {
          last_terminal = std::max(last_terminal, e.timestamp_ms);
          if (e.event == "DONE") {
            done_ts[e.entity_id] = e.timestamp_ms;
            ++units_done;
          }
        }
        break;
      }
      case EntityType::DATA_UNIT:
        break;
      case EntityType::EXPERIMENT: {
        if (e.event == "CONSUMED") {
          ++consumed;
          std::string latency = detail_get(e.detail, "latency_ms");
          if (!latency.empty()) {
            latencies.push_back(to_double(latency, "latency_ms"));
          }
        }
        break;
      }
    }
  }

  DerivedMetrics m;
  if (first_submit >= 0 && last_terminal >= first_submit) {
    m.makespan_ms = last_terminal - first_submit;
  }

  std::vector<double> runtimes;
  for (const auto& [id, done] : done_ts) {
    auto it = running_ts.find(id);
    if (it != running_ts.end()) {
      runtimes.push_back(static_cast<double>(done - it->second));
    }
  }
  m.task_runtime_mean_ms = mean_of(runtimes);
  m.task_runtime_p99_ms = percentile_nearest_rank(runtimes, 99.0);

  std::vector<double> overheads;
  for (const auto& [id, span] : pilots) {
    (void)id;
    if (span.submitted >= 0 && span.active >= span.submitted) {
      overheads.push_back(static_cast<double>(span.active - span.submitted));
    }
  }
  m.pilot_overhead_ms = mean_of(overheads);

  int64_t span_start = std::numeric_limits<int64_t>::max();
  int64_t span_end = -1;
  double capacity_ms = 0;
  for (const auto& [id, span] : pilots) {
    (void)id;
    if (span.active < 0) continue;
    int64_t end = span.terminal >= span.active ? span.terminal : last_ts;
    span_start = std::min(span_start, span.active);
    span_end = std::max(span_end, end);
    capacity_ms += static_cast<double>(span.slots) *
                   static_cast<double>(end - span.active);
  }
  if (span_end > span_start) {
    double span_s = static_cast<double>(span_end - span_start) / 1000.0;
    int64_t completed = consumed > 0 ? consumed : units_done;
    m.throughput_per_s = static_cast<double>(completed) / span_s;
    double busy = 0;
    for (double r : runtimes) busy += r;
    if (capacity_ms > 0) m.utilization = busy / capacity_ms;
  }

  m.latency_p50_ms = percentile_nearest_rank(latencies, 50.0);
  m.latency_p99_ms = percentile_nearest_rank(latencies, 99.0);
  return m;
}

DerivedMetrics derive_metrics_file(const std::filesystem::path& csv_path) {
  return derive_metrics(EventLog::read_csv_file(csv_path));
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

namespace {

// Submits each unit at its arrival offset, honoring the backend clock.
void run_timed_submission(PilotManager& mgr, const WorkloadGraph& graph) {
  std::map<std::string, DataUnitDescription> data_by_id;
  for (const auto& du : graph.data) data_by_id[du.graph_id] = du;

  struct Single {
    int64_t arrival_ms = 0;
    WorkloadGraph graph;
  };
  std::vector<Single> singles;
  for (const auto& [gid, desc] : graph.units) {
    Single s;
    auto it = desc.kernel.parameters.find("arrival_ms");
    if (it != desc.kernel.parameters.end()) {
      s.arrival_ms = to_int(it->second, "arrival_ms");
    }
    for (const auto& in : desc.input_data) {
      auto found = data_by_id.find(in);
      if (found != data_by_id.end()) s.graph.add_data(found->second);
    }
    s.graph.add_unit(gid, desc);
    singles.push_back(std::move(s));
  }

  if (mgr.backend().clock_kind() == ClockKind::VIRTUAL) {
    auto* sim = dynamic_cast<SimBackend*>(&mgr.backend());
    if (!sim) throw RuntimeFailure("virtual clock backend is not simulated");
    for (const auto& s : singles) {
      WorkloadGraph g = s.graph;
      mgr.backend().post(s.arrival_ms, [&mgr, g]() { mgr.submit_units(g); });
    }
    sim->run_until_idle();
  } else {
    auto start = std::chrono::steady_clock::now();
    for (const auto& s : singles) {
      std::this_thread::sleep_until(start +
                                    std::chrono::milliseconds(s.arrival_ms));
      mgr.submit_units(s.graph);
    }
    mgr.wait_all();
  }

  for (const auto& id : mgr.all_unit_ids()) {
    auto cu = mgr.unit(id);
    if (cu.state == UnitState::FAILED) {
      throw RuntimeFailure("unit " + id + " failed");
    }
  }
}

std::string synth_points(int64_t n_points, int64_t k, std::mt19937_64& rng) {
  // Clusters on the diagonal, spaced far apart relative to the jitter.
  std::string text;
  for (int64_t i = 0; i < n_points; ++i) {
    double base = 10.0 * static_cast<double>(i % k);
    double x = base + (unit_uniform(rng) - 0.5);
    double y = base + (unit_uniform(rng) - 0.5);
    text += format_double(x);
    text += ' ';
    text += format_double(y);
    text += '\n';
  }
  return text;
}

void run_scenario(PilotManager& mgr, Scenario scenario, const ParamMap& params,
                  uint64_t run_seed) {
  std::mt19937_64 rng(run_seed);
  switch (scenario) {
    case Scenario::TASK_PARALLEL: {
      int64_t n = required_int(params, "n_tasks");
      if (n < 0) throw ManifestError("n_tasks must be >= 0");
      DurationDist dist =
          params.count("duration_dist")
              ? DurationDist::parse(params.at("duration_dist"))
              : DurationDist::constant(required_double(params, "duration_ms"));
      std::vector<KernelSpec> kernels;
      kernels.reserve(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) {
        kernels.push_back(sleep_kernel(round_non_negative(dist.draw(rng))));
      }
      run_task_parallel(mgr, kernels);
      break;
    }
    case Scenario::MAPREDUCE: {
      int64_t corpus_bytes = required_int(params, "corpus_bytes");
      if (corpus_bytes < 1) throw ManifestError("corpus_bytes must be >= 1");
      int64_t n_mappers = param_int(params, "n_mappers", 4);
      int64_t n_reducers = param_int(params, "n_reducers", 2);
      DataUnitDescription du;
      du.graph_id = "corpus";
      du.source = DataSource::generated(
          "random_text", static_cast<uint64_t>(corpus_bytes), run_seed);
      std::string id = mgr.register_data_unit(du);
      run_mapreduce(mgr, {id}, static_cast<int>(n_mappers),
                    static_cast<int>(n_reducers));
      break;
    }
    case Scenario::DATAFLOW: {
      WorkloadGenSpec spec;
      spec.n_tasks = static_cast<int>(required_int(params, "n_tasks"));
      if (params.count("duration_dist")) {
        spec.duration_dist = DurationDist::parse(params.at("duration_dist"));
      }
      if (params.count("data_size_dist")) {
        spec.data_size_dist = DurationDist::parse(params.at("data_size_dist"));
      }
      if (params.count("arrival")) {
        std::tie(spec.arrival, spec.arrival_rate) =
            WorkloadGenSpec::parse_arrival(params.at("arrival"));
      }
      if (params.count("dag_shape")) {
        std::tie(spec.dag_shape, spec.dag_param) =
            WorkloadGenSpec::parse_dag_shape(params.at("dag_shape"));
      }
      WorkloadGraph graph = generate_workload(spec, run_seed);
      if (spec.arrival == WorkloadGenSpec::Arrival::POISSON) {
        run_timed_submission(mgr, graph);
      } else {
        auto report = run_dataflow(mgr, graph);
        for (const auto& [id, state] : report.states) {
          if (state != UnitState::DONE) {
            throw RuntimeFailure("unit " + id + " ended " +
                                 std::string(to_string(state)));
          }
        }
      }
      break;
    }
    case Scenario::ITERATIVE: {
      int64_t n_points = required_int(params, "n_points");
      int64_t k = required_int(params, "k");
      if (n_points < 1) throw ManifestError("n_points must be >= 1");
      if (k < 1) throw ManifestError("k must be >= 1");
      int64_t max_iters = param_int(params, "max_iters", 20);
      double epsilon = param_double(params, "epsilon", 1e-4);
      int64_t n_partitions = param_int(params, "n_partitions", 0);
      DataUnitDescription du;
      du.graph_id = "points";
      du.source = DataSource::inline_bytes(synth_points(n_points, k, rng));
      std::string id = mgr.register_data_unit(du);
      run_iterative_kmeans(mgr, id, static_cast<int>(k),
                           static_cast<int>(max_iters), epsilon,
                           static_cast<int>(n_partitions));
      break;
    }
    case Scenario::STREAMING: {
      StreamingParams p;
      p.rate = required_double(params, "rate");
      p.duration_s = required_double(params, "duration_s");
      p.message_size = param_int(params, "message_size", 64);
      p.n_consumers = static_cast<int>(param_int(params, "n_consumers", 1));
      p.batch_ms = param_int(params, "batch_ms", 100);
      p.queue_bound = param_int(params, "queue_bound", 10000);
      run_streaming(mgr, p);
      break;
    }
  }
}

void run_one(const ExperimentManifest& m, const ParamMap& point,
             uint64_t run_seed, const std::string& tag, EventLog& log) {
  ParamMap params = m.scenario.parameters;
  for (const auto& [key, value] : point) params[key] = value;

  BackendDescriptor bd = m.backend;
  if (bd.kind != BackendKind::LOCAL && !bd.parameters.count("seed")) {
    bd.parameters["seed"] = std::to_string(run_seed);
  }
  auto backend = make_backend(bd);

  ManagerConfig config;
  config.scheduling_policy = m.policy;
  config.work_dir = m.output_dir / ".work" / tag;
  PilotManager mgr(*backend, log, config);

  int64_t slots_override = param_int(params, "slots", 0);
  if (params.count("slots") && slots_override < 1) {
    throw ManifestError("slots must be >= 1");
  }
  for (PilotDescription pd : m.pilots) {
    pd.backend_id = bd.backend_id;
    if (slots_override > 0) pd.slots = static_cast<int>(slots_override);
    mgr.submit_pilot(pd);
  }

  run_scenario(mgr, m.scenario.scenario, params, run_seed);
  mgr.shutdown();
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string opt_cell(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string();
}

void write_row(std::ostream& out, const RunRecord& rec) {
  out << rec.trial << ',' << csv_field(rec.param_point) << ','
      << csv_field(rec.status) << ',';
  if (rec.metrics_valid) {
    const auto& m = rec.metrics;
    out << m.makespan_ms << ',' << opt_cell(m.task_runtime_mean_ms) << ','
        << opt_cell(m.task_runtime_p99_ms) << ','
        << opt_cell(m.pilot_overhead_ms) << ','
        << opt_cell(m.throughput_per_s) << ',' << opt_cell(m.latency_p50_ms)
        << ',' << opt_cell(m.latency_p99_ms) << ','
        << opt_cell(m.utilization);
  } else {
    out << ",,,,,,,";
  }
  out << '\n';
}

std::string point_string(const ParamMap& point) {
  std::string out;
  for (const auto& [key, value] : point) {
    if (!out.empty()) out += ' ';
    out += key;
    out += '=';
    out += value;
  }
  return out;
}

std::vector<ParamMap> grid_points(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& sweep) {
  std::vector<ParamMap> points{{}};
  for (const auto& [key, values] : sweep) {
    std::vector<ParamMap> next;
    next.reserve(points.size() * values.size());
    for (const auto& point : points) {
      for (const auto& value : values) {
        ParamMap extended = point;
        extended[key] = value;
        next.push_back(std::move(extended));
      }
    }
    points = std::move(next);
  }
  return points;
}

}  // namespace

const char* const kDerivedCsvHeader =
    "trial,param_point,status,makespan_ms,task_runtime_mean_ms,"
    "task_runtime_p99_ms,pilot_overhead_ms,throughput_per_s,latency_p50_ms,"
    "latency_p99_ms,utilization";

MetricsBundle run_experiment(const ExperimentManifest& manifest) {
  ExperimentManifest m = manifest;
  std::sort(m.sweep.begin(), m.sweep.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  m.validate();

  std::filesystem::create_directories(m.output_dir);
  MetricsBundle bundle;
  bundle.manifest_copy = m.output_dir / "manifest.json";
  {
    std::ofstream out(bundle.manifest_copy, std::ios::binary);
    if (!out) {
      throw UserError("cannot write " + bundle.manifest_copy.string());
    }
    out << (m.source_text.empty() ? manifest_to_json(m) : m.source_text);
  }

  bundle.derived_csv = m.output_dir / "derived.csv";
  std::ofstream derived(bundle.derived_csv, std::ios::binary);
  if (!derived) {
    throw UserError("cannot write " + bundle.derived_csv.string());
  }
  derived << kDerivedCsvHeader << '\n';

  auto points = grid_points(m.sweep);
  for (size_t gi = 0; gi < points.size(); ++gi) {
    for (int trial = 1; trial <= m.trials; ++trial) {
      RunRecord rec;
      rec.trial = trial;
      rec.param_point = point_string(points[gi]);
      rec.status = "ok";
      std::string tag =
          "run_p" + std::to_string(gi) + "_t" + std::to_string(trial);
      rec.events_csv = m.output_dir / (tag + ".events.csv");
      uint64_t run_seed =
          m.seed ^ fnv1a64(rec.param_point + "#" + std::to_string(trial));

      EventLog log;
      try {
        run_one(m, points[gi], run_seed, tag, log);
      } catch (const Error& e) {
        rec.status = std::string("failed: ") + e.what();
      }
      log.write_csv_file(rec.events_csv);
      try {
        rec.metrics = derive_metrics_file(rec.events_csv);
        rec.metrics_valid = true;
      } catch (const Error&) {
        rec.metrics_valid = false;
      }
      write_row(derived, rec);
      bundle.rows.push_back(std::move(rec));
    }
  }
  return bundle;
}

}  // namespace pilotkit
