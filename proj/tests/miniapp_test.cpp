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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pilotkit/errors.hpp"
#include "pilotkit/miniapp/miniapp.hpp"

using namespace pilotkit;
namespace fs = std::filesystem;

namespace {

int temp_counter = 0;

fs::path fresh_dir() {
  fs::path dir = fs::temp_directory_path() /
                 ("pilotkit-miniapp-" + std::to_string(::getpid()) + "-" +
                  std::to_string(++temp_counter));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

EventRecord ev(int64_t ts, EntityType type, const std::string& id,
               const std::string& event, const std::string& detail = "") {
  return EventRecord{ts, type, id, event, detail};
}

ExperimentManifest sim_manifest(const fs::path& out_dir) {
  ExperimentManifest m;
  m.name = "exp";
  m.seed = 42;
  m.backend.backend_id = "sim";
  m.backend.kind = BackendKind::SIM_BATCH;
  m.backend.parameters["queue_wait_dist"] = "CONSTANT(0)";
  m.backend.parameters["startup_overhead"] = "0";
  m.pilots.push_back(PilotDescription{});
  m.pilots.back().slots = 1;
  m.output_dir = out_dir;
  return m;
}

// Minimal valid manifest JSON with one field replaced (or added) per test.
std::string manifest_json(const std::string& patch) {
  std::string base = R"json({
    "name": "x",
    "seed": 1,
    "backend": {"kind": "SIM_BATCH"},
    "pilots": [{"slots": 1}],
    "scenario": {"scenario": "TASK_PARALLEL",
                 "parameters": {"n_tasks": 1, "duration_ms": 10}},
    "output_dir": "out")json";
  if (!patch.empty()) base += ",\n    " + patch;
  return base + "\n  }";
}

const ComputeUnitDescription& unit_named(const WorkloadGraph& graph,
                                         const std::string& graph_id) {
  for (const auto& [gid, desc] : graph.units) {
    if (gid == graph_id) return desc;
  }
  REQUIRE(false);
  static ComputeUnitDescription none;
  return none;
}

}  // namespace

TEST_CASE("generate_workload with zero tasks yields an empty graph") {
  WorkloadGenSpec spec;
  spec.n_tasks = 0;
  CHECK(generate_workload(spec, 1).empty());
}

TEST_CASE("generate_workload chains constant-duration tasks") {
  WorkloadGenSpec spec;
  spec.n_tasks = 4;
  spec.duration_dist = DurationDist::constant(1000);
  spec.dag_shape = WorkloadGenSpec::DagShape::CHAIN;
  spec.dag_param = 4;

  WorkloadGraph graph = generate_workload(spec, 7);
  REQUIRE(graph.units.size() == 4);
  CHECK(graph.data.empty());
  for (size_t i = 0; i < graph.units.size(); ++i) {
    const auto& [gid, desc] = graph.units[i];
    CHECK(gid == "task" + std::to_string(i));
    CHECK(desc.kernel.name == "sleep");
    CHECK(desc.kernel.parameters.at("sim_duration_ms") == "1000");
    CHECK(desc.kernel.parameters.at("duration_ms") == "1000");
    if (i == 0) {
      CHECK(desc.depends_on.empty());
    } else {
      REQUIRE(desc.depends_on.size() == 1);
      CHECK(desc.depends_on[0] == "task" + std::to_string(i - 1));
    }
  }
  graph.validate();
}

TEST_CASE("generate_workload respects chain depth boundaries") {
  WorkloadGenSpec spec;
  spec.n_tasks = 10;
  spec.duration_dist = DurationDist::constant(1);
  spec.dag_shape = WorkloadGenSpec::DagShape::CHAIN;
  spec.dag_param = 4;

  WorkloadGraph graph = generate_workload(spec, 3);
  CHECK(unit_named(graph, "task0").depends_on.empty());
  CHECK(unit_named(graph, "task4").depends_on.empty());
  CHECK(unit_named(graph, "task8").depends_on.empty());
  CHECK(unit_named(graph, "task3").depends_on ==
        std::vector<std::string>{"task2"});
  CHECK(unit_named(graph, "task9").depends_on ==
        std::vector<std::string>{"task8"});
}

TEST_CASE("generate_workload fanout groups hang off one root") {
  WorkloadGenSpec spec;
  spec.n_tasks = 7;
  spec.duration_dist = DurationDist::constant(1);
  spec.dag_shape = WorkloadGenSpec::DagShape::FANOUT;
  spec.dag_param = 2;

  WorkloadGraph graph = generate_workload(spec, 3);
  CHECK(unit_named(graph, "task0").depends_on.empty());
  CHECK(unit_named(graph, "task1").depends_on ==
        std::vector<std::string>{"task0"});
  CHECK(unit_named(graph, "task2").depends_on ==
        std::vector<std::string>{"task0"});
  CHECK(unit_named(graph, "task3").depends_on.empty());
  CHECK(unit_named(graph, "task5").depends_on ==
        std::vector<std::string>{"task3"});
  CHECK(unit_named(graph, "task6").depends_on.empty());
}

TEST_CASE("generate_workload diamonds join two middle tasks") {
  WorkloadGenSpec spec;
  spec.n_tasks = 8;
  spec.duration_dist = DurationDist::constant(1);
  spec.dag_shape = WorkloadGenSpec::DagShape::DIAMOND;

  WorkloadGraph graph = generate_workload(spec, 3);
  CHECK(unit_named(graph, "task0").depends_on.empty());
  CHECK(unit_named(graph, "task1").depends_on ==
        std::vector<std::string>{"task0"});
  CHECK(unit_named(graph, "task2").depends_on ==
        std::vector<std::string>{"task0"});
  CHECK(unit_named(graph, "task3").depends_on ==
        std::vector<std::string>{"task1", "task2"});
  CHECK(unit_named(graph, "task4").depends_on.empty());
  CHECK(unit_named(graph, "task7").depends_on ==
        std::vector<std::string>{"task5", "task6"});
  graph.validate();
}

TEST_CASE("generate_workload uniform durations hit the expected mean") {
  WorkloadGenSpec spec;
  spec.n_tasks = 10000;
  spec.duration_dist = DurationDist::parse("UNIFORM(100,200)");

  WorkloadGraph graph = generate_workload(spec, 99);
  REQUIRE(graph.units.size() == 10000);
  double total = 0;
  for (const auto& [gid, desc] : graph.units) {
    (void)gid;
    total += static_cast<double>(desc.kernel.sim_duration_ms());
  }
  double mean = total / 10000.0;
  CHECK(mean > 150.0 * 0.98);
  CHECK(mean < 150.0 * 1.02);

  WorkloadGraph again = generate_workload(spec, 99);
  REQUIRE(again.units.size() == graph.units.size());
  for (size_t i = 0; i < graph.units.size(); ++i) {
    CHECK(again.units[i].first == graph.units[i].first);
    CHECK(again.units[i].second.kernel.parameters ==
          graph.units[i].second.kernel.parameters);
  }
}

TEST_CASE("generate_workload attaches generated input data") {
  WorkloadGenSpec spec;
  spec.n_tasks = 3;
  spec.duration_dist = DurationDist::constant(10);
  spec.data_size_dist = DurationDist::constant(2048);

  WorkloadGraph graph = generate_workload(spec, 5);
  REQUIRE(graph.data.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(graph.data[i].graph_id == "data" + std::to_string(i));
    CHECK(graph.data[i].source.kind == DataSource::Kind::GENERATED);
    CHECK(graph.data[i].source.size_bytes == 2048);
    CHECK(graph.units[i].second.input_data ==
          std::vector<std::string>{"data" + std::to_string(i)});
  }
}

TEST_CASE("generate_workload poisson arrivals are monotone and reproducible") {
  WorkloadGenSpec spec;
  spec.n_tasks = 50;
  spec.duration_dist = DurationDist::constant(10);
  spec.arrival = WorkloadGenSpec::Arrival::POISSON;
  spec.arrival_rate = 20;

  WorkloadGraph graph = generate_workload(spec, 11);
  int64_t prev = 0;
  for (const auto& [gid, desc] : graph.units) {
    (void)gid;
    int64_t arrival = std::stoll(desc.kernel.parameters.at("arrival_ms"));
    CHECK(arrival >= prev);
    prev = arrival;
  }
  CHECK(prev > 0);

  WorkloadGraph again = generate_workload(spec, 11);
  for (size_t i = 0; i < graph.units.size(); ++i) {
    CHECK(again.units[i].second.kernel.parameters.at("arrival_ms") ==
          graph.units[i].second.kernel.parameters.at("arrival_ms"));
  }

  WorkloadGenSpec bulk;
  bulk.n_tasks = 2;
  bulk.duration_dist = DurationDist::constant(10);
  WorkloadGraph plain = generate_workload(bulk, 1);
  CHECK(plain.units[0].second.kernel.parameters.count("arrival_ms") == 0);
}

TEST_CASE("generate_workload rejects contradictory specs") {
  WorkloadGenSpec spec;
  spec.n_tasks = 4;
  spec.arrival = WorkloadGenSpec::Arrival::POISSON;
  spec.arrival_rate = 5;
  spec.dag_shape = WorkloadGenSpec::DagShape::CHAIN;
  spec.dag_param = 2;
  CHECK_THROWS_AS(generate_workload(spec, 1), ManifestError);

  WorkloadGenSpec negative;
  negative.n_tasks = -1;
  CHECK_THROWS_AS(generate_workload(negative, 1), ManifestError);

  WorkloadGenSpec zero_rate;
  zero_rate.n_tasks = 1;
  zero_rate.arrival = WorkloadGenSpec::Arrival::POISSON;
  zero_rate.arrival_rate = 0;
  CHECK_THROWS_AS(generate_workload(zero_rate, 1), ManifestError);
}

TEST_CASE("arrival and dag shape parsing") {
  auto bulk = WorkloadGenSpec::parse_arrival("BULK");
  CHECK(bulk.first == WorkloadGenSpec::Arrival::BULK);
  auto poisson = WorkloadGenSpec::parse_arrival("POISSON(2.5)");
  CHECK(poisson.first == WorkloadGenSpec::Arrival::POISSON);
  CHECK(poisson.second == doctest::Approx(2.5));
  CHECK_THROWS_AS(WorkloadGenSpec::parse_arrival("SOMETIMES"), ManifestError);
  CHECK_THROWS_AS(WorkloadGenSpec::parse_arrival("POISSON(0)"), ManifestError);

  auto chain = WorkloadGenSpec::parse_dag_shape("CHAIN(4)");
  CHECK(chain.first == WorkloadGenSpec::DagShape::CHAIN);
  CHECK(chain.second == 4);
  auto fanout = WorkloadGenSpec::parse_dag_shape("FANOUT(3)");
  CHECK(fanout.first == WorkloadGenSpec::DagShape::FANOUT);
  CHECK(fanout.second == 3);
  CHECK(WorkloadGenSpec::parse_dag_shape("DIAMOND").first ==
        WorkloadGenSpec::DagShape::DIAMOND);
  CHECK(WorkloadGenSpec::parse_dag_shape("NONE").first ==
        WorkloadGenSpec::DagShape::NONE);
  CHECK_THROWS_AS(WorkloadGenSpec::parse_dag_shape("RING(3)"), ManifestError);
  CHECK_THROWS_AS(WorkloadGenSpec::parse_dag_shape("CHAIN(1.5)"),
                  ManifestError);
  CHECK_THROWS_AS(WorkloadGenSpec::parse_dag_shape("DIAMOND(2)"),
                  ManifestError);
}

TEST_CASE("derive_metrics rejects an empty log") {
  CHECK_THROWS_AS(derive_metrics({}), MalformedLog);
}

TEST_CASE("derive_metrics computes utilization from busy and capacity time") {
  std::vector<EventRecord> events{
      ev(0, EntityType::PILOT, "p1", "NEW", "slots=1"),
      ev(0, EntityType::PILOT, "p1", "SUBMITTED"),
      ev(0, EntityType::PILOT, "p1", "ACTIVE"),
      ev(0, EntityType::UNIT, "u1", "NEW"),
      ev(0, EntityType::UNIT, "u1", "RUNNING"),
      ev(1000, EntityType::UNIT, "u1", "DONE"),
      ev(2000, EntityType::PILOT, "p1", "DONE"),
  };
  DerivedMetrics m = derive_metrics(events);
  CHECK(m.makespan_ms == 1000);
  REQUIRE(m.utilization.has_value());
  CHECK(*m.utilization == doctest::Approx(0.5));
  REQUIRE(m.task_runtime_mean_ms.has_value());
  CHECK(*m.task_runtime_mean_ms == doctest::Approx(1000));
  REQUIRE(m.throughput_per_s.has_value());
  CHECK(*m.throughput_per_s == doctest::Approx(0.5));
  REQUIRE(m.pilot_overhead_ms.has_value());
  CHECK(*m.pilot_overhead_ms == doctest::Approx(0));
  CHECK_FALSE(m.latency_p50_ms.has_value());
}

TEST_CASE("derive_metrics on three serial sleeps") {
  std::vector<EventRecord> events{
      ev(0, EntityType::PILOT, "p1", "NEW", "slots=1"),
      ev(0, EntityType::PILOT, "p1", "SUBMITTED"),
      ev(0, EntityType::PILOT, "p1", "ACTIVE"),
      ev(0, EntityType::UNIT, "u1", "NEW"),
      ev(0, EntityType::UNIT, "u2", "NEW"),
      ev(0, EntityType::UNIT, "u3", "NEW"),
      ev(0, EntityType::UNIT, "u1", "RUNNING"),
      ev(1000, EntityType::UNIT, "u1", "DONE"),
      ev(1000, EntityType::UNIT, "u2", "RUNNING"),
      ev(2000, EntityType::UNIT, "u2", "DONE"),
      ev(2000, EntityType::UNIT, "u3", "RUNNING"),
      ev(3000, EntityType::UNIT, "u3", "DONE"),
      ev(3000, EntityType::PILOT, "p1", "DONE"),
  };
  DerivedMetrics m = derive_metrics(events);
  CHECK(m.makespan_ms == 3000);
  REQUIRE(m.throughput_per_s.has_value());
  CHECK(*m.throughput_per_s == doctest::Approx(1.0));
  REQUIRE(m.utilization.has_value());
  CHECK(*m.utilization == doctest::Approx(1.0));
  REQUIRE(m.task_runtime_p99_ms.has_value());
  CHECK(*m.task_runtime_p99_ms == doctest::Approx(1000));
}

TEST_CASE("derive_metrics reports pilot startup overhead") {
  std::vector<EventRecord> events{
      ev(0, EntityType::PILOT, "p1", "NEW", "slots=2"),
      ev(0, EntityType::PILOT, "p1", "SUBMITTED"),
      ev(700, EntityType::PILOT, "p1", "ACTIVE"),
      ev(700, EntityType::UNIT, "u1", "NEW"),
      ev(700, EntityType::UNIT, "u1", "RUNNING"),
      ev(900, EntityType::UNIT, "u1", "DONE"),
      ev(900, EntityType::PILOT, "p1", "DONE"),
  };
  DerivedMetrics m = derive_metrics(events);
  REQUIRE(m.pilot_overhead_ms.has_value());
  CHECK(*m.pilot_overhead_ms == doctest::Approx(700));
  CHECK(m.makespan_ms == 200);
}

TEST_CASE("derive_metrics aggregates consumed message latencies") {
  std::vector<EventRecord> events{
      ev(0, EntityType::PILOT, "p1", "NEW", "slots=2"),
      ev(0, EntityType::PILOT, "p1", "SUBMITTED"),
      ev(0, EntityType::PILOT, "p1", "ACTIVE"),
      ev(0, EntityType::UNIT, "u1", "NEW"),
      ev(0, EntityType::UNIT, "u1", "RUNNING"),
      ev(100, EntityType::EXPERIMENT, "u1", "CONSUMED", "latency_ms=10"),
      ev(200, EntityType::EXPERIMENT, "u1", "CONSUMED", "latency_ms=30"),
      ev(200, EntityType::UNIT, "u1", "DONE"),
      ev(1000, EntityType::PILOT, "p1", "DONE"),
  };
  DerivedMetrics m = derive_metrics(events);
  REQUIRE(m.latency_p50_ms.has_value());
  CHECK(*m.latency_p50_ms == doctest::Approx(10));
  REQUIRE(m.latency_p99_ms.has_value());
  CHECK(*m.latency_p99_ms == doctest::Approx(30));
  // Messages take precedence over unit count for throughput.
  REQUIRE(m.throughput_per_s.has_value());
  CHECK(*m.throughput_per_s == doctest::Approx(2.0));
}

TEST_CASE("manifest JSON round trip with sweep and policy") {
  std::string text = R"json({
    "name": "scaling",
    "seed": 7,
    "backend": {"kind": "SIM_BATCH",
                "parameters": {"queue_wait_dist": "CONSTANT(0)"}},
    "pilots": [{"slots": 2}, {"slots": 4}],
    "policy": "AFFINITY_FIRST",
    "scenario": {"scenario": "TASK_PARALLEL",
                 "parameters": {"n_tasks": 8, "duration_ms": 1000, "slots": 1}},
    "trials": 3,
    "sweep": {"slots": [1, 2, 4], "n_tasks": [8, 16]},
    "output_dir": "out"
  })json";
  ExperimentManifest m = ExperimentManifest::from_json(text);
  CHECK(m.name == "scaling");
  CHECK(m.seed == 7);
  CHECK(m.backend.kind == BackendKind::SIM_BATCH);
  CHECK(m.backend.backend_id == "sim_batch");
  CHECK(m.pilots.size() == 2);
  CHECK(m.pilots[1].slots == 4);
  CHECK(m.policy == SchedulingPolicy::AFFINITY_FIRST);
  CHECK(m.scenario.scenario == Scenario::TASK_PARALLEL);
  CHECK(m.scenario.parameters.at("n_tasks") == "8");
  CHECK(m.trials == 3);
  REQUIRE(m.sweep.size() == 2);
  CHECK(m.sweep[0].first == "n_tasks");
  CHECK(m.sweep[1].first == "slots");
  CHECK(m.sweep[1].second == std::vector<std::string>{"1", "2", "4"});
  CHECK(m.output_dir == fs::path("out"));
}

TEST_CASE("manifest JSON rejects malformed input") {
  CHECK_NOTHROW(ExperimentManifest::from_json(manifest_json("")));
  CHECK_THROWS_AS(ExperimentManifest::from_json("{nope"), ManifestError);

  // unknown top-level field
  CHECK_THROWS_AS(ExperimentManifest::from_json(manifest_json("\"surprise\": 1")),
                  ManifestError);
  // trials must be at least one
  CHECK_THROWS_AS(ExperimentManifest::from_json(manifest_json("\"trials\": 0")),
                  ManifestError);
  // sweep keys must name scenario parameters
  CHECK_THROWS_AS(
      ExperimentManifest::from_json(manifest_json("\"sweep\": {\"bogus\": [1]}")),
      ManifestError);
  // unknown scheduling policy
  CHECK_THROWS_AS(
      ExperimentManifest::from_json(manifest_json("\"policy\": \"RANDOM\"")),
      ManifestError);

  // seed is mandatory
  std::string no_seed = R"json({
    "name": "x",
    "backend": {"kind": "SIM_BATCH"},
    "pilots": [{"slots": 1}],
    "scenario": {"scenario": "TASK_PARALLEL",
                 "parameters": {"n_tasks": 1, "duration_ms": 10}},
    "output_dir": "out"
  })json";
  CHECK_THROWS_AS(ExperimentManifest::from_json(no_seed), ManifestError);

  // scenario parameters outside the vocabulary
  std::string bad_param = R"json({
    "name": "x",
    "seed": 1,
    "backend": {"kind": "SIM_BATCH"},
    "pilots": [{"slots": 1}],
    "scenario": {"scenario": "TASK_PARALLEL",
                 "parameters": {"n_tasks": 1, "duration_ms": 10, "bogus": 1}},
    "output_dir": "out"
  })json";
  CHECK_THROWS_AS(ExperimentManifest::from_json(bad_param), ManifestError);

  // duration_ms and duration_dist are mutually exclusive
  std::string both_durations = R"json({
    "name": "x",
    "seed": 1,
    "backend": {"kind": "SIM_BATCH"},
    "pilots": [{"slots": 1}],
    "scenario": {"scenario": "TASK_PARALLEL",
                 "parameters": {"n_tasks": 1, "duration_ms": 10,
                                "duration_dist": "CONSTANT(10)"}},
    "output_dir": "out"
  })json";
  CHECK_THROWS_AS(ExperimentManifest::from_json(both_durations), ManifestError);
}

TEST_CASE("run_experiment single trial produces one row and its artifacts") {
  fs::path dir = fresh_dir();
  ExperimentManifest m = sim_manifest(dir);
  m.scenario.scenario = Scenario::TASK_PARALLEL;
  m.scenario.parameters = {{"n_tasks", "3"}, {"duration_ms", "1000"}};

  MetricsBundle bundle = run_experiment(m);
  REQUIRE(bundle.rows.size() == 1);
  const RunRecord& rec = bundle.rows[0];
  CHECK(rec.trial == 1);
  CHECK(rec.param_point.empty());
  CHECK(rec.status == "ok");
  REQUIRE(rec.metrics_valid);
  CHECK(rec.metrics.makespan_ms == 3000);
  REQUIRE(rec.metrics.throughput_per_s.has_value());
  CHECK(*rec.metrics.throughput_per_s == doctest::Approx(1.0));
  REQUIRE(rec.metrics.utilization.has_value());
  CHECK(*rec.metrics.utilization == doctest::Approx(1.0));

  CHECK(fs::exists(rec.events_csv));
  CHECK(fs::exists(bundle.manifest_copy));
  auto lines = lines_of(slurp(bundle.derived_csv));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == kDerivedCsvHeader);

  // The copy parses back to the same experiment.
  ExperimentManifest reread =
      ExperimentManifest::from_file(bundle.manifest_copy);
  CHECK(reread.name == m.name);
  CHECK(reread.seed == m.seed);
  CHECK(reread.trials == m.trials);
  CHECK(reread.scenario.parameters == m.scenario.parameters);

  // Metrics are recomputable from the event CSV alone.
  DerivedMetrics again = derive_metrics_file(rec.events_csv);
  CHECK(again.makespan_ms == rec.metrics.makespan_ms);
  CHECK(again.utilization == rec.metrics.utilization);
}

TEST_CASE("run_experiment sweeps slots with the expected strong scaling") {
  fs::path dir = fresh_dir();
  ExperimentManifest m = sim_manifest(dir);
  m.trials = 2;
  m.scenario.scenario = Scenario::TASK_PARALLEL;
  m.scenario.parameters = {
      {"n_tasks", "8"}, {"duration_ms", "1000"}, {"slots", "1"}};
  m.sweep = {{"slots", {"1", "2", "4"}}};

  MetricsBundle bundle = run_experiment(m);
  REQUIRE(bundle.rows.size() == 6);
  std::map<std::string, int64_t> expected{
      {"slots=1", 8000}, {"slots=2", 4000}, {"slots=4", 2000}};
  for (const auto& rec : bundle.rows) {
    CHECK(rec.status == "ok");
    REQUIRE(rec.metrics_valid);
    CHECK(rec.metrics.makespan_ms == expected.at(rec.param_point));
  }
  CHECK(bundle.rows[0].param_point == "slots=1");
  CHECK(bundle.rows[0].trial == 1);
  CHECK(bundle.rows[1].trial == 2);
  CHECK(bundle.rows[4].param_point == "slots=4");

  auto lines = lines_of(slurp(bundle.derived_csv));
  REQUIRE(lines.size() == 7);
}

TEST_CASE("run_experiment is byte-identical across reruns on simulation") {
  ExperimentManifest m = sim_manifest("");
  m.trials = 2;
  m.scenario.scenario = Scenario::DATAFLOW;
  m.scenario.parameters = {{"n_tasks", "12"},
                           {"duration_dist", "UNIFORM(50,250)"},
                           {"data_size_dist", "CONSTANT(1024)"},
                           {"dag_shape", "DIAMOND"},
                           {"slots", "2"}};
  m.sweep = {{"slots", {"1", "2"}}};

  fs::path a = fresh_dir();
  fs::path b = fresh_dir();
  m.output_dir = a;
  MetricsBundle first = run_experiment(m);
  m.output_dir = b;
  MetricsBundle second = run_experiment(m);

  REQUIRE(first.rows.size() == 4);
  CHECK(slurp(first.derived_csv) == slurp(second.derived_csv));
  CHECK(slurp(a / "run_p0_t1.events.csv") == slurp(b / "run_p0_t1.events.csv"));
  CHECK(slurp(a / "run_p1_t2.events.csv") == slurp(b / "run_p1_t2.events.csv"));
  for (const auto& rec : first.rows) CHECK(rec.status == "ok");
}

TEST_CASE("run_experiment records failed runs and continues") {
  fs::path dir = fresh_dir();
  ExperimentManifest m = sim_manifest(dir);
  m.scenario.scenario = Scenario::ITERATIVE;
  m.scenario.parameters = {{"n_points", "20"}, {"k", "1"}, {"max_iters", "10"}};
  m.sweep = {{"k", {"1", "50"}}};

  MetricsBundle bundle = run_experiment(m);
  REQUIRE(bundle.rows.size() == 2);
  CHECK(bundle.rows[0].param_point == "k=1");
  CHECK(bundle.rows[0].status == "ok");
  CHECK(bundle.rows[1].param_point == "k=50");
  CHECK(bundle.rows[1].status.rfind("failed: ", 0) == 0);
  auto lines = lines_of(slurp(bundle.derived_csv));
  REQUIRE(lines.size() == 3);
}

TEST_CASE("run_experiment streaming scenario derives message metrics") {
  fs::path dir = fresh_dir();
  ExperimentManifest m = sim_manifest(dir);
  m.pilots[0].slots = 2;
  m.scenario.scenario = Scenario::STREAMING;
  m.scenario.parameters = {{"rate", "100"}, {"duration_s", "10"}};

  MetricsBundle bundle = run_experiment(m);
  REQUIRE(bundle.rows.size() == 1);
  const RunRecord& rec = bundle.rows[0];
  CHECK(rec.status == "ok");
  REQUIRE(rec.metrics_valid);
  CHECK(rec.metrics.makespan_ms == 10000);
  REQUIRE(rec.metrics.latency_p50_ms.has_value());
  CHECK(*rec.metrics.latency_p50_ms == doctest::Approx(40.0));
  REQUIRE(rec.metrics.latency_p99_ms.has_value());
  CHECK(*rec.metrics.latency_p99_ms == doctest::Approx(90.0));
  REQUIRE(rec.metrics.throughput_per_s.has_value());
  CHECK(*rec.metrics.throughput_per_s == doctest::Approx(100.0));
}

TEST_CASE("run_experiment mapreduce scenario completes") {
  fs::path dir = fresh_dir();
  ExperimentManifest m = sim_manifest(dir);
  m.pilots[0].slots = 4;
  m.scenario.scenario = Scenario::MAPREDUCE;
  m.scenario.parameters = {
      {"corpus_bytes", "8192"}, {"n_mappers", "3"}, {"n_reducers", "2"}};

  MetricsBundle bundle = run_experiment(m);
  REQUIRE(bundle.rows.size() == 1);
  CHECK(bundle.rows[0].status == "ok");
  REQUIRE(bundle.rows[0].metrics_valid);
  CHECK(bundle.rows[0].metrics.makespan_ms >= 0);
}

TEST_CASE("run_experiment dataflow poisson arrivals run to completion") {
  fs::path dir = fresh_dir();
  ExperimentManifest m = sim_manifest(dir);
  m.pilots[0].slots = 2;
  m.scenario.scenario = Scenario::DATAFLOW;
  m.scenario.parameters = {{"n_tasks", "5"},
                           {"duration_dist", "CONSTANT(100)"},
                           {"arrival", "POISSON(10)"}};

  MetricsBundle bundle = run_experiment(m);
  REQUIRE(bundle.rows.size() == 1);
  CHECK(bundle.rows[0].status == "ok");
  REQUIRE(bundle.rows[0].metrics_valid);
  REQUIRE(bundle.rows[0].metrics.task_runtime_mean_ms.has_value());
  CHECK(*bundle.rows[0].metrics.task_runtime_mean_ms == doctest::Approx(100));
}

TEST_CASE("run_experiment on the local backend") {
  fs::path dir = fresh_dir();
  ExperimentManifest m = sim_manifest(dir);
  m.backend = BackendDescriptor{};
  m.backend.backend_id = "local";
  m.backend.kind = BackendKind::LOCAL;
  m.backend.parameters["max_processes"] = "4";
  m.pilots[0].slots = 2;
  m.scenario.scenario = Scenario::TASK_PARALLEL;
  m.scenario.parameters = {{"n_tasks", "2"}, {"duration_ms", "50"}};

  MetricsBundle bundle = run_experiment(m);
  REQUIRE(bundle.rows.size() == 1);
  CHECK(bundle.rows[0].status == "ok");
  REQUIRE(bundle.rows[0].metrics_valid);
  CHECK(bundle.rows[0].metrics.makespan_ms >= 50);
  CHECK(bundle.rows[0].metrics.makespan_ms < 5000);
}

TEST_CASE("experiment manifests validate structural invariants") {
  ExperimentManifest m = sim_manifest("out");
  m.scenario.scenario = Scenario::TASK_PARALLEL;
  m.scenario.parameters = {{"n_tasks", "1"}, {"duration_ms", "10"}};
  CHECK_NOTHROW(m.validate());

  ExperimentManifest no_pilots = m;
  no_pilots.pilots.clear();
  CHECK_THROWS_AS(no_pilots.validate(), ManifestError);

  ExperimentManifest bad_trials = m;
  bad_trials.trials = 0;
  CHECK_THROWS_AS(bad_trials.validate(), ManifestError);

  ExperimentManifest dup_sweep = m;
  dup_sweep.sweep = {{"n_tasks", {"1"}}, {"n_tasks", {"2"}}};
  CHECK_THROWS_AS(dup_sweep.validate(), ManifestError);

  ExperimentManifest missing_required = m;
  missing_required.scenario.parameters.erase("n_tasks");
  CHECK_THROWS_AS(missing_required.validate(), ManifestError);
}
