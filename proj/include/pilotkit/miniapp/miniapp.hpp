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

#ifndef PILOTKIT_MINIAPP_MINIAPP_HPP
#define PILOTKIT_MINIAPP_MINIAPP_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pilotkit/backend/backend.hpp"
#include "pilotkit/event_log.hpp"
#include "pilotkit/manager/manager.hpp"
#include "pilotkit/manager/workload.hpp"
#include "pilotkit/patterns/patterns.hpp"

namespace pilotkit {

// Synthetic workload description: how many tasks, how long they run, how much
// data they read, when they arrive, and how they depend on each other.
struct WorkloadGenSpec {
  enum class Arrival { BULK, POISSON };
  enum class DagShape { NONE, CHAIN, FANOUT, DIAMOND };

  int n_tasks = 0;
  DurationDist duration_dist = DurationDist::constant(0);   // milliseconds
  DurationDist data_size_dist = DurationDist::constant(0);  // bytes
  Arrival arrival = Arrival::BULK;
  double arrival_rate = 0;  // POISSON: tasks per second
  DagShape dag_shape = DagShape::NONE;
  int dag_param = 0;  // CHAIN depth / FANOUT width

  void validate() const;  // throws ManifestError

  // "BULK" or "POISSON(rate)".
  static std::pair<Arrival, double> parse_arrival(const std::string& text);
  // "NONE", "CHAIN(depth)", "FANOUT(width)", "DIAMOND".
  static std::pair<DagShape, int> parse_dag_shape(const std::string& text);
};

// Deterministic function of (spec, seed): same inputs, same graph. Tasks are
// sleep kernels with both wall and virtual durations set; a non-zero data
// size attaches one generated input data unit per task. POISSON arrival
// stores each task's offset in its kernel parameters under "arrival_ms" and
// requires an independent task set (no dag_shape).
WorkloadGraph generate_workload(const WorkloadGenSpec& spec, uint64_t seed);

// Declarative description of one experiment: a backend, a pilot layout, a
// scenario with parameters, a sweep grid, and a trial count.
struct ExperimentManifest {
  std::string name;
  uint64_t seed = 0;
  BackendDescriptor backend;
  std::vector<PilotDescription> pilots;
  SchedulingPolicy policy = SchedulingPolicy::FIFO;
  ScenarioSpec scenario;
  int trials = 1;
  // Sweep entries in deterministic (sorted-key) order; each value list is
  // swept as a cartesian grid. Keys must exist in scenario.parameters.
  std::vector<std::pair<std::string, std::vector<std::string>>> sweep;
  std::filesystem::path output_dir;
  std::string source_text;  // original JSON, copied into output_dir

  void validate() const;  // throws ManifestError

  static ExperimentManifest from_json(const std::string& json_text);
  static ExperimentManifest from_file(const std::filesystem::path& path);
};

// Metrics recomputed from one event CSV. Optionals are empty when the log
// has no matching events (for example no consumed messages).
struct DerivedMetrics {
  int64_t makespan_ms = 0;
  std::optional<double> task_runtime_mean_ms;
  std::optional<double> task_runtime_p99_ms;
  std::optional<double> pilot_overhead_ms;  // mean ACTIVE - SUBMITTED
  std::optional<double> throughput_per_s;
  std::optional<double> latency_p50_ms;
  std::optional<double> latency_p99_ms;
  std::optional<double> utilization;
};

// Pure function of the event records; throws MalformedLog on an empty log.
DerivedMetrics derive_metrics(const std::vector<EventRecord>& events);
DerivedMetrics derive_metrics_file(const std::filesystem::path& csv_path);

struct RunRecord {
  int trial = 1;
  std::string param_point;  // "key=value ..." in sorted key order
  std::string status;       // "ok" or "failed: <reason>"
  std::filesystem::path events_csv;
  DerivedMetrics metrics;
  bool metrics_valid = false;  // false when the run left no usable log
};

struct MetricsBundle {
  std::vector<RunRecord> rows;
  std::filesystem::path derived_csv;
  std::filesystem::path manifest_copy;
};

// Column order of the derived metrics CSV.
extern const char* const kDerivedCsvHeader;

// Runs trials x sweep grid sequentially, one fresh backend and manager per
// run, writing per-run event CSVs, derived.csv, and a manifest copy into
// output_dir. The derived seed of grid point p, trial t is
// seed XOR fnv1a64("<param_point>#<trial>"); it seeds workload generation
// and, unless the manifest pins one, the simulation backend. A failed run is
// recorded in its row's status and the experiment continues.
MetricsBundle run_experiment(const ExperimentManifest& manifest);

}  // namespace pilotkit

#endif  // PILOTKIT_MINIAPP_MINIAPP_HPP
