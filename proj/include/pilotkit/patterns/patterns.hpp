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

#ifndef PILOTKIT_PATTERNS_PATTERNS_HPP
#define PILOTKIT_PATTERNS_PATTERNS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pilotkit/manager/manager.hpp"
#include "pilotkit/manager/workload.hpp"
#include "pilotkit/types.hpp"

namespace pilotkit {

// Application-scenario drivers. Each is a blocking call that submits work to
// an already-provisioned manager (pilots submitted by the caller), waits for
// it, and reports from the event log. Drivers hold no state of their own, so
// concurrent calls on distinct managers are safe.

enum class Scenario { TASK_PARALLEL, MAPREDUCE, DATAFLOW, ITERATIVE, STREAMING };

const char* to_string(Scenario s);
std::optional<Scenario> parse_scenario(const std::string& name);

// One scenario invocation: which driver to run plus its key-value parameters.
// Parameter spellings are scenario-specific and validated by the driver
// runner in the experiment module.
struct ScenarioSpec {
  Scenario scenario = Scenario::TASK_PARALLEL;
  std::map<std::string, std::string> parameters;
};

struct TaskSpan {
  std::string unit_id;
  UnitState state = UnitState::NEW;
  int64_t submitted_ms = -1;
  int64_t running_ms = -1;  // -1 when the unit never started
  int64_t terminal_ms = -1;
};

struct TaskParallelReport {
  int64_t makespan_ms = 0;  // first unit submission to last terminal event
  std::vector<TaskSpan> spans;
};

// Submits independent single-kernel units and waits for all of them. Throws
// RuntimeFailure naming the first failed unit, if any.
TaskParallelReport run_task_parallel(PilotManager& mgr,
                                     const std::vector<KernelSpec>& kernels);
TaskParallelReport run_task_parallel(PilotManager& mgr, int n_tasks,
                                     const KernelSpec& kernel);

struct MapReduceResult {
  std::string result_data_unit;  // holds the sorted word<TAB>count text
  std::string text;
  int64_t makespan_ms = 0;
};

// Wordcount over the concatenated input data units: the corpus is split at
// whitespace into n_mappers chunks, map units bucket words by hash into
// n_reducers partitions (shuffle materialized as data units), reduce units
// aggregate per bucket, and the merged result is registered as a new data
// unit. The result is independent of (n_mappers, n_reducers).
MapReduceResult run_mapreduce(PilotManager& mgr,
                              const std::vector<std::string>& input_data_units,
                              int n_mappers, int n_reducers);

struct DataflowReport {
  int64_t makespan_ms = 0;
  std::vector<std::string> unit_ids;            // submission order
  std::map<std::string, UnitState> states;      // terminal states by unit id
};

// Runs an arbitrary DAG of units and data edges to completion. Unit failures
// are reported in `states`, not thrown; graph defects (cycles, bad kernels)
// propagate from submit_units.
DataflowReport run_dataflow(PilotManager& mgr, const WorkloadGraph& graph);

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  int iterations = 0;
  std::vector<double> wcss;  // within-cluster sum of squares per iteration
  std::vector<std::string> partition_data_units;
};

// Lloyd's algorithm over a points data unit (one row per point, space
// separated coordinates). The points are split into n_partitions chunks that
// are staged to the pilots once up front and reused by the per-iteration
// assign units; a single update unit merges the partial sums. Initial
// centroids are the first k distinct points; iteration stops when the largest
// centroid shift drops below epsilon or after max_iters. n_partitions <= 0
// means one partition per pilot.
KMeansResult run_iterative_kmeans(PilotManager& mgr,
                                  const std::string& points_data_unit, int k,
                                  int max_iters, double epsilon,
                                  int n_partitions = 0);

struct StreamingParams {
  double rate = 0;  // messages per second
  double duration_s = 0;
  int64_t message_size = 64;  // bytes per message
  int n_consumers = 1;
  int64_t batch_ms = 100;  // consumer micro-batch interval
  int64_t queue_bound = 10000;
  std::string broker = "stream";
};

struct StreamingReport {
  int64_t produced = 0;
  int64_t consumed = 0;
  int64_t dropped = 0;  // rejected by the bounded broker queue
  bool backpressure = false;
  double throughput_per_s = 0;  // consumed messages per second of duration
  std::optional<double> latency_p50_ms;
  std::optional<double> latency_p99_ms;
};

// One producer unit paces `rate` messages per second for `duration_s`
// through a bounded in-process broker; n_consumers units drain it in
// batch_ms micro-batches. On a virtual-clock backend the broker traffic is
// simulated on the event queue, message for message, so counts and latencies
// are exactly reproducible. Overflow (backpressure) is reported in the
// result, never thrown. duration 0 yields an all-zero report.
StreamingReport run_streaming(PilotManager& mgr, const StreamingParams& params);

}  // namespace pilotkit

#endif  // PILOTKIT_PATTERNS_PATTERNS_HPP
