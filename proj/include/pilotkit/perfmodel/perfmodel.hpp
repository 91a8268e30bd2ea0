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

#ifndef PILOTKIT_PERFMODEL_PERFMODEL_HPP
#define PILOTKIT_PERFMODEL_PERFMODEL_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pilotkit/event_log.hpp"

namespace pilotkit {

// Inputs of the analytical makespan model: how many tasks, how many slots
// they share, and the per-task and per-pilot cost components.
struct MakespanModelInput {
  int64_t n_tasks = 0;            // N
  int64_t slots = 1;              // k
  int64_t task_duration_ms = 0;   // d, mean task duration
  int64_t sched_overhead_ms = 0;  // o, per-task scheduling overhead
  int64_t queue_wait_ms = 0;      // Q, pilot queue wait
  int64_t startup_ms = 0;         // S, pilot startup

  void validate() const;  // throws UserError
};

// Q + S + ceil(N/k) * (d + o). Exact for constant-duration bulk workloads
// on one pilot; an upper-bound estimate otherwise.
int64_t predict_makespan(const MakespanModelInput& input);

struct PilotComponents {
  std::string pilot_id;
  int64_t queue_ms = 0;    // submission to startup begin
  int64_t startup_ms = 0;  // startup begin to active
};

struct UnitComponents {
  std::string unit_id;
  int64_t scheduling_ms = 0;  // bound to running
  int64_t execution_ms = 0;   // running to terminal
};

// Component table of one run. The totals sum the per-entity rows and the
// residual closes the accounting exactly:
// makespan = queue + startup + scheduling + execution + residual.
// With slot parallelism the execution total can exceed the makespan, making
// the residual negative; on a serial single-pilot run it is zero.
struct DecompositionReport {
  std::vector<PilotComponents> pilots;
  std::vector<UnitComponents> units;
  int64_t makespan_ms = 0;
  int64_t queue_total_ms = 0;
  int64_t startup_total_ms = 0;
  int64_t scheduling_total_ms = 0;
  int64_t execution_total_ms = 0;
  int64_t residual_ms = 0;
};

// Pure function of the event records; throws MalformedLog on an empty log.
DecompositionReport decompose(const std::vector<EventRecord>& events);
DecompositionReport decompose_file(const std::filesystem::path& csv_path);

// Least-squares linear fit of one metric against chosen regressors.
struct ThroughputModel {
  std::vector<std::string> regressors;
  std::map<std::string, double> coefficients;  // regressors plus "intercept"
  double r2 = 0;    // on the training split
  double mape = 0;  // percent, on the held-out split
  int n_train = 0;

  double predict(const std::map<std::string, double>& row) const;
  std::string to_json() const;
};

// Ordinary least squares via normal equations. The last fifth of the rows is
// held out for the error estimate; the rest trains the fit and must contain
// at least regressors + 1 rows. Throws SingularDesign on collinear columns
// and UserError on missing columns or too few rows.
ThroughputModel fit_throughput_model(
    const std::vector<std::map<std::string, double>>& rows,
    const std::vector<std::string>& regressors,
    const std::string& target = "throughput_per_s");

// Loads a derived metrics CSV back into numeric rows for model fitting.
// Swept parameters become columns (non-numeric values are dropped), empty
// metric cells stay absent, and failed runs are skipped.
std::vector<std::map<std::string, double>> read_metric_rows(
    const std::filesystem::path& derived_csv);

}  // namespace pilotkit

#endif  // PILOTKIT_PERFMODEL_PERFMODEL_HPP
