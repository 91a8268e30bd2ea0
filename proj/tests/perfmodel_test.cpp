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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pilotkit/backend/sim_backend.hpp"
#include "pilotkit/errors.hpp"
#include "pilotkit/manager/manager.hpp"
#include "pilotkit/miniapp/miniapp.hpp"
#include "pilotkit/perfmodel/perfmodel.hpp"

using namespace pilotkit;
namespace fs = std::filesystem;

namespace {

int temp_counter = 0;

fs::path fresh_dir() {
  fs::path dir = fs::temp_directory_path() /
                 ("pilotkit-perfmodel-" + std::to_string(::getpid()) + "-" +
                  std::to_string(++temp_counter));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

BackendDescriptor sim_batch(int64_t queue_s, int64_t startup_s,
                            uint64_t seed = 1) {
  BackendDescriptor d;
  d.backend_id = "sim";
  d.kind = BackendKind::SIM_BATCH;
  d.parameters["queue_wait_dist"] =
      "CONSTANT(" + std::to_string(queue_s) + ")";
  d.parameters["startup_overhead"] = std::to_string(startup_s);
  d.parameters["seed"] = std::to_string(seed);
  return d;
}

// Runs n constant-duration tasks on one pilot. Units are submitted at time
// zero, before the pilot finishes starting, so the log shows the full queue
// and startup components.
std::vector<EventRecord> simulated_run(int64_t n_tasks, int slots,
                                       int64_t duration_ms, int64_t queue_s,
                                       int64_t startup_s, uint64_t seed = 1) {
  SimBackend sim(sim_batch(queue_s, startup_s, seed));
  EventLog log;
  PilotManager mgr(sim, log);
  PilotDescription pilot;
  pilot.slots = slots;
  mgr.submit_pilot(pilot);

  WorkloadGenSpec spec;
  spec.n_tasks = n_tasks;
  spec.duration_dist = DurationDist::constant(duration_ms);
  mgr.submit_units(generate_workload(spec, seed));
  sim.run_until_idle();
  return log.snapshot();
}

MakespanModelInput model_input(int64_t n, int64_t k, int64_t d, int64_t o,
                               int64_t q, int64_t s) {
  MakespanModelInput in;
  in.n_tasks = n;
  in.slots = k;
  in.task_duration_ms = d;
  in.sched_overhead_ms = o;
  in.queue_wait_ms = q;
  in.startup_ms = s;
  return in;
}

std::map<std::string, double> row_of(
    std::initializer_list<std::pair<const std::string, double>> kvs) {
  return std::map<std::string, double>(kvs);
}

}  // namespace

// ---------------------------------------------------------------------------
// Analytical makespan model
// ---------------------------------------------------------------------------

TEST_CASE("makespan model matches the hand-computed examples") {
  CHECK(predict_makespan(model_input(8, 2, 1000, 0, 0, 0)) == 4000);
  CHECK(predict_makespan(model_input(5, 2, 2000, 100, 3000, 1000)) == 10300);
  CHECK(predict_makespan(model_input(0, 4, 1000, 50, 700, 300)) == 1000);
  CHECK(predict_makespan(model_input(3, 8, 500, 0, 0, 0)) == 500);
  CHECK(predict_makespan(model_input(9, 4, 100, 10, 0, 0)) == 330);
}

TEST_CASE("makespan model rejects invalid inputs") {
  CHECK_THROWS_AS(predict_makespan(model_input(8, 0, 1000, 0, 0, 0)),
                  UserError);
  CHECK_THROWS_AS(predict_makespan(model_input(-1, 1, 1000, 0, 0, 0)),
                  UserError);
  CHECK_THROWS_AS(predict_makespan(model_input(1, 1, -5, 0, 0, 0)), UserError);
  CHECK_THROWS_AS(predict_makespan(model_input(1, 1, 5, -1, 0, 0)), UserError);
  CHECK_THROWS_AS(predict_makespan(model_input(1, 1, 5, 0, -1, 0)), UserError);
  CHECK_THROWS_AS(predict_makespan(model_input(1, 1, 5, 0, 0, -1)), UserError);
}

TEST_CASE("prediction matches simulated constant workloads exactly") {
  struct Case {
    int64_t n, k, d, q_s, s_s;
  };
  const Case cases[] = {
      {8, 2, 1000, 0, 0}, {5, 2, 2000, 3, 1}, {7, 3, 250, 2, 0},
      {1, 4, 10, 0, 5},   {12, 5, 777, 4, 2},
  };
  for (const Case& c : cases) {
    CAPTURE(c.n);
    CAPTURE(c.k);
    auto events = simulated_run(c.n, static_cast<int>(c.k), c.d, c.q_s, c.s_s);
    int64_t measured = derive_metrics(events).makespan_ms;
    int64_t predicted = predict_makespan(
        model_input(c.n, c.k, c.d, 0, c.q_s * 1000, c.s_s * 1000));
    CHECK(predicted == measured);
  }
}

// ---------------------------------------------------------------------------
// Event log decomposition
// ---------------------------------------------------------------------------

TEST_CASE("decomposition reports simulated overheads exactly") {
  auto events = simulated_run(3, 1, 500, 10, 2);
  DecompositionReport report = decompose(events);

  REQUIRE(report.pilots.size() == 1);
  CHECK(report.pilots[0].queue_ms == 10000);
  CHECK(report.pilots[0].startup_ms == 2000);
  CHECK(report.queue_total_ms == 10000);
  CHECK(report.startup_total_ms == 2000);

  REQUIRE(report.units.size() == 3);
  for (const auto& u : report.units) {
    CHECK(u.scheduling_ms == 0);
    CHECK(u.execution_ms == 500);
  }
  CHECK(report.scheduling_total_ms == 0);
  CHECK(report.execution_total_ms == 1500);

  // Serial single-slot run: the components tile the makespan exactly.
  CHECK(report.makespan_ms == 13500);
  CHECK(report.residual_ms == 0);
}

TEST_CASE("zero overhead runs decompose to pure execution") {
  auto events = simulated_run(4, 1, 250, 0, 0);
  DecompositionReport report = decompose(events);
  CHECK(report.queue_total_ms == 0);
  CHECK(report.startup_total_ms == 0);
  CHECK(report.scheduling_total_ms == 0);
  CHECK(report.execution_total_ms == 1000);
  CHECK(report.makespan_ms == 1000);
  CHECK(report.residual_ms == 0);
}

TEST_CASE("parallel overlap shows up as negative residual") {
  auto events = simulated_run(2, 2, 1000, 0, 0);
  DecompositionReport report = decompose(events);
  CHECK(report.makespan_ms == 1000);
  CHECK(report.execution_total_ms == 2000);
  CHECK(report.residual_ms == -1000);
}

TEST_CASE("decomposition closes the accounting identity on random runs") {
  std::mt19937_64 rng(2024);
  auto pick = [&](int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(rng() % static_cast<uint64_t>(hi - lo + 1));
  };
  for (int i = 0; i < 100; ++i) {
    int64_t n = pick(1, 12);
    int slots = static_cast<int>(pick(1, 4));
    int64_t d = pick(10, 3000);
    int64_t q = pick(0, 5);
    int64_t s = pick(0, 3);
    CAPTURE(i);

    auto events = simulated_run(n, slots, d, q, s, rng());
    DecompositionReport report = decompose(events);

    int64_t pilot_sum = 0;
    for (const auto& p : report.pilots) pilot_sum += p.queue_ms + p.startup_ms;
    int64_t unit_sum = 0;
    for (const auto& u : report.units) {
      unit_sum += u.scheduling_ms + u.execution_ms;
    }
    CHECK(pilot_sum == report.queue_total_ms + report.startup_total_ms);
    CHECK(unit_sum ==
          report.scheduling_total_ms + report.execution_total_ms);
    CHECK(report.makespan_ms ==
          report.queue_total_ms + report.startup_total_ms +
              report.scheduling_total_ms + report.execution_total_ms +
              report.residual_ms);
    CHECK(report.makespan_ms == derive_metrics(events).makespan_ms);

    // One pilot, constant durations: the additive model is exact.
    CHECK(report.makespan_ms ==
          predict_makespan(model_input(n, slots, d, 0, q * 1000, s * 1000)));
  }
}

TEST_CASE("decompose rejects an empty log") {
  CHECK_THROWS_AS(decompose({}), MalformedLog);
}

TEST_CASE("decompose reads a written log back unchanged") {
  auto events = simulated_run(5, 2, 300, 1, 1);
  fs::path csv = fresh_dir() / "events.csv";
  EventLog log;
  for (const auto& e : events) log.append(e);
  log.write_csv_file(csv);

  DecompositionReport direct = decompose(events);
  DecompositionReport loaded = decompose_file(csv);
  CHECK(loaded.makespan_ms == direct.makespan_ms);
  CHECK(loaded.queue_total_ms == direct.queue_total_ms);
  CHECK(loaded.startup_total_ms == direct.startup_total_ms);
  CHECK(loaded.scheduling_total_ms == direct.scheduling_total_ms);
  CHECK(loaded.execution_total_ms == direct.execution_total_ms);
  CHECK(loaded.residual_ms == direct.residual_ms);
  CHECK(loaded.pilots.size() == direct.pilots.size());
  CHECK(loaded.units.size() == direct.units.size());
}

// ---------------------------------------------------------------------------
// Throughput model fit
// ---------------------------------------------------------------------------

TEST_CASE("least squares recovers an exact linear relation") {
  std::vector<std::map<std::string, double>> rows;
  for (int s = 1; s <= 10; ++s) {
    rows.push_back(row_of({{"slots", static_cast<double>(s)},
                           {"throughput_per_s", 50.0 * s}}));
  }
  ThroughputModel model = fit_throughput_model(rows, {"slots"});
  CHECK(model.n_train == 8);
  CHECK(model.coefficients.at("slots") == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(std::fabs(model.coefficients.at("intercept")) < 1e-6);
  CHECK(model.r2 == doctest::Approx(1.0));
  CHECK(model.mape == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(model.predict(row_of({{"slots", 20.0}})) ==
        doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("least squares recovers a plane with two regressors") {
  std::vector<std::map<std::string, double>> rows;
  for (int i = 0; i < 15; ++i) {
    double a = i;
    double b = (i * i) % 7;
    rows.push_back(row_of(
        {{"a", a}, {"b", b}, {"throughput_per_s", 7.0 + 3.0 * a + 2.0 * b}}));
  }
  ThroughputModel model = fit_throughput_model(rows, {"a", "b"});
  CHECK(model.coefficients.at("intercept") == doctest::Approx(7.0));
  CHECK(model.coefficients.at("a") == doctest::Approx(3.0));
  CHECK(model.coefficients.at("b") == doctest::Approx(2.0));
  CHECK(model.r2 == doctest::Approx(1.0));
  CHECK(model.mape == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("noisy data still yields a high quality linear fit") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> noise(-5.0, 5.0);
  std::vector<std::map<std::string, double>> rows;
  for (int i = 1; i <= 50; ++i) {
    rows.push_back(row_of({{"rate", 10.0 * i},
                           {"throughput_per_s", 10.0 * i + noise(rng)}}));
  }
  ThroughputModel model = fit_throughput_model(rows, {"rate"});
  CHECK(model.coefficients.at("rate") == doctest::Approx(1.0).epsilon(0.01));
  CHECK(model.r2 > 0.99);
  CHECK(model.mape < 5.0);
}

TEST_CASE("duplicate and collinear regressors are singular") {
  std::vector<std::map<std::string, double>> rows;
  for (int i = 1; i <= 10; ++i) {
    rows.push_back(row_of({{"a", static_cast<double>(i)},
                           {"b", 2.0 * i},
                           {"throughput_per_s", 5.0 * i}}));
  }
  CHECK_THROWS_AS(fit_throughput_model(rows, {"a", "a"}), SingularDesign);
  CHECK_THROWS_AS(fit_throughput_model(rows, {"a", "b"}), SingularDesign);
}

TEST_CASE("too few rows or missing columns are user errors") {
  std::vector<std::map<std::string, double>> rows;
  for (int i = 1; i <= 2; ++i) {
    rows.push_back(row_of({{"a", static_cast<double>(i)},
                           {"b", static_cast<double>(i * i)},
                           {"throughput_per_s", 1.0 * i}}));
  }
  CHECK_THROWS_AS(fit_throughput_model(rows, {"a", "b"}), UserError);
  CHECK_THROWS_AS(fit_throughput_model(rows, {"missing"}), UserError);
  CHECK_THROWS_AS(fit_throughput_model(rows, {}), UserError);
  CHECK_THROWS_AS(fit_throughput_model(rows, {"a"}, "no_such_metric"),
                  UserError);
}

TEST_CASE("model json report has the exact shape") {
  ThroughputModel model;
  model.regressors = {"slots"};
  model.coefficients["intercept"] = 0.0;
  model.coefficients["slots"] = 50.0;
  model.r2 = 1.0;
  model.mape = 0.0;
  model.n_train = 8;
  CHECK(model.to_json() ==
        R"({"coefficients":{"intercept":0.0,"slots":50.0},"r2":1.0,"mape":0.0,"n":8})");
}

// ---------------------------------------------------------------------------
// Derived metrics CSV loader
// ---------------------------------------------------------------------------

TEST_CASE("metric rows load back from a derived csv") {
  fs::path dir = fresh_dir();
  fs::path csv = dir / "derived.csv";
  {
    std::ofstream out(csv, std::ios::binary);
    out << kDerivedCsvHeader << "\n";
    out << "0,rate=100 slots=2,ok,5000,100,150,0,100,40,90,0.5\n";
    out << "1,rate=100 slots=2,failed: boom,,,,,,,,\n";
    out << "0,\"dist=UNIFORM(5,15) slots=4\",ok,2500,10,,0,200,,,\n";
  }
  auto rows = read_metric_rows(csv);
  REQUIRE(rows.size() == 2);

  CHECK(rows[0].at("rate") == 100.0);
  CHECK(rows[0].at("slots") == 2.0);
  CHECK(rows[0].at("makespan_ms") == 5000.0);
  CHECK(rows[0].at("throughput_per_s") == 100.0);
  CHECK(rows[0].at("utilization") == 0.5);
  CHECK(rows[0].at("trial") == 0.0);

  // The quoted point keeps its numeric key; the dist string is dropped and
  // empty metric cells stay absent.
  CHECK(rows[1].at("slots") == 4.0);
  CHECK(rows[1].count("dist") == 0);
  CHECK(rows[1].at("makespan_ms") == 2500.0);
  CHECK(rows[1].count("task_runtime_p99_ms") == 0);
  CHECK(rows[1].count("latency_p50_ms") == 0);
}

TEST_CASE("metric rows reject missing files and bad headers") {
  fs::path dir = fresh_dir();
  CHECK_THROWS_AS(read_metric_rows(dir / "nope.csv"), UserError);

  fs::path bad = dir / "bad.csv";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "foo,bar\n1,2\n";
  }
  CHECK_THROWS_AS(read_metric_rows(bad), MalformedLog);
}

TEST_CASE("streaming rate sweep fits with small held-out error") {
  fs::path dir = fresh_dir();
  ExperimentManifest m;
  m.name = "rate-sweep";
  m.seed = 7;
  m.backend.backend_id = "sim";
  m.backend.kind = BackendKind::SIM_BATCH;
  m.backend.parameters["queue_wait_dist"] = "CONSTANT(0)";
  m.backend.parameters["startup_overhead"] = "0";
  m.pilots.push_back(PilotDescription{});
  m.pilots.back().slots = 2;
  m.scenario.scenario = Scenario::STREAMING;
  m.scenario.parameters["rate"] = "100";
  m.scenario.parameters["duration_s"] = "5";
  m.scenario.parameters["batch_ms"] = "100";
  std::vector<std::string> rates;
  for (int r = 100; r <= 1000; r += 100) rates.push_back(std::to_string(r));
  m.sweep.emplace_back("rate", rates);
  m.output_dir = dir;

  MetricsBundle bundle = run_experiment(m);
  auto rows = read_metric_rows(bundle.derived_csv);
  REQUIRE(rows.size() == 10);

  ThroughputModel model = fit_throughput_model(rows, {"rate"});
  CHECK(model.n_train == 8);
  CHECK(model.mape < 5.0);
  CHECK(model.coefficients.at("rate") == doctest::Approx(1.0).epsilon(0.05));
  CHECK(model.r2 > 0.95);
}
