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

#include "pilotkit/patterns/patterns.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <deque>
#include <memory>
#include <set>
#include <thread>

#include "pilotkit/backend/kernels.hpp"
#include "pilotkit/backend/sim_backend.hpp"
#include "pilotkit/errors.hpp"
#include "pilotkit/manager/generators.hpp"
#include "pilotkit/states.hpp"
#include "pilotkit/stats.hpp"

namespace pilotkit {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::TASK_PARALLEL: return "TASK_PARALLEL";
    case Scenario::MAPREDUCE: return "MAPREDUCE";
    case Scenario::DATAFLOW: return "DATAFLOW";
    case Scenario::ITERATIVE: return "ITERATIVE";
    case Scenario::STREAMING: return "STREAMING";
  }
  return "TASK_PARALLEL";
}

std::optional<Scenario> parse_scenario(const std::string& name) {
  if (name == "TASK_PARALLEL") return Scenario::TASK_PARALLEL;
  if (name == "MAPREDUCE") return Scenario::MAPREDUCE;
  if (name == "DATAFLOW") return Scenario::DATAFLOW;
  if (name == "ITERATIVE") return Scenario::ITERATIVE;
  if (name == "STREAMING") return Scenario::STREAMING;
  return std::nullopt;
}

namespace {

bool terminal_event(const std::string& event) {
  return event == "DONE" || event == "FAILED" || event == "CANCELED";
}

std::vector<std::string> active_pilot_ids(PilotManager& mgr) {
  std::vector<std::string> out;
  for (const std::string& pid : mgr.pilot_ids()) {
    if (mgr.pilot(pid).state == PilotState::ACTIVE) out.push_back(pid);
  }
  return out;
}

// Drives the backend until every submitted pilot is ACTIVE or terminal, so
// drivers that register data or anchor a clock see the full pilot set. On a
// virtual clock this steps the simulation; on a wall clock it polls with a
// generous bound. Throws PilotNotActive if nothing came up.
void settle_pilots(PilotManager& mgr) {
  if (mgr.pilot_ids().empty()) {
    throw UserError("scenario requires at least one submitted pilot");
  }
  auto unsettled = [&] {
    for (const std::string& pid : mgr.pilot_ids()) {
      PilotState s = mgr.pilot(pid).state;
      if (s != PilotState::ACTIVE && !is_terminal(s)) return true;
    }
    return false;
  };
  if (mgr.backend().clock_kind() == ClockKind::VIRTUAL) {
    auto* sim = dynamic_cast<SimBackend*>(&mgr.backend());
    while (unsettled() && sim->has_events()) sim->step();
  } else {
    for (int i = 0; i < 6000 && unsettled(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  if (active_pilot_ids(mgr).empty()) {
    throw PilotNotActive("no pilot reached ACTIVE");
  }
}

int64_t makespan_of(const std::vector<EventRecord>& events,
                    const std::vector<std::string>& unit_ids) {
  std::set<std::string> ids(unit_ids.begin(), unit_ids.end());
  int64_t first_new = -1;
  int64_t last_terminal = -1;
  for (const EventRecord& e : events) {
    if (e.entity_type != EntityType::UNIT || !ids.count(e.entity_id)) continue;
    if (e.event == "NEW") {
      first_new = first_new < 0 ? e.timestamp_ms : std::min(first_new, e.timestamp_ms);
    } else if (terminal_event(e.event)) {
      last_terminal = std::max(last_terminal, e.timestamp_ms);
    }
  }
  if (first_new < 0 || last_terminal < first_new) return 0;
  return last_terminal - first_new;
}

std::string output_data_unit_of(const std::vector<EventRecord>& events,
                                const std::string& unit_id) {
  for (const EventRecord& e : events) {
    if (e.entity_type == EntityType::UNIT && e.entity_id == unit_id &&
        e.event == "NEW") {
      return detail_get(e.detail, "output");
    }
  }
  return "";
}

void throw_on_failed_units(PilotManager& mgr, const std::vector<std::string>& ids) {
  for (const std::string& id : ids) {
    ComputeUnit cu = mgr.unit(id);
    if (cu.state != UnitState::FAILED) continue;
    std::string msg = "unit " + id + " failed";
    if (cu.exit_info) {
      msg += " (exit " + std::to_string(cu.exit_info->exit_code);
      if (!cu.exit_info->message.empty()) msg += ": " + cu.exit_info->message;
      msg += ")";
    }
    throw RuntimeFailure(msg);
  }
}

std::string read_available_data_unit(PilotManager& mgr, const std::string& id) {
  DataUnit du = mgr.data_unit(id);
  if (du.state != DataState::AVAILABLE) {
    throw DataUnitFailed("data unit " + id + " is not AVAILABLE");
  }
  return source_bytes(du);
}

}  // namespace

TaskParallelReport run_task_parallel(PilotManager& mgr,
                                     const std::vector<KernelSpec>& kernels) {
  if (mgr.pilot_ids().empty()) {
    throw UserError("scenario requires at least one submitted pilot");
  }
  TaskParallelReport report;
  if (kernels.empty()) return report;

  WorkloadGraph graph;
  for (size_t i = 0; i < kernels.size(); ++i) {
    ComputeUnitDescription unit;
    unit.kernel = kernels[i];
    graph.add_unit("task" + std::to_string(i), unit);
  }
  std::vector<std::string> ids = mgr.submit_units(graph);
  mgr.wait(ids);

  std::vector<EventRecord> events = mgr.log().snapshot();
  for (const std::string& id : ids) {
    TaskSpan span;
    span.unit_id = id;
    span.state = mgr.unit(id).state;
    for (const EventRecord& e : events) {
      if (e.entity_type != EntityType::UNIT || e.entity_id != id) continue;
      if (e.event == "NEW") span.submitted_ms = e.timestamp_ms;
      else if (e.event == "RUNNING") span.running_ms = e.timestamp_ms;
      else if (terminal_event(e.event)) span.terminal_ms = e.timestamp_ms;
    }
    report.spans.push_back(span);
  }
  report.makespan_ms = makespan_of(events, ids);
  throw_on_failed_units(mgr, ids);
  return report;
}

TaskParallelReport run_task_parallel(PilotManager& mgr, int n_tasks,
                                     const KernelSpec& kernel) {
  if (n_tasks < 0) throw UserError("n_tasks must be >= 0");
  return run_task_parallel(mgr, std::vector<KernelSpec>(n_tasks, kernel));
}

MapReduceResult run_mapreduce(PilotManager& mgr,
                              const std::vector<std::string>& input_data_units,
                              int n_mappers, int n_reducers) {
  if (n_mappers < 1 || n_reducers < 1) {
    throw UserError("mapreduce requires n_mappers >= 1 and n_reducers >= 1");
  }
  settle_pilots(mgr);

  std::string corpus;
  for (const std::string& id : input_data_units) {
    corpus += read_available_data_unit(mgr, id);
  }

  // Split boundaries land on whitespace so no word straddles two mappers;
  // that is what makes the result independent of n_mappers.
  std::vector<size_t> bounds(n_mappers + 1, 0);
  bounds[n_mappers] = corpus.size();
  for (int i = 1; i < n_mappers; ++i) {
    size_t pos = corpus.size() * static_cast<size_t>(i) / static_cast<size_t>(n_mappers);
    while (pos < corpus.size() && !std::isspace(static_cast<unsigned char>(corpus[pos]))) {
      ++pos;
    }
    bounds[i] = std::max(pos, bounds[i - 1]);
  }

  WorkloadGraph graph;
  std::vector<std::string> mapped_names;
  for (int m = 0; m < n_mappers; ++m) {
    DataUnitDescription split;
    split.graph_id = "split" + std::to_string(m);
    split.source = DataSource::inline_bytes(
        corpus.substr(bounds[m], bounds[m + 1] - bounds[m]));
    graph.add_data(split);

    ComputeUnitDescription map_unit;
    map_unit.kernel = KernelSpec::builtin(
        "wordcount_map", {{"n_reducers", std::to_string(n_reducers)}});
    map_unit.input_data = {split.graph_id};
    DataUnitDescription mapped;
    mapped.graph_id = "mapped" + std::to_string(m);
    map_unit.output_data = mapped;
    graph.add_unit("map" + std::to_string(m), map_unit);
    mapped_names.push_back(mapped.graph_id);
  }
  std::vector<std::string> reduce_ids_local;
  for (int b = 0; b < n_reducers; ++b) {
    ComputeUnitDescription reduce_unit;
    reduce_unit.kernel = KernelSpec::builtin(
        "wordcount_reduce", {{"bucket", std::to_string(b)}});
    reduce_unit.input_data = mapped_names;
    DataUnitDescription reduced;
    reduced.graph_id = "reduced" + std::to_string(b);
    reduce_unit.output_data = reduced;
    graph.add_unit("reduce" + std::to_string(b), reduce_unit);
  }

  std::vector<std::string> ids = mgr.submit_units(graph);
  mgr.wait(ids);
  throw_on_failed_units(mgr, ids);

  std::vector<EventRecord> events = mgr.log().snapshot();
  std::map<std::string, int64_t> counts;
  if (mgr.backend().clock_kind() == ClockKind::WALL) {
    // Merge the reducer outputs; buckets partition the key space, so this is
    // a plain union.
    for (int b = 0; b < n_reducers; ++b) {
      const std::string& uid = ids[static_cast<size_t>(n_mappers + b)];
      std::string du_id = output_data_unit_of(events, uid);
      std::string content = read_available_data_unit(mgr, du_id);
      size_t start = 0;
      while (start < content.size()) {
        size_t eol = content.find('\n', start);
        if (eol == std::string::npos) eol = content.size();
        std::string line = content.substr(start, eol - start);
        start = eol + 1;
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) {
          throw RuntimeFailure("malformed reducer output line: " + line);
        }
        counts[line.substr(0, tab)] += std::stoll(line.substr(tab + 1));
      }
    }
  } else {
    // Virtual clocks never execute kernels; the driver computes the same
    // aggregation directly from the corpus bytes.
    for (const auto& [word, count] : wordcount_text(corpus)) counts[word] = count;
  }

  MapReduceResult result;
  for (const auto& [word, count] : counts) {
    result.text += word + "\t" + std::to_string(count) + "\n";
  }
  DataUnitDescription out;
  out.source = DataSource::inline_bytes(result.text);
  result.result_data_unit = mgr.register_data_unit(out);
  result.makespan_ms = makespan_of(events, ids);
  return result;
}

DataflowReport run_dataflow(PilotManager& mgr, const WorkloadGraph& graph) {
  if (mgr.pilot_ids().empty()) {
    throw UserError("scenario requires at least one submitted pilot");
  }
  DataflowReport report;
  if (graph.empty()) return report;
  report.unit_ids = mgr.submit_units(graph);
  WaitResult waited = mgr.wait(report.unit_ids);
  report.states = waited.states;
  report.makespan_ms = makespan_of(mgr.log().snapshot(), report.unit_ids);
  return report;
}

namespace {

// Accumulates points into per-cluster counts and coordinate sums with the
// exact arithmetic and operation order of the assign kernel, so virtual runs
// reproduce wall-clock kernel output bit for bit.
void accumulate_assignments(const std::vector<std::vector<double>>& points,
                            const std::vector<std::vector<double>>& centroids,
                            std::vector<int64_t>& counts,
                            std::vector<std::vector<double>>& sums) {
  size_t k = centroids.size();
  size_t dims = centroids.empty() ? 0 : centroids[0].size();
  for (const auto& point : points) {
    size_t best = 0;
    double best_d = 0;
    for (size_t c = 0; c < k; ++c) {
      double d = 0;
      for (size_t j = 0; j < dims; ++j) {
        double delta = point[j] - centroids[c][j];
        d += delta * delta;
      }
      if (c == 0 || d < best_d) {
        best = c;
        best_d = d;
      }
    }
    ++counts[best];
    for (size_t j = 0; j < dims; ++j) sums[best][j] += point[j];
  }
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (size_t j = 0; j < a.size(); ++j) {
    double delta = a[j] - b[j];
    d += delta * delta;
  }
  return d;
}

}  // namespace

KMeansResult run_iterative_kmeans(PilotManager& mgr,
                                  const std::string& points_data_unit, int k,
                                  int max_iters, double epsilon,
                                  int n_partitions) {
  if (k < 1) throw UserError("k must be >= 1");
  if (max_iters < 1) throw UserError("max_iters must be >= 1");
  settle_pilots(mgr);

  std::vector<std::vector<double>> points =
      parse_points(read_available_data_unit(mgr, points_data_unit));
  size_t dims = points.empty() ? 0 : points[0].size();
  for (const auto& pt : points) {
    if (pt.size() != dims) throw UserError("points must share one dimensionality");
  }

  std::vector<std::vector<double>> centroids;
  for (const auto& pt : points) {
    if (std::find(centroids.begin(), centroids.end(), pt) == centroids.end()) {
      centroids.push_back(pt);
      if (static_cast<int>(centroids.size()) == k) break;
    }
  }
  if (static_cast<int>(centroids.size()) < k) {
    throw KLargerThanDistinctPoints(
        "k=" + std::to_string(k) + " exceeds the " +
        std::to_string(centroids.size()) + " distinct input points");
  }

  std::vector<std::string> actives = active_pilot_ids(mgr);
  int n_parts = n_partitions > 0 ? n_partitions : static_cast<int>(actives.size());

  // Contiguous point ranges, serialized once. Each partition is registered
  // with a home pilot and replicated to every active pilot up front, so the
  // per-iteration assign units never trigger staging after iteration 1
  // regardless of where the scheduler places them.
  KMeansResult result;
  std::vector<std::pair<size_t, size_t>> ranges;
  for (int p = 0; p < n_parts; ++p) {
    size_t begin = points.size() * static_cast<size_t>(p) / static_cast<size_t>(n_parts);
    size_t end =
        points.size() * static_cast<size_t>(p + 1) / static_cast<size_t>(n_parts);
    ranges.emplace_back(begin, end);
    std::string text;
    for (size_t i = begin; i < end; ++i) {
      for (size_t j = 0; j < points[i].size(); ++j) {
        if (j > 0) text += ' ';
        text += format_double(points[i][j]);
      }
      text += '\n';
    }
    DataUnitDescription part;
    part.source = DataSource::inline_bytes(text);
    part.target_affinity = actives[static_cast<size_t>(p) % actives.size()];
    result.partition_data_units.push_back(mgr.register_data_unit(part));
  }
  for (const std::string& du : result.partition_data_units) {
    for (const std::string& pid : actives) mgr.stage(du, pid);
  }

  bool virtual_clock = mgr.backend().clock_kind() == ClockKind::VIRTUAL;
  for (int iter = 1; iter <= max_iters; ++iter) {
    WorkloadGraph graph;
    std::vector<std::string> partial_names;
    for (int p = 0; p < n_parts; ++p) {
      ComputeUnitDescription assign;
      assign.kernel = KernelSpec::builtin("kmeans_assign");
      assign.arguments = {serialize_centroids(centroids)};
      assign.input_data = {result.partition_data_units[static_cast<size_t>(p)]};
      assign.affinity = result.partition_data_units[static_cast<size_t>(p)];
      DataUnitDescription partial;
      partial.graph_id = "partial" + std::to_string(p);
      assign.output_data = partial;
      graph.add_unit("assign" + std::to_string(p), assign);
      partial_names.push_back(partial.graph_id);
    }
    ComputeUnitDescription update;
    update.kernel = KernelSpec::builtin("kmeans_update");
    update.arguments = {std::to_string(k), serialize_centroids(centroids)};
    update.input_data = partial_names;
    DataUnitDescription updated;
    updated.graph_id = "updated";
    update.output_data = updated;
    graph.add_unit("update", update);

    std::vector<std::string> ids = mgr.submit_units(graph);
    mgr.wait(ids);
    throw_on_failed_units(mgr, ids);

    std::vector<std::vector<double>> next;
    if (virtual_clock) {
      std::vector<int64_t> counts(static_cast<size_t>(k), 0);
      std::vector<std::vector<double>> sums(static_cast<size_t>(k),
                                            std::vector<double>(dims, 0.0));
      for (const auto& [begin, end] : ranges) {
        std::vector<int64_t> part_counts(static_cast<size_t>(k), 0);
        std::vector<std::vector<double>> part_sums(static_cast<size_t>(k),
                                                   std::vector<double>(dims, 0.0));
        std::vector<std::vector<double>> slice(points.begin() + static_cast<long>(begin),
                                               points.begin() + static_cast<long>(end));
        accumulate_assignments(slice, centroids, part_counts, part_sums);
        for (size_t c = 0; c < static_cast<size_t>(k); ++c) {
          counts[c] += part_counts[c];
          for (size_t j = 0; j < dims; ++j) sums[c][j] += part_sums[c][j];
        }
      }
      for (size_t c = 0; c < static_cast<size_t>(k); ++c) {
        std::vector<double> row(dims, 0.0);
        for (size_t j = 0; j < dims; ++j) {
          row[j] = counts[c] > 0 ? sums[c][j] / static_cast<double>(counts[c])
                                 : centroids[c][j];
        }
        next.push_back(std::move(row));
      }
    } else {
      std::vector<EventRecord> events = mgr.log().snapshot();
      std::string out_du = output_data_unit_of(events, ids.back());
      // The update kernel writes one centroid per line, points format.
      next = parse_points(read_available_data_unit(mgr, out_du));
    }
    if (next.size() != static_cast<size_t>(k)) {
      throw RuntimeFailure("update step produced " + std::to_string(next.size()) +
                           " centroids, expected " + std::to_string(k));
    }

    double max_shift = 0;
    for (size_t c = 0; c < static_cast<size_t>(k); ++c) {
      max_shift = std::max(max_shift, std::sqrt(squared_distance(centroids[c], next[c])));
    }
    double wcss = 0;
    for (const auto& pt : points) {
      double best = squared_distance(pt, next[0]);
      for (size_t c = 1; c < next.size(); ++c) {
        best = std::min(best, squared_distance(pt, next[c]));
      }
      wcss += best;
    }

    mgr.log().append(EventRecord{mgr.backend().now_ms(), EntityType::EXPERIMENT,
                                 "kmeans", "KMEANS_ITER",
                                 "iter=" + std::to_string(iter) +
                                     " shift=" + format_double(max_shift) +
                                     " wcss=" + format_double(wcss)});

    centroids = next;
    result.centroids = centroids;
    result.iterations = iter;
    result.wcss.push_back(wcss);
    if (max_shift < epsilon) break;
  }
  return result;
}

StreamingReport run_streaming(PilotManager& mgr, const StreamingParams& params) {
  if (params.rate <= 0) throw UserError("streaming rate must be > 0");
  if (params.duration_s < 0) throw UserError("streaming duration must be >= 0");
  if (params.n_consumers < 1) throw UserError("streaming needs at least one consumer");
  if (params.batch_ms < 1) throw UserError("batch_ms must be >= 1");
  if (params.queue_bound < 1) throw UserError("queue_bound must be >= 1");

  StreamingReport report;
  int64_t n_messages = static_cast<int64_t>(
      std::floor(params.rate * params.duration_s + 1e-9));
  if (n_messages == 0) return report;

  settle_pilots(mgr);
  int64_t total_slots = 0;
  for (const std::string& pid : active_pilot_ids(mgr)) {
    total_slots += mgr.pilot(pid).description.slots;
  }
  if (total_slots < 1 + params.n_consumers) {
    throw CapacityExceeded("streaming needs " +
                           std::to_string(1 + params.n_consumers) +
                           " slots, pilots provide " + std::to_string(total_slots));
  }

  int64_t duration_ms = std::llround(params.duration_s * 1000.0);
  // Message i (1-based) is published at floor(i*1000/rate) after start; the
  // last publish time decides how far the consumer ticks must reach.
  int64_t last_publish = static_cast<int64_t>(
      std::floor(static_cast<double>(n_messages) * 1000.0 / params.rate));
  int64_t last_tick =
      (last_publish + params.batch_ms - 1) / params.batch_ms * params.batch_ms;

  bool virtual_clock = mgr.backend().clock_kind() == ClockKind::VIRTUAL;
  // The broker registry outlives a run and drained brokers stay drained, so
  // every invocation gets a fresh broker name.
  std::string broker_name =
      params.broker + ".r" + std::to_string(mgr.all_unit_ids().size());
  WorkloadGraph graph;
  std::map<std::string, std::string> common = {
      {"queue_bound", std::to_string(params.queue_bound)},
      {"broker", broker_name}};
  {
    ComputeUnitDescription producer;
    std::map<std::string, std::string> p = common;
    p["rate"] = format_double(params.rate);
    p["duration_s"] = format_double(params.duration_s);
    p["message_size"] = std::to_string(params.message_size);
    p["sim_duration_ms"] = std::to_string(duration_ms);
    producer.kernel = KernelSpec::builtin("stream_produce", p);
    graph.add_unit("producer", producer);
  }
  for (int c = 0; c < params.n_consumers; ++c) {
    ComputeUnitDescription consumer;
    std::map<std::string, std::string> p = common;
    p["batch_ms"] = std::to_string(params.batch_ms);
    p["sim_duration_ms"] = std::to_string(last_tick);
    consumer.kernel = KernelSpec::builtin("stream_consume", p);
    graph.add_unit("consumer" + std::to_string(c), consumer);
  }

  std::vector<std::string> ids;
  if (virtual_clock) {
    auto* sim = dynamic_cast<SimBackend*>(&mgr.backend());
    ids = mgr.submit_units(graph);
    std::vector<std::string> consumer_ids(ids.begin() + 1, ids.end());

    // The broker queue is simulated directly on the event queue: one posted
    // closure per publish, one per consumer tick. Publishes are posted first
    // so a message and a tick at the same virtual instant meet in that order.
    struct SimStream {
      std::deque<int64_t> queue;  // publish timestamps
      int64_t produced = 0;
      int64_t dropped = 0;
    };
    auto stream = std::make_shared<SimStream>();
    int64_t bound = params.queue_bound;
    for (int64_t i = 1; i <= n_messages; ++i) {
      int64_t at = static_cast<int64_t>(
          std::floor(static_cast<double>(i) * 1000.0 / params.rate));
      sim->post(at, [stream, bound, sim] {
        ++stream->produced;
        if (static_cast<int64_t>(stream->queue.size()) >= bound) {
          ++stream->dropped;
        } else {
          stream->queue.push_back(sim->now_ms());
        }
      });
    }
    EventLog& log = mgr.log();
    for (int64_t tick = 0, m = 0; tick <= last_tick; tick += params.batch_ms, ++m) {
      const std::string& consumer =
          consumer_ids[static_cast<size_t>(m) % consumer_ids.size()];
      sim->post(tick, [stream, sim, &log, consumer] {
        int64_t now = sim->now_ms();
        while (!stream->queue.empty()) {
          int64_t sent = stream->queue.front();
          stream->queue.pop_front();
          log.append(EventRecord{now, EntityType::EXPERIMENT, consumer, "CONSUMED",
                                 "latency_ms=" + std::to_string(now - sent)});
        }
      });
    }

    mgr.wait(ids);
    sim->run_until_idle();  // ticks that outlive the units still fire
    int64_t end = sim->now_ms();
    log.append(EventRecord{end, EntityType::EXPERIMENT, ids[0], "PRODUCED",
                           "n=" + std::to_string(stream->produced)});
    log.append(EventRecord{end, EntityType::EXPERIMENT, ids[0], "DROPPED",
                           "n=" + std::to_string(stream->dropped)});
  } else {
    ids = mgr.submit_units(graph);
    mgr.wait(ids);
  }
  throw_on_failed_units(mgr, ids);

  std::set<std::string> run_ids(ids.begin(), ids.end());
  std::vector<double> latencies;
  for (const EventRecord& e : mgr.log().snapshot()) {
    if (e.entity_type != EntityType::EXPERIMENT || !run_ids.count(e.entity_id)) {
      continue;
    }
    if (e.event == "CONSUMED") {
      latencies.push_back(std::stod(detail_get(e.detail, "latency_ms")));
    } else if (e.event == "PRODUCED") {
      report.produced += std::stoll(detail_get(e.detail, "n"));
    } else if (e.event == "DROPPED") {
      report.dropped += std::stoll(detail_get(e.detail, "n"));
    }
  }
  report.consumed = static_cast<int64_t>(latencies.size());
  report.backpressure = report.dropped > 0;
  report.throughput_per_s =
      params.duration_s > 0 ? static_cast<double>(report.consumed) / params.duration_s : 0;
  report.latency_p50_ms = percentile_nearest_rank(latencies, 50);
  report.latency_p99_ms = percentile_nearest_rank(latencies, 99);
  return report;
}

}  // namespace pilotkit
