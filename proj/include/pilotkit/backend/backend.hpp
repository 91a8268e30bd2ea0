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

#ifndef PILOTKIT_BACKEND_BACKEND_HPP
#define PILOTKIT_BACKEND_BACKEND_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "pilotkit/event_log.hpp"
#include "pilotkit/types.hpp"

namespace pilotkit {

class Broker;
class BrokerRegistry;

// Duration distribution: CONSTANT(w), UNIFORM(a,b) or EXP(mean). Draws are
// hand-rolled from raw 64-bit generator output so that results depend only on
// the generator sequence, not on standard-library distribution internals.
struct DurationDist {
  enum class Kind { CONSTANT, UNIFORM, EXP };
  Kind kind = Kind::CONSTANT;
  double a = 0;  // CONSTANT value, UNIFORM lower bound, EXP mean
  double b = 0;  // UNIFORM upper bound

  double draw(std::mt19937_64& rng) const;
  double mean() const;
  std::string str() const;

  // Parses "CONSTANT(10)", "UNIFORM(5,15)", "EXP(2.5)".
  static DurationDist parse(const std::string& text);
  static DurationDist constant(double v);
};

enum class BackendKind { LOCAL, SIM_BATCH, SIM_CLOUD };

const char* to_string(BackendKind k);
std::optional<BackendKind> parse_backend_kind(const std::string& name);

// Declarative description of one backend instance. `parameters` is a string
// map; the typed accessors below apply kind-specific defaults:
//   SIM_BATCH: queue_wait_dist (s), startup_overhead (s), clock_resolution (ms), seed
//   SIM_CLOUD: provision_delay (s), seed
//   LOCAL:     max_processes
//   SIM_*:     bandwidth_mib_s (staging transfer rate)
//   all:       store_capacity_bytes (per-pilot store cap, unset = unlimited)
struct BackendDescriptor {
  std::string backend_id;
  BackendKind kind = BackendKind::SIM_BATCH;
  std::map<std::string, std::string> parameters;

  void validate() const;  // throws UnknownBackend / ManifestError

  bool is_sim() const { return kind != BackendKind::LOCAL; }

  DurationDist queue_wait_dist() const;
  double startup_overhead_s() const;
  double provision_delay_s() const;
  int64_t clock_resolution_ms() const;
  uint64_t seed() const;
  bool has_seed() const;
  int max_processes() const;
  double bandwidth_mib_s() const;
  std::optional<uint64_t> store_capacity_bytes() const;
};

enum class ClockKind { WALL, VIRTUAL };

struct BackendHandle {
  std::string backend_id;
  std::string pilot_id;
  uint64_t placement_token = 0;
  ClockKind clock_kind = ClockKind::VIRTUAL;
};

// Callbacks from a backend into its owner (the manager). On SIM backends they
// arrive synchronously while the caller drives the event loop; on LOCAL they
// arrive on backend-owned threads.
class BackendSink {
 public:
  virtual ~BackendSink() = default;
  virtual void on_pilot_startup_begin(const std::string& pilot_id, int64_t now_ms) = 0;
  virtual void on_pilot_active(const std::string& pilot_id, int64_t now_ms) = 0;
  virtual void on_unit_finished(const std::string& unit_id, const ExitInfo& info,
                                int64_t now_ms) = 0;
};

// Everything a kernel needs at execution time. Only meaningful on LOCAL;
// SIM backends never execute kernels.
struct LaunchContext {
  std::map<std::string, std::filesystem::path> input_paths;
  std::filesystem::path output_path;  // empty when the unit declares no output
  EventLog* log = nullptr;
  BrokerRegistry* brokers = nullptr;
};

// Adapter interface over one resource infrastructure.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;
  virtual ClockKind clock_kind() const = 0;
  virtual int64_t now_ms() = 0;

  // Schedules fn to run at now + delay_ms (virtual or wall clock).
  virtual void post(int64_t delay_ms, std::function<void()> fn) = 0;

  virtual BackendHandle submit_pilot(const Pilot& pilot) = 0;
  virtual void launch_unit(const BackendHandle& handle, const ComputeUnit& unit,
                           const std::vector<int>& slots, const LaunchContext& ctx) = 0;
  virtual void cancel_pilot(const BackendHandle& handle) = 0;

  virtual void set_sink(BackendSink* sink) = 0;

  // Releases backend-side slot bookkeeping; called by the owner when a unit
  // reaches a terminal state without a completion callback (cancellation).
  virtual void release_slot(const BackendHandle& handle, int slot) = 0;

  virtual void shutdown() = 0;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor);

}  // namespace pilotkit

#endif  // PILOTKIT_BACKEND_BACKEND_HPP
