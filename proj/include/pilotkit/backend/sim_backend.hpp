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

#ifndef PILOTKIT_BACKEND_SIM_BACKEND_HPP
#define PILOTKIT_BACKEND_SIM_BACKEND_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "pilotkit/backend/backend.hpp"

namespace pilotkit {

// One scheduled action on the virtual clock.
struct SimEvent {
  int64_t fire_time_ms = 0;
  uint64_t sequence = 0;
  std::function<void()> action;
};

// Deterministic discrete-event backend. Strictly single-threaded: the caller
// drives the clock via step()/run_until_idle() and all callbacks fire
// synchronously inside those calls. The full event sequence is a pure
// function of (submissions, descriptor, seed).
class SimBackend : public Backend {
 public:
  explicit SimBackend(BackendDescriptor descriptor);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  ClockKind clock_kind() const override { return ClockKind::VIRTUAL; }
  int64_t now_ms() override { return now_; }

  void post(int64_t delay_ms, std::function<void()> fn) override;

  BackendHandle submit_pilot(const Pilot& pilot) override;
  void launch_unit(const BackendHandle& handle, const ComputeUnit& unit,
                   const std::vector<int>& slots, const LaunchContext& ctx) override;
  void cancel_pilot(const BackendHandle& handle) override;
  void set_sink(BackendSink* sink) override { sink_ = sink; }
  void release_slot(const BackendHandle& handle, int slot) override;
  void shutdown() override {}

  // Event loop controls.
  bool has_events() const { return !queue_.empty(); }
  int64_t next_event_time() const;
  bool step();  // processes one event; false when the queue is empty

  // Processes all events in (fire_time, sequence) order; returns the virtual
  // time of the last processed event (current time when already idle).
  int64_t run_until_idle();

  // Processes events with fire_time <= t_limit.
  void run_until(int64_t t_limit);

  // SIM staging transfer time for a payload of the given size.
  int64_t transfer_time_ms(uint64_t size_bytes) const;

 private:
  struct PilotRuntime {
    enum class Phase { QUEUED, ACTIVE, TERMINAL };
    Phase phase = Phase::QUEUED;
    std::set<int> busy_slots;
    int slots = 0;
  };

  int64_t quantize(double ms) const;

  BackendDescriptor descriptor_;
  BackendSink* sink_ = nullptr;
  int64_t now_ = 0;
  uint64_t next_sequence_ = 0;
  std::mt19937_64 rng_;

  struct EventOrder {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.fire_time_ms != b.fire_time_ms) return a.fire_time_ms > b.fire_time_ms;
      return a.sequence > b.sequence;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> queue_;
  std::map<std::string, PilotRuntime> pilots_;
};

}  // namespace pilotkit

#endif  // PILOTKIT_BACKEND_SIM_BACKEND_HPP
