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

#include "pilotkit/backend/sim_backend.hpp"

#include <cmath>

#include "pilotkit/errors.hpp"

namespace pilotkit {

SimBackend::SimBackend(BackendDescriptor descriptor)
    : descriptor_(std::move(descriptor)), rng_(descriptor_.seed()) {
  descriptor_.validate();
}

int64_t SimBackend::quantize(double ms) const {
  int64_t res = descriptor_.clock_resolution_ms();
  double steps = ms / static_cast<double>(res);
  int64_t n = static_cast<int64_t>(std::llround(steps));
  if (n < 0) n = 0;
  return n * res;
}

void SimBackend::post(int64_t delay_ms, std::function<void()> fn) {
  if (delay_ms < 0) delay_ms = 0;
  queue_.push(SimEvent{now_ + delay_ms, next_sequence_++, std::move(fn)});
}

int64_t SimBackend::next_event_time() const {
  if (queue_.empty()) return now_;
  return queue_.top().fire_time_ms;
}

bool SimBackend::step() {
  if (queue_.empty()) return false;
  SimEvent ev = queue_.top();
  queue_.pop();
  now_ = ev.fire_time_ms;
  ev.action();
  return true;
}

int64_t SimBackend::run_until_idle() {
  while (step()) {
  }
  return now_;
}

void SimBackend::run_until(int64_t t_limit) {
  // The clock advances only on events; it never jumps past the last one.
  while (!queue_.empty() && queue_.top().fire_time_ms <= t_limit) {
    step();
  }
}

int64_t SimBackend::transfer_time_ms(uint64_t size_bytes) const {
  double bytes_per_s = descriptor_.bandwidth_mib_s() * 1024.0 * 1024.0;
  double ms = static_cast<double>(size_bytes) / bytes_per_s * 1000.0;
  return static_cast<int64_t>(std::ceil(ms));
}

BackendHandle SimBackend::submit_pilot(const Pilot& pilot) {
  if (pilot.description.backend_id != descriptor_.backend_id) {
    throw UnknownBackend("pilot targets backend '" + pilot.description.backend_id +
                         "', this backend is '" + descriptor_.backend_id + "'");
  }
  PilotRuntime runtime;
  runtime.slots = pilot.description.slots;
  pilots_[pilot.id] = runtime;

  double queue_wait_s = 0;
  double startup_s = 0;
  if (descriptor_.kind == BackendKind::SIM_BATCH) {
    queue_wait_s = descriptor_.queue_wait_dist().draw(rng_);
    startup_s = descriptor_.startup_overhead_s();
  } else {
    startup_s = descriptor_.provision_delay_s();
  }
  int64_t queue_wait_ms = quantize(queue_wait_s * 1000.0);
  int64_t startup_ms = quantize(startup_s * 1000.0);

  std::string pilot_id = pilot.id;
  post(queue_wait_ms, [this, pilot_id] {
    if (sink_) sink_->on_pilot_startup_begin(pilot_id, now_);
  });
  post(queue_wait_ms + startup_ms, [this, pilot_id] {
    auto it = pilots_.find(pilot_id);
    if (it == pilots_.end() || it->second.phase != PilotRuntime::Phase::QUEUED) return;
    it->second.phase = PilotRuntime::Phase::ACTIVE;
    if (sink_) sink_->on_pilot_active(pilot_id, now_);
  });

  BackendHandle handle;
  handle.backend_id = descriptor_.backend_id;
  handle.pilot_id = pilot.id;
  handle.placement_token = next_sequence_;
  handle.clock_kind = ClockKind::VIRTUAL;
  return handle;
}

void SimBackend::launch_unit(const BackendHandle& handle, const ComputeUnit& unit,
                             const std::vector<int>& slots, const LaunchContext&) {
  auto it = pilots_.find(handle.pilot_id);
  if (it == pilots_.end() || it->second.phase != PilotRuntime::Phase::ACTIVE) {
    throw PilotNotActive("pilot " + handle.pilot_id + " is not active");
  }
  PilotRuntime& runtime = it->second;
  for (int s : slots) {
    if (s < 0 || s >= runtime.slots || runtime.busy_slots.count(s)) {
      throw SlotOccupied("slot " + std::to_string(s) + " on pilot " + handle.pilot_id +
                         " is occupied or out of range");
    }
  }
  for (int s : slots) runtime.busy_slots.insert(s);

  int64_t duration = unit.description.kernel.sim_duration_ms();
  ExitInfo info;
  auto exit_param = unit.description.kernel.parameters.find("sim_exit_code");
  if (exit_param != unit.description.kernel.parameters.end()) {
    info.exit_code = std::stoi(exit_param->second);
    if (info.exit_code != 0) info.message = "simulated failure";
  }

  std::string pilot_id = handle.pilot_id;
  std::string uid = unit.id;
  std::vector<int> taken = slots;
  post(duration, [this, pilot_id, uid, taken, info] {
    auto pit = pilots_.find(pilot_id);
    if (pit == pilots_.end() || pit->second.phase != PilotRuntime::Phase::ACTIVE) {
      return;  // pilot canceled while the unit was in flight
    }
    for (int s : taken) pit->second.busy_slots.erase(s);
    if (sink_) sink_->on_unit_finished(uid, info, now_);
  });
}

void SimBackend::cancel_pilot(const BackendHandle& handle) {
  auto it = pilots_.find(handle.pilot_id);
  if (it == pilots_.end()) throw UnknownPilot("unknown pilot " + handle.pilot_id);
  if (it->second.phase == PilotRuntime::Phase::TERMINAL) {
    throw AlreadyTerminal("pilot " + handle.pilot_id + " already terminal");
  }
  it->second.phase = PilotRuntime::Phase::TERMINAL;
  it->second.busy_slots.clear();
}

void SimBackend::release_slot(const BackendHandle& handle, int slot) {
  auto it = pilots_.find(handle.pilot_id);
  if (it == pilots_.end()) return;
  it->second.busy_slots.erase(slot);
}

}  // namespace pilotkit
