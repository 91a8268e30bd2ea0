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

#ifndef PILOTKIT_BACKEND_LOCAL_BACKEND_HPP
#define PILOTKIT_BACKEND_LOCAL_BACKEND_HPP

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "pilotkit/backend/backend.hpp"

namespace pilotkit {

// Real executor: one worker thread per pilot slot, EXTERNAL kernels as child
// processes, BUILTIN kernels in-process. Wall clock, milliseconds since
// backend construction.
class LocalBackend : public Backend {
 public:
  explicit LocalBackend(BackendDescriptor descriptor);
  ~LocalBackend() override;

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  ClockKind clock_kind() const override { return ClockKind::WALL; }
  int64_t now_ms() override;

  void post(int64_t delay_ms, std::function<void()> fn) override;

  BackendHandle submit_pilot(const Pilot& pilot) override;
  void launch_unit(const BackendHandle& handle, const ComputeUnit& unit,
                   const std::vector<int>& slots, const LaunchContext& ctx) override;
  void cancel_pilot(const BackendHandle& handle) override;
  void set_sink(BackendSink* sink) override { sink_ = sink; }
  void release_slot(const BackendHandle& handle, int slot) override;
  void shutdown() override;

 private:
  struct Task {
    ComputeUnit unit;
    LaunchContext ctx;
    std::vector<int> slots;
  };

  struct SlotWorker {
    std::thread thread;
    std::mutex mu;
    std::condition_variable cv;
    std::unique_ptr<Task> task;
    bool stop = false;
    std::shared_ptr<std::atomic<bool>> cancel = std::make_shared<std::atomic<bool>>(false);
    pid_t child_pid = 0;
  };

  struct PilotRuntime {
    enum class Phase { STARTING, ACTIVE, TERMINAL };
    Phase phase = Phase::STARTING;
    int slots = 0;
    std::set<int> busy_slots;
    std::vector<std::unique_ptr<SlotWorker>> workers;
  };

  void worker_loop(const std::string& pilot_id, int slot_index);
  void timer_loop();
  ExitInfo execute(const Task& task, SlotWorker& worker);

  BackendDescriptor descriptor_;
  BackendSink* sink_ = nullptr;
  std::chrono::steady_clock::time_point epoch_;

  std::mutex mu_;
  std::map<std::string, std::unique_ptr<PilotRuntime>> pilots_;
  int live_slots_ = 0;
  bool shut_down_ = false;

  struct TimerEntry {
    int64_t deadline_ms;
    uint64_t sequence;
    std::function<void()> fn;
    bool operator>(const TimerEntry& other) const {
      if (deadline_ms != other.deadline_ms) return deadline_ms > other.deadline_ms;
      return sequence > other.sequence;
    }
  };
  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::vector<TimerEntry> timer_heap_;
  uint64_t timer_sequence_ = 0;
  bool timer_stop_ = false;
  std::thread timer_thread_;
};

}  // namespace pilotkit

#endif  // PILOTKIT_BACKEND_LOCAL_BACKEND_HPP
