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

#include "pilotkit/backend/local_backend.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "pilotkit/backend/kernels.hpp"
#include "pilotkit/errors.hpp"

namespace pilotkit {

LocalBackend::LocalBackend(BackendDescriptor descriptor)
    : descriptor_(std::move(descriptor)), epoch_(std::chrono::steady_clock::now()) {
  descriptor_.validate();
  timer_thread_ = std::thread([this] { timer_loop(); });
}

LocalBackend::~LocalBackend() { shutdown(); }

int64_t LocalBackend::now_ms() {
  auto delta = std::chrono::steady_clock::now() - epoch_;
  return std::chrono::duration_cast<std::chrono::milliseconds>(delta).count();
}

void LocalBackend::post(int64_t delay_ms, std::function<void()> fn) {
  if (delay_ms < 0) delay_ms = 0;
  {
    std::lock_guard<std::mutex> lock(timer_mu_);
    timer_heap_.push_back(TimerEntry{now_ms() + delay_ms, timer_sequence_++, std::move(fn)});
    std::push_heap(timer_heap_.begin(), timer_heap_.end(), std::greater<>());
  }
  timer_cv_.notify_one();
}

void LocalBackend::timer_loop() {
  std::unique_lock<std::mutex> lock(timer_mu_);
  while (true) {
    if (timer_stop_) return;
    if (timer_heap_.empty()) {
      timer_cv_.wait(lock);
      continue;
    }
    int64_t next = timer_heap_.front().deadline_ms;
    int64_t now = now_ms();
    if (now < next) {
      timer_cv_.wait_for(lock, std::chrono::milliseconds(next - now));
      continue;
    }
    std::pop_heap(timer_heap_.begin(), timer_heap_.end(), std::greater<>());
    TimerEntry entry = std::move(timer_heap_.back());
    timer_heap_.pop_back();
    lock.unlock();
    entry.fn();
    lock.lock();
  }
}

BackendHandle LocalBackend::submit_pilot(const Pilot& pilot) {
  if (pilot.description.backend_id != descriptor_.backend_id) {
    throw UnknownBackend("pilot targets backend '" + pilot.description.backend_id +
                         "', this backend is '" + descriptor_.backend_id + "'");
  }
  int max_processes = descriptor_.max_processes();
  std::string pilot_id = pilot.id;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (pilot.description.slots > max_processes) {
      throw CapacityExceeded("pilot requests " + std::to_string(pilot.description.slots) +
                             " slots, max_processes is " + std::to_string(max_processes));
    }
    if (live_slots_ + pilot.description.slots > max_processes) {
      throw CapacityExceeded("backend has " + std::to_string(live_slots_) +
                             " live slots, adding " +
                             std::to_string(pilot.description.slots) + " exceeds max_processes " +
                             std::to_string(max_processes));
    }
    auto runtime = std::make_unique<PilotRuntime>();
    runtime->slots = pilot.description.slots;
    for (int s = 0; s < pilot.description.slots; ++s) {
      auto worker = std::make_unique<SlotWorker>();
      runtime->workers.push_back(std::move(worker));
    }
    live_slots_ += pilot.description.slots;
    pilots_[pilot_id] = std::move(runtime);
    PilotRuntime* rt = pilots_[pilot_id].get();
    for (int s = 0; s < pilot.description.slots; ++s) {
      rt->workers[static_cast<size_t>(s)]->thread =
          std::thread([this, pilot_id, s] { worker_loop(pilot_id, s); });
    }
  }

  // Process-pool warmup: report startup begin, then flip to ACTIVE.
  post(0, [this, pilot_id] {
    if (sink_) sink_->on_pilot_startup_begin(pilot_id, now_ms());
  });
  post(0, [this, pilot_id] {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = pilots_.find(pilot_id);
      if (it == pilots_.end() || it->second->phase != PilotRuntime::Phase::STARTING) return;
      it->second->phase = PilotRuntime::Phase::ACTIVE;
    }
    if (sink_) sink_->on_pilot_active(pilot_id, now_ms());
  });

  BackendHandle handle;
  handle.backend_id = descriptor_.backend_id;
  handle.pilot_id = pilot_id;
  handle.placement_token = static_cast<uint64_t>(live_slots_);
  handle.clock_kind = ClockKind::WALL;
  return handle;
}

void LocalBackend::worker_loop(const std::string& pilot_id, int slot_index) {
  SlotWorker* worker = nullptr;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = pilots_.find(pilot_id);
    if (it == pilots_.end()) return;
    worker = it->second->workers[static_cast<size_t>(slot_index)].get();
  }
  while (true) {
    std::unique_ptr<Task> task;
    {
      std::unique_lock<std::mutex> lock(worker->mu);
      worker->cv.wait(lock, [worker] { return worker->stop || worker->task; });
      if (worker->stop && !worker->task) return;
      task = std::move(worker->task);
    }
    ExitInfo info = execute(*task, *worker);
    {
      // Free the slots before notifying so the sink can immediately relaunch.
      std::lock_guard<std::mutex> lock(mu_);
      auto it = pilots_.find(pilot_id);
      if (it != pilots_.end()) {
        for (int s : task->slots) it->second->busy_slots.erase(s);
      }
    }
    if (sink_) sink_->on_unit_finished(task->unit.id, info, now_ms());
  }
}

ExitInfo LocalBackend::execute(const Task& task, SlotWorker& worker) {
  const KernelSpec& kernel = task.unit.description.kernel;
  if (kernel.variant == KernelSpec::Variant::BUILTIN) {
    KernelCall call;
    call.unit = &task.unit;
    call.ctx = &task.ctx;
    call.cancel = worker.cancel;
    call.now_ms = [this] { return now_ms(); };
    try {
      return run_builtin_kernel(call);
    } catch (const std::exception& e) {
      ExitInfo info;
      info.exit_code = 1;
      info.message = e.what();
      return info;
    }
  }

  // EXTERNAL: fork + exec, kill on cancel.
  std::vector<std::string> argv_storage = kernel.argv;
  std::vector<char*> argv;
  argv.reserve(argv_storage.size() + 1);
  for (std::string& arg : argv_storage) argv.push_back(arg.data());
  argv.push_back(nullptr);

  pid_t pid = fork();
  if (pid < 0) {
    ExitInfo info;
    info.exit_code = 1;
    info.message = std::string("fork failed: ") + std::strerror(errno);
    return info;
  }
  if (pid == 0) {
    execvp(argv[0], argv.data());
    _exit(127);
  }
  {
    std::lock_guard<std::mutex> lock(worker.mu);
    worker.child_pid = pid;
  }
  if (worker.cancel->load()) {
    kill(pid, SIGKILL);
  }
  int status = 0;
  pid_t waited = waitpid(pid, &status, 0);
  {
    std::lock_guard<std::mutex> lock(worker.mu);
    worker.child_pid = 0;
  }
  ExitInfo info;
  if (waited < 0) {
    info.exit_code = 1;
    info.message = std::string("waitpid failed: ") + std::strerror(errno);
  } else if (WIFEXITED(status)) {
    info.exit_code = WEXITSTATUS(status);
    if (info.exit_code != 0) {
      info.message = "exit code " + std::to_string(info.exit_code);
    }
  } else if (WIFSIGNALED(status)) {
    info.exit_code = 128 + WTERMSIG(status);
    info.message = std::string("killed by signal ") + std::to_string(WTERMSIG(status));
  }
  return info;
}

void LocalBackend::launch_unit(const BackendHandle& handle, const ComputeUnit& unit,
                               const std::vector<int>& slots, const LaunchContext& ctx) {
  SlotWorker* worker = nullptr;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = pilots_.find(handle.pilot_id);
    if (it == pilots_.end() || it->second->phase != PilotRuntime::Phase::ACTIVE) {
      throw PilotNotActive("pilot " + handle.pilot_id + " is not active");
    }
    PilotRuntime& runtime = *it->second;
    for (int s : slots) {
      if (s < 0 || s >= runtime.slots) {
        throw SlotOccupied("slot " + std::to_string(s) + " out of bounds on pilot " +
                           handle.pilot_id);
      }
      if (runtime.busy_slots.count(s)) {
        throw SlotOccupied("slot " + std::to_string(s) + " on pilot " + handle.pilot_id +
                           " is occupied");
      }
    }
    for (int s : slots) runtime.busy_slots.insert(s);
    // The unit runs on the worker of its first slot; extra slots only reserve
    // capacity.
    worker = runtime.workers[static_cast<size_t>(slots.front())].get();
  }
  auto task = std::make_unique<Task>();
  task->unit = unit;
  task->ctx = ctx;
  task->slots = slots;
  {
    std::lock_guard<std::mutex> lock(worker->mu);
    worker->task = std::move(task);
  }
  worker->cv.notify_one();
}

void LocalBackend::cancel_pilot(const BackendHandle& handle) {
  std::vector<SlotWorker*> workers;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = pilots_.find(handle.pilot_id);
    if (it == pilots_.end()) throw UnknownPilot("unknown pilot " + handle.pilot_id);
    if (it->second->phase == PilotRuntime::Phase::TERMINAL) {
      throw AlreadyTerminal("pilot " + handle.pilot_id + " already terminal");
    }
    it->second->phase = PilotRuntime::Phase::TERMINAL;
    it->second->busy_slots.clear();
    live_slots_ -= it->second->slots;
    for (auto& worker : it->second->workers) workers.push_back(worker.get());
  }
  for (SlotWorker* worker : workers) {
    worker->cancel->store(true);
    std::lock_guard<std::mutex> lock(worker->mu);
    worker->task.reset();  // drop any not-yet-started task
    if (worker->child_pid > 0) kill(worker->child_pid, SIGKILL);
    worker->cv.notify_one();
  }
}

void LocalBackend::release_slot(const BackendHandle& handle, int slot) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = pilots_.find(handle.pilot_id);
  if (it == pilots_.end()) return;
  it->second->busy_slots.erase(slot);
}

void LocalBackend::shutdown() {
  std::vector<std::thread> to_join;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (shut_down_) return;
    shut_down_ = true;
    for (auto& [id, runtime] : pilots_) {
      (void)id;
      if (runtime->phase != PilotRuntime::Phase::TERMINAL) {
        runtime->phase = PilotRuntime::Phase::TERMINAL;
        live_slots_ -= runtime->slots;
      }
      for (auto& worker : runtime->workers) {
        worker->cancel->store(true);
        {
          std::lock_guard<std::mutex> wlock(worker->mu);
          worker->stop = true;
          if (worker->child_pid > 0) kill(worker->child_pid, SIGKILL);
        }
        worker->cv.notify_one();
        if (worker->thread.joinable()) to_join.push_back(std::move(worker->thread));
      }
    }
  }
  for (std::thread& t : to_join) t.join();
  {
    std::lock_guard<std::mutex> lock(timer_mu_);
    timer_stop_ = true;
  }
  timer_cv_.notify_one();
  if (timer_thread_.joinable()) timer_thread_.join();
}

}  // namespace pilotkit
