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

#ifndef PILOTKIT_MANAGER_MANAGER_HPP
#define PILOTKIT_MANAGER_MANAGER_HPP

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pilotkit/backend/backend.hpp"
#include "pilotkit/backend/broker.hpp"
#include "pilotkit/event_log.hpp"
#include "pilotkit/manager/workload.hpp"
#include "pilotkit/types.hpp"

namespace pilotkit {

enum class SchedulingPolicy { FIFO, AFFINITY_FIRST };

const char* to_string(SchedulingPolicy p);
std::optional<SchedulingPolicy> parse_scheduling_policy(const std::string& name);

struct ManagerConfig {
  SchedulingPolicy scheduling_policy = SchedulingPolicy::FIFO;
  int poll_interval_ms = 20;           // LOCAL mode scheduling poll
  std::optional<size_t> max_queue_length;
  std::filesystem::path work_dir = "pilotkit-work";  // store root when a pilot has none
};

struct WaitResult {
  std::map<std::string, UnitState> states;
  bool timed_out = false;
};

// The single scheduling authority. Owns all pilot/unit/data-unit state,
// performs late binding onto ACTIVE pilots, materializes and stages data
// units, and writes every state change to the event log.
//
// Thread-safety: all public methods are safe to call concurrently. With a
// SIM backend the manager is driven by the calling thread (callbacks re-enter
// synchronously during wait()); with LOCAL, backend callbacks arrive on
// executor threads and a poll thread re-runs scheduling every
// poll_interval_ms.
class PilotManager : public BackendSink {
 public:
  PilotManager(Backend& backend, EventLog& log, ManagerConfig config = {});
  ~PilotManager() override;

  PilotManager(const PilotManager&) = delete;
  PilotManager& operator=(const PilotManager&) = delete;

  // Pilot lifecycle. submit_pilot may be called at any time, including while
  // units are pending (late binding); schedule_pilot posts the submission
  // delay_ms into the future and returns the reserved pilot id.
  std::string submit_pilot(const PilotDescription& desc);
  std::string schedule_pilot(const PilotDescription& desc, int64_t delay_ms);
  void cancel_pilot(const std::string& pilot_id);

  // Unit submission. Returns unit ids in graph order.
  std::vector<std::string> submit_units(const WorkloadGraph& graph);

  // Data units.
  std::string register_data_unit(const DataUnitDescription& desc);
  void stage(const std::string& data_unit_id, const std::string& pilot_id);
  std::map<std::string, std::filesystem::path> resolve_input_paths(
      const std::string& unit_id);

  // Blocks until all listed units are terminal, the timeout elapses, or (SIM)
  // the event queue runs dry. SIM timeouts are virtual milliseconds.
  WaitResult wait(const std::vector<std::string>& unit_ids,
                  std::optional<int64_t> timeout_ms = std::nullopt);
  WaitResult wait_all(std::optional<int64_t> timeout_ms = std::nullopt);

  // Marks ACTIVE pilots DONE, cancels whatever is still in flight, and stops
  // backend execution. Idempotent; also run by the destructor.
  void shutdown();

  // Introspection (copies, safe to keep).
  Pilot pilot(const std::string& pilot_id) const;
  ComputeUnit unit(const std::string& unit_id) const;
  DataUnit data_unit(const std::string& data_unit_id) const;
  std::vector<std::string> pilot_ids() const;
  std::vector<std::string> all_unit_ids() const;
  size_t pending_count() const;

  Backend& backend() { return backend_; }
  EventLog& log() { return log_; }
  BrokerRegistry& brokers() { return brokers_; }
  const ManagerConfig& config() const { return config_; }

  // BackendSink
  void on_pilot_startup_begin(const std::string& pilot_id, int64_t now_ms) override;
  void on_pilot_active(const std::string& pilot_id, int64_t now_ms) override;
  void on_unit_finished(const std::string& unit_id, const ExitInfo& info,
                        int64_t now_ms) override;

 private:
  struct PilotRuntime {
    Pilot pilot;
    BackendHandle handle;
    int64_t active_ts = -1;
    std::set<int> busy_slots;
    uint64_t store_used = 0;
    bool submitted_to_backend = false;
  };

  struct UnitRuntime {
    ComputeUnit cu;
    std::vector<std::string> deps;     // unit ids
    std::vector<std::string> inputs;   // data unit ids
    std::string output_du;             // data unit id or empty
    std::vector<int> slots;            // assigned slot indices while bound
    std::set<std::string> pending_stages;
  };

  struct DataRuntime {
    DataUnit du;
    std::string payload;               // generated/inline content cache (SIM keeps none on disk)
    std::set<std::string> staging_to;  // destinations with a transfer in flight
  };

  // All private helpers assume mu_ is held.
  void log_event(int64_t ts, EntityType type, const std::string& id,
                 const std::string& event, const std::string& detail = "");
  void pilot_state(PilotRuntime& p, PilotEvent ev, int64_t ts, const std::string& detail = "");
  void unit_state(UnitRuntime& u, UnitEvent ev, int64_t ts, const std::string& detail = "");

  std::string do_submit_pilot(const PilotDescription& desc, const std::string& reserved_id);
  void schedule_step();
  bool unit_eligible(const UnitRuntime& u) const;
  bool cancel_on_broken_inputs(UnitRuntime& u);
  PilotRuntime* choose_pilot(const UnitRuntime& u);
  std::vector<PilotRuntime*> active_pilots_in_order();
  std::vector<std::string> affinity_target_pilots(const UnitRuntime& u);
  void bind_unit(UnitRuntime& u, PilotRuntime& p);
  void maybe_start_unit(UnitRuntime& u);
  void start_unit(UnitRuntime& u);
  void finish_cancel_unit(UnitRuntime& u, int64_t ts, const std::string& reason);

  // Data plumbing.
  void materialize_if_possible(DataRuntime& d);
  void materialize_on(DataRuntime& d, PilotRuntime& p);
  void begin_stage(DataRuntime& d, PilotRuntime& dest, const std::string& waiting_unit);
  void finish_stage(const std::string& du_id, const std::string& pilot_id,
                    uint64_t size, uint64_t checksum);
  const Replica* replica_on(const DataRuntime& d, const std::string& pilot_id) const;
  std::filesystem::path store_dir(const PilotRuntime& p) const;
  void charge_store(PilotRuntime& p, uint64_t bytes);
  std::string data_content(DataRuntime& d);

  bool all_terminal(const std::vector<std::string>& unit_ids);
  WaitResult collect(const std::vector<std::string>& unit_ids, bool timed_out);

  Backend& backend_;
  EventLog& log_;
  ManagerConfig config_;
  BrokerRegistry brokers_;

  mutable std::recursive_mutex mu_;
  std::condition_variable_any cv_;

  uint64_t pilot_counter_ = 0;
  uint64_t unit_counter_ = 0;
  uint64_t data_counter_ = 0;

  std::map<std::string, std::unique_ptr<PilotRuntime>> pilots_;
  std::map<std::string, std::unique_ptr<UnitRuntime>> units_;
  std::map<std::string, std::unique_ptr<DataRuntime>> data_units_;
  std::vector<std::string> pending_fifo_;
  std::vector<std::string> submission_order_;  // every unit id ever submitted

  std::thread poll_thread_;
  std::atomic<bool> stop_poll_{false};
  bool shut_down_ = false;
};

}  // namespace pilotkit

#endif  // PILOTKIT_MANAGER_MANAGER_HPP
