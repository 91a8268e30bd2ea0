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

#include "pilotkit/manager/manager.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "pilotkit/backend/sim_backend.hpp"
#include "pilotkit/errors.hpp"
#include "pilotkit/hash.hpp"
#include "pilotkit/manager/generators.hpp"

namespace pilotkit {

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string join_ints(const std::vector<int>& parts, char sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += std::to_string(parts[i]);
  }
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceMissing("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_bytes(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << content;
}

}  // namespace

const char* to_string(SchedulingPolicy p) {
  switch (p) {
    case SchedulingPolicy::FIFO: return "FIFO";
    case SchedulingPolicy::AFFINITY_FIRST: return "AFFINITY_FIRST";
  }
  return "?";
}

std::optional<SchedulingPolicy> parse_scheduling_policy(const std::string& name) {
  std::string upper;
  for (char c : name) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "FIFO") return SchedulingPolicy::FIFO;
  if (upper == "AFFINITY_FIRST") return SchedulingPolicy::AFFINITY_FIRST;
  return std::nullopt;
}

PilotManager::PilotManager(Backend& backend, EventLog& log, ManagerConfig config)
    : backend_(backend), log_(log), config_(std::move(config)) {
  if (config_.poll_interval_ms < 1) throw ManifestError("poll_interval_ms must be >= 1");
  backend_.set_sink(this);
  if (backend_.clock_kind() == ClockKind::WALL) {
    poll_thread_ = std::thread([this] {
      while (!stop_poll_.load()) {
        {
          std::lock_guard<std::recursive_mutex> lock(mu_);
          if (!shut_down_) schedule_step();
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.poll_interval_ms));
      }
    });
  }
}

PilotManager::~PilotManager() {
  try {
    shutdown();
  } catch (...) {
  }
}

void PilotManager::log_event(int64_t ts, EntityType type, const std::string& id,
                             const std::string& event, const std::string& detail) {
  log_.append(EventRecord{ts, type, id, event, detail});
}

void PilotManager::pilot_state(PilotRuntime& p, PilotEvent ev, int64_t ts,
                               const std::string& detail) {
  p.pilot.state = transition(p.pilot.state, ev);
  p.pilot.state_history.push_back({p.pilot.state, ts});
  log_event(ts, EntityType::PILOT, p.pilot.id, to_string(p.pilot.state), detail);
}

void PilotManager::unit_state(UnitRuntime& u, UnitEvent ev, int64_t ts,
                              const std::string& detail) {
  u.cu.state = transition(u.cu.state, ev);
  u.cu.state_history.push_back({u.cu.state, ts});
  log_event(ts, EntityType::UNIT, u.cu.id, to_string(u.cu.state), detail);
}

std::string PilotManager::submit_pilot(const PilotDescription& desc) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  return do_submit_pilot(desc, "");
}

std::string PilotManager::schedule_pilot(const PilotDescription& desc, int64_t delay_ms) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  std::string reserved = pilot_id(++pilot_counter_);
  backend_.post(delay_ms, [this, desc, reserved] {
    std::lock_guard<std::recursive_mutex> inner(mu_);
    if (shut_down_) return;
    try {
      do_submit_pilot(desc, reserved);
    } catch (const Error&) {
      int64_t now = backend_.now_ms();
      log_event(now, EntityType::PILOT, reserved, "NEW",
                "slots=" + std::to_string(desc.slots));
      log_event(now, EntityType::PILOT, reserved, "SUBMITTED", "");
      log_event(now, EntityType::PILOT, reserved, "FAILED", "reason=submit_rejected");
    }
  });
  return reserved;
}

std::string PilotManager::do_submit_pilot(const PilotDescription& desc,
                                          const std::string& reserved_id) {
  if (desc.slots < 1) throw ManifestError("pilot slots must be >= 1");
  if (desc.walltime_limit_s <= 0) throw ManifestError("walltime_limit must be > 0");

  PilotDescription resolved = desc;
  if (resolved.backend_id.empty()) {
    resolved.backend_id = backend_.descriptor().backend_id;
  } else if (resolved.backend_id != backend_.descriptor().backend_id) {
    throw UnknownBackend("no backend registered as '" + resolved.backend_id + "'");
  }
  if (resolved.work_dir.empty()) resolved.work_dir = config_.work_dir;

  std::string id = reserved_id.empty() ? pilot_id(++pilot_counter_) : reserved_id;

  auto runtime = std::make_unique<PilotRuntime>();
  runtime->pilot.id = id;
  runtime->pilot.description = resolved;
  runtime->pilot.state = PilotState::NEW;
  runtime->pilot.capacity_free = 0;

  // Let capacity errors surface before anything is logged.
  runtime->handle = backend_.submit_pilot(runtime->pilot);
  runtime->submitted_to_backend = true;

  int64_t now = backend_.now_ms();
  runtime->pilot.state_history.push_back({PilotState::NEW, now});
  log_event(now, EntityType::PILOT, id, "NEW", "slots=" + std::to_string(resolved.slots));
  pilot_state(*runtime, PilotEvent::SUBMIT, now);
  pilot_state(*runtime, PilotEvent::ENQUEUE, now);

  pilots_[id] = std::move(runtime);
  return id;
}

void PilotManager::on_pilot_startup_begin(const std::string& pilot_id, int64_t now_ms) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = pilots_.find(pilot_id);
  if (it == pilots_.end() || it->second->pilot.state != PilotState::QUEUED) return;
  log_event(now_ms, EntityType::PILOT, pilot_id, "STARTUP", "");
}

void PilotManager::on_pilot_active(const std::string& pilot_id, int64_t now_ms) {
  {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = pilots_.find(pilot_id);
    if (it == pilots_.end() || it->second->pilot.state != PilotState::QUEUED) return;
    PilotRuntime& p = *it->second;
    pilot_state(p, PilotEvent::ACTIVATE, now_ms);
    p.active_ts = now_ms;
    p.pilot.capacity_free = p.pilot.description.slots;

    // Materialize data units that were waiting for a pilot.
    for (auto& [du_id, d] : data_units_) {
      (void)du_id;
      if (d->du.state != DataState::PENDING) continue;
      if (d->du.description.source.kind == DataSource::Kind::UNIT_OUTPUT) continue;
      if (!d->du.replicas.empty()) continue;
      materialize_if_possible(*d);
    }
    schedule_step();
  }
  cv_.notify_all();
}

std::vector<std::string> PilotManager::submit_units(const WorkloadGraph& graph) {
  std::vector<std::string> ids;
  {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    graph.validate();

    if (config_.max_queue_length) {
      size_t pending = 0;
      for (const std::string& uid : pending_fifo_) {
        if (units_.at(uid)->cu.state == UnitState::PENDING) ++pending;
      }
      if (pending + graph.units.size() > *config_.max_queue_length) {
        throw QueueFull("queue limit " + std::to_string(*config_.max_queue_length) +
                        " exceeded by submission of " + std::to_string(graph.units.size()) +
                        " units");
      }
    }

    // Graph-local name maps.
    std::map<std::string, std::string> unit_by_graph_id;
    std::map<std::string, std::string> data_by_graph_id;

    // Pass 1: declared data units.
    for (const DataUnitDescription& ddesc : graph.data) {
      std::string du_id = register_data_unit(ddesc);
      data_by_graph_id[ddesc.graph_id] = du_id;
    }

    // Pass 2: reserve unit ids and create output data units.
    std::vector<std::string> reserved;
    reserved.reserve(graph.units.size());
    for (const auto& [graph_id, desc] : graph.units) {
      (void)desc;
      std::string uid = unit_id(++unit_counter_);
      reserved.push_back(uid);
      unit_by_graph_id[graph_id] = uid;
    }
    for (size_t i = 0; i < graph.units.size(); ++i) {
      const auto& [graph_id, desc] = graph.units[i];
      (void)graph_id;
      if (!desc.output_data) continue;
      DataUnitDescription out_desc = *desc.output_data;
      out_desc.source.kind = DataSource::Kind::UNIT_OUTPUT;
      out_desc.source.producer_unit = reserved[i];
      std::string du_id = register_data_unit(out_desc);
      if (!out_desc.graph_id.empty()) data_by_graph_id[out_desc.graph_id] = du_id;
    }

    auto resolve_data_ref = [&](const std::string& ref) -> std::string {
      auto it = data_by_graph_id.find(ref);
      if (it != data_by_graph_id.end()) return it->second;
      if (data_units_.count(ref)) return ref;
      throw UnknownDataUnit("unknown data unit '" + ref + "'");
    };
    auto resolve_unit_ref = [&](const std::string& ref) -> std::string {
      auto it = unit_by_graph_id.find(ref);
      if (it != unit_by_graph_id.end()) return it->second;
      if (units_.count(ref)) return ref;
      throw UnknownUnit("unknown unit '" + ref + "' in depends_on");
    };

    // Pass 3: create the units.
    int64_t now = backend_.now_ms();
    for (size_t i = 0; i < graph.units.size(); ++i) {
      const auto& [graph_id, desc] = graph.units[i];
      auto runtime = std::make_unique<UnitRuntime>();
      runtime->cu.id = reserved[i];
      runtime->cu.description = desc;
      runtime->cu.state = UnitState::NEW;
      for (const std::string& dep : desc.depends_on) {
        runtime->deps.push_back(resolve_unit_ref(dep));
      }
      for (const std::string& input : desc.input_data) {
        runtime->inputs.push_back(resolve_data_ref(input));
      }
      if (desc.output_data) {
        runtime->output_du = data_by_graph_id.count(desc.output_data->graph_id)
                                 ? data_by_graph_id[desc.output_data->graph_id]
                                 : "";
      }
      if (desc.affinity && !desc.affinity->empty()) {
        // Affinity may name a pilot or a data unit; translate graph-local
        // data ids now, leave everything else for scheduling time.
        auto it = data_by_graph_id.find(*desc.affinity);
        if (it != data_by_graph_id.end()) runtime->cu.description.affinity = it->second;
      }

      std::string detail = "name=" + graph_id +
                           " slots=" + std::to_string(desc.slots_required);
      if (!runtime->deps.empty()) detail += " deps=" + join(runtime->deps, ';');
      if (!runtime->inputs.empty()) detail += " inputs=" + join(runtime->inputs, ';');
      if (!runtime->output_du.empty()) detail += " output=" + runtime->output_du;

      runtime->cu.state_history.push_back({UnitState::NEW, now});
      log_event(now, EntityType::UNIT, runtime->cu.id, "NEW", detail);
      unit_state(*runtime, UnitEvent::SUBMIT, now);

      pending_fifo_.push_back(runtime->cu.id);
      submission_order_.push_back(runtime->cu.id);
      ids.push_back(runtime->cu.id);
      units_[runtime->cu.id] = std::move(runtime);
    }

    schedule_step();
  }
  cv_.notify_all();
  return ids;
}

std::string PilotManager::register_data_unit(const DataUnitDescription& desc) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  if (desc.source.kind == DataSource::Kind::FILES) {
    if (desc.source.files.empty()) throw SourceMissing("FILES source lists no paths");
    for (const auto& path : desc.source.files) {
      if (!std::filesystem::exists(path)) {
        throw SourceMissing("source path does not exist: " + path.string());
      }
    }
  }
  if (desc.source.kind == DataSource::Kind::GENERATED) {
    // Zero-size probe: rejects unknown generator names before the unit is
    // registered, not at deferred materialization time.
    generate_payload(desc.source.generator, 0, desc.source.seed);
  }
  if (desc.target_affinity && !pilots_.count(*desc.target_affinity)) {
    throw UnknownPilot("target_affinity names unknown pilot '" + *desc.target_affinity + "'");
  }

  std::string id = data_unit_id(++data_counter_);
  auto runtime = std::make_unique<DataRuntime>();
  runtime->du.id = id;
  runtime->du.description = desc;
  runtime->du.state = DataState::NEW;

  int64_t now = backend_.now_ms();
  std::string detail;
  if (!desc.graph_id.empty()) detail = "name=" + desc.graph_id;
  log_event(now, EntityType::DATA_UNIT, id, "NEW", detail);
  runtime->du.state = DataState::PENDING;
  log_event(now, EntityType::DATA_UNIT, id, "PENDING", "");

  DataRuntime* raw = runtime.get();
  data_units_[id] = std::move(runtime);
  if (desc.source.kind != DataSource::Kind::UNIT_OUTPUT) {
    materialize_if_possible(*raw);
  }
  return id;
}

std::filesystem::path PilotManager::store_dir(const PilotRuntime& p) const {
  return p.pilot.description.work_dir / p.pilot.id / "store";
}

void PilotManager::charge_store(PilotRuntime& p, uint64_t bytes) {
  auto capacity = backend_.descriptor().store_capacity_bytes();
  if (capacity && p.store_used + bytes > *capacity) {
    throw StoreFull("store on " + p.pilot.id + " would hold " +
                    std::to_string(p.store_used + bytes) + " bytes, capacity " +
                    std::to_string(*capacity));
  }
  p.store_used += bytes;
}

std::string PilotManager::data_content(DataRuntime& d) {
  const DataSource& src = d.du.description.source;
  switch (src.kind) {
    case DataSource::Kind::INLINE:
      return src.inline_payload;
    case DataSource::Kind::GENERATED:
      return generate_payload(src.generator, src.size_bytes, src.seed);
    case DataSource::Kind::FILES: {
      std::string content;
      for (const auto& path : src.files) content += read_file_bytes(path);
      return content;
    }
    case DataSource::Kind::UNIT_OUTPUT:
      throw RuntimeFailure("unit output content is produced by its unit");
  }
  return "";
}

void PilotManager::materialize_if_possible(DataRuntime& d) {
  PilotRuntime* target = nullptr;
  if (d.du.description.target_affinity) {
    auto it = pilots_.find(*d.du.description.target_affinity);
    if (it == pilots_.end()) return;
    if (is_terminal(it->second->pilot.state)) {
      d.du.state = DataState::FAILED;
      log_event(backend_.now_ms(), EntityType::DATA_UNIT, d.du.id, "FAILED",
                "reason=target_pilot_terminal");
      return;
    }
    if (it->second->pilot.state != PilotState::ACTIVE) return;  // wait for it
    target = it->second.get();
  } else {
    for (PilotRuntime* p : active_pilots_in_order()) {
      target = p;
      break;
    }
    if (!target) return;  // no pilot yet; retried on activation
  }
  materialize_on(d, *target);
}

void PilotManager::materialize_on(DataRuntime& d, PilotRuntime& p) {
  std::string content = data_content(d);
  uint64_t size = content.size();
  uint64_t checksum = fnv1a64(content);
  charge_store(p, size);

  Replica replica;
  replica.pilot_id = p.pilot.id;
  replica.size_bytes = size;
  replica.checksum = checksum;
  if (backend_.clock_kind() == ClockKind::WALL) {
    replica.path = store_dir(p) / d.du.id;
    write_file_bytes(replica.path, content);
  }
  d.du.replicas.push_back(replica);
  d.du.state = DataState::AVAILABLE;
  log_event(backend_.now_ms(), EntityType::DATA_UNIT, d.du.id, "AVAILABLE",
            "pilot=" + p.pilot.id + " bytes=" + std::to_string(size) +
                " checksum=" + to_hex(checksum));
  schedule_step();
}

const Replica* PilotManager::replica_on(const DataRuntime& d,
                                        const std::string& pilot_id) const {
  for (const Replica& r : d.du.replicas) {
    if (r.pilot_id == pilot_id) return &r;
  }
  return nullptr;
}

void PilotManager::stage(const std::string& data_unit_id, const std::string& pilot_id) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto dit = data_units_.find(data_unit_id);
  if (dit == data_units_.end()) throw UnknownDataUnit("unknown data unit " + data_unit_id);
  auto pit = pilots_.find(pilot_id);
  if (pit == pilots_.end()) throw UnknownPilot("unknown pilot " + pilot_id);
  DataRuntime& d = *dit->second;
  PilotRuntime& p = *pit->second;
  if (d.du.state == DataState::FAILED) throw DataUnitFailed(data_unit_id + " is FAILED");
  if (d.du.state != DataState::AVAILABLE) {
    throw DataUnitFailed(data_unit_id + " is not AVAILABLE");
  }
  if (p.pilot.state != PilotState::ACTIVE) {
    throw PilotNotActive("pilot " + pilot_id + " is not active");
  }
  if (replica_on(d, pilot_id)) return;  // idempotent
  begin_stage(d, p, "");
}

void PilotManager::begin_stage(DataRuntime& d, PilotRuntime& dest,
                               const std::string& waiting_unit) {
  if (!waiting_unit.empty()) {
    units_.at(waiting_unit)->pending_stages.insert(d.du.id);
  }
  if (d.staging_to.count(dest.pilot.id)) return;  // transfer already in flight

  const Replica& source = d.du.replicas.at(0);
  charge_store(dest, source.size_bytes);
  d.staging_to.insert(dest.pilot.id);

  int64_t now = backend_.now_ms();
  log_event(now, EntityType::DATA_UNIT, d.du.id, "STAGE_BEGIN",
            "to=" + dest.pilot.id + " bytes=" + std::to_string(source.size_bytes));

  if (backend_.clock_kind() == ClockKind::WALL) {
    // Synchronous copy on the real filesystem.
    std::string content = read_file_bytes(source.path);
    uint64_t checksum = fnv1a64(content);
    if (checksum != source.checksum) {
      d.staging_to.erase(dest.pilot.id);
      throw ChecksumMismatch("replica of " + d.du.id + " on " + source.pilot_id +
                             " does not match its checksum");
    }
    std::filesystem::path path = store_dir(dest) / d.du.id;
    write_file_bytes(path, content);
    finish_stage(d.du.id, dest.pilot.id, source.size_bytes, checksum);
  } else {
    auto* sim = dynamic_cast<SimBackend*>(&backend_);
    int64_t transfer = sim->transfer_time_ms(source.size_bytes);
    std::string du_id = d.du.id;
    std::string pilot_id = dest.pilot.id;
    uint64_t size = source.size_bytes;
    uint64_t checksum = source.checksum;
    backend_.post(transfer, [this, du_id, pilot_id, size, checksum] {
      std::lock_guard<std::recursive_mutex> lock(mu_);
      finish_stage(du_id, pilot_id, size, checksum);
    });
  }
}

void PilotManager::finish_stage(const std::string& du_id, const std::string& pilot_id,
                                uint64_t size, uint64_t checksum) {
  auto dit = data_units_.find(du_id);
  auto pit = pilots_.find(pilot_id);
  if (dit == data_units_.end() || pit == pilots_.end()) return;
  DataRuntime& d = *dit->second;
  PilotRuntime& p = *pit->second;
  d.staging_to.erase(pilot_id);
  if (is_terminal(p.pilot.state)) return;  // destination died mid-transfer

  Replica replica;
  replica.pilot_id = pilot_id;
  replica.size_bytes = size;
  replica.checksum = checksum;
  if (backend_.clock_kind() == ClockKind::WALL) replica.path = store_dir(p) / du_id;
  d.du.replicas.push_back(replica);
  log_event(backend_.now_ms(), EntityType::DATA_UNIT, du_id, "STAGE_END",
            "to=" + pilot_id + " checksum=" + to_hex(checksum));

  // Wake units that were bound and waiting on this transfer.
  for (auto& [uid, u] : units_) {
    (void)uid;
    if (u->cu.state != UnitState::BOUND) continue;
    if (!u->cu.binding || u->cu.binding->pilot_id != pilot_id) continue;
    if (u->pending_stages.erase(du_id) > 0) maybe_start_unit(*u);
  }
}

std::vector<PilotManager::PilotRuntime*> PilotManager::active_pilots_in_order() {
  std::vector<PilotRuntime*> out;
  for (auto& [id, p] : pilots_) {
    (void)id;
    if (p->pilot.state == PilotState::ACTIVE) out.push_back(p.get());
  }
  std::sort(out.begin(), out.end(), [](const PilotRuntime* a, const PilotRuntime* b) {
    if (a->active_ts != b->active_ts) return a->active_ts < b->active_ts;
    return a->pilot.id < b->pilot.id;
  });
  return out;
}

bool PilotManager::unit_eligible(const UnitRuntime& u) const {
  for (const std::string& dep : u.deps) {
    if (units_.at(dep)->cu.state != UnitState::DONE) return false;
  }
  for (const std::string& input : u.inputs) {
    if (data_units_.at(input)->du.state != DataState::AVAILABLE) return false;
  }
  return true;
}

// Cancels a PENDING unit whose dependencies or inputs can never be satisfied.
bool PilotManager::cancel_on_broken_inputs(UnitRuntime& u) {
  for (const std::string& dep : u.deps) {
    UnitState s = units_.at(dep)->cu.state;
    if (s == UnitState::FAILED || s == UnitState::CANCELED) {
      unit_state(u, UnitEvent::CANCEL, backend_.now_ms(), "reason=dep_failed:" + dep);
      return true;
    }
  }
  for (const std::string& input : u.inputs) {
    if (data_units_.at(input)->du.state == DataState::FAILED) {
      unit_state(u, UnitEvent::CANCEL, backend_.now_ms(), "reason=input_failed:" + input);
      return true;
    }
  }
  return false;
}

std::vector<std::string> PilotManager::affinity_target_pilots(const UnitRuntime& u) {
  std::vector<std::string> targets;
  const auto& affinity = u.cu.description.affinity;
  if (affinity && !affinity->empty()) {
    if (pilots_.count(*affinity)) {
      targets.push_back(*affinity);
      return targets;
    }
    auto dit = data_units_.find(*affinity);
    if (dit != data_units_.end()) {
      for (const Replica& r : dit->second->du.replicas) targets.push_back(r.pilot_id);
      return targets;
    }
    return targets;  // dangling hint: no preference
  }
  // No explicit hint: prefer pilots holding the largest share of input bytes.
  std::map<std::string, uint64_t> bytes_held;
  for (const std::string& input : u.inputs) {
    const DataRuntime& d = *data_units_.at(input);
    for (const Replica& r : d.du.replicas) bytes_held[r.pilot_id] += r.size_bytes;
  }
  uint64_t best = 0;
  for (const auto& [pid, bytes] : bytes_held) {
    (void)pid;
    best = std::max(best, bytes);
  }
  if (best == 0) return targets;
  for (const auto& [pid, bytes] : bytes_held) {
    if (bytes == best) targets.push_back(pid);
  }
  return targets;
}

PilotManager::PilotRuntime* PilotManager::choose_pilot(const UnitRuntime& u) {
  std::vector<PilotRuntime*> candidates = active_pilots_in_order();
  int req = u.cu.description.slots_required;
  if (config_.scheduling_policy == SchedulingPolicy::AFFINITY_FIRST) {
    std::vector<std::string> targets = affinity_target_pilots(u);
    for (PilotRuntime* p : candidates) {
      if (p->pilot.capacity_free < req) continue;
      if (std::find(targets.begin(), targets.end(), p->pilot.id) != targets.end()) {
        return p;
      }
    }
  }
  for (PilotRuntime* p : candidates) {
    if (p->pilot.capacity_free >= req) return p;
  }
  return nullptr;
}

void PilotManager::schedule_step() {
  // Compact the FIFO queue lazily.
  pending_fifo_.erase(
      std::remove_if(pending_fifo_.begin(), pending_fifo_.end(),
                     [this](const std::string& uid) {
                       return units_.at(uid)->cu.state != UnitState::PENDING;
                     }),
      pending_fifo_.end());

  for (const std::string& uid : std::vector<std::string>(pending_fifo_)) {
    UnitRuntime& u = *units_.at(uid);
    if (u.cu.state != UnitState::PENDING) continue;
    if (cancel_on_broken_inputs(u)) continue;
    if (!unit_eligible(u)) continue;
    PilotRuntime* p = choose_pilot(u);
    if (!p) continue;
    bind_unit(u, *p);
  }
}

void PilotManager::bind_unit(UnitRuntime& u, PilotRuntime& p) {
  int req = u.cu.description.slots_required;
  std::vector<int> slots;
  for (int s = 0; s < p.pilot.description.slots && static_cast<int>(slots.size()) < req;
       ++s) {
    if (!p.busy_slots.count(s)) slots.push_back(s);
  }
  u.slots = slots;
  for (int s : slots) p.busy_slots.insert(s);
  p.pilot.capacity_free -= req;

  int64_t now = backend_.now_ms();
  BindingRecord binding;
  binding.unit_id = u.cu.id;
  binding.pilot_id = p.pilot.id;
  binding.slot_index = slots.front();
  binding.bind_time_ms = now;
  u.cu.binding = binding;
  unit_state(u, UnitEvent::BIND, now,
             "pilot=" + p.pilot.id + " slots=" + join_ints(slots, ';'));

  u.pending_stages.clear();
  for (const std::string& input : u.inputs) {
    DataRuntime& d = *data_units_.at(input);
    if (!replica_on(d, p.pilot.id)) {
      try {
        begin_stage(d, p, u.cu.id);
      } catch (const Error&) {
        finish_cancel_unit(u, backend_.now_ms(), "reason=stage_failed:" + input);
        return;
      }
    }
  }
  maybe_start_unit(u);
}

void PilotManager::maybe_start_unit(UnitRuntime& u) {
  if (u.cu.state != UnitState::BOUND) return;
  if (!u.pending_stages.empty()) return;
  start_unit(u);
}

void PilotManager::start_unit(UnitRuntime& u) {
  PilotRuntime& p = *pilots_.at(u.cu.binding->pilot_id);
  LaunchContext ctx;
  ctx.log = &log_;
  ctx.brokers = &brokers_;
  if (backend_.clock_kind() == ClockKind::WALL) {
    for (const std::string& input : u.inputs) {
      const Replica* r = replica_on(*data_units_.at(input), p.pilot.id);
      if (r) ctx.input_paths[input] = r->path;
    }
    if (!u.output_du.empty()) {
      ctx.output_path = store_dir(p) / u.output_du;
      std::filesystem::create_directories(ctx.output_path.parent_path());
    }
  }
  unit_state(u, UnitEvent::RUN, backend_.now_ms());
  backend_.launch_unit(p.handle, u.cu, u.slots, ctx);
}

void PilotManager::on_unit_finished(const std::string& unit_id, const ExitInfo& info,
                                    int64_t now_ms) {
  {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = units_.find(unit_id);
    if (it == units_.end()) return;
    UnitRuntime& u = *it->second;
    if (u.cu.state != UnitState::RUNNING) return;  // canceled in flight

    PilotRuntime& p = *pilots_.at(u.cu.binding->pilot_id);
    for (int s : u.slots) p.busy_slots.erase(s);
    p.pilot.capacity_free += u.cu.description.slots_required;
    u.cu.exit_info = info;

    if (info.exit_code == 0) {
      unit_state(u, UnitEvent::COMPLETE, now_ms, "exit=0");
      if (!u.output_du.empty()) {
        DataRuntime& d = *data_units_.at(u.output_du);
        uint64_t size = 0;
        uint64_t checksum = 0;
        bool produced = true;
        if (backend_.clock_kind() == ClockKind::WALL) {
          std::filesystem::path path = store_dir(p) / u.output_du;
          if (std::filesystem::exists(path)) {
            std::string content = read_file_bytes(path);
            size = content.size();
            checksum = fnv1a64(content);
          } else {
            produced = false;
          }
        } else {
          size = static_cast<uint64_t>(u.cu.description.kernel.sim_output_bytes());
          checksum = fnv1a64(u.output_du + ":" + std::to_string(size));
        }
        if (!produced) {
          d.du.state = DataState::FAILED;
          log_event(now_ms, EntityType::DATA_UNIT, d.du.id, "FAILED",
                    "reason=missing_output");
        } else {
          try {
            charge_store(p, size);
            Replica replica;
            replica.pilot_id = p.pilot.id;
            replica.size_bytes = size;
            replica.checksum = checksum;
            if (backend_.clock_kind() == ClockKind::WALL) {
              replica.path = store_dir(p) / u.output_du;
            }
            d.du.replicas.push_back(replica);
            d.du.state = DataState::AVAILABLE;
            log_event(now_ms, EntityType::DATA_UNIT, d.du.id, "AVAILABLE",
                      "pilot=" + p.pilot.id + " bytes=" + std::to_string(size) +
                          " checksum=" + to_hex(checksum));
          } catch (const StoreFull&) {
            d.du.state = DataState::FAILED;
            log_event(now_ms, EntityType::DATA_UNIT, d.du.id, "FAILED",
                      "reason=store_full");
          }
        }
      }
    } else {
      unit_state(u, UnitEvent::FAIL, now_ms, "exit=" + std::to_string(info.exit_code));
    }
    schedule_step();
  }
  cv_.notify_all();
}

void PilotManager::finish_cancel_unit(UnitRuntime& u, int64_t ts, const std::string& reason) {
  if (u.cu.state == UnitState::BOUND || u.cu.state == UnitState::RUNNING) {
    PilotRuntime& p = *pilots_.at(u.cu.binding->pilot_id);
    if (!is_terminal(p.pilot.state)) {
      for (int s : u.slots) {
        p.busy_slots.erase(s);
        backend_.release_slot(p.handle, s);
      }
      p.pilot.capacity_free += u.cu.description.slots_required;
    }
  }
  unit_state(u, UnitEvent::CANCEL, ts, reason);
  u.cu.binding.reset();  // binding present iff bound/running/done/failed
  u.pending_stages.clear();
  u.slots.clear();
}

void PilotManager::cancel_pilot(const std::string& pilot_id) {
  {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    auto it = pilots_.find(pilot_id);
    if (it == pilots_.end()) throw UnknownPilot("unknown pilot " + pilot_id);
    PilotRuntime& p = *it->second;
    if (is_terminal(p.pilot.state)) {
      throw AlreadyTerminal("pilot " + pilot_id + " already terminal");
    }
    backend_.cancel_pilot(p.handle);
    int64_t now = backend_.now_ms();
    pilot_state(p, PilotEvent::CANCEL, now);
    p.pilot.capacity_free = 0;
    p.busy_slots.clear();

    for (auto& [uid, u] : units_) {
      (void)uid;
      if (u->cu.state != UnitState::BOUND && u->cu.state != UnitState::RUNNING) continue;
      if (!u->cu.binding || u->cu.binding->pilot_id != pilot_id) continue;
      finish_cancel_unit(*u, now, "reason=pilot_canceled");
    }
    schedule_step();
  }
  cv_.notify_all();
}

std::map<std::string, std::filesystem::path> PilotManager::resolve_input_paths(
    const std::string& unit_id) {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = units_.find(unit_id);
  if (it == units_.end()) throw UnknownUnit("unknown unit " + unit_id);
  UnitRuntime& u = *it->second;
  if (!u.cu.binding) {
    throw RuntimeFailure("unit " + unit_id + " is not bound");
  }
  PilotRuntime& p = *pilots_.at(u.cu.binding->pilot_id);
  std::map<std::string, std::filesystem::path> out;
  for (const std::string& input : u.inputs) {
    DataRuntime& d = *data_units_.at(input);
    if (d.du.state == DataState::FAILED) {
      throw DataUnitFailed("input " + input + " is FAILED");
    }
    const Replica* r = replica_on(d, p.pilot.id);
    if (!r) {
      if (backend_.clock_kind() == ClockKind::WALL) {
        begin_stage(d, p, "");
        r = replica_on(d, p.pilot.id);
      }
    }
    out[input] = r ? r->path : store_dir(p) / input;
  }
  return out;
}

bool PilotManager::all_terminal(const std::vector<std::string>& unit_ids) {
  for (const std::string& uid : unit_ids) {
    auto it = units_.find(uid);
    if (it == units_.end()) throw UnknownUnit("unknown unit " + uid);
    if (!is_terminal(it->second->cu.state)) return false;
  }
  return true;
}

WaitResult PilotManager::collect(const std::vector<std::string>& unit_ids, bool timed_out) {
  WaitResult result;
  result.timed_out = timed_out;
  for (const std::string& uid : unit_ids) {
    result.states[uid] = units_.at(uid)->cu.state;
  }
  return result;
}

WaitResult PilotManager::wait(const std::vector<std::string>& unit_ids,
                              std::optional<int64_t> timeout_ms) {
  if (backend_.clock_kind() == ClockKind::VIRTUAL) {
    auto* sim = dynamic_cast<SimBackend*>(&backend_);
    std::lock_guard<std::recursive_mutex> lock(mu_);
    int64_t deadline = timeout_ms ? sim->now_ms() + *timeout_ms : 0;
    while (true) {
      if (all_terminal(unit_ids)) return collect(unit_ids, false);
      if (!sim->has_events()) return collect(unit_ids, true);
      if (timeout_ms && sim->next_event_time() > deadline) {
        return collect(unit_ids, true);
      }
      sim->step();
    }
  }

  std::unique_lock<std::recursive_mutex> lock(mu_);
  auto pred = [&] { return all_terminal(unit_ids); };
  if (!timeout_ms) {
    cv_.wait(lock, pred);
    return collect(unit_ids, false);
  }
  bool done = cv_.wait_for(lock, std::chrono::milliseconds(*timeout_ms), pred);
  return collect(unit_ids, !done);
}

WaitResult PilotManager::wait_all(std::optional<int64_t> timeout_ms) {
  std::vector<std::string> ids;
  {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    ids = submission_order_;
  }
  return wait(ids, timeout_ms);
}

void PilotManager::shutdown() {
  {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (shut_down_) return;
    shut_down_ = true;
    int64_t now = backend_.now_ms();
    for (auto& [uid, u] : units_) {
      (void)uid;
      if (u->cu.state == UnitState::BOUND || u->cu.state == UnitState::RUNNING) {
        finish_cancel_unit(*u, now, "reason=shutdown");
      }
    }
    for (auto& [pid, p] : pilots_) {
      (void)pid;
      if (p->pilot.state == PilotState::ACTIVE) {
        pilot_state(*p, PilotEvent::COMPLETE, now);
      } else if (p->pilot.state == PilotState::SUBMITTED ||
                 p->pilot.state == PilotState::QUEUED) {
        pilot_state(*p, PilotEvent::CANCEL, now, "reason=shutdown");
      }
    }
  }
  stop_poll_.store(true);
  if (poll_thread_.joinable()) poll_thread_.join();
  backend_.shutdown();
  cv_.notify_all();
}

Pilot PilotManager::pilot(const std::string& pilot_id) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = pilots_.find(pilot_id);
  if (it == pilots_.end()) throw UnknownPilot("unknown pilot " + pilot_id);
  return it->second->pilot;
}

ComputeUnit PilotManager::unit(const std::string& unit_id) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = units_.find(unit_id);
  if (it == units_.end()) throw UnknownUnit("unknown unit " + unit_id);
  return it->second->cu;
}

DataUnit PilotManager::data_unit(const std::string& data_unit_id) const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  auto it = data_units_.find(data_unit_id);
  if (it == data_units_.end()) throw UnknownDataUnit("unknown data unit " + data_unit_id);
  return it->second->du;
}

std::vector<std::string> PilotManager::pilot_ids() const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, p] : pilots_) {
    (void)p;
    out.push_back(id);
  }
  return out;
}

std::vector<std::string> PilotManager::all_unit_ids() const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  return submission_order_;
}

size_t PilotManager::pending_count() const {
  std::lock_guard<std::recursive_mutex> lock(mu_);
  size_t n = 0;
  for (const auto& [uid, u] : units_) {
    (void)uid;
    if (u->cu.state == UnitState::PENDING) ++n;
  }
  return n;
}

}  // namespace pilotkit
