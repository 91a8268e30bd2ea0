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

#ifndef PILOTKIT_TYPES_HPP
#define PILOTKIT_TYPES_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pilotkit/states.hpp"

namespace pilotkit {

// Resource request for one pilot: a placeholder for `slots` concurrent
// execution slots on the named backend.
struct PilotDescription {
  std::string backend_id;
  int slots = 1;
  int cores_per_slot = 1;
  int64_t walltime_limit_s = 3600;
  std::string queue_name;
  std::filesystem::path work_dir;
};

// What a compute unit runs. EXTERNAL forks argv on a real backend; BUILTIN
// names one of the in-process kernels. `parameters` carries kernel knobs
// (and, for simulated backends, sim_duration_ms).
struct KernelSpec {
  enum class Variant { EXTERNAL, BUILTIN };
  Variant variant = Variant::BUILTIN;
  std::vector<std::string> argv;   // EXTERNAL
  std::string name;                // BUILTIN
  std::map<std::string, std::string> parameters;

  static const std::set<std::string>& builtin_names();
  void validate() const;

  int64_t sim_duration_ms() const;
  int64_t sim_output_bytes() const;

  static KernelSpec builtin(std::string name,
                            std::map<std::string, std::string> parameters = {});
  static KernelSpec external(std::vector<std::string> argv);
};

// Where a data unit's bytes come from.
struct DataSource {
  enum class Kind { FILES, INLINE, GENERATED, UNIT_OUTPUT };
  Kind kind = Kind::INLINE;
  std::vector<std::filesystem::path> files;      // FILES
  std::string inline_payload;                    // INLINE
  std::string generator;                         // GENERATED: generator name
  uint64_t size_bytes = 0;                       // GENERATED
  uint64_t seed = 0;                             // GENERATED
  std::string producer_unit;                     // UNIT_OUTPUT: graph id of producer

  static DataSource inline_bytes(std::string payload);
  static DataSource from_files(std::vector<std::filesystem::path> files);
  static DataSource generated(std::string generator, uint64_t size_bytes, uint64_t seed);
};

struct DataUnitDescription {
  std::string graph_id;  // caller-scoped name; empty for anonymous units
  DataSource source;
  std::optional<std::string> target_affinity;  // pilot id hint for placement
};

struct ComputeUnitDescription {
  KernelSpec kernel;
  std::vector<std::string> arguments;
  int slots_required = 1;
  std::vector<std::string> depends_on;   // graph ids or unit ids
  std::vector<std::string> input_data;   // data unit ids or graph ids
  std::optional<DataUnitDescription> output_data;
  std::optional<std::string> affinity;   // pilot id or data unit id hint
};

struct BindingRecord {
  std::string unit_id;
  std::string pilot_id;
  int slot_index = 0;
  int64_t bind_time_ms = 0;
};

struct ExitInfo {
  int exit_code = 0;
  std::string message;
};

template <typename State>
struct StateStamp {
  State state;
  int64_t timestamp_ms;
};

struct Pilot {
  std::string id;
  PilotDescription description;
  PilotState state = PilotState::NEW;
  std::vector<StateStamp<PilotState>> state_history;
  int capacity_free = 0;
};

struct ComputeUnit {
  std::string id;
  ComputeUnitDescription description;
  UnitState state = UnitState::NEW;
  std::vector<StateStamp<UnitState>> state_history;
  std::optional<BindingRecord> binding;
  std::optional<ExitInfo> exit_info;
};

// One physical copy of a data unit on a pilot. All replicas of a unit hold
// byte-identical content, hence equal checksums.
struct Replica {
  std::string pilot_id;
  std::filesystem::path path;   // empty on virtual-clock backends
  uint64_t size_bytes = 0;
  uint64_t checksum = 0;
};

struct DataUnit {
  std::string id;
  DataUnitDescription description;
  DataState state = DataState::NEW;
  std::vector<Replica> replicas;
};

// Zero-padded sequential ids; lexicographic order equals creation order.
std::string pilot_id(uint64_t n);
std::string unit_id(uint64_t n);
std::string data_unit_id(uint64_t n);

}  // namespace pilotkit

#endif  // PILOTKIT_TYPES_HPP
