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

#ifndef PILOTKIT_MANAGER_WORKLOAD_HPP
#define PILOTKIT_MANAGER_WORKLOAD_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pilotkit/types.hpp"

namespace pilotkit {

// A batch of unit descriptions keyed by caller-chosen graph ids, plus data
// unit declarations. Insertion order is the submission order.
struct WorkloadGraph {
  std::vector<std::pair<std::string, ComputeUnitDescription>> units;
  std::vector<DataUnitDescription> data;

  void add_unit(std::string graph_id, ComputeUnitDescription desc);
  void add_data(DataUnitDescription desc);

  bool empty() const { return units.empty() && data.empty(); }

  // Structural checks that need no manager state: unique non-empty ids, no
  // self-dependencies, graph-internal dependency edges acyclic, kernels valid.
  // Throws CycleDetected / WorkloadError.
  void validate() const;
};

// Workload file serialization (strict: unknown fields rejected).
WorkloadGraph workload_from_json(const std::string& json_text);
WorkloadGraph workload_from_file(const std::filesystem::path& path);
std::string workload_to_json(const WorkloadGraph& graph);

}  // namespace pilotkit

#endif  // PILOTKIT_MANAGER_WORKLOAD_HPP
