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

#include "pilotkit/manager/workload.hpp"

#include <map>
#include <set>

#include "pilotkit/errors.hpp"

namespace pilotkit {

void WorkloadGraph::add_unit(std::string graph_id, ComputeUnitDescription desc) {
  units.emplace_back(std::move(graph_id), std::move(desc));
}

void WorkloadGraph::add_data(DataUnitDescription desc) {
  data.push_back(std::move(desc));
}

void WorkloadGraph::validate() const {
  std::set<std::string> unit_ids;
  std::set<std::string> data_ids;

  for (const DataUnitDescription& d : data) {
    if (d.graph_id.empty()) throw WorkloadError("data unit with empty id");
    if (!data_ids.insert(d.graph_id).second) {
      throw WorkloadError("duplicate data unit id '" + d.graph_id + "'");
    }
  }

  for (const auto& [graph_id, desc] : units) {
    if (graph_id.empty()) throw WorkloadError("unit with empty id");
    if (!unit_ids.insert(graph_id).second) {
      throw WorkloadError("duplicate unit id '" + graph_id + "'");
    }
    if (desc.slots_required < 1) {
      throw WorkloadError("unit '" + graph_id + "' requires " +
                          std::to_string(desc.slots_required) + " slots");
    }
    desc.kernel.validate();
    if (desc.output_data) {
      const std::string& out_id = desc.output_data->graph_id;
      if (out_id.empty()) {
        throw WorkloadError("unit '" + graph_id + "' declares output data with empty id");
      }
      if (!data_ids.insert(out_id).second) {
        throw WorkloadError("duplicate data unit id '" + out_id + "'");
      }
    }
  }

  // Dependency edges among units declared in this graph must be acyclic.
  // References to units outside the graph are resolved at submission time.
  std::map<std::string, std::vector<std::string>> edges;
  for (const auto& [graph_id, desc] : units) {
    for (const std::string& dep : desc.depends_on) {
      if (dep == graph_id) {
        throw CycleDetected("unit '" + graph_id + "' depends on itself");
      }
      if (unit_ids.count(dep)) edges[graph_id].push_back(dep);
    }
  }

  // Iterative depth-first search, coloring nodes: 0 white, 1 on stack, 2 done.
  std::map<std::string, int> color;
  for (const auto& [start, ignored] : edges) {
    (void)ignored;
    if (color[start] != 0) continue;
    std::vector<std::pair<std::string, size_t>> stack{{start, 0}};
    color[start] = 1;
    while (!stack.empty()) {
      auto& [node, next_edge] = stack.back();
      const std::vector<std::string>& out = edges[node];
      if (next_edge >= out.size()) {
        color[node] = 2;
        stack.pop_back();
        continue;
      }
      const std::string& target = out[next_edge++];
      if (color[target] == 1) {
        throw CycleDetected("dependency cycle through '" + target + "'");
      }
      if (color[target] == 0) {
        color[target] = 1;
        stack.emplace_back(target, 0);
      }
    }
  }
}

}  // namespace pilotkit
