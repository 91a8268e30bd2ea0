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

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pilotkit/errors.hpp"
#include "pilotkit/manager/workload.hpp"

namespace pilotkit {

namespace {

using json = nlohmann::ordered_json;

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw WorkloadError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw WorkloadError("unknown field '" + key + "' in " + where);
    }
  }
}

std::string stringify(const json& value, const std::string& where) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number() || value.is_boolean()) return value.dump();
  throw WorkloadError(where + " must be a string, number, or boolean");
}

KernelSpec parse_kernel(const json& obj, const std::string& where) {
  require_keys(obj, {"variant", "name", "argv", "parameters"}, where);
  if (!obj.contains("variant") || !obj["variant"].is_string()) {
    throw WorkloadError(where + " needs a string 'variant'");
  }
  std::string variant = obj["variant"].get<std::string>();

  KernelSpec kernel;
  if (variant == "BUILTIN") {
    if (!obj.contains("name") || !obj["name"].is_string()) {
      throw WorkloadError(where + " BUILTIN kernel needs a string 'name'");
    }
    if (obj.contains("argv")) {
      throw WorkloadError(where + " BUILTIN kernel must not carry 'argv'");
    }
    kernel.variant = KernelSpec::Variant::BUILTIN;
    kernel.name = obj["name"].get<std::string>();
  } else if (variant == "EXTERNAL") {
    if (!obj.contains("argv") || !obj["argv"].is_array() || obj["argv"].empty()) {
      throw WorkloadError(where + " EXTERNAL kernel needs a non-empty 'argv' array");
    }
    if (obj.contains("name")) {
      throw WorkloadError(where + " EXTERNAL kernel must not carry 'name'");
    }
    kernel.variant = KernelSpec::Variant::EXTERNAL;
    for (const json& arg : obj["argv"]) {
      kernel.argv.push_back(stringify(arg, where + ".argv entry"));
    }
  } else {
    throw WorkloadError(where + " variant must be BUILTIN or EXTERNAL, got '" + variant +
                        "'");
  }

  if (obj.contains("parameters")) {
    if (!obj["parameters"].is_object()) {
      throw WorkloadError(where + ".parameters must be an object");
    }
    for (const auto& [key, value] : obj["parameters"].items()) {
      kernel.parameters[key] = stringify(value, where + ".parameters." + key);
    }
  }
  kernel.validate();
  return kernel;
}

DataSource parse_source(const json& obj, const std::string& where) {
  require_keys(obj, {"kind", "content", "paths", "generator", "size_bytes", "seed"}, where);
  if (!obj.contains("kind") || !obj["kind"].is_string()) {
    throw WorkloadError(where + " needs a string 'kind'");
  }
  std::string kind = obj["kind"].get<std::string>();

  DataSource source;
  if (kind == "INLINE") {
    require_keys(obj, {"kind", "content"}, where);
    if (!obj.contains("content") || !obj["content"].is_string()) {
      throw WorkloadError(where + " INLINE source needs a string 'content'");
    }
    source.kind = DataSource::Kind::INLINE;
    source.inline_payload = obj["content"].get<std::string>();
  } else if (kind == "FILES") {
    require_keys(obj, {"kind", "paths"}, where);
    if (!obj.contains("paths") || !obj["paths"].is_array() || obj["paths"].empty()) {
      throw WorkloadError(where + " FILES source needs a non-empty 'paths' array");
    }
    source.kind = DataSource::Kind::FILES;
    for (const json& path : obj["paths"]) {
      if (!path.is_string()) throw WorkloadError(where + ".paths entries must be strings");
      source.files.emplace_back(path.get<std::string>());
    }
  } else if (kind == "GENERATED") {
    require_keys(obj, {"kind", "generator", "size_bytes", "seed"}, where);
    if (!obj.contains("generator") || !obj["generator"].is_string()) {
      throw WorkloadError(where + " GENERATED source needs a string 'generator'");
    }
    if (!obj.contains("size_bytes") || !obj["size_bytes"].is_number_unsigned()) {
      throw WorkloadError(where + " GENERATED source needs an unsigned 'size_bytes'");
    }
    source.kind = DataSource::Kind::GENERATED;
    source.generator = obj["generator"].get<std::string>();
    source.size_bytes = obj["size_bytes"].get<uint64_t>();
    if (obj.contains("seed")) {
      if (!obj["seed"].is_number_unsigned()) {
        throw WorkloadError(where + ".seed must be an unsigned integer");
      }
      source.seed = obj["seed"].get<uint64_t>();
    }
  } else {
    throw WorkloadError(where + " kind must be INLINE, FILES, or GENERATED, got '" + kind +
                        "'");
  }
  return source;
}

json kernel_to_json(const KernelSpec& kernel) {
  json obj;
  if (kernel.variant == KernelSpec::Variant::BUILTIN) {
    obj["variant"] = "BUILTIN";
    obj["name"] = kernel.name;
  } else {
    obj["variant"] = "EXTERNAL";
    obj["argv"] = kernel.argv;
  }
  if (!kernel.parameters.empty()) {
    json params = json::object();
    for (const auto& [key, value] : kernel.parameters) params[key] = value;
    obj["parameters"] = params;
  }
  return obj;
}

json source_to_json(const DataSource& source) {
  json obj;
  switch (source.kind) {
    case DataSource::Kind::INLINE:
      obj["kind"] = "INLINE";
      obj["content"] = source.inline_payload;
      break;
    case DataSource::Kind::FILES: {
      obj["kind"] = "FILES";
      json paths = json::array();
      for (const auto& path : source.files) paths.push_back(path.string());
      obj["paths"] = paths;
      break;
    }
    case DataSource::Kind::GENERATED:
      obj["kind"] = "GENERATED";
      obj["generator"] = source.generator;
      obj["size_bytes"] = source.size_bytes;
      obj["seed"] = source.seed;
      break;
    case DataSource::Kind::UNIT_OUTPUT:
      throw WorkloadError("unit output data units are declared via 'output_data'");
  }
  return obj;
}

}  // namespace

WorkloadGraph workload_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw WorkloadError(std::string("workload is not valid JSON: ") + e.what());
  }
  require_keys(doc, {"units", "data"}, "workload");
  if (doc.contains("units") && !doc["units"].is_array()) {
    throw WorkloadError("'units' must be an array");
  }

  WorkloadGraph graph;

  if (doc.contains("data")) {
    if (!doc["data"].is_array()) throw WorkloadError("'data' must be an array");
    for (const json& entry : doc["data"]) {
      require_keys(entry, {"id", "source", "target_affinity"}, "data entry");
      if (!entry.contains("id") || !entry["id"].is_string()) {
        throw WorkloadError("data entry needs a string 'id'");
      }
      if (!entry.contains("source")) {
        throw WorkloadError("data entry needs a 'source'");
      }
      DataUnitDescription desc;
      desc.graph_id = entry["id"].get<std::string>();
      desc.source = parse_source(entry["source"], "data '" + desc.graph_id + "' source");
      if (entry.contains("target_affinity") && !entry["target_affinity"].is_null()) {
        if (!entry["target_affinity"].is_string()) {
          throw WorkloadError("target_affinity must be a string or null");
        }
        desc.target_affinity = entry["target_affinity"].get<std::string>();
      }
      graph.add_data(std::move(desc));
    }
  }

  static const json kNoUnits = json::array();
  const json& unit_entries = doc.contains("units") ? doc["units"] : kNoUnits;
  for (const json& entry : unit_entries) {
    require_keys(entry,
                 {"id", "kernel", "arguments", "slots_required", "depends_on",
                  "input_data", "output_data", "affinity"},
                 "unit entry");
    if (!entry.contains("id") || !entry["id"].is_string()) {
      throw WorkloadError("unit entry needs a string 'id'");
    }
    std::string id = entry["id"].get<std::string>();
    if (!entry.contains("kernel")) {
      throw WorkloadError("unit '" + id + "' needs a 'kernel'");
    }

    ComputeUnitDescription desc;
    desc.kernel = parse_kernel(entry["kernel"], "unit '" + id + "' kernel");

    if (entry.contains("arguments")) {
      if (!entry["arguments"].is_array()) {
        throw WorkloadError("unit '" + id + "' arguments must be an array");
      }
      for (const json& arg : entry["arguments"]) {
        desc.arguments.push_back(stringify(arg, "unit '" + id + "' argument"));
      }
    }
    if (entry.contains("slots_required")) {
      if (!entry["slots_required"].is_number_integer()) {
        throw WorkloadError("unit '" + id + "' slots_required must be an integer");
      }
      desc.slots_required = entry["slots_required"].get<int>();
    }
    if (entry.contains("depends_on")) {
      if (!entry["depends_on"].is_array()) {
        throw WorkloadError("unit '" + id + "' depends_on must be an array");
      }
      for (const json& dep : entry["depends_on"]) {
        if (!dep.is_string()) {
          throw WorkloadError("unit '" + id + "' depends_on entries must be strings");
        }
        desc.depends_on.push_back(dep.get<std::string>());
      }
    }
    if (entry.contains("input_data")) {
      if (!entry["input_data"].is_array()) {
        throw WorkloadError("unit '" + id + "' input_data must be an array");
      }
      for (const json& input : entry["input_data"]) {
        if (!input.is_string()) {
          throw WorkloadError("unit '" + id + "' input_data entries must be strings");
        }
        desc.input_data.push_back(input.get<std::string>());
      }
    }
    if (entry.contains("output_data") && !entry["output_data"].is_null()) {
      if (!entry["output_data"].is_string()) {
        throw WorkloadError("unit '" + id + "' output_data must be a string or null");
      }
      DataUnitDescription out;
      out.graph_id = entry["output_data"].get<std::string>();
      out.source.kind = DataSource::Kind::UNIT_OUTPUT;
      desc.output_data = std::move(out);
    }
    if (entry.contains("affinity") && !entry["affinity"].is_null()) {
      if (!entry["affinity"].is_string()) {
        throw WorkloadError("unit '" + id + "' affinity must be a string or null");
      }
      desc.affinity = entry["affinity"].get<std::string>();
    }
    graph.add_unit(std::move(id), std::move(desc));
  }

  graph.validate();
  return graph;
}

WorkloadGraph workload_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw WorkloadError("cannot open workload file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return workload_from_json(os.str());
}

std::string workload_to_json(const WorkloadGraph& graph) {
  json doc;
  json units = json::array();
  for (const auto& [graph_id, desc] : graph.units) {
    json entry;
    entry["id"] = graph_id;
    entry["kernel"] = kernel_to_json(desc.kernel);
    if (!desc.arguments.empty()) entry["arguments"] = desc.arguments;
    if (desc.slots_required != 1) entry["slots_required"] = desc.slots_required;
    if (!desc.depends_on.empty()) entry["depends_on"] = desc.depends_on;
    if (!desc.input_data.empty()) entry["input_data"] = desc.input_data;
    if (desc.output_data) entry["output_data"] = desc.output_data->graph_id;
    if (desc.affinity) entry["affinity"] = *desc.affinity;
    units.push_back(entry);
  }
  doc["units"] = units;
  if (!graph.data.empty()) {
    json data = json::array();
    for (const DataUnitDescription& desc : graph.data) {
      json entry;
      entry["id"] = desc.graph_id;
      entry["source"] = source_to_json(desc.source);
      if (desc.target_affinity) entry["target_affinity"] = *desc.target_affinity;
      data.push_back(entry);
    }
    doc["data"] = data;
  }
  return doc.dump(2) + "\n";
}

}  // namespace pilotkit
