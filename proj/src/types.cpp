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

#include "pilotkit/types.hpp"

#include <charconv>
#include <cstdio>

#include "pilotkit/errors.hpp"

namespace pilotkit {

const std::set<std::string>& KernelSpec::builtin_names() {
  static const std::set<std::string> names = {
      "sleep",         "busy_spin",      "wordcount_map", "wordcount_reduce",
      "kmeans_assign", "kmeans_update",  "stream_produce", "stream_consume",
      "noop"};
  return names;
}

void KernelSpec::validate() const {
  if (variant == Variant::BUILTIN) {
    if (!builtin_names().count(name)) {
      throw WorkloadError("unknown builtin kernel '" + name + "'");
    }
    if (!argv.empty()) {
      throw WorkloadError("builtin kernel '" + name + "' must not set argv");
    }
  } else {
    if (argv.empty()) {
      throw WorkloadError("external kernel requires a non-empty argv");
    }
  }
}

namespace {

int64_t param_int(const std::map<std::string, std::string>& params,
                  const std::string& key, int64_t fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  int64_t v = 0;
  const std::string& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw WorkloadError("kernel parameter " + key + " is not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace

int64_t KernelSpec::sim_duration_ms() const {
  int64_t v = param_int(parameters, "sim_duration_ms", 0);
  if (v < 0) throw WorkloadError("sim_duration_ms must be >= 0");
  return v;
}

int64_t KernelSpec::sim_output_bytes() const {
  int64_t v = param_int(parameters, "sim_output_bytes", 0);
  if (v < 0) throw WorkloadError("sim_output_bytes must be >= 0");
  return v;
}

KernelSpec KernelSpec::builtin(std::string name,
                               std::map<std::string, std::string> parameters) {
  KernelSpec k;
  k.variant = Variant::BUILTIN;
  k.name = std::move(name);
  k.parameters = std::move(parameters);
  return k;
}

KernelSpec KernelSpec::external(std::vector<std::string> argv) {
  KernelSpec k;
  k.variant = Variant::EXTERNAL;
  k.argv = std::move(argv);
  return k;
}

DataSource DataSource::inline_bytes(std::string payload) {
  DataSource s;
  s.kind = Kind::INLINE;
  s.inline_payload = std::move(payload);
  return s;
}

DataSource DataSource::from_files(std::vector<std::filesystem::path> files) {
  DataSource s;
  s.kind = Kind::FILES;
  s.files = std::move(files);
  return s;
}

DataSource DataSource::generated(std::string generator, uint64_t size_bytes,
                                 uint64_t seed) {
  DataSource s;
  s.kind = Kind::GENERATED;
  s.generator = std::move(generator);
  s.size_bytes = size_bytes;
  s.seed = seed;
  return s;
}

namespace {

std::string padded_id(const char* prefix, uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06llu", prefix,
                static_cast<unsigned long long>(n));
  return buf;
}

}  // namespace

std::string pilot_id(uint64_t n) { return padded_id("p-", n); }
std::string unit_id(uint64_t n) { return padded_id("cu-", n); }
std::string data_unit_id(uint64_t n) { return padded_id("du-", n); }

}  // namespace pilotkit
