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

#include "pilotkit/backend/backend.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "pilotkit/backend/local_backend.hpp"
#include "pilotkit/backend/sim_backend.hpp"
#include "pilotkit/errors.hpp"

namespace pilotkit {

namespace {

// Uniform double in [0,1) from the top 53 bits of one generator draw.
double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  if (s.find('.') != std::string::npos && s.find_first_of("eE") == std::string::npos) {
    // shortest decimal that round-trips is overkill here; trim zeros
    size_t last = s.find_last_not_of('0');
    if (s[last] == '.') --last;
    s.erase(last + 1);
  }
  return s;
}

}  // namespace

double DurationDist::draw(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::CONSTANT:
      return a;
    case Kind::UNIFORM:
      return a + (b - a) * unit_interval(rng);
    case Kind::EXP: {
      double u = unit_interval(rng);
      return -a * std::log1p(-u);
    }
  }
  return 0;
}

double DurationDist::mean() const {
  switch (kind) {
    case Kind::CONSTANT: return a;
    case Kind::UNIFORM: return (a + b) / 2.0;
    case Kind::EXP: return a;
  }
  return 0;
}

std::string DurationDist::str() const {
  switch (kind) {
    case Kind::CONSTANT: return "CONSTANT(" + format_number(a) + ")";
    case Kind::UNIFORM: return "UNIFORM(" + format_number(a) + "," + format_number(b) + ")";
    case Kind::EXP: return "EXP(" + format_number(a) + ")";
  }
  return "";
}

DurationDist DurationDist::constant(double v) {
  DurationDist d;
  d.kind = Kind::CONSTANT;
  d.a = v;
  return d;
}

DurationDist DurationDist::parse(const std::string& text) {
  size_t open = text.find('(');
  if (open == std::string::npos || text.empty() || text.back() != ')') {
    throw ManifestError("cannot parse distribution '" + text + "'");
  }
  std::string name = text.substr(0, open);
  std::string args = text.substr(open + 1, text.size() - open - 2);
  std::vector<double> values;
  std::istringstream is(args);
  std::string token;
  while (std::getline(is, token, ',')) {
    try {
      size_t used = 0;
      values.push_back(std::stod(token, &used));
      while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ManifestError("bad distribution argument '" + token + "' in '" + text + "'");
    }
  }
  DurationDist d;
  if (name == "CONSTANT") {
    if (values.size() != 1) throw ManifestError("CONSTANT takes one argument: '" + text + "'");
    d.kind = Kind::CONSTANT;
    d.a = values[0];
  } else if (name == "UNIFORM") {
    if (values.size() != 2) throw ManifestError("UNIFORM takes two arguments: '" + text + "'");
    d.kind = Kind::UNIFORM;
    d.a = values[0];
    d.b = values[1];
    if (d.b < d.a) throw ManifestError("UNIFORM upper bound below lower bound: '" + text + "'");
  } else if (name == "EXP") {
    if (values.size() != 1) throw ManifestError("EXP takes one argument: '" + text + "'");
    d.kind = Kind::EXP;
    d.a = values[0];
  } else {
    throw ManifestError("unknown distribution '" + name + "'");
  }
  if (d.a < 0 || d.b < 0) throw ManifestError("negative distribution parameter: '" + text + "'");
  return d;
}

const char* to_string(BackendKind k) {
  switch (k) {
    case BackendKind::LOCAL: return "LOCAL";
    case BackendKind::SIM_BATCH: return "SIM_BATCH";
    case BackendKind::SIM_CLOUD: return "SIM_CLOUD";
  }
  return "?";
}

std::optional<BackendKind> parse_backend_kind(const std::string& name) {
  std::string upper;
  for (char c : name) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "LOCAL") return BackendKind::LOCAL;
  if (upper == "SIM_BATCH") return BackendKind::SIM_BATCH;
  if (upper == "SIM_CLOUD") return BackendKind::SIM_CLOUD;
  return std::nullopt;
}

namespace {

const std::set<std::string>& allowed_parameters(BackendKind kind) {
  static const std::set<std::string> batch = {
      "queue_wait_dist", "startup_overhead", "clock_resolution", "seed",
      "bandwidth_mib_s", "store_capacity_bytes"};
  static const std::set<std::string> cloud = {
      "provision_delay", "seed", "bandwidth_mib_s", "store_capacity_bytes"};
  static const std::set<std::string> local = {
      "max_processes", "store_capacity_bytes"};
  switch (kind) {
    case BackendKind::SIM_BATCH: return batch;
    case BackendKind::SIM_CLOUD: return cloud;
    case BackendKind::LOCAL: return local;
  }
  return local;
}

double parse_double_param(const std::map<std::string, std::string>& params,
                          const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ManifestError("backend parameter " + key + " is not a number: '" + it->second + "'");
  }
}

int64_t parse_int_param(const std::map<std::string, std::string>& params,
                        const std::string& key, int64_t fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    size_t used = 0;
    long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ManifestError("backend parameter " + key + " is not an integer: '" + it->second + "'");
  }
}

}  // namespace

void BackendDescriptor::validate() const {
  if (backend_id.empty()) throw ManifestError("backend_id must not be empty");
  const auto& allowed = allowed_parameters(kind);
  for (const auto& [key, value] : parameters) {
    (void)value;
    if (!allowed.count(key)) {
      throw ManifestError("unknown parameter '" + key + "' for backend kind " +
                          to_string(kind));
    }
  }
  if (is_sim() && !has_seed()) {
    throw ManifestError(std::string(to_string(kind)) + " backend requires a seed");
  }
  if (kind == BackendKind::SIM_BATCH) queue_wait_dist();  // parse check
  if (startup_overhead_s() < 0 || provision_delay_s() < 0) {
    throw ManifestError("backend durations must be >= 0");
  }
  if (clock_resolution_ms() < 1) {
    throw ManifestError("clock_resolution must be >= 1 ms");
  }
  if (max_processes() < 1) throw ManifestError("max_processes must be >= 1");
  if (bandwidth_mib_s() <= 0) throw ManifestError("bandwidth_mib_s must be > 0");
}

DurationDist BackendDescriptor::queue_wait_dist() const {
  auto it = parameters.find("queue_wait_dist");
  if (it == parameters.end()) return DurationDist::constant(0);
  return DurationDist::parse(it->second);
}

double BackendDescriptor::startup_overhead_s() const {
  return parse_double_param(parameters, "startup_overhead", 0);
}

double BackendDescriptor::provision_delay_s() const {
  return parse_double_param(parameters, "provision_delay", 0);
}

int64_t BackendDescriptor::clock_resolution_ms() const {
  return parse_int_param(parameters, "clock_resolution", 1);
}

bool BackendDescriptor::has_seed() const { return parameters.count("seed") > 0; }

uint64_t BackendDescriptor::seed() const {
  auto it = parameters.find("seed");
  if (it == parameters.end()) return 0;
  try {
    size_t used = 0;
    unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ManifestError("backend seed is not an unsigned integer: '" + it->second + "'");
  }
}

int BackendDescriptor::max_processes() const {
  return static_cast<int>(parse_int_param(parameters, "max_processes", 8));
}

double BackendDescriptor::bandwidth_mib_s() const {
  return parse_double_param(parameters, "bandwidth_mib_s", 100);
}

std::optional<uint64_t> BackendDescriptor::store_capacity_bytes() const {
  auto it = parameters.find("store_capacity_bytes");
  if (it == parameters.end()) return std::nullopt;
  int64_t v = parse_int_param(parameters, "store_capacity_bytes", 0);
  if (v < 0) throw ManifestError("store_capacity_bytes must be >= 0");
  return static_cast<uint64_t>(v);
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor) {
  descriptor.validate();
  switch (descriptor.kind) {
    case BackendKind::SIM_BATCH:
    case BackendKind::SIM_CLOUD:
      return std::make_unique<SimBackend>(descriptor);
    case BackendKind::LOCAL:
      return std::make_unique<LocalBackend>(descriptor);
  }
  throw UnknownBackend("unsupported backend kind");
}

}  // namespace pilotkit
