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

#ifndef PILOTKIT_BACKEND_KERNELS_HPP
#define PILOTKIT_BACKEND_KERNELS_HPP

#include <atomic>
#include <functional>
#include <memory>

#include "pilotkit/backend/backend.hpp"

namespace pilotkit {

struct KernelCall {
  const ComputeUnit* unit = nullptr;
  const LaunchContext* ctx = nullptr;
  std::shared_ptr<std::atomic<bool>> cancel;
  std::function<int64_t()> now_ms;
};

// Executes one BUILTIN kernel in-process (LOCAL backend only). Throws on
// kernel-level errors; the caller converts exceptions into FAILED exit info.
ExitInfo run_builtin_kernel(const KernelCall& call);

// Text helpers shared with the scenario drivers.
std::vector<std::pair<std::string, int64_t>> wordcount_text(const std::string& text);
uint64_t wordcount_bucket(const std::string& word, int n_reducers);

std::string format_double(double v);
std::vector<std::vector<double>> parse_points(const std::string& text);
std::string serialize_centroids(const std::vector<std::vector<double>>& centroids);
std::vector<std::vector<double>> parse_centroids(const std::string& text);

}  // namespace pilotkit

#endif  // PILOTKIT_BACKEND_KERNELS_HPP
