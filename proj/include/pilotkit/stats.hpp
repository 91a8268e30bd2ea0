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

#ifndef PILOTKIT_STATS_HPP
#define PILOTKIT_STATS_HPP

#include <optional>
#include <vector>

namespace pilotkit {

// Nearest-rank percentile: the smallest element such that at least p percent
// of the sample is <= it. p is clamped to [0, 100]; empty input yields
// nullopt. Takes the sample by value because it sorts in place.
std::optional<double> percentile_nearest_rank(std::vector<double> values, double p);

// Arithmetic mean; nullopt on empty input.
std::optional<double> mean_of(const std::vector<double>& values);

}  // namespace pilotkit

#endif  // PILOTKIT_STATS_HPP
