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

#ifndef PILOTKIT_MANAGER_GENERATORS_HPP
#define PILOTKIT_MANAGER_GENERATORS_HPP

#include <cstdint>
#include <string>

#include "pilotkit/types.hpp"

namespace pilotkit {

// Deterministic synthetic payloads. Known generators: "random_text" (space
// separated common words) and "zero_bytes". Throws WorkloadError otherwise.
std::string generate_payload(const std::string& generator, uint64_t size_bytes,
                             uint64_t seed);

// Reconstructs the bytes of a data unit from its declaration: INLINE payload,
// FILES contents, or regenerated GENERATED content. For UNIT_OUTPUT units the
// bytes exist only as replicas; reads the first replica with a real path and
// throws WorkloadError when the content is purely virtual.
std::string source_bytes(const DataUnit& du);

}  // namespace pilotkit

#endif  // PILOTKIT_MANAGER_GENERATORS_HPP
