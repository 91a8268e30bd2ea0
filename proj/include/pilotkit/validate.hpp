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

#ifndef PILOTKIT_VALIDATE_HPP
#define PILOTKIT_VALIDATE_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "pilotkit/event_log.hpp"

namespace pilotkit {

// One broken invariant found while replaying an event log.
struct Violation {
  size_t record_index = 0;  // 0-based position in the log
  std::string entity_id;
  std::string message;

  std::string str() const;  // "record N (<entity>): <message>"
};

// Replays an event log and checks the runtime invariants: legal state
// sequences per entity, per-entity timestamp monotonicity, units bound only
// to ACTIVE pilots, slot bounds and exclusivity, and dependency completion
// before a dependent binds. Returns every violation found, in log order;
// an empty result means the log is consistent. Throws MalformedLog on an
// empty log.
std::vector<Violation> validate_event_log(const std::vector<EventRecord>& events);
std::vector<Violation> validate_event_log_file(const std::filesystem::path& csv_path);

}  // namespace pilotkit

#endif  // PILOTKIT_VALIDATE_HPP
