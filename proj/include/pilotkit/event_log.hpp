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

#ifndef PILOTKIT_EVENT_LOG_HPP
#define PILOTKIT_EVENT_LOG_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pilotkit {

enum class EntityType { PILOT, UNIT, DATA_UNIT, EXPERIMENT };

const char* to_string(EntityType t);
std::optional<EntityType> parse_entity_type(const std::string& name);

// One row of the run history. `event` is either a state name (a state-machine
// step) or a marker such as STARTUP or STAGE_END; `detail` is a free-form,
// space-separated key=value bag.
struct EventRecord {
  int64_t timestamp_ms = 0;
  EntityType entity_type = EntityType::PILOT;
  std::string entity_id;
  std::string event;
  std::string detail;
};

// Append-only in-memory event history. Appends are serialized; per entity,
// timestamps must be non-decreasing (equal timestamps are fine, going
// backwards throws ClockRegression). All derived metrics are computed from
// this record stream alone.
class EventLog {
 public:
  // Returns the position of the appended record.
  size_t append(EventRecord record);

  size_t size() const;
  std::vector<EventRecord> snapshot() const;

  void write_csv(std::ostream& out) const;
  void write_csv_file(const std::filesystem::path& path) const;

  // Throws MalformedLog on a missing/incorrect header or a row that does not
  // parse.
  static std::vector<EventRecord> read_csv(std::istream& in);
  static std::vector<EventRecord> read_csv_file(const std::filesystem::path& path);

  static const char* csv_header();

 private:
  mutable std::mutex mu_;
  std::vector<EventRecord> records_;
  std::map<std::pair<EntityType, std::string>, int64_t> last_ts_;
};

// Helpers for the `detail` key=value bag.
std::string detail_get(const std::string& detail, const std::string& key);
std::map<std::string, std::string> detail_parse(const std::string& detail);

}  // namespace pilotkit

#endif  // PILOTKIT_EVENT_LOG_HPP
