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

#include <doctest.h>

#include <sstream>

#include "pilotkit/errors.hpp"
#include "pilotkit/event_log.hpp"

using namespace pilotkit;

TEST_CASE("csv header is the exact published contract") {
  CHECK(std::string(EventLog::csv_header()) ==
        "timestamp_ms,entity_type,entity_id,event,detail");
}

TEST_CASE("per-entity timestamps must not regress") {
  EventLog log;
  log.append({100, EntityType::PILOT, "p-1", "NEW", ""});
  log.append({100, EntityType::PILOT, "p-1", "SUBMITTED", ""});  // equal is fine
  log.append({150, EntityType::PILOT, "p-1", "QUEUED", ""});
  CHECK_THROWS_AS(log.append({120, EntityType::PILOT, "p-1", "ACTIVE", ""}),
                  ClockRegression);

  // Other entities and other entity types are tracked independently.
  log.append({10, EntityType::PILOT, "p-2", "NEW", ""});
  log.append({10, EntityType::UNIT, "p-1", "NEW", ""});
  CHECK(log.size() == 5);
}

TEST_CASE("snapshot preserves append order") {
  EventLog log;
  log.append({1, EntityType::UNIT, "u-1", "NEW", "a=1"});
  log.append({2, EntityType::UNIT, "u-2", "NEW", "a=2"});
  auto records = log.snapshot();
  REQUIRE(records.size() == 2);
  CHECK(records[0].entity_id == "u-1");
  CHECK(records[1].entity_id == "u-2");
  CHECK(records[0].detail == "a=1");
}

TEST_CASE("csv round-trips including quoting") {
  EventLog log;
  log.append({0, EntityType::PILOT, "p-000001", "NEW", "slots=4"});
  log.append({5, EntityType::UNIT, "u,comma", "NEW", "msg=has,comma"});
  log.append({6, EntityType::UNIT, "u\"quote", "NEW", "msg=\"quoted\""});
  log.append({7, EntityType::DATA_UNIT, "d-1", "AVAILABLE", "text=line1\nline2"});
  log.append({8, EntityType::EXPERIMENT, "exp", "MARK", ""});

  std::ostringstream out;
  log.write_csv(out);
  std::istringstream in(out.str());
  auto records = EventLog::read_csv(in);

  auto original = log.snapshot();
  REQUIRE(records.size() == original.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].timestamp_ms == original[i].timestamp_ms);
    CHECK(records[i].entity_type == original[i].entity_type);
    CHECK(records[i].entity_id == original[i].entity_id);
    CHECK(records[i].event == original[i].event);
    CHECK(records[i].detail == original[i].detail);
  }
}

TEST_CASE("read_csv rejects malformed input") {
  {
    std::istringstream in("wrong,header,entirely\n");
    CHECK_THROWS_AS(EventLog::read_csv(in), MalformedLog);
  }
  {
    std::istringstream in("");
    CHECK_THROWS_AS(EventLog::read_csv(in), MalformedLog);
  }
  {
    std::istringstream in(
        "timestamp_ms,entity_type,entity_id,event,detail\n"
        "notanumber,PILOT,p-1,NEW,\n");
    CHECK_THROWS_AS(EventLog::read_csv(in), MalformedLog);
  }
  {
    std::istringstream in(
        "timestamp_ms,entity_type,entity_id,event,detail\n"
        "5,NOT_A_TYPE,p-1,NEW,\n");
    CHECK_THROWS_AS(EventLog::read_csv(in), MalformedLog);
  }
  {
    // Too few columns.
    std::istringstream in(
        "timestamp_ms,entity_type,entity_id,event,detail\n"
        "5,PILOT,p-1\n");
    CHECK_THROWS_AS(EventLog::read_csv(in), MalformedLog);
  }
}

TEST_CASE("header-only csv parses as an empty log") {
  std::istringstream in("timestamp_ms,entity_type,entity_id,event,detail\n");
  CHECK(EventLog::read_csv(in).empty());
}

TEST_CASE("detail bag helpers") {
  std::string detail = "pilot=p-000001 bytes=1024 list=a;b;c";
  CHECK(detail_get(detail, "pilot") == "p-000001");
  CHECK(detail_get(detail, "bytes") == "1024");
  CHECK(detail_get(detail, "list") == "a;b;c");
  CHECK(detail_get(detail, "missing") == "");
  CHECK(detail_get("", "k") == "");

  auto bag = detail_parse(detail);
  CHECK(bag.size() == 3);
  CHECK(bag["list"] == "a;b;c");
}

TEST_CASE("entity type names round-trip") {
  for (EntityType t : {EntityType::PILOT, EntityType::UNIT, EntityType::DATA_UNIT,
                       EntityType::EXPERIMENT}) {
    auto parsed = parse_entity_type(to_string(t));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == t);
  }
  CHECK_FALSE(parse_entity_type("JOB").has_value());
}
