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

#include "pilotkit/validate.hpp"

#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "pilotkit/errors.hpp"
#include "pilotkit/states.hpp"

namespace pilotkit {

namespace {

// Pulls `key=value` out of a space-separated detail string.
std::string detail_get(const std::string& detail, const std::string& key) {
  std::istringstream is(detail);
  std::string token;
  while (is >> token) {
    if (token.size() > key.size() && token.compare(0, key.size(), key) == 0 &&
        token[key.size()] == '=') {
      return token.substr(key.size() + 1);
    }
  }
  return {};
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_index(const std::string& text, long& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  long value = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') return false;
  out = value;
  return true;
}

struct PilotReplay {
  PilotState state = PilotState::NEW;
  bool seen = false;
  long slots = 1;
  std::map<long, std::string> occupied;  // slot index -> unit id
};

struct UnitReplay {
  UnitState state = UnitState::NEW;
  bool seen = false;
  std::vector<std::string> deps;
  std::string bound_pilot;
  std::vector<long> held_slots;
};

struct DataReplay {
  DataState state = DataState::NEW;
  bool seen = false;
};

struct Replayer {
  std::vector<Violation> violations;
  std::map<std::string, PilotReplay> pilots;
  std::map<std::string, UnitReplay> units;
  std::map<std::string, DataReplay> data;
  std::map<std::string, int64_t> last_ts;  // per entity
  size_t index = 0;

  void flag(const std::string& id, const std::string& message) {
    violations.push_back({index, id, message});
  }

  void release_slots(UnitReplay& u) {
    if (u.bound_pilot.empty()) return;
    auto it = pilots.find(u.bound_pilot);
    if (it != pilots.end()) {
      for (long s : u.held_slots) {
        auto occ = it->second.occupied.find(s);
        if (occ != it->second.occupied.end()) it->second.occupied.erase(occ);
      }
    }
    u.bound_pilot.clear();
    u.held_slots.clear();
  }

  void on_pilot(const EventRecord& e) {
    auto& p = pilots[e.entity_id];
    if (e.event == "NEW") {
      if (p.seen) {
        flag(e.entity_id, "duplicate NEW event");
        return;
      }
      p.seen = true;
      std::string slots = detail_get(e.detail, "slots");
      if (!slots.empty()) parse_index(slots, p.slots);
      return;
    }
    if (!p.seen) {
      flag(e.entity_id, "first event must be NEW, got " + e.event);
      p.seen = true;  // report once
    }
    if (e.event == "STARTUP") {
      if (p.state != PilotState::SUBMITTED && p.state != PilotState::QUEUED) {
        flag(e.entity_id,
             "STARTUP while " + std::string(to_string(p.state)));
      }
      return;
    }
    auto next = parse_pilot_state(e.event);
    if (!next) {
      flag(e.entity_id, "unknown pilot event " + e.event);
      return;
    }
    if (!pilot_transition_allowed(p.state, *next)) {
      flag(e.entity_id, "illegal transition " +
                            std::string(to_string(p.state)) + " -> " +
                            std::string(to_string(*next)));
    }
    p.state = *next;
    if (is_terminal(p.state)) p.occupied.clear();
  }

  void on_unit(const EventRecord& e) {
    auto& u = units[e.entity_id];
    if (e.event == "NEW") {
      if (u.seen) {
        flag(e.entity_id, "duplicate NEW event");
        return;
      }
      u.seen = true;
      u.deps = split_list(detail_get(e.detail, "deps"), ';');
      return;
    }
    if (!u.seen) {
      flag(e.entity_id, "first event must be NEW, got " + e.event);
      u.seen = true;
    }
    auto next = parse_unit_state(e.event);
    if (!next) {
      flag(e.entity_id, "unknown unit event " + e.event);
      return;
    }
    if (!unit_transition_allowed(u.state, *next)) {
      flag(e.entity_id, "illegal transition " +
                            std::string(to_string(u.state)) + " -> " +
                            std::string(to_string(*next)));
      u.state = *next;
      return;
    }
    u.state = *next;

    if (*next == UnitState::BOUND) {
      on_bind(e, u);
    } else if (*next != UnitState::RUNNING) {
      // PENDING (requeue) or a terminal state gives the slots back.
      release_slots(u);
    }
  }

  void on_bind(const EventRecord& e, UnitReplay& u) {
    const std::string pilot_id = detail_get(e.detail, "pilot");
    if (pilot_id.empty()) {
      flag(e.entity_id, "BOUND without a pilot");
      return;
    }
    auto pit = pilots.find(pilot_id);
    if (pit == pilots.end()) {
      flag(e.entity_id, "bound to unknown pilot " + pilot_id);
      return;
    }
    PilotReplay& p = pit->second;
    if (p.state != PilotState::ACTIVE) {
      flag(e.entity_id, "bound to pilot " + pilot_id + " in state " +
                            to_string(p.state));
    }
    for (const auto& dep : u.deps) {
      auto dit = units.find(dep);
      if (dit == units.end() || dit->second.state != UnitState::DONE) {
        flag(e.entity_id, "bound before dependency " + dep + " completed");
      }
    }
    u.bound_pilot = pilot_id;
    for (const auto& token : split_list(detail_get(e.detail, "slots"), ';')) {
      long slot = -1;
      if (!parse_index(token, slot)) {
        flag(e.entity_id, "unparsable slot index '" + token + "'");
        continue;
      }
      if (slot < 0 || slot >= p.slots) {
        flag(e.entity_id, "slot " + token + " out of range on pilot " +
                              pilot_id + " with " + std::to_string(p.slots) +
                              " slots");
        continue;
      }
      auto [it, inserted] = p.occupied.emplace(slot, e.entity_id);
      if (!inserted) {
        flag(e.entity_id, "slot " + token + " on pilot " + pilot_id +
                              " already held by " + it->second);
      } else {
        u.held_slots.push_back(slot);
      }
    }
  }

  void on_data(const EventRecord& e) {
    auto& d = data[e.entity_id];
    if (e.event == "NEW") {
      if (d.seen) {
        flag(e.entity_id, "duplicate NEW event");
        return;
      }
      d.seen = true;
      return;
    }
    if (!d.seen) {
      flag(e.entity_id, "first event must be NEW, got " + e.event);
      d.seen = true;
    }
    if (e.event == "STAGE_BEGIN" || e.event == "STAGE_END") {
      if (d.state != DataState::PENDING && d.state != DataState::AVAILABLE) {
        flag(e.entity_id,
             e.event + " while " + std::string(to_string(d.state)));
      }
      return;
    }
    auto next = parse_data_state(e.event);
    if (!next) {
      flag(e.entity_id, "unknown data event " + e.event);
      return;
    }
    if (!data_transition_allowed(d.state, *next)) {
      flag(e.entity_id, "illegal transition " +
                            std::string(to_string(d.state)) + " -> " +
                            std::string(to_string(*next)));
    }
    d.state = *next;
  }
};

}  // namespace

std::string Violation::str() const {
  return "record " + std::to_string(record_index) + " (" + entity_id +
         "): " + message;
}

std::vector<Violation> validate_event_log(const std::vector<EventRecord>& events) {
  if (events.empty()) throw MalformedLog("empty event log");

  Replayer r;
  for (size_t i = 0; i < events.size(); ++i) {
    const EventRecord& e = events[i];
    r.index = i;

    std::string key = std::to_string(static_cast<int>(e.entity_type)) + "/" +
                      e.entity_id;
    auto [it, inserted] = r.last_ts.emplace(key, e.timestamp_ms);
    if (!inserted) {
      if (e.timestamp_ms < it->second) {
        r.flag(e.entity_id,
               "timestamp went backwards: " + std::to_string(e.timestamp_ms) +
                   " after " + std::to_string(it->second));
      }
      it->second = std::max(it->second, e.timestamp_ms);
    }

    switch (e.entity_type) {
      case EntityType::PILOT:
        r.on_pilot(e);
        break;
      case EntityType::UNIT:
        r.on_unit(e);
        break;
      case EntityType::DATA_UNIT:
        r.on_data(e);
        break;
      case EntityType::EXPERIMENT:
        break;  // free-form markers; only monotonicity applies
    }
  }
  return std::move(r.violations);
}

std::vector<Violation> validate_event_log_file(
    const std::filesystem::path& csv_path) {
  return validate_event_log(EventLog::read_csv_file(csv_path));
}

}  // namespace pilotkit
