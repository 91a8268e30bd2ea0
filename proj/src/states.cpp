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

#include "pilotkit/states.hpp"

#include <sstream>

#include "pilotkit/errors.hpp"

namespace pilotkit {

const char* to_string(PilotState s) {
  switch (s) {
    case PilotState::NEW: return "NEW";
    case PilotState::SUBMITTED: return "SUBMITTED";
    case PilotState::QUEUED: return "QUEUED";
    case PilotState::ACTIVE: return "ACTIVE";
    case PilotState::DONE: return "DONE";
    case PilotState::FAILED: return "FAILED";
    case PilotState::CANCELED: return "CANCELED";
  }
  return "?";
}

const char* to_string(UnitState s) {
  switch (s) {
    case UnitState::NEW: return "NEW";
    case UnitState::PENDING: return "PENDING";
    case UnitState::BOUND: return "BOUND";
    case UnitState::RUNNING: return "RUNNING";
    case UnitState::DONE: return "DONE";
    case UnitState::FAILED: return "FAILED";
    case UnitState::CANCELED: return "CANCELED";
  }
  return "?";
}

const char* to_string(DataState s) {
  switch (s) {
    case DataState::NEW: return "NEW";
    case DataState::PENDING: return "PENDING";
    case DataState::AVAILABLE: return "AVAILABLE";
    case DataState::FAILED: return "FAILED";
  }
  return "?";
}

const char* to_string(PilotEvent e) {
  switch (e) {
    case PilotEvent::SUBMIT: return "SUBMIT";
    case PilotEvent::ENQUEUE: return "ENQUEUE";
    case PilotEvent::ACTIVATE: return "ACTIVATE";
    case PilotEvent::COMPLETE: return "COMPLETE";
    case PilotEvent::FAIL: return "FAIL";
    case PilotEvent::CANCEL: return "CANCEL";
  }
  return "?";
}

const char* to_string(UnitEvent e) {
  switch (e) {
    case UnitEvent::SUBMIT: return "SUBMIT";
    case UnitEvent::BIND: return "BIND";
    case UnitEvent::RUN: return "RUN";
    case UnitEvent::COMPLETE: return "COMPLETE";
    case UnitEvent::FAIL: return "FAIL";
    case UnitEvent::CANCEL: return "CANCEL";
  }
  return "?";
}

std::optional<PilotState> parse_pilot_state(const std::string& name) {
  if (name == "NEW") return PilotState::NEW;
  if (name == "SUBMITTED") return PilotState::SUBMITTED;
  if (name == "QUEUED") return PilotState::QUEUED;
  if (name == "ACTIVE") return PilotState::ACTIVE;
  if (name == "DONE") return PilotState::DONE;
  if (name == "FAILED") return PilotState::FAILED;
  if (name == "CANCELED") return PilotState::CANCELED;
  return std::nullopt;
}

std::optional<UnitState> parse_unit_state(const std::string& name) {
  if (name == "NEW") return UnitState::NEW;
  if (name == "PENDING") return UnitState::PENDING;
  if (name == "BOUND") return UnitState::BOUND;
  if (name == "RUNNING") return UnitState::RUNNING;
  if (name == "DONE") return UnitState::DONE;
  if (name == "FAILED") return UnitState::FAILED;
  if (name == "CANCELED") return UnitState::CANCELED;
  return std::nullopt;
}

std::optional<DataState> parse_data_state(const std::string& name) {
  if (name == "NEW") return DataState::NEW;
  if (name == "PENDING") return DataState::PENDING;
  if (name == "AVAILABLE") return DataState::AVAILABLE;
  if (name == "FAILED") return DataState::FAILED;
  return std::nullopt;
}

bool is_terminal(PilotState s) {
  return s == PilotState::DONE || s == PilotState::FAILED || s == PilotState::CANCELED;
}

bool is_terminal(UnitState s) {
  return s == UnitState::DONE || s == UnitState::FAILED || s == UnitState::CANCELED;
}

bool is_terminal(DataState s) {
  return s == DataState::AVAILABLE || s == DataState::FAILED;
}

bool pilot_transition_allowed(PilotState from, PilotState to) {
  switch (from) {
    case PilotState::NEW:
      return to == PilotState::SUBMITTED;
    case PilotState::SUBMITTED:
      return to == PilotState::QUEUED || to == PilotState::FAILED ||
             to == PilotState::CANCELED;
    case PilotState::QUEUED:
      return to == PilotState::ACTIVE || to == PilotState::FAILED ||
             to == PilotState::CANCELED;
    case PilotState::ACTIVE:
      return to == PilotState::DONE || to == PilotState::FAILED ||
             to == PilotState::CANCELED;
    case PilotState::DONE:
    case PilotState::FAILED:
    case PilotState::CANCELED:
      return false;
  }
  return false;
}

bool unit_transition_allowed(UnitState from, UnitState to) {
  switch (from) {
    case UnitState::NEW:
      return to == UnitState::PENDING;
    case UnitState::PENDING:
      return to == UnitState::BOUND || to == UnitState::CANCELED;
    case UnitState::BOUND:
      return to == UnitState::RUNNING || to == UnitState::CANCELED;
    case UnitState::RUNNING:
      return to == UnitState::DONE || to == UnitState::FAILED ||
             to == UnitState::CANCELED;
    case UnitState::DONE:
    case UnitState::FAILED:
    case UnitState::CANCELED:
      return false;
  }
  return false;
}

bool data_transition_allowed(DataState from, DataState to) {
  switch (from) {
    case DataState::NEW:
      return to == DataState::PENDING;
    case DataState::PENDING:
      return to == DataState::AVAILABLE || to == DataState::FAILED;
    case DataState::AVAILABLE:
    case DataState::FAILED:
      return false;
  }
  return false;
}

namespace {

template <typename State, typename Event>
[[noreturn]] void throw_illegal(State from, Event event) {
  std::ostringstream os;
  os << "illegal transition: event " << to_string(event) << " in state "
     << to_string(from);
  throw IllegalTransition(os.str());
}

}  // namespace

PilotState transition(PilotState from, PilotEvent event) {
  switch (event) {
    case PilotEvent::SUBMIT:
      if (from == PilotState::NEW) return PilotState::SUBMITTED;
      break;
    case PilotEvent::ENQUEUE:
      if (from == PilotState::SUBMITTED) return PilotState::QUEUED;
      break;
    case PilotEvent::ACTIVATE:
      if (from == PilotState::QUEUED) return PilotState::ACTIVE;
      break;
    case PilotEvent::COMPLETE:
      if (from == PilotState::ACTIVE) return PilotState::DONE;
      break;
    case PilotEvent::FAIL:
      if (pilot_transition_allowed(from, PilotState::FAILED)) return PilotState::FAILED;
      break;
    case PilotEvent::CANCEL:
      if (pilot_transition_allowed(from, PilotState::CANCELED)) return PilotState::CANCELED;
      break;
  }
  throw_illegal(from, event);
}

UnitState transition(UnitState from, UnitEvent event) {
  switch (event) {
    case UnitEvent::SUBMIT:
      if (from == UnitState::NEW) return UnitState::PENDING;
      break;
    case UnitEvent::BIND:
      if (from == UnitState::PENDING) return UnitState::BOUND;
      break;
    case UnitEvent::RUN:
      if (from == UnitState::BOUND) return UnitState::RUNNING;
      break;
    case UnitEvent::COMPLETE:
      if (from == UnitState::RUNNING) return UnitState::DONE;
      break;
    case UnitEvent::FAIL:
      if (from == UnitState::RUNNING) return UnitState::FAILED;
      break;
    case UnitEvent::CANCEL:
      if (unit_transition_allowed(from, UnitState::CANCELED)) return UnitState::CANCELED;
      break;
  }
  throw_illegal(from, event);
}

}  // namespace pilotkit
