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

#ifndef PILOTKIT_STATES_HPP
#define PILOTKIT_STATES_HPP

#include <optional>
#include <string>

namespace pilotkit {

enum class PilotState { NEW, SUBMITTED, QUEUED, ACTIVE, DONE, FAILED, CANCELED };

enum class UnitState { NEW, PENDING, BOUND, RUNNING, DONE, FAILED, CANCELED };

enum class DataState { NEW, PENDING, AVAILABLE, FAILED };

// Transition labels. Each label maps a state to its unique successor; the
// managers drive entities exclusively through these.
enum class PilotEvent { SUBMIT, ENQUEUE, ACTIVATE, COMPLETE, FAIL, CANCEL };
enum class UnitEvent { SUBMIT, BIND, RUN, COMPLETE, FAIL, CANCEL };

const char* to_string(PilotState s);
const char* to_string(UnitState s);
const char* to_string(DataState s);
const char* to_string(PilotEvent e);
const char* to_string(UnitEvent e);

std::optional<PilotState> parse_pilot_state(const std::string& name);
std::optional<UnitState> parse_unit_state(const std::string& name);
std::optional<DataState> parse_data_state(const std::string& name);

bool is_terminal(PilotState s);
bool is_terminal(UnitState s);
bool is_terminal(DataState s);

// Legal-transition predicates over (from, to) pairs. Terminal states admit
// no outgoing transitions.
bool pilot_transition_allowed(PilotState from, PilotState to);
bool unit_transition_allowed(UnitState from, UnitState to);
bool data_transition_allowed(DataState from, DataState to);

// Apply a labeled event to a state. Throws IllegalTransition when the label
// is not defined for the given state.
PilotState transition(PilotState from, PilotEvent event);
UnitState transition(UnitState from, UnitEvent event);

}  // namespace pilotkit

#endif  // PILOTKIT_STATES_HPP
