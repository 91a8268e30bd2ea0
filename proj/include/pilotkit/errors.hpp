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

#ifndef PILOTKIT_ERRORS_HPP
#define PILOTKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pilotkit {

// Base for all library errors. UserError marks problems in caller-supplied
// input (bad files, bad graphs, bad config); RuntimeFailure marks problems
// that arise while executing an otherwise valid request. The CLI maps the
// former to exit code 1 and the latter to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class UserError : public Error {
 public:
  explicit UserError(const std::string& what) : Error(what) {}
};

class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& what) : Error(what) {}
};

#define PILOTKIT_DEFINE_ERROR(NAME, BASE)                \
  class NAME : public BASE {                             \
   public:                                               \
    explicit NAME(const std::string& what) : BASE(what) {} \
  }

PILOTKIT_DEFINE_ERROR(IllegalTransition, RuntimeFailure);
PILOTKIT_DEFINE_ERROR(ClockRegression, RuntimeFailure);
PILOTKIT_DEFINE_ERROR(MalformedLog, UserError);

PILOTKIT_DEFINE_ERROR(UnknownBackend, UserError);
PILOTKIT_DEFINE_ERROR(CapacityExceeded, UserError);
PILOTKIT_DEFINE_ERROR(PilotNotActive, RuntimeFailure);
PILOTKIT_DEFINE_ERROR(SlotOccupied, RuntimeFailure);
PILOTKIT_DEFINE_ERROR(KernelFailure, RuntimeFailure);
PILOTKIT_DEFINE_ERROR(AlreadyTerminal, RuntimeFailure);

PILOTKIT_DEFINE_ERROR(CycleDetected, UserError);
PILOTKIT_DEFINE_ERROR(UnknownDataUnit, UserError);
PILOTKIT_DEFINE_ERROR(UnknownPilot, UserError);
PILOTKIT_DEFINE_ERROR(UnknownUnit, UserError);
PILOTKIT_DEFINE_ERROR(QueueFull, RuntimeFailure);

PILOTKIT_DEFINE_ERROR(SourceMissing, UserError);
PILOTKIT_DEFINE_ERROR(StoreFull, RuntimeFailure);
PILOTKIT_DEFINE_ERROR(DataUnitFailed, RuntimeFailure);
PILOTKIT_DEFINE_ERROR(ChecksumMismatch, RuntimeFailure);

PILOTKIT_DEFINE_ERROR(ManifestError, UserError);
PILOTKIT_DEFINE_ERROR(WorkloadError, UserError);

PILOTKIT_DEFINE_ERROR(SingularDesign, UserError);
PILOTKIT_DEFINE_ERROR(KLargerThanDistinctPoints, UserError);

#undef PILOTKIT_DEFINE_ERROR

}  // namespace pilotkit

#endif  // PILOTKIT_ERRORS_HPP
