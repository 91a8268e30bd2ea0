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

#ifndef PILOTKIT_BACKEND_BROKER_HPP
#define PILOTKIT_BACKEND_BROKER_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace pilotkit {

struct Message {
  uint64_t sequence = 0;
  int64_t produced_ms = 0;
  uint32_t size_bytes = 0;
};

// In-process bounded message queue shared by stream_produce and
// stream_consume kernels. Publishing to a full queue drops the message and
// counts it (backpressure is reported, never fatal).
class Broker {
 public:
  explicit Broker(size_t bound) : bound_(bound) {}

  bool publish(const Message& m);
  size_t drain(std::vector<Message>& out, size_t max_messages);

  void producer_enter();
  void producer_exit();

  bool drained() const;  // all producers done and queue empty
  uint64_t produced() const;
  uint64_t dropped() const;
  size_t depth() const;
  size_t bound() const { return bound_; }

 private:
  const size_t bound_;
  mutable std::mutex mu_;
  std::deque<Message> queue_;
  int open_producers_ = 0;
  bool any_producer_seen_ = false;
  uint64_t produced_ = 0;
  uint64_t dropped_ = 0;
};

// Named broker lookup shared between kernels of one run.
class BrokerRegistry {
 public:
  std::shared_ptr<Broker> get_or_create(const std::string& name, size_t bound);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Broker>> brokers_;
};

}  // namespace pilotkit

#endif  // PILOTKIT_BACKEND_BROKER_HPP
