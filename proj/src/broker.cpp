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

#include "pilotkit/backend/broker.hpp"

namespace pilotkit {

bool Broker::publish(const Message& m) {
  std::lock_guard<std::mutex> lock(mu_);
  if (queue_.size() >= bound_) {
    ++dropped_;
    return false;
  }
  queue_.push_back(m);
  ++produced_;
  return true;
}

size_t Broker::drain(std::vector<Message>& out, size_t max_messages) {
  std::lock_guard<std::mutex> lock(mu_);
  size_t n = 0;
  while (!queue_.empty() && n < max_messages) {
    out.push_back(queue_.front());
    queue_.pop_front();
    ++n;
  }
  return n;
}

void Broker::producer_enter() {
  std::lock_guard<std::mutex> lock(mu_);
  ++open_producers_;
  any_producer_seen_ = true;
}

void Broker::producer_exit() {
  std::lock_guard<std::mutex> lock(mu_);
  --open_producers_;
}

bool Broker::drained() const {
  std::lock_guard<std::mutex> lock(mu_);
  return any_producer_seen_ && open_producers_ == 0 && queue_.empty();
}

uint64_t Broker::produced() const {
  std::lock_guard<std::mutex> lock(mu_);
  return produced_;
}

uint64_t Broker::dropped() const {
  std::lock_guard<std::mutex> lock(mu_);
  return dropped_;
}

size_t Broker::depth() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.size();
}

std::shared_ptr<Broker> BrokerRegistry::get_or_create(const std::string& name,
                                                      size_t bound) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = brokers_.find(name);
  if (it != brokers_.end()) return it->second;
  auto broker = std::make_shared<Broker>(bound);
  brokers_[name] = broker;
  return broker;
}

}  // namespace pilotkit
