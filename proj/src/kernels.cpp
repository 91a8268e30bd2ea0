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

#include "pilotkit/backend/kernels.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "pilotkit/backend/broker.hpp"
#include "pilotkit/errors.hpp"
#include "pilotkit/hash.hpp"

namespace pilotkit {

namespace {

std::string param(const KernelCall& call, const std::string& key,
                  const std::string& fallback) {
  const auto& params = call.unit->description.kernel.parameters;
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

int64_t param_int(const KernelCall& call, const std::string& key, int64_t fallback) {
  std::string v = param(call, key, "");
  if (v.empty()) return fallback;
  return std::stoll(v);
}

double param_double(const KernelCall& call, const std::string& key, double fallback) {
  std::string v = param(call, key, "");
  if (v.empty()) return fallback;
  return std::stod(v);
}

bool canceled(const KernelCall& call) {
  return call.cancel && call.cancel->load();
}

void interruptible_sleep(const KernelCall& call, int64_t duration_ms) {
  int64_t remaining = duration_ms;
  while (remaining > 0 && !canceled(call)) {
    int64_t chunk = std::min<int64_t>(remaining, 10);
    std::this_thread::sleep_for(std::chrono::milliseconds(chunk));
    remaining -= chunk;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KernelFailure("cannot read input " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw KernelFailure("cannot write output " + path.string());
  out << content;
}

const std::filesystem::path& single_input(const KernelCall& call) {
  if (call.ctx->input_paths.size() != 1) {
    throw KernelFailure(call.unit->description.kernel.name + " expects exactly one input, got " +
                        std::to_string(call.ctx->input_paths.size()));
  }
  return call.ctx->input_paths.begin()->second;
}

ExitInfo kernel_sleep(const KernelCall& call) {
  interruptible_sleep(call, param_int(call, "duration_ms", 0));
  return {};
}

ExitInfo kernel_busy_spin(const KernelCall& call) {
  int64_t duration_ms = param_int(call, "duration_ms", 0);
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(duration_ms);
  volatile uint64_t sink = 0;
  while (std::chrono::steady_clock::now() < deadline && !canceled(call)) {
    uint64_t acc = sink;
    for (int i = 0; i < 1000; ++i) acc += static_cast<uint64_t>(i);
    sink = acc;
  }
  return {};
}

ExitInfo kernel_wordcount_map(const KernelCall& call) {
  int n_reducers = static_cast<int>(param_int(call, "n_reducers", 1));
  if (n_reducers < 1) throw KernelFailure("n_reducers must be >= 1");
  std::string text = read_file(single_input(call));
  // bucket -> word -> count; (bucket, word) order makes the file deterministic
  std::map<std::pair<uint64_t, std::string>, int64_t> counts;
  for (auto& [word, count] : wordcount_text(text)) {
    counts[{wordcount_bucket(word, n_reducers), word}] += count;
  }
  std::ostringstream os;
  for (const auto& [key, count] : counts) {
    os << key.first << '\t' << key.second << '\t' << count << '\n';
  }
  write_file(call.ctx->output_path, os.str());
  return {};
}

ExitInfo kernel_wordcount_reduce(const KernelCall& call) {
  int64_t bucket = param_int(call, "bucket", 0);
  std::map<std::string, int64_t> counts;
  for (const auto& [du_id, path] : call.ctx->input_paths) {
    (void)du_id;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      size_t tab1 = line.find('\t');
      size_t tab2 = line.find('\t', tab1 + 1);
      if (tab1 == std::string::npos || tab2 == std::string::npos) {
        throw KernelFailure("malformed map output line: '" + line + "'");
      }
      if (std::stoll(line.substr(0, tab1)) != bucket) continue;
      counts[line.substr(tab1 + 1, tab2 - tab1 - 1)] += std::stoll(line.substr(tab2 + 1));
    }
  }
  std::ostringstream os;
  for (const auto& [word, count] : counts) {
    os << word << '\t' << count << '\n';
  }
  write_file(call.ctx->output_path, os.str());
  return {};
}

ExitInfo kernel_kmeans_assign(const KernelCall& call) {
  if (call.unit->description.arguments.empty()) {
    throw KernelFailure("kmeans_assign requires centroids argument");
  }
  std::vector<std::vector<double>> centroids =
      parse_centroids(call.unit->description.arguments[0]);
  std::vector<std::vector<double>> points = parse_points(read_file(single_input(call)));

  size_t k = centroids.size();
  size_t dims = centroids.empty() ? 0 : centroids[0].size();
  std::vector<int64_t> counts(k, 0);
  std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
  for (const auto& point : points) {
    if (point.size() != dims) throw KernelFailure("point dimensionality mismatch");
    size_t best = 0;
    double best_d = 0;
    for (size_t c = 0; c < k; ++c) {
      double d = 0;
      for (size_t j = 0; j < dims; ++j) {
        double delta = point[j] - centroids[c][j];
        d += delta * delta;
      }
      if (c == 0 || d < best_d) {
        best = c;
        best_d = d;
      }
    }
    ++counts[best];
    for (size_t j = 0; j < dims; ++j) sums[best][j] += point[j];
  }
  std::ostringstream os;
  for (size_t c = 0; c < k; ++c) {
    os << c << ' ' << counts[c];
    for (size_t j = 0; j < dims; ++j) os << ' ' << format_double(sums[c][j]);
    os << '\n';
  }
  write_file(call.ctx->output_path, os.str());
  return {};
}

ExitInfo kernel_kmeans_update(const KernelCall& call) {
  if (call.unit->description.arguments.size() < 2) {
    throw KernelFailure("kmeans_update requires k and old centroids arguments");
  }
  size_t k = static_cast<size_t>(std::stoll(call.unit->description.arguments[0]));
  std::vector<std::vector<double>> old_centroids =
      parse_centroids(call.unit->description.arguments[1]);
  if (old_centroids.size() != k) throw KernelFailure("old centroid count mismatch");
  size_t dims = old_centroids.empty() ? 0 : old_centroids[0].size();

  std::vector<int64_t> counts(k, 0);
  std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
  for (const auto& [du_id, path] : call.ctx->input_paths) {
    (void)du_id;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      size_t cluster = 0;
      int64_t count = 0;
      row >> cluster >> count;
      if (cluster >= k) throw KernelFailure("cluster index out of range");
      counts[cluster] += count;
      for (size_t j = 0; j < dims; ++j) {
        double v = 0;
        row >> v;
        sums[cluster][j] += v;
      }
    }
  }
  std::ostringstream os;
  for (size_t c = 0; c < k; ++c) {
    for (size_t j = 0; j < dims; ++j) {
      if (j > 0) os << ' ';
      double v = counts[c] > 0 ? sums[c][j] / static_cast<double>(counts[c])
                               : old_centroids[c][j];
      os << format_double(v);
    }
    os << '\n';
  }
  write_file(call.ctx->output_path, os.str());
  return {};
}

ExitInfo kernel_stream_produce(const KernelCall& call) {
  double rate = param_double(call, "rate", 0);
  double duration_s = param_double(call, "duration_s", 0);
  uint32_t message_size = static_cast<uint32_t>(param_int(call, "message_size", 64));
  size_t queue_bound = static_cast<size_t>(param_int(call, "queue_bound", 10000));
  std::string broker_name = param(call, "broker", "stream");
  if (!call.ctx->brokers) throw KernelFailure("stream_produce requires a broker registry");

  auto broker = call.ctx->brokers->get_or_create(broker_name, queue_bound);
  broker->producer_enter();
  uint64_t n_messages =
      rate > 0 ? static_cast<uint64_t>(std::floor(rate * duration_s + 1e-9)) : 0;
  int64_t start = call.now_ms();
  for (uint64_t i = 1; i <= n_messages && !canceled(call); ++i) {
    int64_t target = start + static_cast<int64_t>(std::floor(
                                 static_cast<double>(i) * 1000.0 / rate));
    while (!canceled(call)) {
      int64_t now = call.now_ms();
      if (now >= target) break;
      std::this_thread::sleep_for(
          std::chrono::milliseconds(std::min<int64_t>(target - now, 20)));
    }
    if (canceled(call)) break;
    Message m;
    m.sequence = i;
    m.produced_ms = call.now_ms();
    m.size_bytes = message_size;
    broker->publish(m);
  }
  broker->producer_exit();
  if (call.ctx->log) {
    call.ctx->log->append(EventRecord{call.now_ms(), EntityType::EXPERIMENT,
                                      call.unit->id, "PRODUCED",
                                      "n=" + std::to_string(n_messages)});
    call.ctx->log->append(EventRecord{call.now_ms(), EntityType::EXPERIMENT,
                                      call.unit->id, "DROPPED",
                                      "n=" + std::to_string(broker->dropped())});
  }
  return {};
}

ExitInfo kernel_stream_consume(const KernelCall& call) {
  int64_t batch_ms = param_int(call, "batch_ms", 100);
  size_t queue_bound = static_cast<size_t>(param_int(call, "queue_bound", 10000));
  std::string broker_name = param(call, "broker", "stream");
  if (!call.ctx->brokers) throw KernelFailure("stream_consume requires a broker registry");

  auto broker = call.ctx->brokers->get_or_create(broker_name, queue_bound);
  std::vector<Message> batch;
  while (!canceled(call)) {
    batch.clear();
    broker->drain(batch, queue_bound);
    int64_t now = call.now_ms();
    for (const Message& m : batch) {
      if (call.ctx->log) {
        call.ctx->log->append(EventRecord{
            now, EntityType::EXPERIMENT, call.unit->id, "CONSUMED",
            "latency_ms=" + std::to_string(now - m.produced_ms)});
      }
    }
    if (broker->drained()) break;
    interruptible_sleep(call, batch_ms);
  }
  return {};
}

}  // namespace

std::vector<std::pair<std::string, int64_t>> wordcount_text(const std::string& text) {
  std::map<std::string, int64_t> counts;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) ++counts[text.substr(start, i - start)];
  }
  return {counts.begin(), counts.end()};
}

uint64_t wordcount_bucket(const std::string& word, int n_reducers) {
  return fnv1a64(word) % static_cast<uint64_t>(n_reducers);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::vector<double>> parse_points(const std::string& text) {
  std::vector<std::vector<double>> points;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<double> point;
    double v = 0;
    while (row >> v) point.push_back(v);
    if (!point.empty()) points.push_back(std::move(point));
  }
  return points;
}

std::string serialize_centroids(const std::vector<std::vector<double>>& centroids) {
  std::ostringstream os;
  for (size_t c = 0; c < centroids.size(); ++c) {
    if (c > 0) os << ';';
    for (size_t j = 0; j < centroids[c].size(); ++j) {
      if (j > 0) os << ',';
      os << format_double(centroids[c][j]);
    }
  }
  return os.str();
}

std::vector<std::vector<double>> parse_centroids(const std::string& text) {
  std::vector<std::vector<double>> centroids;
  std::istringstream in(text);
  std::string chunk;
  while (std::getline(in, chunk, ';')) {
    std::vector<double> centroid;
    std::istringstream row(chunk);
    std::string value;
    while (std::getline(row, value, ',')) {
      centroid.push_back(std::stod(value));
    }
    if (!centroid.empty()) centroids.push_back(std::move(centroid));
  }
  return centroids;
}

ExitInfo run_builtin_kernel(const KernelCall& call) {
  const std::string& name = call.unit->description.kernel.name;
  if (name == "noop") return {};
  if (name == "sleep") return kernel_sleep(call);
  if (name == "busy_spin") return kernel_busy_spin(call);
  if (name == "wordcount_map") return kernel_wordcount_map(call);
  if (name == "wordcount_reduce") return kernel_wordcount_reduce(call);
  if (name == "kmeans_assign") return kernel_kmeans_assign(call);
  if (name == "kmeans_update") return kernel_kmeans_update(call);
  if (name == "stream_produce") return kernel_stream_produce(call);
  if (name == "stream_consume") return kernel_stream_consume(call);
  throw KernelFailure("unknown builtin kernel '" + name + "'");
}

}  // namespace pilotkit
