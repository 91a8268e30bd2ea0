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

#include "pilotkit/manager/generators.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "pilotkit/errors.hpp"

namespace pilotkit {

namespace {

// 64 common English words; the generator samples them uniformly so word
// frequencies in generated corpora are statistically flat.
const char* const kRandomTextWords[] = {
    "the",    "of",     "and",   "to",     "in",    "is",     "that",  "for",
    "was",    "with",   "are",   "be",     "by",    "on",     "not",   "this",
    "but",    "from",   "they",  "his",    "she",   "which",  "will",  "one",
    "all",    "their",  "there", "been",   "has",   "more",   "when",  "who",
    "would",  "were",   "can",   "said",   "time",  "year",   "some",  "them",
    "people", "take",   "out",   "into",   "just",  "see",    "him",   "your",
    "come",   "could",  "now",   "than",   "like",  "other",  "how",   "then",
    "its",    "our",    "two",   "these",  "want",  "way",    "look",  "first"};

std::string read_whole_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceMissing("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

std::string generate_payload(const std::string& generator, uint64_t size_bytes,
                             uint64_t seed) {
  if (generator == "random_text") {
    std::mt19937_64 rng(seed);
    std::string out;
    out.reserve(size_bytes + 16);
    constexpr uint64_t n_words = sizeof(kRandomTextWords) / sizeof(kRandomTextWords[0]);
    while (out.size() < size_bytes) {
      out += kRandomTextWords[rng() % n_words];
      out += ' ';
    }
    out.resize(size_bytes);
    return out;
  }
  if (generator == "zero_bytes") {
    return std::string(size_bytes, '\0');
  }
  throw WorkloadError("unknown data generator '" + generator + "'");
}

std::string source_bytes(const DataUnit& du) {
  const DataSource& src = du.description.source;
  switch (src.kind) {
    case DataSource::Kind::INLINE:
      return src.inline_payload;
    case DataSource::Kind::GENERATED:
      return generate_payload(src.generator, src.size_bytes, src.seed);
    case DataSource::Kind::FILES: {
      std::string content;
      for (const auto& path : src.files) content += read_whole_file(path);
      return content;
    }
    case DataSource::Kind::UNIT_OUTPUT:
      for (const Replica& r : du.replicas) {
        if (!r.path.empty()) return read_whole_file(r.path);
      }
      throw WorkloadError("data unit " + du.id + " has no readable content");
  }
  throw WorkloadError("unhandled data source kind");
}

}  // namespace pilotkit
