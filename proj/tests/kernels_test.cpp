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

#include <cmath>
#include <string>
#include <vector>

#include "pilotkit/backend/kernels.hpp"
#include "pilotkit/hash.hpp"

using namespace pilotkit;

TEST_CASE("wordcount splits on whitespace only and keeps case") {
  auto counts = wordcount_text("the cat and The cat\n");
  // map order is lexicographic: "The" sorts before lowercase words
  REQUIRE(counts.size() == 4);
  CHECK(counts[0] == std::pair<std::string, int64_t>{"The", 1});
  CHECK(counts[1] == std::pair<std::string, int64_t>{"and", 1});
  CHECK(counts[2] == std::pair<std::string, int64_t>{"cat", 2});
  CHECK(counts[3] == std::pair<std::string, int64_t>{"the", 1});

  // Tabs, newlines, carriage returns, and runs of spaces all separate words.
  auto ws = wordcount_text("a\tb\r\nc   d\n\na");
  REQUIRE(ws.size() == 4);
  CHECK(ws[0] == std::pair<std::string, int64_t>{"a", 2});
  CHECK(ws[3] == std::pair<std::string, int64_t>{"d", 1});

  // Punctuation stays attached: "dog." and "dog" are different words.
  auto punct = wordcount_text("dog dog. dog");
  REQUIRE(punct.size() == 2);
  CHECK(punct[0] == std::pair<std::string, int64_t>{"dog", 2});
  CHECK(punct[1] == std::pair<std::string, int64_t>{"dog.", 1});

  CHECK(wordcount_text("").empty());
  CHECK(wordcount_text("   \t\n  ").empty());
}

TEST_CASE("reducer buckets come from the word hash") {
  for (const char* w : {"alpha", "beta", "gamma", "x"}) {
    std::string word(w);
    CHECK(wordcount_bucket(word, 4) == fnv1a64(word) % 4);
    CHECK(wordcount_bucket(word, 1) == 0);
  }
}

TEST_CASE("doubles survive a text round trip exactly") {
  for (double v : {0.0, 1.0, -1.5, 1.0 / 3.0, 3.141592653589793, 1e-30, 123456789.123456789,
                   -2.2250738585072014e-308}) {
    CAPTURE(v);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(2) == "2");
}

TEST_CASE("point files parse one point per line") {
  auto points = parse_points("1 2\n3.5 -4\n\n0 0\n");
  REQUIRE(points.size() == 3);
  CHECK(points[0] == std::vector<double>{1, 2});
  CHECK(points[1] == std::vector<double>{3.5, -4});
  CHECK(points[2] == std::vector<double>{0, 0});
  CHECK(parse_points("").empty());
}

TEST_CASE("centroid serialization round-trips through text") {
  std::vector<std::vector<double>> centroids = {{0.1, 0.9}, {1.0 / 3.0, -7.25}};
  auto again = parse_centroids(serialize_centroids(centroids));
  REQUIRE(again.size() == 2);
  CHECK(again[0] == centroids[0]);
  CHECK(again[1] == centroids[1]);
  CHECK(parse_centroids(serialize_centroids({})).empty());
}
