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

#include "pilotkit/hash.hpp"

using namespace pilotkit;

TEST_CASE("fnv1a64 matches the published reference vectors") {
  // Reference values from the canonical FNV test suite (Fowler/Noll/Vo).
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("b") == 0xaf63df4c8601f1a5ull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("chunked updates equal a one-shot hash") {
  Fnv1a64 h;
  h.update("foo");
  h.update("bar");
  CHECK(h.digest() == fnv1a64("foobar"));

  const unsigned char raw[] = {0x00, 0xff, 0x10};
  CHECK(fnv1a64(raw, 3) != fnv1a64(raw, 2));
}

TEST_CASE("empty hash is the offset basis") {
  Fnv1a64 h;
  CHECK(h.digest() == Fnv1a64::kOffset);
}

TEST_CASE("to_hex is fixed-width lowercase") {
  CHECK(to_hex(0) == "0000000000000000");
  CHECK(to_hex(0xdeadbeefull) == "00000000deadbeef");
  CHECK(to_hex(0xffffffffffffffffull) == "ffffffffffffffff");
  CHECK(to_hex(0x0123456789abcdefull) == "0123456789abcdef");
}
