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

#include "pilotkit/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "pilotkit/errors.hpp"
#include "pilotkit/hash.hpp"

namespace pilotkit {

std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

const char* to_string(EntityType t) {
  switch (t) {
    case EntityType::PILOT: return "PILOT";
    case EntityType::UNIT: return "UNIT";
    case EntityType::DATA_UNIT: return "DATA_UNIT";
    case EntityType::EXPERIMENT: return "EXPERIMENT";
  }
  return "?";
}

std::optional<EntityType> parse_entity_type(const std::string& name) {
  if (name == "PILOT") return EntityType::PILOT;
  if (name == "UNIT") return EntityType::UNIT;
  if (name == "DATA_UNIT") return EntityType::DATA_UNIT;
  if (name == "EXPERIMENT") return EntityType::EXPERIMENT;
  return std::nullopt;
}

const char* EventLog::csv_header() {
  return "timestamp_ms,entity_type,entity_id,event,detail";
}

size_t EventLog::append(EventRecord record) {
  std::lock_guard<std::mutex> lock(mu_);
  auto key = std::make_pair(record.entity_type, record.entity_id);
  auto it = last_ts_.find(key);
  if (it != last_ts_.end() && record.timestamp_ms < it->second) {
    std::ostringstream os;
    os << "clock regression for " << to_string(record.entity_type) << " "
       << record.entity_id << ": " << record.timestamp_ms << " < " << it->second;
    throw ClockRegression(os.str());
  }
  last_ts_[key] = record.timestamp_ms;
  records_.push_back(std::move(record));
  return records_.size() - 1;
}

size_t EventLog::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

std::vector<EventRecord> EventLog::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

namespace {

bool needs_quoting(const std::string& field) {
  return field.find_first_of(",\"\n\r") != std::string::npos;
}

void write_field(std::ostream& out, const std::string& field) {
  if (!needs_quoting(field)) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

// Splits one CSV line into fields, honoring double-quote escaping. Returns
// false on a malformed row (unbalanced quotes).
bool split_csv_line(const std::string& line, std::vector<std::string>& fields) {
  fields.clear();
  std::string cur;
  bool in_quotes = false;
  size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      cur += c;
      ++i;
      continue;
    }
    if (c == '"' && cur.empty()) {
      in_quotes = true;
      ++i;
      continue;
    }
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
      ++i;
      continue;
    }
    cur += c;
    ++i;
  }
  if (in_quotes) return false;
  fields.push_back(cur);
  return true;
}

}  // namespace

void EventLog::write_csv(std::ostream& out) const {
  std::vector<EventRecord> records = snapshot();
  out << csv_header() << "\n";
  for (const EventRecord& r : records) {
    out << r.timestamp_ms << ',' << to_string(r.entity_type) << ',';
    write_field(out, r.entity_id);
    out << ',';
    write_field(out, r.event);
    out << ',';
    write_field(out, r.detail);
    out << "\n";
  }
}

void EventLog::write_csv_file(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_csv(out);
}

std::vector<EventRecord> EventLog::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MalformedLog("empty event log");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) {
    throw MalformedLog("bad event log header: '" + line + "'");
  }
  std::vector<EventRecord> out;
  std::vector<std::string> fields;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // A record with an odd number of quote characters continues on the next
    // physical line (an escaped newline inside a quoted field).
    std::string record = line;
    while (std::count(record.begin(), record.end(), '"') % 2 == 1 &&
           std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      record += '\n';
      record += line;
    }
    if (!split_csv_line(record, fields) || fields.size() != 5) {
      throw MalformedLog("bad event log row at line " + std::to_string(lineno));
    }
    EventRecord r;
    const std::string& ts = fields[0];
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), r.timestamp_ms);
    if (ec != std::errc() || ptr != ts.data() + ts.size()) {
      throw MalformedLog("bad timestamp at line " + std::to_string(lineno));
    }
    auto type = parse_entity_type(fields[1]);
    if (!type) {
      throw MalformedLog("bad entity type '" + fields[1] + "' at line " +
                         std::to_string(lineno));
    }
    r.entity_type = *type;
    r.entity_id = fields[2];
    r.event = fields[3];
    r.detail = fields[4];
    if (r.entity_id.empty() || r.event.empty()) {
      throw MalformedLog("missing entity id or event at line " + std::to_string(lineno));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EventRecord> EventLog::read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open " + path.string());
  return read_csv(in);
}

std::string detail_get(const std::string& detail, const std::string& key) {
  size_t pos = 0;
  while (pos < detail.size()) {
    size_t end = detail.find(' ', pos);
    if (end == std::string::npos) end = detail.size();
    size_t eq = detail.find('=', pos);
    if (eq != std::string::npos && eq < end &&
        detail.compare(pos, eq - pos, key) == 0) {
      return detail.substr(eq + 1, end - eq - 1);
    }
    pos = end + 1;
  }
  return "";
}

std::map<std::string, std::string> detail_parse(const std::string& detail) {
  std::map<std::string, std::string> out;
  size_t pos = 0;
  while (pos < detail.size()) {
    size_t end = detail.find(' ', pos);
    if (end == std::string::npos) end = detail.size();
    size_t eq = detail.find('=', pos);
    if (eq != std::string::npos && eq < end) {
      out[detail.substr(pos, eq - pos)] = detail.substr(eq + 1, end - eq - 1);
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace pilotkit
