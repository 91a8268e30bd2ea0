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

#include "pilotkit/perfmodel/perfmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pilotkit/errors.hpp"

namespace pilotkit {

namespace {

double to_double_strict(const std::string& text, const std::string& what) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(value)) {
    throw UserError("bad number '" + text + "' in " + what);
  }
  return value;
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(value)) return false;
  out = value;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Analytical makespan model
// ---------------------------------------------------------------------------

void MakespanModelInput::validate() const {
  if (n_tasks < 0) throw UserError("n_tasks must be non-negative");
  if (slots < 1) throw UserError("slots must be at least 1");
  if (task_duration_ms < 0) {
    throw UserError("task_duration_ms must be non-negative");
  }
  if (sched_overhead_ms < 0) {
    throw UserError("sched_overhead_ms must be non-negative");
  }
  if (queue_wait_ms < 0) throw UserError("queue_wait_ms must be non-negative");
  if (startup_ms < 0) throw UserError("startup_ms must be non-negative");
}

int64_t predict_makespan(const MakespanModelInput& input) {
  input.validate();
  int64_t waves = (input.n_tasks + input.slots - 1) / input.slots;
  return input.queue_wait_ms + input.startup_ms +
         waves * (input.task_duration_ms + input.sched_overhead_ms);
}

// ---------------------------------------------------------------------------
// Event log decomposition
// ---------------------------------------------------------------------------

DecompositionReport decompose(const std::vector<EventRecord>& events) {
  if (events.empty()) throw MalformedLog("empty event log");

  struct PilotTimes {
    int64_t submitted = -1;
    int64_t startup = -1;
    int64_t active = -1;
  };
  struct UnitTimes {
    int64_t bound = -1;
    int64_t running = -1;
    int64_t terminal = -1;
  };

  std::map<std::string, PilotTimes> pilot_times;
  std::map<std::string, UnitTimes> unit_times;
  std::vector<std::string> pilot_order;
  std::vector<std::string> unit_order;
  int64_t first_submit = -1;
  int64_t last_terminal = -1;

  for (const auto& e : events) {
    if (e.entity_type == EntityType::PILOT) {
      auto [it, inserted] = pilot_times.try_emplace(e.entity_id);
      if (inserted) pilot_order.push_back(e.entity_id);
      auto& t = it->second;
      if (e.event == "SUBMITTED" && t.submitted < 0) {
        t.submitted = e.timestamp_ms;
      } else if (e.event == "STARTUP" && t.startup < 0) {
        t.startup = e.timestamp_ms;
      } else if (e.event == "ACTIVE" && t.active < 0) {
        t.active = e.timestamp_ms;
      }
    } else if (e.entity_type == EntityType::UNIT) {
      auto [it, inserted] = unit_times.try_emplace(e.entity_id);
      if (inserted) unit_order.push_back(e.entity_id);
      auto& t = it->second;
      if (e.event == "NEW") {
        first_submit = first_submit < 0
                           ? e.timestamp_ms
                           : std::min(first_submit, e.timestamp_ms);
      } else if (e.event == "BOUND" && t.bound < 0) {
        t.bound = e.timestamp_ms;
      } else if (e.event == "RUNNING" && t.running < 0) {
        t.running = e.timestamp_ms;
      } else if (e.event == "DONE" || e.event == "FAILED" ||
                 e.event == "CANCELED") {
        if (t.terminal < 0) t.terminal = e.timestamp_ms;
        last_terminal = std::max(last_terminal, e.timestamp_ms);
      }
    }
  }

  DecompositionReport report;
  if (first_submit >= 0 && last_terminal >= first_submit) {
    report.makespan_ms = last_terminal - first_submit;
  }

  for (const auto& id : pilot_order) {
    const auto& t = pilot_times.at(id);
    PilotComponents row;
    row.pilot_id = id;
    if (t.startup >= 0) {
      // The queue wait ends when startup begins.
      if (t.submitted >= 0) row.queue_ms = t.startup - t.submitted;
      if (t.active >= t.startup) row.startup_ms = t.active - t.startup;
    } else if (t.submitted >= 0 && t.active >= t.submitted) {
      // No startup marker: attribute the whole gap to the queue.
      row.queue_ms = t.active - t.submitted;
    }
    report.pilots.push_back(std::move(row));
    report.queue_total_ms += report.pilots.back().queue_ms;
    report.startup_total_ms += report.pilots.back().startup_ms;
  }

  for (const auto& id : unit_order) {
    const auto& t = unit_times.at(id);
    UnitComponents row;
    row.unit_id = id;
    if (t.bound >= 0 && t.running >= t.bound) {
      row.scheduling_ms = t.running - t.bound;
    }
    if (t.running >= 0 && t.terminal >= t.running) {
      row.execution_ms = t.terminal - t.running;
    }
    report.units.push_back(std::move(row));
    report.scheduling_total_ms += report.units.back().scheduling_ms;
    report.execution_total_ms += report.units.back().execution_ms;
  }

  report.residual_ms = report.makespan_ms -
                       (report.queue_total_ms + report.startup_total_ms +
                        report.scheduling_total_ms + report.execution_total_ms);
  return report;
}

DecompositionReport decompose_file(const std::filesystem::path& csv_path) {
  return decompose(EventLog::read_csv_file(csv_path));
}

// ---------------------------------------------------------------------------
// Throughput model fit
// ---------------------------------------------------------------------------

double ThroughputModel::predict(
    const std::map<std::string, double>& row) const {
  double value = coefficients.at("intercept");
  for (const auto& name : regressors) {
    auto it = row.find(name);
    if (it == row.end()) throw UserError("row is missing column '" + name + "'");
    value += coefficients.at(name) * it->second;
  }
  return value;
}

std::string ThroughputModel::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json coeffs;
  for (const auto& [name, value] : coefficients) coeffs[name] = value;
  j["coefficients"] = coeffs;
  j["r2"] = r2;
  j["mape"] = mape;
  j["n"] = n_train;
  return j.dump();
}

namespace {

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// A is n*n row-major. Throws SingularDesign when a pivot vanishes.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b,
                                 size_t n) {
  double scale = 1.0;
  for (double v : a) scale = std::max(scale, std::fabs(v));
  const double tiny = 1e-12 * scale;

  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t row = col + 1; row < n; ++row) {
      if (std::fabs(a[row * n + col]) > std::fabs(a[pivot * n + col])) {
        pivot = row;
      }
    }
    if (std::fabs(a[pivot * n + col]) <= tiny) {
      throw SingularDesign(
          "design matrix is singular; check for collinear or duplicate "
          "regressors");
    }
    if (pivot != col) {
      for (size_t k = col; k < n; ++k) {
        std::swap(a[pivot * n + k], a[col * n + k]);
      }
      std::swap(b[pivot], b[col]);
    }
    for (size_t row = col + 1; row < n; ++row) {
      double factor = a[row * n + col] / a[col * n + col];
      if (factor == 0.0) continue;
      for (size_t k = col; k < n; ++k) {
        a[row * n + k] -= factor * a[col * n + k];
      }
      b[row] -= factor * b[col];
    }
  }

  std::vector<double> x(n, 0.0);
  for (size_t row = n; row-- > 0;) {
    double sum = b[row];
    for (size_t k = row + 1; k < n; ++k) sum -= a[row * n + k] * x[k];
    x[row] = sum / a[row * n + row];
  }
  return x;
}

}  // namespace

ThroughputModel fit_throughput_model(
    const std::vector<std::map<std::string, double>>& rows,
    const std::vector<std::string>& regressors,
    const std::string& target) {
  if (regressors.empty()) throw UserError("no regressors given");

  // Keep only rows that carry the target and every regressor.
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& row : rows) {
    auto target_it = row.find(target);
    if (target_it == row.end()) continue;
    std::vector<double> x;
    x.reserve(regressors.size());
    bool complete = true;
    for (const auto& name : regressors) {
      auto it = row.find(name);
      if (it == row.end()) {
        complete = false;
        break;
      }
      x.push_back(it->second);
    }
    if (!complete) continue;
    xs.push_back(std::move(x));
    ys.push_back(target_it->second);
  }
  if (xs.empty()) {
    throw UserError("no rows contain '" + target + "' and every regressor");
  }

  const size_t p = regressors.size();
  const size_t n_total = xs.size();
  const size_t n_test = n_total / 5;  // the last fifth is held out
  const size_t n_train = n_total - n_test;
  if (n_train < p + 1) {
    throw UserError("need at least " + std::to_string(p + 1) +
                    " training rows, have " + std::to_string(n_train));
  }

  // Normal equations over [1, x1 .. xp].
  const size_t dim = p + 1;
  std::vector<double> xtx(dim * dim, 0.0);
  std::vector<double> xty(dim, 0.0);
  for (size_t i = 0; i < n_train; ++i) {
    std::vector<double> row(dim, 1.0);
    for (size_t j = 0; j < p; ++j) row[j + 1] = xs[i][j];
    for (size_t a = 0; a < dim; ++a) {
      for (size_t b = 0; b < dim; ++b) xtx[a * dim + b] += row[a] * row[b];
      xty[a] += row[a] * ys[i];
    }
  }

  std::vector<double> beta = solve_linear(std::move(xtx), std::move(xty), dim);

  ThroughputModel model;
  model.regressors = regressors;
  model.coefficients["intercept"] = beta[0];
  for (size_t j = 0; j < p; ++j) model.coefficients[regressors[j]] = beta[j + 1];
  model.n_train = static_cast<int>(n_train);

  auto predict_x = [&](const std::vector<double>& x) {
    double value = beta[0];
    for (size_t j = 0; j < p; ++j) value += beta[j + 1] * x[j];
    return value;
  };

  double y_mean = 0.0;
  for (size_t i = 0; i < n_train; ++i) y_mean += ys[i];
  y_mean /= static_cast<double>(n_train);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (size_t i = 0; i < n_train; ++i) {
    double err = ys[i] - predict_x(xs[i]);
    ss_res += err * err;
    double dev = ys[i] - y_mean;
    ss_tot += dev * dev;
  }
  if (ss_tot > 0.0) {
    model.r2 = 1.0 - ss_res / ss_tot;
  } else {
    // A constant target carries no variance to explain.
    model.r2 = ss_res <= 1e-9 * std::max(1.0, y_mean * y_mean) ? 1.0 : 0.0;
  }

  double ape_sum = 0.0;
  size_t ape_count = 0;
  for (size_t i = n_train; i < n_total; ++i) {
    if (ys[i] == 0.0) continue;  // a zero observation has no relative error
    ape_sum += std::fabs(ys[i] - predict_x(xs[i])) / std::fabs(ys[i]);
    ++ape_count;
  }
  model.mape = ape_count > 0 ? 100.0 * ape_sum / static_cast<double>(ape_count)
                             : 0.0;
  return model;
}

// ---------------------------------------------------------------------------
// Derived metrics CSV loader
// ---------------------------------------------------------------------------

namespace {

// Splits CSV text into records, honoring quoted fields with "" escapes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;  // a separator implies another field follows
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !record.empty()) end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
        break;
    }
  }
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace

std::vector<std::map<std::string, double>> read_metric_rows(
    const std::filesystem::path& derived_csv) {
  std::ifstream in(derived_csv, std::ios::binary);
  if (!in) {
    throw UserError("cannot open metrics file " + derived_csv.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  auto records = parse_csv(buffer.str());
  if (records.empty()) {
    throw MalformedLog("metrics file " + derived_csv.string() + " is empty");
  }

  const auto& header = records.front();
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw MalformedLog("metrics file lacks column '" + name + "'");
    }
    return static_cast<size_t>(it - header.begin());
  };
  const size_t trial_col = column("trial");
  const size_t point_col = column("param_point");
  const size_t status_col = column("status");

  std::vector<std::map<std::string, double>> rows;
  for (size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw MalformedLog("metrics row " + std::to_string(r) + " has " +
                         std::to_string(rec.size()) + " fields, expected " +
                         std::to_string(header.size()));
    }
    if (rec[status_col] != "ok") continue;

    std::map<std::string, double> row;
    row["trial"] = to_double_strict(rec[trial_col], "column 'trial'");

    // Swept parameters become columns when their values are numeric.
    std::istringstream point(rec[point_col]);
    std::string pair;
    while (point >> pair) {
      auto eq = pair.find('=');
      if (eq == std::string::npos) continue;
      double value = 0;
      if (parse_double(pair.substr(eq + 1), value)) {
        row[pair.substr(0, eq)] = value;
      }
    }

    for (size_t c = 0; c < header.size(); ++c) {
      if (c == trial_col || c == point_col || c == status_col) continue;
      if (rec[c].empty()) continue;
      row[header[c]] =
          to_double_strict(rec[c], "column '" + header[c] + "'");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pilotkit
