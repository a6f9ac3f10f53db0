#pragma once

// Task fan-out, persistence and resume for experiments.
//
// An experiment kind enumerates tasks, runs one task as a pure function of
// the configuration and the task, and reduces the ordered task results to a
// CSV table, a JSON summary and optional checks. Output directory layout:
//   config.txt     canonical configuration
//   records.jsonl  one record per task, sorted by task index
//   <kind>.csv     aggregate table
//   summary.json   aggregate summary and check outcomes

#include <algorithm>
#include <any>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbc/experiment/config.hpp"
#include "rbc/experiment/seed.hpp"
#include "rbc/parallel.hpp"

namespace rbc {

struct ParamSpec {
  std::string name;
  Value default_value;
  std::string help;
};

struct Task {
  std::size_t index = 0;
  nlohmann::json key;
  std::uint64_t seed = 0;
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Aggregate {
  std::string csv;
  nlohmann::json summary;
  std::vector<Check> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct KindSpec {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  /// Semantic validation beyond types; throws ConfigError.
  std::function<void(const ExperimentConfig&)> validate;
  std::function<std::vector<Task>(const ExperimentConfig&)> tasks;
  /// Shared read-only state built once per run (solver tables, providers).
  std::function<std::any(const ExperimentConfig&)> prepare;
  std::function<nlohmann::json(const ExperimentConfig&, const std::any&, const Task&, int inner_workers)> run;
  std::function<Aggregate(const ExperimentConfig&, const std::any&, const std::vector<Task>&, const std::vector<nlohmann::json>&)>
      aggregate;
  /// Run tasks one at a time and hand the workers to each task instead.
  bool inner_parallel = false;
};

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fills defaults and checks every parameter against the kind's schema.
/// Integer values are accepted for float parameters.
inline ExperimentConfig resolve_config(const ExperimentConfig& in, const KindSpec& spec) {
  ExperimentConfig out = in;
  out.params.clear();
  for (const auto& [name, v] : in.params) {
    const ParamSpec* ps = nullptr;
    for (const auto& p : spec.params)
      if (p.name == name) ps = &p;
    if (!ps) throw ConfigError("unknown parameter '" + name + "' for kind " + spec.name);
    const auto want = type_of(ps->default_value);
    Value val = v;
    if (want == ValueType::real && type_of(v) == ValueType::integer) val = static_cast<double>(std::get<std::int64_t>(v));
    if (want == ValueType::reals && type_of(v) == ValueType::integers) {
      std::vector<double> r;
      for (auto x : std::get<std::vector<std::int64_t>>(v)) r.push_back(static_cast<double>(x));
      val = r;
    }
    if (type_of(val) != want)
      throw ConfigError("parameter '" + name + "' must be " + std::string(to_string(want)) + ", got " +
                        std::string(to_string(type_of(v))));
    out.params[name] = val;
  }
  for (const auto& p : spec.params)
    if (!out.params.count(p.name)) out.params[p.name] = p.default_value;
  if (spec.validate) spec.validate(out);
  return out;
}

struct RunOptions {
  std::filesystem::path out_dir;
  int workers = 1;
  /// Keep records already present for this configuration.
  bool resume = true;
};

struct RunReport {
  std::string digest;
  std::size_t tasks_total = 0;
  std::size_t tasks_run = 0;
  std::size_t tasks_reused = 0;
  Aggregate aggregate;
};

namespace detail {

inline nlohmann::json make_record(const std::string& digest, const std::string& kind, const Task& t, const nlohmann::json& result) {
  return {{"config_digest", digest}, {"kind", kind}, {"task", t.index}, {"key", t.key}, {"seed", t.seed}, {"result", result}};
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ExperimentError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ExperimentError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Runs every task not yet recorded in the output directory, then rewrites
/// the records sorted by task index and the aggregate files. Output bytes
/// depend only on the configuration.
inline RunReport run_experiment(const ExperimentConfig& raw, const KindSpec& spec, const RunOptions& opt) {
  const ExperimentConfig cfg = resolve_config(raw, spec);
  if (cfg.kind != spec.name) throw ConfigError("configuration kind '" + cfg.kind + "' does not match " + spec.name);
  const auto tasks = spec.tasks(cfg);
  RunReport report;
  report.digest = cfg.digest();
  report.tasks_total = tasks.size();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw ExperimentError("cannot create " + opt.out_dir.string() + ": " + ec.message());
  const auto records_path = opt.out_dir / "records.jsonl";

  std::vector<std::optional<nlohmann::json>> results(tasks.size());
  if (opt.resume && fs::exists(records_path)) {
    std::ifstream in(records_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json r = nlohmann::json::parse(line, nullptr, false);
      if (r.is_discarded() || !r.contains("task") || !r.contains("result")) continue;  // torn write
      if (r.value("config_digest", "") != report.digest)
        throw ConfigError("output directory holds records of a different configuration");
      const auto idx = r["task"].get<std::size_t>();
      if (idx >= tasks.size() || r["seed"].get<std::uint64_t>() != tasks[idx].seed) continue;
      if (!results[idx]) ++report.tasks_reused;
      results[idx] = r["result"];
    }
  }
  detail::write_file_atomic(opt.out_dir / "config.txt", cfg.canonical());

  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < tasks.size(); ++k)
    if (!results[k]) missing.push_back(k);

  const std::any ctx = spec.prepare ? spec.prepare(cfg) : std::any{};
  bool torn_tail = false;
  if (opt.resume && fs::exists(records_path) && fs::file_size(records_path) > 0) {
    std::ifstream in(records_path, std::ios::binary);
    in.seekg(-1, std::ios::end);
    torn_tail = in.get() != '\n';
  }
  std::ofstream sink(records_path, std::ios::binary | (opt.resume ? std::ios::app : std::ios::trunc));
  if (!sink) throw ExperimentError("cannot open " + records_path.string());
  if (torn_tail) sink << '\n';
  std::mutex mu;
  std::vector<std::string> errors;
  auto do_task = [&](std::size_t m, int inner) {
    const auto& t = tasks[missing[m]];
    try {
      auto res = spec.run(cfg, ctx, t, inner);
      const auto line = detail::make_record(report.digest, spec.name, t, res).dump();
      std::lock_guard lock(mu);
      sink << line << '\n';
      sink.flush();
      if (!sink) throw ExperimentError("write failed for " + records_path.string());
      results[t.index] = std::move(res);
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      errors.push_back("task " + std::to_string(t.index) + " " + t.key.dump() + ": " + e.what());
    }
  };
  if (spec.inner_parallel) {
    for (std::size_t m = 0; m < missing.size(); ++m) do_task(m, opt.workers);
  } else {
    parallel_for(missing.size(), opt.workers, [&](std::size_t m) { do_task(m, 1); });
  }
  sink.close();
  report.tasks_run = missing.size() - errors.size();
  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    std::string msg = std::to_string(errors.size()) + " task(s) failed:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ExperimentError(msg);
  }

  std::string sorted;
  std::vector<nlohmann::json> ordered;
  ordered.reserve(tasks.size());
  for (const auto& t : tasks) {
    sorted += detail::make_record(report.digest, spec.name, t, *results[t.index]).dump() + "\n";
    ordered.push_back(*results[t.index]);
  }
  detail::write_file_atomic(records_path, sorted);

  report.aggregate = spec.aggregate(cfg, ctx, tasks, ordered);
  detail::write_file_atomic(opt.out_dir / (spec.name + ".csv"), report.aggregate.csv);
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.aggregate.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  nlohmann::json summary{{"config_digest", report.digest}, {"kind", spec.name}, {"summary", report.aggregate.summary}, {"checks", checks}};
  detail::write_file_atomic(opt.out_dir / "summary.json", summary.dump(2) + "\n");
  return report;
}

/// Minimal CSV builder; doubles use the shortest round-trip form.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) { row_strings(header); }

  template <class... Ts>
  void row(const Ts&... xs) {
    std::vector<std::string> cells{cell(xs)...};
    row_strings(cells);
  }
  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw std::logic_error("csv row width mismatch");
    for (std::size_t k = 0; k < cells.size(); ++k) text_ += (k ? "," : "") + cells[k];
    text_ += "\n";
  }
  static std::string cell(double v) { return detail::format_real(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <std::integral I>
  static std::string cell(I v) { return std::to_string(v); }

  const std::string& str() const noexcept { return text_; }

 private:
  std::size_t cols_;
  std::string text_;
};

}  // namespace rbc
