// Command-line front end for the experiment runner.
//
//   rbc <kind> [flags]          run one experiment kind
//   rbc run --config FILE       run the kind named in a config file
//   rbc list                    list kinds and their parameters
//
// Exit codes: 0 success, 1 configuration error, 2 failed check (with
// --check), 3 runtime failure.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rbc/experiment/kinds.hpp"

namespace {

using namespace rbc;

struct CommonFlags {
  std::string config_path;
  std::optional<std::int64_t> dim, size, samples;
  std::optional<std::string> sizes;
  std::optional<double> j, jprime;
  std::optional<std::uint64_t> seed;
  int workers = default_workers();
  std::string out;
  bool check = false;
  bool fresh = false;
  bool print_config = false;
  std::vector<std::string> sets;
  // Kind-specific conveniences.
  std::optional<std::string> provenance, bc, provider, widths, deltas;
  std::optional<double> tau, delta;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_required) {
  auto* c = app->add_option("--config", f.config_path, "Base configuration file");
  if (config_required) c->required()->check(CLI::ExistingFile);
  app->add_option("--dim", f.dim, "Lattice dimension");
  app->add_option("--size", f.size, "Linear size");
  app->add_option("--sizes", f.sizes, "Comma-separated sizes (widths for fe-survey)");
  app->add_option("--j", f.j, "Bulk coupling J (negative is ferromagnetic)");
  app->add_option("--jprime", f.jprime, "Boundary coupling J'");
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--samples", f.samples, "Samples, fields, realizations or instances, whichever the kind uses");
  app->add_option("--workers", f.workers, "Worker threads (default: RBC_WORKERS or hardware concurrency)")->check(CLI::PositiveNumber);
  app->add_option("--out", f.out, "Output directory (default: out/<kind>)");
  app->add_flag("--check", f.check, "Exit with status 2 if any acceptance check fails");
  app->add_flag("--fresh", f.fresh, "Discard existing records instead of resuming");
  app->add_flag("--print-config", f.print_config, "Print the resolved configuration and exit");
  app->add_option("--set", f.sets, "Set any parameter: name=value (repeatable)");
}

void set_param(ExperimentConfig& cfg, const KindSpec& spec, const std::string& name, const std::string& text) {
  for (const auto& p : spec.params)
    if (p.name == name) {
      cfg.params[name] = parse_value(type_of(p.default_value), text);
      return;
    }
  throw ConfigError("kind " + spec.name + " has no parameter '" + name + "'");
}

bool has_param(const KindSpec& spec, const std::string& name) {
  for (const auto& p : spec.params)
    if (p.name == name) return true;
  return false;
}

/// First of `names` the kind defines.
std::string pick(const KindSpec& spec, std::initializer_list<const char*> names, const char* flag) {
  for (const char* n : names)
    if (has_param(spec, n)) return n;
  throw ConfigError(std::string("kind ") + spec.name + " does not take " + flag);
}

template <class T>
std::string text_of(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) return v;
  else if constexpr (std::is_floating_point_v<T>) return detail::format_real(v);
  else return std::to_string(v);
}

ExperimentConfig build_config(const std::string& kind, const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    cfg = load_config(f.config_path);
    if (!kind.empty() && cfg.kind != kind) throw ConfigError("config file is for kind '" + cfg.kind + "', not " + kind);
  } else {
    cfg.kind = kind;
  }
  const auto& spec = find_kind(cfg.kind);
  auto apply = [&](const auto& opt, std::initializer_list<const char*> names, const char* flag) {
    if (opt) set_param(cfg, spec, pick(spec, names, flag), text_of(*opt));
  };
  apply(f.dim, {"dim"}, "--dim");
  apply(f.size, {"size"}, "--size");
  apply(f.sizes, {"sizes", "widths"}, "--sizes");
  apply(f.j, {"j"}, "--j");
  apply(f.jprime, {"j_prime"}, "--jprime");
  apply(f.samples, {"samples", "seeds", "realizations", "instances"}, "--samples");
  apply(f.provenance, {"provenance"}, "--provenance");
  apply(f.bc, {"bc"}, "--bc");
  apply(f.provider, {"provider"}, "--provider");
  apply(f.widths, {"widths"}, "--widths");
  apply(f.deltas, {"deltas"}, "--deltas");
  apply(f.tau, {"tau"}, "--tau");
  apply(f.delta, {"delta"}, "--delta");
  if (f.seed) cfg.master_seed = *f.seed;
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects name=value, got '" + s + "'");
    set_param(cfg, spec, detail::trim(std::string_view(s).substr(0, eq)), s.substr(eq + 1));
  }
  return resolve_config(cfg, spec);
}

int execute(const std::string& kind, const CommonFlags& f) {
  const auto cfg = build_config(kind, f);
  if (f.print_config) {
    std::cout << cfg.canonical();
    return 0;
  }
  const std::string out = f.out.empty() ? "out/" + cfg.kind : f.out;
  const auto rep = run_experiment(cfg, {out, f.workers, !f.fresh});
  std::cout << cfg.kind << " digest=" << rep.digest << " tasks=" << rep.tasks_total << " run=" << rep.tasks_run
            << " reused=" << rep.tasks_reused << " out=" << out << "\n";
  for (const auto& c : rep.aggregate.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  return f.check && !rep.aggregate.all_pass() ? 2 : 0;
}

void list_kinds() {
  for (const auto& k : experiment_kinds()) {
    std::cout << k.name << "  " << k.description << "\n";
    for (const auto& p : k.params)
      std::cout << "    " << p.name << ": " << to_string(type_of(p.default_value)) << " = " << format_value(p.default_value)
                << "    " << p.help << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-boundary Ising experiments"};
  app.require_subcommand(1);
  std::vector<std::pair<CLI::App*, std::string>> subs;
  std::vector<std::unique_ptr<CommonFlags>> flags;

  auto* list = app.add_subcommand("list", "List experiment kinds and parameters");
  auto run_flags = std::make_unique<CommonFlags>();
  auto* run = app.add_subcommand("run", "Run the kind named in a configuration file");
  add_common(run, *run_flags, true);

  for (const auto& k : experiment_kinds()) {
    auto f = std::make_unique<CommonFlags>();
    auto* sub = app.add_subcommand(k.name, k.description);
    add_common(sub, *f, false);
    if (has_param(k, "provenance")) sub->add_option("--provenance", f->provenance, "over-eta or over-volumes");
    if (has_param(k, "bc")) sub->add_option("--bc", f->bc, "random, free, periodic or plus");
    if (has_param(k, "provider")) sub->add_option("--provider", f->provider, "ground, enumeration, transfer or montecarlo");
    if (has_param(k, "widths")) sub->add_option("--widths", f->widths, "Comma-separated square widths");
    if (has_param(k, "deltas")) sub->add_option("--deltas", f->deltas, "Comma-separated selection thresholds");
    if (has_param(k, "tau")) sub->add_option("--tau", f->tau, "Free-energy threshold");
    if (has_param(k, "delta")) sub->add_option("--delta", f->delta, "Selection threshold");
    std::string footer = "Parameters (--set name=value):\n";
    for (const auto& p : k.params)
      footer += "  " + p.name + ": " + std::string(to_string(type_of(p.default_value))) + " = " + format_value(p.default_value) +
                "  " + p.help + "\n";
    sub->footer(footer);
    subs.emplace_back(sub, k.name);
    flags.push_back(std::move(f));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (list->parsed()) {
      list_kinds();
      return 0;
    }
    if (run->parsed()) return execute("", *run_flags);
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i].first->parsed()) return execute(subs[i].second, *flags[i]);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
