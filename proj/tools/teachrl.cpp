// teachrl: batch simulation, figure reproduction, the teaching service and
// trace tools. Run `teachrl --help` or `teachrl <command> --help`.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "teachrl/experiments.hpp"
#include "teachrl/kv_config.hpp"
#include "teachrl/server.hpp"
#include "teachrl/session.hpp"
#include "teachrl/world.hpp"

namespace {

namespace ex = teachrl::experiments;
namespace svc = teachrl::service;

constexpr int kUsageError = 2;

struct Failure {
  std::string kind;
  std::string message;
  int code = 1;
};

int report(const Failure& f) {
  std::cerr << nlohmann::json{{"error", {{"kind", f.kind}, {"message", f.message}}}}.dump() << '\n';
  return f.code;
}

struct SimFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> seeds;
  std::optional<int> persist_for;
  std::optional<double> p_advice;
  std::optional<std::string> agent;
  std::string out;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--seed", f.seed, "Base seed; seeds are base, base+1, ... (default from config, else 0)");
  cmd->add_option("--episodes", f.episodes, "Episodes per seed")->check(CLI::PositiveNumber);
  cmd->add_option("--seeds", f.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--persist-for", f.persist_for, "Steps each new piece of advice is followed")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--p-advice", f.p_advice, "Per-step probability the simulated teacher speaks")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--agent", f.agent, "bql, naa or policy_shaping");
}

// Flags win over config values.
void apply_overrides(teachrl::KeyValues& kv, const SimFlags& f) {
  if (f.seeds) {
    kv.erase("seed_list");
    kv.set("seeds", std::to_string(*f.seeds));
  }
  if (f.seed) {
    if (auto list = kv.get("seed_list")) {
      kv.set("seeds", std::to_string(teachrl::split_list(*list).size()));
      kv.erase("seed_list");
    }
    kv.set("seed", std::to_string(*f.seed));
  }
  if (f.episodes) kv.set("episodes", std::to_string(*f.episodes));
  if (f.persist_for) kv.set("persist_for", std::to_string(*f.persist_for));
  if (f.agent) kv.set("agent", *f.agent);
  if (f.p_advice) {
    if (kv.get_or("oracle", "none") == "none") {
      throw teachrl::ConfigError("--p-advice needs a config with an oracle");
    }
    std::ostringstream p;
    p << std::setprecision(17) << *f.p_advice;
    kv.set("p_advice", p.str());
  }
}

std::string format_reward(double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", r);
  return buf;
}

int cmd_simulate(const std::string& path, const SimFlags& flags) {
  auto kv = teachrl::KeyValues::load(path);
  apply_overrides(kv, flags);
  const auto config = ex::run_config_from(kv, std::filesystem::path(path).parent_path());
  const auto records = ex::run(config);
  if (!flags.out.empty()) {
    std::ofstream csv(flags.out, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + flags.out);
    ex::write_csv(csv, records);
  }
  // Most common (steps, reward) outcome and how many episodes had it.
  std::map<std::pair<int, double>, int> counts;
  for (const auto& r : records) ++counts[{r.steps, r.reward}];
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  std::cout << best->first.first << " steps, reward " << format_reward(best->first.second) << ", "
            << best->second << "/" << records.size() << " episodes\n";
  return 0;
}

int cmd_figure(const std::string& name, const std::string& out, const SimFlags& flags) {
  auto id = ex::figure_from_name(name);
  if (!id) return report({"usage", "unknown figure '" + name + "' (expected fig4, fig6, fig7)", kUsageError});
  ex::FigureOptions options;
  if (flags.episodes) options.episodes = *flags.episodes;
  if (flags.seeds) options.seeds = *flags.seeds;
  if (flags.seed) options.base_seed = *flags.seed;
  const auto result = ex::reproduce_figure(*id, out, options);
  for (const auto& p : result.csv_files) std::cout << p.string() << '\n';
  std::cout << result.plot.string() << '\n';
  return 0;
}

int cmd_validate(const std::string& path) {
  const auto layout = teachrl::world::load_layout(path);
  teachrl::world::validate(layout);
  const auto lengths = teachrl::world::route_lengths(layout);
  std::cout << "ok: direct=" << lengths.direct << ", avoid=" << lengths.avoid << '\n';
  return 0;
}

int cmd_replay(const std::string& path, bool print) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto result = svc::replay(in);
  if (print) {
    for (const auto& line : result.replayed) std::cout << line << '\n';
  }
  if (auto i = result.first_mismatch()) {
    std::cerr << "mismatch at event " << *i << '\n';
    if (*i < result.recorded.size()) std::cerr << "  recorded: " << result.recorded[*i] << '\n';
    if (*i < result.replayed.size()) std::cerr << "  replayed: " << result.replayed[*i] << '\n';
    return 1;
  }
  if (!print) std::cout << "ok: " << result.replayed.size() << " events identical\n";
  return 0;
}

int cmd_serve(const svc::ServerOptions& options) {
  svc::Server server(options);
  const auto port = server.start();
  std::cout << "listening on http://" << options.address << ":" << port << std::endl;
  server.wait();
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Newtonian Action Advice workbench"};
  app.require_subcommand(1, 1);

  SimFlags sim;
  std::string sim_config;
  auto* simulate = app.add_subcommand("simulate", "Run a key-value run config and print the modal outcome");
  simulate->add_option("config", sim_config, "Run config file")->required()->check(CLI::ExistingFile);
  add_sim_flags(simulate, sim);
  simulate->add_option("--out", sim.out, "Also write per-episode CSV to this file");

  SimFlags fig;
  std::string fig_name;
  std::string fig_out = "results";
  auto* figure = app.add_subcommand("figure", "Reproduce a learning-curve figure (CSV per arm + PNG)");
  figure->add_option("figure", fig_name, "fig4, fig6 or fig7")->required();
  figure->add_option("--out", fig_out, "Output directory")->capture_default_str();
  figure->add_option("--seed", fig.seed, "Base seed (default 1)");
  figure->add_option("--episodes", fig.episodes, "Episodes per seed (default 300)")->check(CLI::PositiveNumber);
  figure->add_option("--seeds", fig.seeds, "Number of seeds (default 50)")->check(CLI::PositiveNumber);

  svc::ServerOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Host live teaching sessions over HTTP and WebSocket");
  serve->add_option("--address", serve_opts.address, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_opts.port, "Port, 0 for any free port")->capture_default_str();
  serve->add_option("--static", serve_opts.static_dir, "Directory of static files to serve")
      ->check(CLI::ExistingDirectory);
  serve->add_option("--trace-dir", serve_opts.trace_dir, "Write one replayable trace per session here");

  std::string trace_path;
  bool print_events = false;
  auto* replay = app.add_subcommand("replay", "Re-run a session trace and compare events byte for byte");
  replay->add_option("trace", trace_path, "Trace file (JSON lines)")->required()->check(CLI::ExistingFile);
  replay->add_flag("--print", print_events, "Print the replayed events instead of a summary");

  std::string layout_path;
  auto* validate = app.add_subcommand("validate", "Check a layout file and report route lengths");
  validate->add_option("layout", layout_path, "Layout file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    std::cerr << app.help();
    return kUsageError;
  }

  try {
    if (*simulate) return cmd_simulate(sim_config, sim);
    if (*figure) return cmd_figure(fig_name, fig_out, fig);
    if (*serve) return cmd_serve(serve_opts);
    if (*replay) return cmd_replay(trace_path, print_events);
    if (*validate) return cmd_validate(layout_path);
  } catch (const teachrl::ConfigError& e) {
    return report({"config", e.what()});
  } catch (const teachrl::world::LayoutError& e) {
    return report({"layout", e.what()});
  } catch (const svc::SessionError& e) {
    return report({"session", e.what()});
  } catch (const std::exception& e) {
    return report({"runtime", e.what()});
  }
  return kUsageError;
}
