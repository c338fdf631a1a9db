#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "teachrl/bql.hpp"
#include "teachrl/oracle.hpp"
#include "teachrl/world.hpp"

namespace teachrl {
class KeyValues;
}

namespace teachrl::experiments {

enum class AgentKind { Bql, Naa, PolicyShaping };

std::string_view agent_name(AgentKind kind);
std::optional<AgentKind> agent_from_name(std::string_view name);

struct RunConfig {
  std::string config_id = "run";
  AgentKind agent = AgentKind::Bql;
  std::optional<oracle::OracleConfig> oracle;
  int persist_for = 1;
  int episodes = 100;
  std::vector<std::uint64_t> seeds{0};
  world::Layout layout = world::default_layout();
  bql::NormalGamma prior{};
  double dictionary_epsilon = 0.0;
  double consistency = 0.95;
  int shaping_samples = 50;
};

/// Throws ConfigError describing the first problem found.
void validate(const RunConfig& config);

struct EpisodeRecord {
  std::string config_id;
  std::uint64_t seed = 0;
  int episode = 0;
  double reward = 0.0;
  int steps = 0;
  int messages = 0;
  bool entered_radiation = false;
};

/// Per-step observer for a single-seed run.
struct StepTrace {
  int episode = 0;
  world::WorldState state;
  world::MoveAction action;
  double reward = 0.0;
};
using TraceSink = std::function<void(const StepTrace&)>;

/// All seeds, `episodes` records each, ordered by (seed position, episode).
/// Seeds may run on worker threads; results do not depend on scheduling.
std::vector<EpisodeRecord> run(const RunConfig& config);

/// One seed, sequentially, optionally reporting every step.
std::vector<EpisodeRecord> run_seed(const RunConfig& config, std::uint64_t seed,
                                    const TraceSink& sink = {});

/// Action sequence of one seed across all of its episodes.
std::vector<world::MoveAction> action_trace(const RunConfig& config, std::uint64_t seed);

struct Curve {
  std::string config_id;
  std::vector<double> mean_reward;
  std::vector<double> sd_reward;
  std::vector<double> mean_steps;
  std::vector<double> sd_steps;
  std::size_t seeds = 0;

  std::size_t episodes() const { return mean_reward.size(); }
};

/// Mean and population standard deviation across seeds per episode index.
/// Rejects records from more than one config or with ragged episode counts.
Curve aggregate(const std::vector<EpisodeRecord>& records);

/// First episode index whose mean reward reaches `threshold`.
std::optional<int> episodes_to_threshold(const Curve& curve, double threshold);

/// Per-seed average of reward (or steps) over episodes [first, last], 0-based
/// inclusive. Returns one value per seed, in seed order.
std::vector<double> per_seed_window_mean(const std::vector<EpisodeRecord>& records, int first, int last,
                                         bool steps = false);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(const std::vector<double>& values);

void write_csv_header(std::ostream& out);
void write_csv(std::ostream& out, const std::vector<EpisodeRecord>& records);

/// Reads a key-value run config. Keys: config_id, agent, oracle
/// (none|full|direct|avoid|<advice table path>), trigger (probabilistic|entry),
/// p_advice, oracle_seed, persist_for, episodes, seeds (count), seed (base),
/// seed_list, layout (path), consistency, samples, dictionary_epsilon,
/// prior_mu, prior_lambda, prior_alpha, prior_beta. Relative paths resolve
/// against `base_dir`.
RunConfig run_config_from(const KeyValues& kv, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::string& path);

/// Seeds base, base+1, ..., base+count-1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, int count);

enum class FigureId { Fig4, Fig6, Fig7 };
std::optional<FigureId> figure_from_name(std::string_view name);
std::string_view figure_name(FigureId id);

struct FigureOptions {
  int episodes = 300;
  int seeds = 50;
  std::uint64_t base_seed = 1;
};

/// The preset arms of a figure.
std::vector<RunConfig> figure_bundle(FigureId id, const FigureOptions& options = {});

struct FigureOutput {
  std::vector<std::filesystem::path> csv_files;
  std::filesystem::path plot;
  std::vector<Curve> curves;
};

/// Runs every arm, writes `<arm>.csv` per arm and `<figure>.png` into `out_dir`.
FigureOutput reproduce_figure(FigureId id, const std::filesystem::path& out_dir,
                              const FigureOptions& options = {});

}  // namespace teachrl::experiments
