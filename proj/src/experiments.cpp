#include "teachrl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include "teachrl/kv_config.hpp"
#include "teachrl/newtonian.hpp"
#include "teachrl/plot.hpp"
#include "teachrl/policy_shaping.hpp"

namespace teachrl::experiments {

using world::MoveAction;

std::string_view agent_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::Bql: return "bql";
    case AgentKind::Naa: return "naa";
    case AgentKind::PolicyShaping: return "policy_shaping";
  }
  return "?";
}

std::optional<AgentKind> agent_from_name(std::string_view name) {
  for (auto k : {AgentKind::Bql, AgentKind::Naa, AgentKind::PolicyShaping}) {
    if (agent_name(k) == name) return k;
  }
  if (name == "ps") return AgentKind::PolicyShaping;
  return std::nullopt;
}

void validate(const RunConfig& c) {
  auto fail = [&](const std::string& what) { throw ConfigError("config '" + c.config_id + "': " + what); };
  if (c.episodes < 1) fail("episodes must be >= 1");
  if (c.seeds.empty()) fail("seeds must be non-empty");
  if (c.agent == AgentKind::Naa && c.persist_for < 1) fail("persist_for must be >= 1 for naa");
  if (!c.prior.valid()) fail("prior violates lambda > 0, alpha > 0.5, beta > 0");
  if (c.shaping_samples < 1) fail("samples must be >= 1");
  if (!(c.consistency > 0.5 && c.consistency < 1.0)) fail("consistency must lie in (0.5, 1)");
  if (!(c.dictionary_epsilon >= 0.0 && c.dictionary_epsilon <= 1.0)) {
    fail("dictionary_epsilon must lie in [0, 1]");
  }
  if (c.config_id.empty() || c.config_id.find_first_of(",\n\r") != std::string::npos) {
    fail("config_id must be non-empty and free of commas and newlines");
  }
  try {
    world::validate(c.layout);
  } catch (const world::LayoutError& e) {
    fail(std::string("layout: ") + e.what());
  }
  if (!c.oracle) return;
  const auto& o = *c.oracle;
  try {
    oracle::validate(o);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (o.script.advice_map.num_states() != c.layout.num_states()) {
    fail("oracle script does not match the layout's state count");
  }
  switch (c.agent) {
    case AgentKind::Bql:
      fail("the bql agent takes no oracle");
      break;
    case AgentKind::Naa:
      if (o.mode != oracle::OracleMode::Advice) fail("naa needs an advice-mode oracle");
      break;
    case AgentKind::PolicyShaping:
      if (o.mode != oracle::OracleMode::Critique) fail("policy shaping needs a critique-mode oracle");
      if (o.script.trigger != oracle::Trigger::Probabilistic) {
        fail("policy shaping critique is only delivered probabilistically");
      }
      break;
  }
}

namespace {

// Everything one seed's learner owns.
class SeedRun {
 public:
  SeedRun(const RunConfig& config, std::uint64_t seed)
      : config_(config),
        seed_(seed),
        rng_(seed),
        q_(config.layout.num_states(), config.layout.discount, config.prior),
        naa_(config.layout.num_states(), {config.persist_for, config.dictionary_epsilon}),
        ledger_(config.layout.num_states(), config.consistency) {
    if (config.oracle && config.oracle->script.trigger == oracle::Trigger::OnStateEntry) {
      teacher_.emplace(config.oracle->script);
    }
  }

  EpisodeRecord episode(int index, const TraceSink& sink) {
    const auto& layout = config_.layout;
    EpisodeRecord rec{config_.config_id, seed_, index, 0.0, 0, 0, false};
    world::WorldState s = world::reset(layout);
    naa_.end_episode();
    if (teacher_) teacher_->begin_episode();

    while (!world::is_finished(s, layout)) {
      const int idx = world::state_index(s, layout);
      const int t = s.steps_taken;
      MoveAction a = MoveAction::Up;
      switch (config_.agent) {
        case AgentKind::Bql:
          a = bql::select_action(q_, idx, rng_);
          break;
        case AgentKind::Naa:
          if (auto advice = listen(idx, index, t)) {
            naa_.new_advice(idx, *advice);
            ++rec.messages;
          }
          a = naa_.select_action(idx, q_, rng_);
          break;
        case AgentKind::PolicyShaping:
          a = shaping::select_action_shaped(ledger_, q_, idx, rng_, config_.shaping_samples);
          break;
      }
      const auto out = world::step(s, a, layout);
      bql::update(q_, idx, a, out.reward, world::state_index(out.next, layout), out.terminal);
      if (config_.agent == AgentKind::PolicyShaping && config_.oracle) {
        auto gate = oracle::gate_rng(*config_.oracle, seed_, index, t);
        if (auto sign = oracle::critique_for(*config_.oracle, idx, a, gate)) {
          ledger_.record(idx, a, *sign);
          ++rec.messages;
        }
      }
      if (sink) sink(StepTrace{index, s, a, out.reward});
      rec.reward += out.reward;
      rec.entered_radiation = rec.entered_radiation || layout.is_radiation(out.next.pos);
      s = out.next;
    }
    rec.steps = s.steps_taken;
    return rec;
  }

 private:
  std::optional<MoveAction> listen(int state, int episode, int step) {
    if (!config_.oracle) return std::nullopt;
    if (teacher_) return teacher_->scripted_advise(state, naa_.persisted_action());
    auto gate = oracle::gate_rng(*config_.oracle, seed_, episode, step);
    return oracle::maybe_advise(*config_.oracle, state, gate);
  }

  const RunConfig& config_;
  std::uint64_t seed_;
  AgentRng rng_;
  bql::QTable q_;
  advice::NewtonianAgent naa_;
  shaping::CritiqueLedger ledger_;
  std::optional<oracle::ScriptedTeacher> teacher_;
};

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<EpisodeRecord> run_seed(const RunConfig& config, std::uint64_t seed, const TraceSink& sink) {
  validate(config);
  SeedRun runner(config, seed);
  std::vector<EpisodeRecord> out;
  out.reserve(static_cast<std::size_t>(config.episodes));
  for (int e = 0; e < config.episodes; ++e) out.push_back(runner.episode(e, sink));
  return out;
}

std::vector<EpisodeRecord> run(const RunConfig& config) {
  validate(config);
  const std::size_t n = config.seeds.size();
  std::vector<std::vector<EpisodeRecord>> per_seed(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) per_seed[i] = run_seed(config, config.seeds[i]);
  };
  const std::size_t threads =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<EpisodeRecord> records;
  records.reserve(n * static_cast<std::size_t>(config.episodes));
  for (auto& chunk : per_seed) records.insert(records.end(), chunk.begin(), chunk.end());
  return records;
}

std::vector<MoveAction> action_trace(const RunConfig& config, std::uint64_t seed) {
  std::vector<MoveAction> actions;
  run_seed(config, seed, [&](const StepTrace& t) { actions.push_back(t.action); });
  return actions;
}

Curve aggregate(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate needs at least one record");
  Curve curve;
  curve.config_id = records.front().config_id;
  std::map<std::uint64_t, std::vector<const EpisodeRecord*>> by_seed;
  for (const auto& r : records) {
    if (r.config_id != curve.config_id) {
      throw std::invalid_argument("aggregate: mixed configs '" + curve.config_id + "' and '" +
                                  r.config_id + "'");
    }
    by_seed[r.seed].push_back(&r);
  }
  const std::size_t episodes = by_seed.begin()->second.size();
  for (auto& [seed, recs] : by_seed) {
    if (recs.size() != episodes) throw std::invalid_argument("aggregate: ragged episode counts");
    std::sort(recs.begin(), recs.end(),
              [](const EpisodeRecord* a, const EpisodeRecord* b) { return a->episode < b->episode; });
    for (std::size_t e = 0; e < episodes; ++e) {
      if (recs[e]->episode != static_cast<int>(e)) {
        throw std::invalid_argument("aggregate: missing or duplicate episode index");
      }
    }
  }
  curve.seeds = by_seed.size();
  const double n = static_cast<double>(curve.seeds);
  for (std::size_t e = 0; e < episodes; ++e) {
    double sr = 0, ss = 0;
    for (const auto& [seed, recs] : by_seed) {
      sr += recs[e]->reward;
      ss += recs[e]->steps;
    }
    const double mr = sr / n, ms = ss / n;
    double vr = 0, vs = 0;
    for (const auto& [seed, recs] : by_seed) {
      vr += (recs[e]->reward - mr) * (recs[e]->reward - mr);
      vs += (recs[e]->steps - ms) * (recs[e]->steps - ms);
    }
    curve.mean_reward.push_back(mr);
    curve.sd_reward.push_back(std::sqrt(vr / n));
    curve.mean_steps.push_back(ms);
    curve.sd_steps.push_back(std::sqrt(vs / n));
  }
  return curve;
}

std::optional<int> episodes_to_threshold(const Curve& curve, double threshold) {
  for (std::size_t e = 0; e < curve.mean_reward.size(); ++e) {
    if (curve.mean_reward[e] >= threshold) return static_cast<int>(e);
  }
  return std::nullopt;
}

std::vector<double> per_seed_window_mean(const std::vector<EpisodeRecord>& records, int first, int last,
                                         bool steps) {
  std::vector<std::uint64_t> order;
  std::map<std::uint64_t, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (!acc.count(r.seed)) order.push_back(r.seed);
    auto& [sum, count] = acc[r.seed];
    if (r.episode >= first && r.episode <= last) {
      sum += steps ? r.steps : r.reward;
      ++count;
    }
  }
  std::vector<double> out;
  for (auto seed : order) {
    const auto& [sum, count] = acc[seed];
    if (count == 0) throw std::invalid_argument("window contains no episodes");
    out.push_back(sum / count);
  }
  return out;
}

MeanSe mean_and_se(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_and_se needs values");
  const double n = static_cast<double>(values.size());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  if (values.size() < 2) return {mean, 0.0};
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= (n - 1);
  return {mean, std::sqrt(var / n)};
}

void write_csv_header(std::ostream& out) { out << "config_id,seed,episode,reward,steps,messages\n"; }

void write_csv(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  write_csv_header(out);
  for (const auto& r : records) {
    out << r.config_id << ',' << r.seed << ',' << r.episode << ',' << format_double(r.reward) << ','
        << r.steps << ',' << r.messages << '\n';
  }
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, int count) {
  if (count < 1) throw ConfigError("seed count must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  return seeds;
}

namespace {

oracle::TeacherScript script_from(const std::string& name, const world::Layout& layout,
                                  const std::filesystem::path& base_dir) {
  if (name == "full") return oracle::build_full_advice_map(layout);
  if (name == "direct") return oracle::direct_path_script(layout);
  if (name == "avoid") return oracle::avoid_path_script(layout);
  if (name == "empty") {
    return oracle::TeacherScript{advice::AdviceDictionary(layout.num_states()), oracle::Trigger::Probabilistic};
  }
  std::filesystem::path p = name;
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open advice table: " + p.string());
  return oracle::TeacherScript{advice::AdviceDictionary::load(in, layout.num_states()),
                               oracle::Trigger::Probabilistic};
}

}  // namespace

RunConfig run_config_from(const KeyValues& kv, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.config_id = kv.get_or("config_id", c.config_id);
  if (auto a = kv.get("agent")) {
    auto kind = agent_from_name(*a);
    if (!kind) throw ConfigError("unknown agent '" + *a + "' (expected bql, naa, policy_shaping)");
    c.agent = *kind;
  }
  if (auto l = kv.get("layout")) {
    std::filesystem::path p = *l;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.layout = world::load_layout(p.string());
  }
  c.persist_for = static_cast<int>(kv.get_int("persist_for", c.persist_for));
  c.episodes = static_cast<int>(kv.get_int("episodes", c.episodes));
  if (auto list = kv.get("seed_list")) {
    c.seeds.clear();
    for (const auto& s : split_list(*list)) c.seeds.push_back(std::stoull(s));
  } else {
    c.seeds = seed_range(static_cast<std::uint64_t>(kv.get_int("seed", 0)),
                         static_cast<int>(kv.get_int("seeds", 1)));
  }
  c.consistency = kv.get_double("consistency", c.consistency);
  c.shaping_samples = static_cast<int>(kv.get_int("samples", c.shaping_samples));
  c.dictionary_epsilon = kv.get_double("dictionary_epsilon", c.dictionary_epsilon);
  c.prior.mu = kv.get_double("prior_mu", c.prior.mu);
  c.prior.lambda = kv.get_double("prior_lambda", c.prior.lambda);
  c.prior.alpha = kv.get_double("prior_alpha", c.prior.alpha);
  c.prior.beta = kv.get_double("prior_beta", c.prior.beta);

  const std::string oracle_name = kv.get_or("oracle", "none");
  if (oracle_name != "none") {
    oracle::OracleConfig o;
    o.script = script_from(oracle_name, c.layout, base_dir);
    const std::string trigger =
        kv.get_or("trigger", (oracle_name == "direct" || oracle_name == "avoid") ? "entry" : "probabilistic");
    if (trigger == "entry") {
      o.script.trigger = oracle::Trigger::OnStateEntry;
    } else if (trigger == "probabilistic") {
      o.script.trigger = oracle::Trigger::Probabilistic;
    } else {
      throw ConfigError("unknown trigger '" + trigger + "' (expected probabilistic or entry)");
    }
    o.p_advice = kv.get_double("p_advice", 1.0);
    o.seed = static_cast<std::uint64_t>(kv.get_int("oracle_seed", 0));
    o.mode = c.agent == AgentKind::PolicyShaping ? oracle::OracleMode::Critique : oracle::OracleMode::Advice;
    c.oracle = std::move(o);
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from(KeyValues::load(path), std::filesystem::path(path).parent_path());
}

std::optional<FigureId> figure_from_name(std::string_view name) {
  for (auto id : {FigureId::Fig4, FigureId::Fig6, FigureId::Fig7}) {
    if (figure_name(id) == name) return id;
  }
  return std::nullopt;
}

std::string_view figure_name(FigureId id) {
  switch (id) {
    case FigureId::Fig4: return "fig4";
    case FigureId::Fig6: return "fig6";
    case FigureId::Fig7: return "fig7";
  }
  return "?";
}

std::vector<RunConfig> figure_bundle(FigureId id, const FigureOptions& options) {
  const world::Layout layout = world::default_layout();
  const auto full_map = oracle::build_full_advice_map(layout);
  auto arm = [&](std::string config_id, AgentKind agent, double p, int persist_for) {
    RunConfig c;
    c.config_id = std::move(config_id);
    c.agent = agent;
    c.persist_for = persist_for;
    c.episodes = options.episodes;
    c.seeds = seed_range(options.base_seed, options.seeds);
    c.layout = layout;
    if (agent != AgentKind::Bql) {
      oracle::OracleConfig o;
      o.p_advice = p;
      o.script = full_map;
      o.mode = agent == AgentKind::Naa ? oracle::OracleMode::Advice : oracle::OracleMode::Critique;
      c.oracle = o;
    }
    return c;
  };
  switch (id) {
    case FigureId::Fig4:
      return {arm("fig4_naa_p20", AgentKind::Naa, 0.2, 1), arm("fig4_naa_p50", AgentKind::Naa, 0.5, 1),
              arm("fig4_naa_p90", AgentKind::Naa, 0.9, 1), arm("fig4_bql", AgentKind::Bql, 0.0, 1)};
    case FigureId::Fig6:
      return {arm("fig6_naa_s1", AgentKind::Naa, 0.2, 1), arm("fig6_naa_s5", AgentKind::Naa, 0.2, 5)};
    case FigureId::Fig7:
      return {arm("fig7_naa_p20", AgentKind::Naa, 0.2, 1),
              arm("fig7_ps_p20", AgentKind::PolicyShaping, 0.2, 1),
              arm("fig7_ps_p50", AgentKind::PolicyShaping, 0.5, 1),
              arm("fig7_ps_p90", AgentKind::PolicyShaping, 0.9, 1),
              arm("fig7_ps_p98", AgentKind::PolicyShaping, 0.98, 1)};
  }
  throw ConfigError("unknown figure");
}

FigureOutput reproduce_figure(FigureId id, const std::filesystem::path& out_dir,
                              const FigureOptions& options) {
  std::filesystem::create_directories(out_dir);
  FigureOutput out;
  for (const auto& config : figure_bundle(id, options)) {
    const auto records = run(config);
    const auto path = out_dir / (config.config_id + ".csv");
    std::ofstream csv(path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + path.string());
    write_csv(csv, records);
    out.csv_files.push_back(path);
    out.curves.push_back(aggregate(records));
  }
  out.plot = out_dir / (std::string(figure_name(id)) + ".png");
  plot::write_learning_curves(out.plot, std::string(figure_name(id)), out.curves, /*smoothing=*/10);
  return out;
}

}  // namespace teachrl::experiments
