// Acceptance run: one PASS/FAIL line per headline claim, exit status 1 when
// any line fails. Every check recomputes its reference values locally.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "teachrl/bql.hpp"
#include "teachrl/experiments.hpp"
#include "teachrl/friction.hpp"
#include "teachrl/kv_config.hpp"
#include "teachrl/policy_shaping.hpp"
#include "teachrl/session.hpp"
#include "teachrl/session_host.hpp"

namespace {

using namespace teachrl;
using experiments::AgentKind;
using experiments::RunConfig;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void check(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    out.pass = false;
    out.detail += "; over time budget";
  }
  if (!out.pass) ++failures;
  std::printf("%s %s (%s; %.2fs)\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

RunConfig minimal(const std::string& oracle_name) {
  auto kv = KeyValues::parse("agent = naa\npersist_for = 5\nepisodes = 100\nseed = 0\nseeds = 1\noracle = " +
                             oracle_name + "\n");
  return experiments::run_config_from(kv);
}

Outcome minimal_route(const std::string& oracle_name, int want_steps, double want_reward) {
  auto c = minimal(oracle_name);
  const auto& layout = c.layout;
  int good = 0;
  bool radiation = false;
  auto records = experiments::run_seed(c, c.seeds.front(), [&](const experiments::StepTrace& t) {
    radiation = radiation || layout.is_radiation(t.state.pos);
  });
  for (const auto& r : records) good += r.steps == want_steps && r.reward == want_reward;
  const bool ok = records.size() == 100 && good == 100 && !radiation;
  return {ok, std::to_string(good) + "/100 episodes at " + std::to_string(want_steps) + " steps, reward " +
                  fmt("%.1f", want_reward) + (radiation ? ", radiation entered" : ", no radiation")};
}

struct Window {
  experiments::MeanSe reward, steps;
};

Window window(const std::vector<experiments::EpisodeRecord>& records, int first, int last) {
  return {experiments::mean_and_se(experiments::per_seed_window_mean(records, first, last)),
          experiments::mean_and_se(experiments::per_seed_window_mean(records, first, last, true))};
}

bool above(const experiments::MeanSe& hi, const experiments::MeanSe& lo) {
  return hi.mean - lo.mean > 2.0 * std::sqrt(hi.se * hi.se + lo.se * lo.se);
}

const experiments::FigureOptions kFull{300, 50, 1};

RunConfig arm(experiments::FigureId fig, const std::string& id) {
  for (auto& c : experiments::figure_bundle(fig, kFull)) {
    if (c.config_id == id) return c;
  }
  throw std::runtime_error("missing arm " + id);
}

Outcome advice_ordering() {
  std::vector<Window> w;
  for (const char* id : {"fig4_naa_p90", "fig4_naa_p50", "fig4_naa_p20", "fig4_bql"}) {
    auto c = arm(experiments::FigureId::Fig4, id);
    c.episodes = 50;
    w.push_back(window(experiments::run(c), 0, 49));
  }
  bool ok = true;
  for (int i = 0; i + 1 < 4; ++i) {
    ok = ok && above(w[i].reward, w[i + 1].reward);
    ok = ok && w[i].steps.mean < w[i + 1].steps.mean;
  }
  std::string d = "reward p90/p50/p20/bql";
  for (auto& x : w) d += " " + fmt("%.2f", x.reward.mean);
  d += ", steps";
  for (auto& x : w) d += " " + fmt("%.1f", x.steps.mean);
  return {ok, d};
}

Outcome naa_vs_ps() {
  auto naa = experiments::aggregate(experiments::run(arm(experiments::FigureId::Fig7, "fig7_naa_p20")));
  auto ps = experiments::aggregate(experiments::run(arm(experiments::FigureId::Fig7, "fig7_ps_p98")));
  auto tn = experiments::episodes_to_threshold(naa, 90.0);
  auto tp = experiments::episodes_to_threshold(ps, 90.0);
  const bool ok = tn && (!tp || *tn < *tp);
  auto show = [](const std::optional<int>& t) { return t ? std::to_string(*t) : std::string("never"); };
  return {ok, "episodes to mean reward 90: naa p20 " + show(tn) + ", ps p98 " + show(tp)};
}

Outcome friction_crossover() {
  const auto s1 = experiments::run(arm(experiments::FigureId::Fig6, "fig6_naa_s1"));
  const auto s5 = experiments::run(arm(experiments::FigureId::Fig6, "fig6_naa_s5"));
  const auto early1 = window(s1, 0, 9).reward, early5 = window(s5, 0, 9).reward;
  const auto late1 = window(s1, 249, 299).reward, late5 = window(s5, 249, 299).reward;
  const bool ok = above(early5, early1) && above(late1, late5);
  return {ok, "episodes 1-10: S5 " + fmt("%.2f", early5.mean) + " vs S1 " + fmt("%.2f", early1.mean) +
                  "; episodes 250-300: S1 " + fmt("%.2f", late1.mean) + " vs S5 " + fmt("%.2f", late5.mean)};
}

Outcome reduction() {
  RunConfig bql;
  bql.episodes = 10;
  RunConfig naa = bql, ps = bql;
  naa.agent = AgentKind::Naa;
  naa.persist_for = 5;
  ps.agent = AgentKind::PolicyShaping;
  for (auto* c : {&naa, &ps}) {
    oracle::OracleConfig o;
    o.p_advice = 1.0;
    o.script.advice_map = advice::AdviceDictionary(bql.layout.num_states());
    o.mode = c == &ps ? oracle::OracleMode::Critique : oracle::OracleMode::Advice;
    c->oracle = o;
  }
  std::size_t actions = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ref = experiments::action_trace(bql, seed);
    if (experiments::action_trace(naa, seed) != ref || experiments::action_trace(ps, seed) != ref) {
      return {false, "traces diverge at seed " + std::to_string(seed)};
    }
    actions += ref.size();
  }
  return {true, std::to_string(actions) + " actions identical over 5 seeds x 10 episodes"};
}

Outcome friction_suite() {
  using advice::FrictionSpec;
  using advice::PersistenceBasis;
  int failed = 0;
  FrictionSpec a;
  a.dt_des = 5.0;
  a.rate = 10.0;
  failed += advice::persistence_steps(a) != 50;
  FrictionSpec b;
  b.dt_min = 0.5;
  b.rate = 2.0;
  failed += advice::persistence_bounds(b).min != 1;
  FrictionSpec c;
  c.basis = PersistenceBasis::ActionSteps;
  c.delta_a = 5.0;
  c.spa_avg = 1.0;
  failed += advice::persistence_steps(c) != 5;

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    FrictionSpec s;
    s.rate = 0.5 + 40.0 * unit(rng);
    s.dt_min = 0.5 + 2.0 * unit(rng);
    s.dt_des = s.dt_min + 6.0 * unit(rng);
    s.dt_max = s.dt_des + 6.0 * unit(rng);
    s.basis = static_cast<PersistenceBasis>(rng() % 3);
    s.delta_a = 1.0 + 30.0 * unit(rng);
    s.spa_avg = 1.0 + 5.0 * unit(rng);
    s.tpa_avg = 0.05 + 4.0 * unit(rng);
    const long s_min = std::max(1L, std::lround(s.dt_min * s.rate));
    const long s_max = std::lround(s.dt_max * s.rate);
    int got = 0;
    try {
      got = advice::persistence_steps(s);
    } catch (const advice::FrictionError&) {
      if (s_max >= 1) ++failed;  // only specs whose ceiling rounds to 0 steps may be rejected
      continue;
    }
    failed += got < s_min || got > s_max;
  }
  return {failed == 0, "3 worked examples, " + std::to_string(n) + " random specs, " + std::to_string(failed) +
                           " violations"};
}

Outcome posterior() {
  // Independent batch form of the normal-gamma posterior.
  auto batch = [](const bql::NormalGamma& p, const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return bql::NormalGamma{(p.lambda * p.mu + n * mean) / (p.lambda + n), p.lambda + n, p.alpha + n / 2.0,
                            p.beta + 0.5 * ss + p.lambda * n * (mean - p.mu) * (mean - p.mu) / (2.0 * (p.lambda + n))};
  };
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); };
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> val(-150.0, 150.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    bql::NormalGamma prior{val(rng) / 10.0, 0.5 + static_cast<double>(rng() % 4), 1.0 + static_cast<double>(rng() % 3),
                           0.5 + static_cast<double>(rng() % 5)};
    std::vector<double> xs(1 + rng() % 80);
    for (auto& x : xs) x = val(rng);
    bql::NormalGamma seq = prior;
    for (double x : xs) seq = bql::observe(seq, x);
    const auto want = batch(prior, xs);
    worst = std::max({worst, rel(seq.mu, want.mu), rel(seq.lambda, want.lambda), rel(seq.alpha, want.alpha),
                      rel(seq.beta, want.beta)});
  }
  // Symmetric prior: chi-square goodness of fit to uniform, 3 dof, p = 0.01 critical value 11.345.
  bql::QTable q(1, 0.99);
  AgentRng arng(12345);
  std::array<double, 4> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) counts[world::action_index(bql::select_action(q, 0, arng))] += 1.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - n / 4.0) * (c - n / 4.0) / (n / 4.0);
  const bool ok = worst <= 1e-12 && chi2 < 11.345;
  return {ok, "max relative error " + fmt("%.2e", worst) + " over 1000 sequences, chi2 " + fmt("%.3f", chi2)};
}

Outcome shaping_formula() {
  double worst = 0.0;
  for (double c : {0.55, 0.7, 0.8, 0.9, 0.95, 0.99}) {
    for (int d = -50; d <= 50; ++d) {
      worst = std::max(worst, std::abs(shaping::feedback_probability(d, c) + shaping::feedback_probability(-d, c) - 1.0));
    }
  }
  const bool half = shaping::feedback_probability(0, 0.95) == 0.5;
  return {worst <= 1e-12 && half, "max |fp(d)+fp(-d)-1| " + fmt("%.1e", worst) + ", fp(0) = 0.5 " + (half ? "exactly" : "NOT exact")};
}

Outcome bql_convergence() {
  RunConfig c;
  c.episodes = 500;
  c.seeds = experiments::seed_range(1, 50);
  const auto w = experiments::per_seed_window_mean(experiments::run(c), 480, 499, true);
  const auto good = std::count_if(w.begin(), w.end(), [](double s) { return s <= 20.0; });
  return {good >= 45, std::to_string(good) + "/50 seeds with mean steps <= 20 over the last 20 of 500 episodes"};
}

Outcome replay_identical() {
  const auto dir = std::filesystem::temp_directory_path() / "teachrl_acceptance_replay";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::size_t total = 0;
  bool ok = true;
  for (auto agent : {AgentKind::Naa, AgentKind::PolicyShaping}) {
    const auto path = (dir / (std::string(experiments::agent_name(agent)) + ".jsonl")).string();
    {
      service::SessionParams p;
      p.agent = agent;
      p.seed = 2024;
      service::SessionHost host("s1", p, service::SessionHost::Mode::Manual, path);
      const char* lines[] = {"right", "good job", "go down please", "that is a bad idea", "hello", "left"};
      for (int i = 0; i < 60; ++i) {
        host.submit_text(lines[i % 6]);
        if (i == 30) host.control({service::ControlKind::SetRate, 4.0});
        if (i == 45) host.control({service::ControlKind::Reset, 0.0});
        host.advance(1 + i % 7);
      }
      host.advance(400);
    }
    std::ifstream in(path);
    auto r = service::replay(in);
    ok = ok && r.identical() && !r.recorded.empty();
    total += r.recorded.size();
  }
  std::filesystem::remove_all(dir);
  return {ok, std::to_string(total) + " recorded events across naa and policy_shaping traces"};
}

}  // namespace

int main() {
  check("minimal advice direct path", 1.0, [] { return minimal_route("direct", 10, 102.0); });
  check("minimal advice avoid path", 1.0, [] { return minimal_route("avoid", 12, 100.0); });
  check("advice amount ordering", 60.0, advice_ordering);
  check("naa p20 beats policy shaping p98", 90.0, naa_vs_ps);
  check("friction crossover", 0.0, friction_crossover);
  check("reduction equivalence", 0.0, reduction);
  check("friction calculator suite", 0.0, friction_suite);
  check("bayesian posterior properties", 0.0, posterior);
  check("policy shaping formula", 0.0, shaping_formula);
  check("bql convergence", 60.0, bql_convergence);
  check("deterministic replay", 0.0, replay_identical);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
