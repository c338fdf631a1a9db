#include "teachrl/session.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "teachrl/friction.hpp"

namespace teachrl::service {

using experiments::AgentKind;
using world::MoveAction;

namespace {

constexpr int kTraceVersion = 1;

json pos_json(world::GridPos p) { return json::array({p.col, p.row}); }

std::string_view source_name(advice::ActionSource s) {
  switch (s) {
    case advice::ActionSource::Advice: return "advice";
    case advice::ActionSource::Dictionary: return "dictionary";
    case advice::ActionSource::Learner: return "learner";
  }
  return "learner";
}

std::string_view control_name(ControlKind k) {
  switch (k) {
    case ControlKind::Start: return "start";
    case ControlKind::Pause: return "pause";
    case ControlKind::Reset: return "reset";
    case ControlKind::SetRate: return "set_rate";
  }
  return "start";
}

int derived_persistence(const SessionParams& p) {
  if (p.persist_for) return *p.persist_for;
  return advice::persistence_for_rate(p.rate, p.dt_des);
}

}  // namespace

void validate(const SessionParams& params) {
  if (params.agent == AgentKind::Bql) {
    throw SessionError("sessions need a teachable agent (naa or policy_shaping)");
  }
  world::validate(params.layout);
  if (!(std::isfinite(params.rate) && params.rate > 0.0)) {
    throw SessionError("rate must be a positive number of steps per second");
  }
  if (params.persist_for && *params.persist_for < 1) throw SessionError("persist_for must be >= 1");
  if (!(params.consistency > 0.5 && params.consistency < 1.0)) {
    throw SessionError("consistency must lie in (0.5, 1)");
  }
  if (params.samples < 1) throw SessionError("samples must be >= 1");
  if (!params.prior.valid()) throw SessionError("invalid prior");
  try {
    derived_persistence(params);
  } catch (const advice::FrictionError& e) {
    throw SessionError(e.what());
  }
}

json to_json(const SessionParams& p) {
  json j{{"agent", experiments::agent_name(p.agent)},
         {"layout", world::format_layout(p.layout)},
         {"rate", p.rate},
         {"dt_des", p.dt_des},
         {"seed", p.seed},
         {"keep_dictionary_on_reset", p.keep_dictionary_on_reset},
         {"consistency", p.consistency},
         {"samples", p.samples},
         {"prior", {p.prior.mu, p.prior.lambda, p.prior.alpha, p.prior.beta}}};
  j["persist_for"] = p.persist_for ? json(*p.persist_for) : json(nullptr);
  return j;
}

SessionParams params_from_json(const json& j) {
  if (!j.is_object()) throw SessionError("session params must be a JSON object");
  SessionParams p;
  try {
    if (j.contains("agent")) {
      auto kind = experiments::agent_from_name(j.at("agent").get<std::string>());
      if (!kind) throw SessionError("unknown agent: " + j.at("agent").get<std::string>());
      p.agent = *kind;
    }
    if (j.contains("layout")) p.layout = world::parse_layout(j.at("layout").get<std::string>());
    if (j.contains("rate")) p.rate = j.at("rate").get<double>();
    if (j.contains("dt_des")) p.dt_des = j.at("dt_des").get<double>();
    if (j.contains("persist_for") && !j.at("persist_for").is_null()) {
      p.persist_for = j.at("persist_for").get<int>();
    }
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("keep_dictionary_on_reset")) {
      p.keep_dictionary_on_reset = j.at("keep_dictionary_on_reset").get<bool>();
    }
    if (j.contains("consistency")) p.consistency = j.at("consistency").get<double>();
    if (j.contains("samples")) p.samples = j.at("samples").get<int>();
    if (j.contains("prior")) {
      const auto& pr = j.at("prior");
      if (!pr.is_array() || pr.size() != 4) throw SessionError("prior must be [mu, lambda, alpha, beta]");
      p.prior = {pr[0].get<double>(), pr[1].get<double>(), pr[2].get<double>(), pr[3].get<double>()};
    }
  } catch (const json::exception& e) {
    throw SessionError(std::string("bad session params: ") + e.what());
  } catch (const world::LayoutError& e) {
    throw SessionError(std::string("bad layout: ") + e.what());
  }
  validate(p);
  return p;
}

ControlCommand parse_control(const json& j) {
  std::string name;
  double rate = 0.0;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else if (j.is_object() && j.contains("command") && j.at("command").is_string()) {
    name = j.at("command").get<std::string>();
    if (j.contains("rate")) {
      if (!j.at("rate").is_number()) throw SessionError("rate must be a number");
      rate = j.at("rate").get<double>();
    }
  } else {
    throw SessionError("control must be a command name or {\"command\": ...}");
  }
  if (name == "start") return {ControlKind::Start, 0.0};
  if (name == "pause") return {ControlKind::Pause, 0.0};
  if (name == "reset") return {ControlKind::Reset, 0.0};
  if (name == "set_rate") {
    if (!(std::isfinite(rate) && rate > 0.0)) throw SessionError("set_rate needs a positive rate");
    return {ControlKind::SetRate, rate};
  }
  throw SessionError("unknown control command: " + name);
}

json to_json(const ControlCommand& c) {
  json j{{"command", control_name(c.kind)}};
  if (c.kind == ControlKind::SetRate) j["rate"] = c.rate;
  return j;
}

json to_json(const SessionEvent& e) {
  return json{{"type", e.type}, {"payload", e.payload}, {"session_id", e.session_id}, {"seq", e.seq}};
}

std::string serialize(const SessionEvent& e) { return to_json(e).dump(); }

SessionCore::SessionCore(std::string id, SessionParams params, Sink sink)
    : id_(std::move(id)),
      params_((validate(params), std::move(params))),
      sink_(std::move(sink)),
      persist_for_(derived_persistence(params_)),
      rng_(params_.seed),
      q_(params_.layout.num_states(), params_.layout.discount, params_.prior),
      naa_(params_.layout.num_states(), advice::NewtonianConfig{persist_for_, 0.0}),
      ledger_(params_.layout.num_states(), params_.consistency),
      state_(world::reset(params_.layout)) {
  emit_state(std::nullopt, 0.0);
}

void SessionCore::emit(std::string type, json payload) {
  SessionEvent e{std::move(type), std::move(payload), id_, ++seq_};
  if (sink_) sink_(e);
}

json SessionCore::world_json() const {
  return json{{"pos", pos_json(state_.pos)},
              {"carrying", state_.carrying},
              {"step", state_.steps_taken},
              {"state_index", world::state_index(state_, params_.layout)}};
}

void SessionCore::emit_state(const std::optional<MoveAction>& action, double reward) {
  json p = world_json();
  p["tick"] = ticks_;
  p["episode"] = episode_;
  p["episode_reward"] = episode_reward_;
  p["reward"] = reward;
  p["action"] = action ? json(world::action_name(*action)) : json(nullptr);
  if (params_.agent == AgentKind::Naa) {
    p["source"] = action ? json(source_name(naa_.last_source())) : json(nullptr);
    const auto& per = naa_.persistence();
    p["persisting"] = per.advice_just_given ? per.persist_for - per.times_followed : 0;
  }
  emit("state_update", std::move(p));
}

void SessionCore::enqueue_text(const text::Utterance& utterance) { inbox_.push_back(utterance); }

void SessionCore::consume(const text::Utterance& u) {
  if (params_.agent == AgentKind::Naa) {
    auto a = text::parse_advice(u);
    if (!a) {
      emit("instruction_ignored", {{"text", u.text()}, {"reason", "no direction word"}});
      return;
    }
    const int s = world::state_index(state_, params_.layout);
    naa_.new_advice(s, *a);
    emit("advice_consumed",
         {{"text", u.text()}, {"action", world::action_name(*a)}, {"state_index", s},
          {"persist_for", persist_for_}});
    return;
  }
  auto verdict = text::classify_critique(u, text::SentimentLexicon::builtin());
  if (verdict.sentiment == text::Sentiment::Neutral) {
    emit("instruction_ignored", {{"text", u.text()}, {"reason", "neutral"}, {"score", verdict.score}});
    return;
  }
  if (!last_pair_) {
    emit("instruction_ignored", {{"text", u.text()}, {"reason", "no action to critique"},
                                 {"score", verdict.score}});
    return;
  }
  const auto [s, a] = *last_pair_;
  const auto sign = verdict.sentiment == text::Sentiment::Positive ? shaping::CritiqueSign::Positive
                                                                   : shaping::CritiqueSign::Negative;
  ledger_.record(s, a, sign);
  json hits = json::array();
  for (const auto& h : verdict.hits) hits.push_back({{"phrase", h.phrase}, {"polarity", h.polarity}});
  emit("critique_consumed", {{"text", u.text()},
                             {"sentiment", text::sentiment_name(verdict.sentiment)},
                             {"score", verdict.score},
                             {"hits", std::move(hits)},
                             {"state_index", s},
                             {"action", world::action_name(a)},
                             {"delta", ledger_.delta(s, a)}});
}

void SessionCore::tick() {
  ++ticks_;
  if (!inbox_.empty()) {
    text::Utterance u = inbox_.front();
    inbox_.pop_front();
    consume(u);
  }
  const auto& layout = params_.layout;
  const int s = world::state_index(state_, layout);
  MoveAction a = params_.agent == AgentKind::Naa
                     ? naa_.select_action(s, q_, rng_)
                     : shaping::select_action_shaped(ledger_, q_, s, rng_, params_.samples);
  const auto out = world::step(state_, a, layout);
  const int next = world::state_index(out.next, layout);
  bql::update(q_, s, a, out.reward, next, out.terminal);
  state_ = out.next;
  episode_reward_ += out.reward;
  last_pair_ = {s, a};
  emit_state(a, out.reward);
  if (world::is_finished(state_, layout)) {
    emit("episode_end", {{"episode", episode_},
                         {"reward", episode_reward_},
                         {"steps", state_.steps_taken},
                         {"outcome", out.terminal ? "rescued" : "truncated"}});
    ++episode_;
    restart_episode();
    emit_state(std::nullopt, 0.0);
  }
}

void SessionCore::restart_episode() {
  state_ = world::reset(params_.layout);
  episode_reward_ = 0.0;
  naa_.end_episode();
}

void SessionCore::apply_control(const ControlCommand& c) {
  switch (c.kind) {
    case ControlKind::Start:
      running_ = true;
      break;
    case ControlKind::Pause:
      running_ = false;
      break;
    case ControlKind::SetRate: {
      if (!(std::isfinite(c.rate) && c.rate > 0.0)) {
        emit("error", {{"message", "set_rate needs a positive rate"}});
        return;
      }
      int steps = 0;
      try {
        steps = params_.persist_for ? *params_.persist_for
                                    : advice::persistence_for_rate(c.rate, params_.dt_des);
      } catch (const advice::FrictionError& e) {
        emit("error", {{"message", e.what()}});
        return;
      }
      params_.rate = c.rate;
      persist_for_ = steps;
      naa_.set_persist_for(steps);
      break;
    }
    case ControlKind::Reset:
      restart_episode();
      episode_ = 0;
      q_.reset();
      ledger_.clear();
      if (!params_.keep_dictionary_on_reset) naa_.dictionary().clear();
      last_pair_.reset();
      inbox_.clear();
      break;
  }
  json p = to_json(c);
  p["running"] = running_;
  p["rate"] = params_.rate;
  p["persist_for"] = persist_for_;
  emit("control_applied", std::move(p));
  if (c.kind == ControlKind::Reset) emit_state(std::nullopt, 0.0);
}

SessionEvent SessionCore::snapshot() const {
  json p = world_json();
  p["tick"] = ticks_;
  p["episode"] = episode_;
  p["episode_reward"] = episode_reward_;
  p["running"] = running_;
  p["rate"] = params_.rate;
  p["persist_for"] = persist_for_;
  p["pending_inputs"] = inbox_.size();
  p["agent"] = experiments::agent_name(params_.agent);
  const auto& l = params_.layout;
  json rad = json::array();
  for (auto r : l.radiation) rad.push_back(pos_json(r));
  p["layout"] = {{"width", l.width},
                 {"height", l.height},
                 {"start", pos_json(l.start)},
                 {"person", pos_json(l.person)},
                 {"exit", pos_json(l.exit)},
                 {"radiation", std::move(rad)}};
  if (params_.agent == AgentKind::Naa) {
    json dict = json::array();
    for (int s = 0; s < naa_.dictionary().num_states(); ++s) {
      if (auto a = naa_.dictionary().get(s)) dict.push_back({s, world::action_name(*a)});
    }
    p["dictionary"] = std::move(dict);
  } else {
    json deltas = json::array();
    for (int s = 0; s < ledger_.num_states(); ++s) {
      for (auto a : world::kAllActions) {
        if (int d = ledger_.delta(s, a); d != 0) deltas.push_back({s, world::action_name(a), d});
      }
    }
    p["critique"] = std::move(deltas);
  }
  return SessionEvent{"snapshot", std::move(p), id_, seq_};
}

TraceWriter::TraceWriter(std::ostream& out, const std::string& session_id, const SessionParams& params)
    : out_(&out) {
  line({{"kind", "header"}, {"version", kTraceVersion}, {"session_id", session_id},
        {"params", to_json(params)}});
}

void TraceWriter::line(const json& j) {
  *out_ << j.dump() << '\n';
  out_->flush();
}

void TraceWriter::input(std::uint64_t tick, const text::Utterance& u) {
  line({{"kind", "input"}, {"tick", tick}, {"text", u.text()}, {"timestamp", u.timestamp()}});
}

void TraceWriter::control(std::uint64_t tick, const ControlCommand& c) {
  line({{"kind", "control"}, {"tick", tick}, {"command", to_json(c)}});
}

void TraceWriter::event(const SessionEvent& e) {
  line({{"kind", "event"}, {"event", to_json(e)}});
}

std::optional<std::size_t> ReplayResult::first_mismatch() const {
  const std::size_t n = std::min(recorded.size(), replayed.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (recorded[i] != replayed[i]) return i;
  }
  if (recorded.size() != replayed.size()) return n;
  return std::nullopt;
}

ReplayResult replay(std::istream& trace) {
  ReplayResult result;
  std::string text_line;
  std::size_t line_no = 0;
  auto bad = [&](const std::string& what) {
    return SessionError("trace line " + std::to_string(line_no) + ": " + what);
  };

  std::optional<SessionCore> core;
  std::uint64_t final_tick = 0;
  auto advance_to = [&](std::uint64_t tick) {
    if (tick < core->ticks()) throw bad("tick goes backwards");
    while (core->ticks() < tick) core->tick();
  };

  while (std::getline(trace, text_line)) {
    ++line_no;
    if (text_line.empty()) continue;
    json j;
    try {
      j = json::parse(text_line);
    } catch (const json::exception& e) {
      throw bad(e.what());
    }
    const std::string kind = j.value("kind", "");
    if (!core) {
      if (kind != "header") throw bad("trace must start with a header");
      if (j.value("version", 0) != kTraceVersion) throw bad("unsupported trace version");
      core.emplace(j.at("session_id").get<std::string>(), params_from_json(j.at("params")),
                   [&](const SessionEvent& e) { result.replayed.push_back(serialize(e)); });
      continue;
    }
    try {
      if (kind == "input") {
        advance_to(j.at("tick").get<std::uint64_t>());
        core->enqueue_text(text::Utterance(j.at("text").get<std::string>(), j.value("timestamp", 0.0)));
      } else if (kind == "control") {
        advance_to(j.at("tick").get<std::uint64_t>());
        core->apply_control(parse_control(j.at("command")));
      } else if (kind == "event") {
        const json& e = j.at("event");
        result.recorded.push_back(e.dump());
        if (e.at("type") == "state_update") {
          final_tick = std::max(final_tick, e.at("payload").at("tick").get<std::uint64_t>());
        }
      } else {
        throw bad("unknown line kind: " + kind);
      }
    } catch (const json::exception& e) {
      throw bad(e.what());
    }
  }
  if (!core) throw SessionError("empty trace");
  advance_to(final_tick);
  return result;
}

}  // namespace teachrl::service
