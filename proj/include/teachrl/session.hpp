#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "teachrl/bql.hpp"
#include "teachrl/experiments.hpp"
#include "teachrl/newtonian.hpp"
#include "teachrl/policy_shaping.hpp"
#include "teachrl/random.hpp"
#include "teachrl/text_feedback.hpp"
#include "teachrl/world.hpp"

namespace teachrl::service {

using json = nlohmann::json;

class SessionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SessionParams {
  experiments::AgentKind agent = experiments::AgentKind::Naa;
  world::Layout layout = world::default_layout();
  double rate = 2.0;    // U, steps per second
  double dt_des = 2.5;  // seconds one piece of advice should last
  std::optional<int> persist_for;  // overrides the rate-derived value when set
  std::uint64_t seed = 0;
  bool keep_dictionary_on_reset = true;
  double consistency = 0.95;
  int samples = 50;
  bql::NormalGamma prior{};
};

/// Throws SessionError. Also rejects the bql agent: sessions exist to be taught.
void validate(const SessionParams& params);
json to_json(const SessionParams& params);
SessionParams params_from_json(const json& j);

enum class ControlKind { Start, Pause, Reset, SetRate };

struct ControlCommand {
  ControlKind kind = ControlKind::Start;
  double rate = 0.0;  // SetRate only
};

/// Accepts "start", "pause", "reset", "set_rate" (with `rate`), either as a bare
/// string or as {"command": ..., "rate": ...}. Throws SessionError otherwise.
ControlCommand parse_control(const json& j);
json to_json(const ControlCommand& c);

struct SessionEvent {
  std::string type;
  json payload;
  std::string session_id;
  std::uint64_t seq = 0;
};

/// The wire form `{type, payload, session_id, seq}` on one line, no newline.
std::string serialize(const SessionEvent& event);
json to_json(const SessionEvent& event);

/// One teaching session as a deterministic state machine. Nothing here reads
/// a clock or spawns a thread; hosting adds those. Every mutation goes
/// through enqueue_text, apply_control or tick, and each emits its events
/// synchronously to the sink in seq order.
class SessionCore {
 public:
  using Sink = std::function<void(const SessionEvent&)>;

  /// Emits the initial state_update (seq 1).
  SessionCore(std::string id, SessionParams params, Sink sink);

  /// Queues text for consumption, one utterance per tick, in arrival order.
  void enqueue_text(const text::Utterance& utterance);
  void apply_control(const ControlCommand& command);
  /// Advances one time step regardless of the running flag.
  void tick();

  /// Full state for a new subscriber. Carries the current last seq.
  SessionEvent snapshot() const;

  const std::string& id() const { return id_; }
  const SessionParams& params() const { return params_; }
  bool running() const { return running_; }
  double rate() const { return params_.rate; }
  int persist_for() const { return persist_for_; }
  std::uint64_t ticks() const { return ticks_; }
  std::uint64_t last_seq() const { return seq_; }
  int episode() const { return episode_; }
  std::size_t pending_inputs() const { return inbox_.size(); }
  const world::WorldState& world_state() const { return state_; }
  const bql::QTable& q_table() const { return q_; }
  const advice::AdviceDictionary& dictionary() const { return naa_.dictionary(); }
  const shaping::CritiqueLedger& ledger() const { return ledger_; }

 private:
  void emit(std::string type, json payload);
  void consume(const text::Utterance& u);
  json world_json() const;
  void emit_state(const std::optional<world::MoveAction>& action, double reward);
  void restart_episode();

  std::string id_;
  SessionParams params_;
  Sink sink_;
  std::uint64_t seq_ = 0;
  std::uint64_t ticks_ = 0;
  bool running_ = false;
  int persist_for_ = 1;

  AgentRng rng_;
  bql::QTable q_;
  advice::NewtonianAgent naa_;
  shaping::CritiqueLedger ledger_;
  world::WorldState state_;
  int episode_ = 0;
  double episode_reward_ = 0.0;
  std::optional<std::pair<int, world::MoveAction>> last_pair_;
  std::deque<text::Utterance> inbox_;
};

/// Append-only JSON-lines record of a session: a header with the params,
/// every input and control tagged with the tick count at which it reached the
/// core, and every emitted event.
class TraceWriter {
 public:
  TraceWriter(std::ostream& out, const std::string& session_id, const SessionParams& params);

  void input(std::uint64_t tick, const text::Utterance& u);
  void control(std::uint64_t tick, const ControlCommand& c);
  void event(const SessionEvent& e);

 private:
  void line(const json& j);
  std::ostream* out_;
};

struct ReplayResult {
  std::vector<std::string> recorded;  // serialized event lines from the trace
  std::vector<std::string> replayed;  // serialized event lines from re-running it
  bool identical() const { return recorded == replayed; }
  /// Index of the first differing line, or nullopt when identical.
  std::optional<std::size_t> first_mismatch() const;
};

/// Re-runs the inputs of a trace through a fresh SessionCore.
ReplayResult replay(std::istream& trace);

}  // namespace teachrl::service
