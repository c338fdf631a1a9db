#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "gtest/gtest.h"
#include "teachrl/session.hpp"
#include "teachrl/session_host.hpp"

namespace teachrl::service {
namespace {

using experiments::AgentKind;

struct Recorder {
  std::vector<SessionEvent> events;
  SessionCore::Sink sink() {
    return [this](const SessionEvent& e) { events.push_back(e); };
  }
  std::vector<SessionEvent> of(const std::string& type) const {
    std::vector<SessionEvent> out;
    for (const auto& e : events) {
      if (e.type == type) out.push_back(e);
    }
    return out;
  }
};

SessionParams params_for(AgentKind agent, double rate = 2.0) {
  SessionParams p;
  p.agent = agent;
  p.rate = rate;
  p.seed = 11;
  return p;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("teachrl_session_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(SessionParamsTest, PersistenceFollowsRate) {
  Recorder r;
  SessionCore at2("a", params_for(AgentKind::Naa, 2.0), r.sink());
  EXPECT_EQ(at2.persist_for(), 5);
  SessionCore at4("b", params_for(AgentKind::Naa, 4.0), r.sink());
  EXPECT_EQ(at4.persist_for(), 10);
  auto fixed = params_for(AgentKind::Naa, 4.0);
  fixed.persist_for = 3;
  EXPECT_EQ(SessionCore("c", fixed, r.sink()).persist_for(), 3);
}

TEST(SessionParamsTest, RejectsInvalid) {
  Recorder r;
  EXPECT_THROW(SessionCore("x", params_for(AgentKind::Naa, 0.0), r.sink()), SessionError);
  EXPECT_THROW(SessionCore("x", params_for(AgentKind::Bql), r.sink()), SessionError);
  auto p = params_for(AgentKind::Naa);
  p.persist_for = 0;
  EXPECT_THROW(validate(p), SessionError);
  EXPECT_TRUE(r.events.empty());
}

TEST(SessionParamsTest, JsonRoundTrip) {
  auto p = params_for(AgentKind::PolicyShaping, 3.5);
  p.persist_for = 7;
  p.keep_dictionary_on_reset = false;
  p.layout.radiation = {{2, 2}};
  auto back = params_from_json(to_json(p));
  EXPECT_EQ(to_json(back), to_json(p));
  EXPECT_EQ(back.layout.radiation.size(), 1u);
  EXPECT_THROW(params_from_json(json{{"agent", "bql"}}), SessionError);
  EXPECT_THROW(params_from_json(json{{"rate", "fast"}}), SessionError);
  EXPECT_THROW(params_from_json(json::array()), SessionError);
}

TEST(ControlTest, ParsesBothForms) {
  EXPECT_EQ(parse_control("pause").kind, ControlKind::Pause);
  auto c = parse_control(json{{"command", "set_rate"}, {"rate", 4}});
  EXPECT_EQ(c.kind, ControlKind::SetRate);
  EXPECT_DOUBLE_EQ(c.rate, 4.0);
  EXPECT_EQ(to_json(c), (json{{"command", "set_rate"}, {"rate", 4.0}}));
  EXPECT_THROW(parse_control("jump"), SessionError);
  EXPECT_THROW(parse_control(json{{"command", "set_rate"}}), SessionError);
  EXPECT_THROW(parse_control(42), SessionError);
}

TEST(SessionCoreTest, InitialStateUpdateIsSeqOne) {
  Recorder r;
  SessionCore core("s1", params_for(AgentKind::Naa), r.sink());
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].type, "state_update");
  EXPECT_EQ(r.events[0].seq, 1u);
  EXPECT_EQ(r.events[0].session_id, "s1");
  EXPECT_EQ(r.events[0].payload["pos"], json::array({0, 0}));
  EXPECT_TRUE(r.events[0].payload["action"].is_null());
  EXPECT_FALSE(core.running());
}

TEST(SessionCoreTest, DirectionWordBecomesAdviceAndPersists) {
  Recorder r;
  SessionCore core("s1", params_for(AgentKind::Naa), r.sink());
  core.enqueue_text(text::Utterance("right"));
  EXPECT_EQ(core.pending_inputs(), 1u);
  core.tick();
  EXPECT_EQ(core.pending_inputs(), 0u);
  auto consumed = r.of("advice_consumed");
  ASSERT_EQ(consumed.size(), 1u);
  EXPECT_EQ(consumed[0].payload["action"], "right");
  EXPECT_EQ(consumed[0].payload["state_index"], 0);
  EXPECT_EQ(consumed[0].payload["persist_for"], 5);
  EXPECT_EQ(core.dictionary().get(0), world::MoveAction::Right);
  // Advice is consumed before the step it governs, then held for 5 steps.
  for (int i = 0; i < 4; ++i) core.tick();
  auto updates = r.of("state_update");
  ASSERT_EQ(updates.size(), 6u);
  for (int i = 1; i <= 5; ++i) {
    EXPECT_EQ(updates[i].payload["action"], "right") << i;
    EXPECT_EQ(updates[i].payload["source"], "advice") << i;
    EXPECT_EQ(updates[i].payload["persisting"], 5 - i) << i;
  }
  EXPECT_EQ(updates[5].payload["pos"], json::array({5, 0}));
}

TEST(SessionCoreTest, ChatterIsIgnoredWithAReason) {
  Recorder naa_events;
  SessionCore naa("s1", params_for(AgentKind::Naa), naa_events.sink());
  naa.enqueue_text(text::Utterance("hello"));
  naa.tick();
  auto ignored = naa_events.of("instruction_ignored");
  ASSERT_EQ(ignored.size(), 1u);
  EXPECT_EQ(ignored[0].payload["reason"], "no direction word");
  EXPECT_EQ(naa.dictionary().size(), 0u);

  Recorder ps_events;
  SessionCore ps("s2", params_for(AgentKind::PolicyShaping), ps_events.sink());
  ps.enqueue_text(text::Utterance("good job"));  // nothing has happened yet
  ps.enqueue_text(text::Utterance("hello"));
  ps.tick();
  ps.tick();
  ignored = ps_events.of("instruction_ignored");
  ASSERT_EQ(ignored.size(), 2u);
  EXPECT_EQ(ignored[0].payload["reason"], "no action to critique");
  EXPECT_EQ(ignored[1].payload["reason"], "neutral");
}

TEST(SessionCoreTest, CritiqueTargetsThePreviousAction) {
  Recorder r;
  SessionCore core("s1", params_for(AgentKind::PolicyShaping), r.sink());
  core.tick();
  const auto first = r.of("state_update").back().payload;
  core.enqueue_text(text::Utterance("good job"));
  core.tick();
  auto consumed = r.of("critique_consumed");
  ASSERT_EQ(consumed.size(), 1u);
  EXPECT_EQ(consumed[0].payload["sentiment"], "positive");
  EXPECT_EQ(consumed[0].payload["state_index"], 0);
  EXPECT_EQ(consumed[0].payload["action"], first["action"]);
  EXPECT_EQ(consumed[0].payload["delta"], 1);
  auto a = world::action_from_name(first["action"].get<std::string>());
  EXPECT_EQ(core.ledger().delta(0, *a), 1);

  core.enqueue_text(text::Utterance("that is a bad idea"));
  core.tick();
  consumed = r.of("critique_consumed");
  ASSERT_EQ(consumed.size(), 2u);
  EXPECT_EQ(consumed[1].payload["sentiment"], "negative");
}

TEST(SessionCoreTest, OneUtterancePerTickInOrder) {
  Recorder r;
  SessionCore core("s1", params_for(AgentKind::Naa), r.sink());
  core.enqueue_text(text::Utterance("down"));
  core.enqueue_text(text::Utterance("left"));
  core.enqueue_text(text::Utterance("up"));
  core.tick();
  EXPECT_EQ(core.pending_inputs(), 2u);
  core.tick();
  core.tick();
  auto consumed = r.of("advice_consumed");
  ASSERT_EQ(consumed.size(), 3u);
  EXPECT_EQ(consumed[0].payload["action"], "down");
  EXPECT_EQ(consumed[1].payload["action"], "left");
  EXPECT_EQ(consumed[2].payload["action"], "up");
}

TEST(SessionCoreTest, SeqIsContiguous) {
  Recorder r;
  SessionCore core("s1", params_for(AgentKind::Naa), r.sink());
  for (int i = 0; i < 300; ++i) {
    if (i % 7 == 0) core.enqueue_text(text::Utterance(i % 2 ? "down" : "right"));
    core.tick();
  }
  for (std::size_t i = 0; i < r.events.size(); ++i) EXPECT_EQ(r.events[i].seq, i + 1);
  EXPECT_EQ(core.last_seq(), r.events.size());
}

TEST(SessionCoreTest, EpisodeEndPrecedesFreshStart) {
  Recorder r;
  auto p = params_for(AgentKind::Naa);
  p.layout.max_steps = 3;
  SessionCore core("s1", p, r.sink());
  for (int i = 0; i < 3; ++i) core.tick();
  ASSERT_GE(r.events.size(), 3u);
  const auto n = r.events.size();
  EXPECT_EQ(r.events[n - 3].type, "state_update");
  EXPECT_EQ(r.events[n - 2].type, "episode_end");
  EXPECT_EQ(r.events[n - 2].payload["steps"], 3);
  EXPECT_EQ(r.events[n - 2].payload["outcome"], "truncated");
  EXPECT_EQ(r.events[n - 2].payload["episode"], 0);
  EXPECT_EQ(r.events[n - 1].type, "state_update");
  EXPECT_EQ(r.events[n - 1].payload["pos"], json::array({0, 0}));
  EXPECT_EQ(r.events[n - 1].payload["episode"], 1);
  EXPECT_EQ(core.episode(), 1);
}

TEST(SessionCoreTest, RescueEndsEpisodeWithBonus) {
  Recorder r;
  auto p = params_for(AgentKind::Naa);
  p.persist_for = 16;
  SessionCore core("s1", p, r.sink());
  // Down 5 to (0,5), right picks up at (1,5) and continues to the exit.
  core.enqueue_text(text::Utterance("down"));
  for (int i = 0; i < 5; ++i) core.tick();
  core.enqueue_text(text::Utterance("right"));
  for (int i = 0; i < 5; ++i) core.tick();
  auto ends = r.of("episode_end");
  ASSERT_EQ(ends.size(), 1u);
  EXPECT_EQ(ends[0].payload["outcome"], "rescued");
  EXPECT_EQ(ends[0].payload["steps"], 10);
  EXPECT_DOUBLE_EQ(ends[0].payload["reward"].get<double>(), 102.0);
}

TEST(SessionCoreTest, ControlsPauseStartAndRate) {
  Recorder r;
  SessionCore core("s1", params_for(AgentKind::Naa), r.sink());
  core.apply_control({ControlKind::Start, 0});
  EXPECT_TRUE(core.running());
  core.apply_control({ControlKind::Pause, 0});
  EXPECT_FALSE(core.running());
  core.apply_control({ControlKind::SetRate, 4.0});
  EXPECT_EQ(core.persist_for(), 10);
  EXPECT_DOUBLE_EQ(core.rate(), 4.0);
  auto applied = r.of("control_applied");
  ASSERT_EQ(applied.size(), 3u);
  EXPECT_EQ(applied[0].payload["running"], true);
  EXPECT_EQ(applied[2].payload["persist_for"], 10);
  core.apply_control({ControlKind::SetRate, 0.0});
  EXPECT_EQ(r.events.back().type, "error");
  EXPECT_DOUBLE_EQ(core.rate(), 4.0);
}

TEST(SessionCoreTest, ResetKeepsDictionaryByDefault) {
  for (bool keep : {true, false}) {
    Recorder r;
    auto p = params_for(AgentKind::Naa);
    p.keep_dictionary_on_reset = keep;
    SessionCore core("s1", p, r.sink());
    core.enqueue_text(text::Utterance("right"));
    for (int i = 0; i < 3; ++i) core.tick();
    core.enqueue_text(text::Utterance("down"));
    core.apply_control({ControlKind::Reset, 0});
    EXPECT_EQ(core.dictionary().get(0).has_value(), keep);
    EXPECT_EQ(core.pending_inputs(), 0u);
    EXPECT_EQ(core.episode(), 0);
    EXPECT_EQ(core.world_state(), world::reset(p.layout));
    EXPECT_EQ(core.q_table(), bql::QTable(p.layout.num_states(), p.layout.discount));
    ASSERT_GE(r.events.size(), 2u);
    EXPECT_EQ(r.events[r.events.size() - 2].type, "control_applied");
    EXPECT_EQ(r.events.back().type, "state_update");
  }
}

TEST(SessionCoreTest, SnapshotDescribesCurrentState) {
  Recorder r;
  SessionCore core("s1", params_for(AgentKind::Naa), r.sink());
  core.enqueue_text(text::Utterance("right"));
  core.tick();
  auto snap = core.snapshot();
  EXPECT_EQ(snap.type, "snapshot");
  EXPECT_EQ(snap.seq, core.last_seq());
  EXPECT_EQ(snap.payload["tick"], 1);
  EXPECT_EQ(snap.payload["pos"], json::array({1, 0}));
  EXPECT_EQ(snap.payload["layout"]["radiation"], json::parse("[[1,2],[1,3]]"));
  EXPECT_TRUE(snap.payload["dictionary"].size() >= 1);
  EXPECT_EQ(snap.payload["agent"], "naa");
}

TEST(SessionHostTest, SubscriberSeesSnapshotThenLiveEvents) {
  SessionHost host("s1", params_for(AgentKind::Naa), SessionHost::Mode::Manual);
  host.advance(3);
  std::vector<SessionEvent> a_events, b_events;
  host.subscribe([&](const SessionEvent& e) { a_events.push_back(e); });
  ASSERT_EQ(a_events.size(), 1u);
  EXPECT_EQ(a_events[0].type, "snapshot");
  EXPECT_EQ(a_events[0].seq, host.last_seq());
  auto b = host.subscribe([&](const SessionEvent& e) { b_events.push_back(e); });
  host.submit_text("down");
  host.advance(2);
  host.unsubscribe(b);
  host.advance(1);
  ASSERT_GT(a_events.size(), 3u);
  for (std::size_t i = 1; i < a_events.size(); ++i) EXPECT_EQ(a_events[i].seq, a_events[i - 1].seq + 1);
  EXPECT_EQ(b_events.size() + 1, a_events.size());  // b left one state_update early
  for (std::size_t i = 1; i < b_events.size(); ++i) {
    EXPECT_EQ(serialize(b_events[i]), serialize(a_events[i]));
  }
  EXPECT_THROW(host.submit_text("   "), std::invalid_argument);
}

TEST(SessionHostTest, TraceReplaysByteForByte) {
  const auto dir = scratch("replay");
  const auto path = (dir / "s1.jsonl").string();
  {
    SessionHost host("s1", params_for(AgentKind::Naa), SessionHost::Mode::Manual, path);
    host.submit_text("right");
    host.advance(4);
    host.submit_text("hello");
    host.submit_text("down");
    host.advance(30);
    host.control({ControlKind::SetRate, 4.0});
    host.submit_text("left");
    host.advance(600);
    host.control({ControlKind::Reset, 0});
    host.advance(5);
  }
  std::ifstream in(path);
  auto result = replay(in);
  EXPECT_GT(result.recorded.size(), 600u);
  EXPECT_TRUE(result.identical()) << "first mismatch at " << result.first_mismatch().value_or(0);
  std::filesystem::remove_all(dir);
}

TEST(SessionHostTest, PolicyShapingTraceReplays) {
  const auto dir = scratch("replay_ps");
  const auto path = (dir / "s1.jsonl").string();
  {
    SessionHost host("s1", params_for(AgentKind::PolicyShaping), SessionHost::Mode::Manual, path);
    for (int i = 0; i < 40; ++i) {
      host.submit_text(i % 3 ? "good job" : "you're wasting time");
      host.advance(3);
    }
  }
  std::ifstream in(path);
  EXPECT_TRUE(replay(in).identical());
  std::filesystem::remove_all(dir);
}

TEST(ReplayTest, RejectsBrokenTraces) {
  std::istringstream empty("");
  EXPECT_THROW(replay(empty), SessionError);
  std::istringstream headless(R"({"kind":"input","tick":0,"text":"up"})" "\n");
  EXPECT_THROW(replay(headless), SessionError);
  std::istringstream garbage("not json\n");
  EXPECT_THROW(replay(garbage), SessionError);
}

TEST(ReplayTest, DetectsTampering) {
  std::ostringstream out;
  SessionParams p = params_for(AgentKind::Naa);
  TraceWriter w(out, "s1", p);
  SessionCore core("s1", p, [&](const SessionEvent& e) { w.event(e); });
  core.tick();
  std::string text = out.str();
  const auto at = text.rfind("\"tick\":1");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 8, "\"tick\":2");
  std::istringstream in(text);
  auto result = replay(in);
  EXPECT_FALSE(result.identical());
  EXPECT_TRUE(result.first_mismatch().has_value());
}

TEST(SessionRegistryTest, IdsAndRemoval) {
  SessionRegistry registry(SessionHost::Mode::Manual);
  auto a = registry.create(params_for(AgentKind::Naa));
  auto b = registry.create(params_for(AgentKind::PolicyShaping));
  EXPECT_EQ(a->id(), "s1");
  EXPECT_EQ(b->id(), "s2");
  EXPECT_EQ(registry.ids(), (std::vector<std::string>{"s1", "s2"}));
  EXPECT_EQ(registry.find("s2"), b);
  EXPECT_TRUE(registry.remove("s1"));
  EXPECT_FALSE(registry.remove("s1"));
  EXPECT_EQ(registry.find("s1"), nullptr);
  EXPECT_THROW(registry.create(params_for(AgentKind::Bql)), SessionError);
  EXPECT_EQ(registry.create(params_for(AgentKind::Naa))->id(), "s3");
}

TEST(SessionHostTest, ThreadedTicksAtTheRequestedRate) {
  SessionHost host("s1", params_for(AgentKind::Naa, 5.0));
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  EXPECT_EQ(host.ticks(), 0u);  // created paused
  host.control({ControlKind::Start, 0});
  const auto t0 = std::chrono::steady_clock::now();
  const auto k0 = host.ticks();
  std::this_thread::sleep_for(std::chrono::seconds(10));
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double observed = static_cast<double>(host.ticks() - k0) / elapsed;
  EXPECT_NEAR(observed, 5.0, 0.5);
  host.control({ControlKind::Pause, 0});
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  const auto frozen = host.ticks();
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  EXPECT_EQ(host.ticks(), frozen);
  host.stop();
}

TEST(SessionHostTest, ThreadedSubscribeIsOrdered) {
  SessionHost host("s1", params_for(AgentKind::Naa, 50.0));
  std::mutex m;
  std::vector<std::uint64_t> seqs;
  host.subscribe([&](const SessionEvent& e) {
    std::lock_guard<std::mutex> lock(m);
    seqs.push_back(e.seq);
  });
  host.control({ControlKind::Start, 0});
  host.submit_text("down");
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  host.stop();
  std::lock_guard<std::mutex> lock(m);
  ASSERT_GT(seqs.size(), 5u);
  for (std::size_t i = 1; i < seqs.size(); ++i) EXPECT_EQ(seqs[i], seqs[i - 1] + 1);
}

}  // namespace
}  // namespace teachrl::service
