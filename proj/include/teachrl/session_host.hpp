#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "teachrl/session.hpp"

namespace teachrl::service {

/// Runs one SessionCore. In threaded mode a dedicated thread owns the core
/// and ticks it every 1/U seconds against steady-clock deadlines while
/// running. In manual mode nothing moves until pump() or advance() is called,
/// which keeps tests deterministic.
///
/// Inputs and controls from any thread land in a mailbox and reach the core
/// in arrival order. Subscriber callbacks run on the session thread (or the
/// caller's, in manual mode) and must not block.
class SessionHost {
 public:
  using Callback = std::function<void(const SessionEvent&)>;
  enum class Mode { Threaded, Manual };

  /// `trace_path` empty means no trace is written.
  SessionHost(std::string id, SessionParams params, Mode mode = Mode::Threaded,
              const std::string& trace_path = {});
  ~SessionHost();

  SessionHost(const SessionHost&) = delete;
  SessionHost& operator=(const SessionHost&) = delete;

  /// Throws std::invalid_argument for blank text.
  void submit_text(const std::string& text);
  void control(const ControlCommand& command);

  /// Delivers a snapshot, then every later event, to `callback`. Returns a
  /// handle for unsubscribe. Blocks until the snapshot has been delivered.
  std::uint64_t subscribe(Callback callback);
  void unsubscribe(std::uint64_t handle);

  /// Manual mode: apply everything in the mailbox.
  void pump();
  /// Manual mode: pump, then tick `n` times (ignores the running flag).
  void advance(int n);

  const std::string& id() const { return id_; }
  /// Thread-safe counters, refreshed after every mailbox drain and tick.
  std::uint64_t ticks() const;
  std::uint64_t last_seq() const;
  bool running() const;
  double rate() const;

  void stop();

 private:
  struct Text {
    std::string text;
    double timestamp;
  };
  struct Subscribe {
    std::uint64_t handle;
    Callback callback;
    std::shared_ptr<std::promise<void>> delivered;
  };
  struct Unsubscribe {
    std::uint64_t handle;
  };
  using Message = std::variant<Text, ControlCommand, Subscribe, Unsubscribe>;

  void post(Message m);
  void drain(std::deque<Message>& batch);
  void apply(Message& m);
  void on_event(const SessionEvent& e);
  void do_tick();
  void refresh_status();
  void loop();

  std::string id_;
  Mode mode_;
  std::chrono::steady_clock::time_point created_;

  std::ofstream trace_file_;
  std::optional<TraceWriter> trace_;
  std::vector<std::pair<std::uint64_t, Callback>> subscribers_;  // session thread only
  std::optional<SessionCore> core_;                              // session thread only

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::deque<Message> mailbox_;
  bool stopping_ = false;
  std::uint64_t next_handle_ = 1;
  std::uint64_t ticks_ = 0;
  std::uint64_t last_seq_ = 0;
  bool running_ = false;
  double rate_ = 0.0;

  std::thread thread_;
};

/// Live sessions by id. Ids are "s1", "s2", ... in creation order.
class SessionRegistry {
 public:
  explicit SessionRegistry(SessionHost::Mode mode = SessionHost::Mode::Threaded,
                           std::string trace_dir = {});

  /// Throws SessionError for invalid params.
  std::shared_ptr<SessionHost> create(const SessionParams& params);
  std::shared_ptr<SessionHost> find(const std::string& id) const;
  std::vector<std::string> ids() const;
  /// Stops and forgets the session. Returns whether it existed.
  bool remove(const std::string& id);
  void stop_all();

 private:
  SessionHost::Mode mode_;
  std::string trace_dir_;
  mutable std::mutex mutex_;
  std::uint64_t counter_ = 0;
  std::map<std::string, std::shared_ptr<SessionHost>> sessions_;
};

}  // namespace teachrl::service
