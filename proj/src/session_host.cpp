#include "teachrl/session_host.hpp"

#include <algorithm>
#include <filesystem>

namespace teachrl::service {

using Clock = std::chrono::steady_clock;

SessionHost::SessionHost(std::string id, SessionParams params, Mode mode, const std::string& trace_path)
    : id_(std::move(id)), mode_(mode), created_(Clock::now()) {
  validate(params);
  if (!trace_path.empty()) {
    trace_file_.open(trace_path, std::ios::out | std::ios::trunc);
    if (!trace_file_) throw SessionError("cannot open trace file: " + trace_path);
    trace_.emplace(trace_file_, id_, params);
  }
  core_.emplace(id_, std::move(params), [this](const SessionEvent& e) { on_event(e); });
  refresh_status();
  if (mode_ == Mode::Threaded) thread_ = std::thread([this] { loop(); });
}

SessionHost::~SessionHost() { stop(); }

void SessionHost::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void SessionHost::post(Message m) {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) {
      if (auto* s = std::get_if<Subscribe>(&m)) s->delivered->set_value();
      return;
    }
    mailbox_.push_back(std::move(m));
  }
  wake_.notify_all();
}

void SessionHost::submit_text(const std::string& text) {
  text::Utterance probe(text);  // rejects blank text on the caller's thread
  const double t = std::chrono::duration<double>(Clock::now() - created_).count();
  post(Text{probe.text(), t});
}

void SessionHost::control(const ControlCommand& command) { post(command); }

std::uint64_t SessionHost::subscribe(Callback callback) {
  auto delivered = std::make_shared<std::promise<void>>();
  auto done = delivered->get_future();
  std::uint64_t handle = 0;
  {
    std::lock_guard lock(mutex_);
    handle = next_handle_++;
  }
  post(Subscribe{handle, std::move(callback), delivered});
  if (mode_ == Mode::Manual) pump();
  done.wait();
  return handle;
}

void SessionHost::unsubscribe(std::uint64_t handle) {
  post(Unsubscribe{handle});
  if (mode_ == Mode::Manual) pump();
}

void SessionHost::pump() {
  std::deque<Message> batch;
  {
    std::lock_guard lock(mutex_);
    batch.swap(mailbox_);
  }
  drain(batch);
}

void SessionHost::advance(int n) {
  pump();
  for (int i = 0; i < n; ++i) do_tick();
}

void SessionHost::drain(std::deque<Message>& batch) {
  for (auto& m : batch) apply(m);
  refresh_status();
}

void SessionHost::apply(Message& m) {
  if (auto* t = std::get_if<Text>(&m)) {
    text::Utterance u(t->text, t->timestamp);
    if (trace_) trace_->input(core_->ticks(), u);
    core_->enqueue_text(u);
  } else if (auto* c = std::get_if<ControlCommand>(&m)) {
    if (trace_) trace_->control(core_->ticks(), *c);
    core_->apply_control(*c);
  } else if (auto* s = std::get_if<Subscribe>(&m)) {
    try {
      s->callback(core_->snapshot());
      subscribers_.emplace_back(s->handle, std::move(s->callback));
    } catch (...) {
    }
    s->delivered->set_value();
  } else if (auto* u = std::get_if<Unsubscribe>(&m)) {
    std::erase_if(subscribers_, [&](const auto& p) { return p.first == u->handle; });
  }
}

void SessionHost::on_event(const SessionEvent& e) {
  if (trace_) trace_->event(e);
  for (auto& [handle, cb] : subscribers_) {
    try {
      cb(e);
    } catch (...) {
    }
  }
}

void SessionHost::do_tick() {
  core_->tick();
  refresh_status();
}

void SessionHost::refresh_status() {
  std::lock_guard lock(mutex_);
  ticks_ = core_->ticks();
  last_seq_ = core_->last_seq();
  running_ = core_->running();
  rate_ = core_->rate();
}

std::uint64_t SessionHost::ticks() const {
  std::lock_guard lock(mutex_);
  return ticks_;
}

std::uint64_t SessionHost::last_seq() const {
  std::lock_guard lock(mutex_);
  return last_seq_;
}

bool SessionHost::running() const {
  std::lock_guard lock(mutex_);
  return running_;
}

double SessionHost::rate() const {
  std::lock_guard lock(mutex_);
  return rate_;
}

void SessionHost::loop() {
  auto period = [this] {
    return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / core_->rate()));
  };
  Clock::time_point deadline{};
  bool was_running = false;
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    if (!mailbox_.empty()) {
      std::deque<Message> batch;
      batch.swap(mailbox_);
      lock.unlock();
      drain(batch);
      lock.lock();
      continue;
    }
    const bool run = running_;
    if (run && !was_running) deadline = Clock::now() + period();
    was_running = run;
    if (!run) {
      wake_.wait(lock);
      continue;
    }
    if (Clock::now() >= deadline) {
      lock.unlock();
      do_tick();
      lock.lock();
      deadline += period();
      // After a long stall, resume the cadence instead of bursting to catch up.
      if (const auto now = Clock::now(); deadline + period() < now) deadline = now + period();
      continue;
    }
    wake_.wait_until(lock, deadline);
  }
  // Hand any stranded subscribe requests their answer so no caller hangs.
  for (auto& m : mailbox_) {
    if (auto* s = std::get_if<Subscribe>(&m)) s->delivered->set_value();
  }
  mailbox_.clear();
}

SessionRegistry::SessionRegistry(SessionHost::Mode mode, std::string trace_dir)
    : mode_(mode), trace_dir_(std::move(trace_dir)) {
  if (!trace_dir_.empty()) std::filesystem::create_directories(trace_dir_);
}

std::shared_ptr<SessionHost> SessionRegistry::create(const SessionParams& params) {
  validate(params);  // before taking an id, so rejected requests leave no gap
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "s" + std::to_string(++counter_);
  }
  std::string trace;
  if (!trace_dir_.empty()) trace = (std::filesystem::path(trace_dir_) / (id + ".jsonl")).string();
  auto host = std::make_shared<SessionHost>(id, params, mode_, trace);
  std::lock_guard lock(mutex_);
  sessions_[id] = host;
  return host;
}

std::shared_ptr<SessionHost> SessionRegistry::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> SessionRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, host] : sessions_) out.push_back(id);
  // Creation order: "s2" before "s10".
  std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return out;
}

bool SessionRegistry::remove(const std::string& id) {
  std::shared_ptr<SessionHost> host;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    host = it->second;
    sessions_.erase(it);
  }
  host->stop();
  return true;
}

void SessionRegistry::stop_all() {
  std::map<std::string, std::shared_ptr<SessionHost>> all;
  {
    std::lock_guard lock(mutex_);
    all.swap(sessions_);
  }
  for (auto& [id, host] : all) host->stop();
}

}  // namespace teachrl::service
