#include "webswarm/realtime.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "webswarm/client_runtime.hpp"
#include "webswarm/error.hpp"
#include "webswarm/kernels.hpp"
#include "webswarm/random.hpp"
#include "webswarm/swarm_sim.hpp"

namespace webswarm {

namespace pr = protocol;

namespace {

using steady = std::chrono::steady_clock;

struct Control {
  std::mutex mu;
  std::condition_variable cv;
  bool killed = false;
  bool finished = false;
  Channel* channel = nullptr;

  void kill() {
    std::lock_guard lock(mu);
    killed = true;
    if (channel) channel->abort();
    cv.notify_all();
  }

  /// Sleeps unless killed first. Returns false when killed.
  bool sleep(double seconds) {
    std::unique_lock lock(mu);
    return !cv.wait_for(lock, std::chrono::duration<double>(seconds), [this] { return killed; });
  }

  bool is_killed() {
    std::lock_guard lock(mu);
    return killed;
  }
};

class Swarm {
 public:
  Swarm(const ExperimentConfig& cfg, const RealtimeOptions& opts)
      : cfg_(cfg), opts_(opts), kernels_(KernelRegistry::builtin()), kernel_(kernels_.get(cfg.kernel_id)) {
    clock_ = opts.clock ? opts.clock : std::make_shared<SteadyClock>();
    sink_ = opts.sink ? opts.sink : std::make_shared<EventSink>();
  }

  RealtimeResult run() {
    // Fail fast if nothing is listening.
    fetch_stats(opts_.channel.endpoint);
    const auto t0 = steady::now();
    std::vector<std::thread> slots;
    for (std::size_t i = 0; i < cfg_.worker_slots; ++i) slots.emplace_back([this, i] { slot_loop(i); });

    auto probe = opts_.drained ? opts_.drained : [this] {
      try {
        return fetch_stats(opts_.channel.endpoint).value("drained", false);
      } catch (const ServerUnreachable&) {
        return false;
      }
    };
    while (!done_) {
      if (probe()) {
        drained_ = true;
        break;
      }
      if (std::chrono::duration<double>(steady::now() - t0).count() > cfg_.max_time_s) break;
      std::this_thread::sleep_for(std::chrono::duration<double>(opts_.probe_interval_s));
    }
    stop_all();
    for (auto& t : slots) t.join();

    RealtimeResult r;
    r.drained = drained_ || (opts_.drained && opts_.drained());
    r.wall_s = std::chrono::duration<double>(steady::now() - t0).count();
    r.sessions = sessions_;
    r.bytes_sent = bytes_sent_;
    r.bytes_received = bytes_received_;
    return r;
  }

 private:
  void stop_all() {
    std::lock_guard lock(mu_);
    done_ = true;
    for (auto* c : live_) c->kill();
  }

  void slot_loop(std::size_t slot) {
    SplitMix64 rng(derive_seed(cfg_.rng_seed, slot));
    std::size_t index = 0;
    while (!done_) {
      const double dwell = dwell::sample(cfg_.dwell, rng);
      const std::string id = "r" + std::to_string(slot) + "-" + std::to_string(index++);
      Control control;
      {
        std::lock_guard lock(mu_);
        if (done_) break;
        live_.push_back(&control);
        ++sessions_;
      }
      std::thread session([this, &control, id] { run_session(control, id); });
      {
        std::unique_lock lock(control.mu);
        if (std::isfinite(dwell)) {
          control.cv.wait_for(lock, std::chrono::duration<double>(dwell),
                              [&] { return control.finished || control.killed; });
        } else {
          control.cv.wait(lock, [&] { return control.finished || control.killed; });
        }
      }
      control.kill();
      session.join();
      {
        std::lock_guard lock(mu_);
        std::erase(live_, &control);
      }
      if (cfg_.respawn_delay_s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.respawn_delay_s));
    }
  }

  void event(const std::string& session, EventKind kind) {
    MetricEvent e;
    e.t = clock_->now();
    e.kind = kind;
    e.session = session;
    sink_->append(std::move(e));
  }

  void apply(ClientRuntime& rt, const pr::ServerMessage& m) {
    if (const auto* t = std::get_if<pr::Tasks>(&m)) {
      rt.on_tasks(t->tasks);
    } else if (std::holds_alternative<pr::Drained>(m)) {
      rt.on_tasks({});
    } else {
      rt.on_request_failed();
    }
  }

  void run_session(Control& control, const std::string& id) {
    std::unique_ptr<Channel> channel;
    bool waiting = false;
    try {
      session_body(control, id, channel, waiting);
    } catch (const Error&) {
      // killed mid-exchange, or the server went away
    }
    if (waiting && channel) event(channel->session(), EventKind::WaitEnd);
    if (channel) {
      bytes_sent_ += channel->bytes_sent();
      bytes_received_ += channel->bytes_received();
    }
    std::lock_guard lock(control.mu);
    control.channel = nullptr;
    control.finished = true;
    control.cv.notify_all();
  }

  void session_body(Control& control, const std::string& id, std::unique_ptr<Channel>& channel, bool& waiting) {
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
    fetch_bundle(opts_.channel, cfg_.kernel_id, id, &sent, &received);
    bytes_sent_ += sent;
    bytes_received_ += received;
    if (!control.sleep(cfg_.network.worker_start_s)) return;
    channel = connect_channel(cfg_.transport, opts_.channel);
    {
      std::lock_guard lock(control.mu);
      control.channel = channel.get();
      if (control.killed) channel->abort();
    }
    pr::Hello hello;
    hello.client_info = {{"agent", "native"}};
    hello.session = id;
    channel->call(hello);
    const auto sid = channel->session();

    ClientRuntime rt(cfg_.policy);
    std::optional<std::future<pr::ServerMessage>> inflight;
    while (!control.is_killed()) {
      auto step = rt.next_action();
      if (step.finished) break;
      if (step.request) {
        const pr::ClientMessage req = pr::RequestTasks{step.request->count};
        if (step.request->async) {
          inflight = channel->call_async(req);
        } else {
          event(sid, EventKind::WaitStart);
          waiting = true;
          apply(rt, channel->call(req));
          event(sid, EventKind::WaitEnd);
          waiting = false;
        }
      }
      if (step.run) {
        TaskExecution exec(std::move(*step.run), kernel_, cfg_.policy.checkpoint_every, !cfg_.execute_kernels);
        while (!exec.finished()) {
          const auto units = exec.next_segment_units();
          TaskExecution::Segment seg;
          try {
            seg = exec.advance();
          } catch (const KernelFailure&) {
            break;  // abandoned locally; rotation hands the task to someone else
          }
          if (!cfg_.execute_kernels && !control.sleep(static_cast<double>(units) * cfg_.compute_scale)) return;
          channel->call(seg.message);
        }
      } else if (step.idle() && inflight) {
        event(sid, EventKind::WaitStart);
        waiting = true;
        auto reply = inflight->get();
        inflight.reset();
        apply(rt, reply);
        event(sid, EventKind::WaitEnd);
        waiting = false;
      }
    }
  }

  ExperimentConfig cfg_;
  const RealtimeOptions& opts_;
  KernelRegistry kernels_;
  const Kernel& kernel_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<EventSink> sink_;

  std::mutex mu_;
  std::vector<Control*> live_;
  std::atomic<bool> done_{false};
  std::atomic<bool> drained_{false};
  std::size_t sessions_ = 0;
  std::atomic<std::uint64_t> bytes_sent_{0};
  std::atomic<std::uint64_t> bytes_received_{0};
};

}  // namespace

RealtimeResult run_realtime_swarm(const ExperimentConfig& config, const RealtimeOptions& options) {
  config.validate();
  Swarm swarm(config, options);
  return swarm.run();
}

}  // namespace webswarm
