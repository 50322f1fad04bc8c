#include "webswarm/swarm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <queue>

#include "webswarm/client_runtime.hpp"
#include "webswarm/error.hpp"
#include "webswarm/kernels.hpp"
#include "webswarm/task_source.hpp"

namespace webswarm {

namespace dwell {

double sample(const DwellModel& model, SplitMix64& rng) {
  if (model.kind == DwellKind::Constant) return std::numeric_limits<double>::infinity();
  const double u = rng.uniform();
  return model.scale * std::pow(-std::log1p(-u), 1.0 / model.shape);
}

double weibull_cdf(double t, double shape, double scale) {
  if (t <= 0) return 0.0;
  return -std::expm1(-std::pow(t / scale, shape));
}

double weibull_median(double shape, double scale) { return scale * std::pow(std::log(2.0), 1.0 / shape); }

double weibull_mean(double shape, double scale) { return scale * std::tgamma(1.0 + 1.0 / shape); }

double scale_for_mean(double mean, double shape) { return mean / std::tgamma(1.0 + 1.0 / shape); }

double scale_for_median(double median, double shape) { return median / std::pow(std::log(2.0), 1.0 / shape); }

DwellModel weibull(double shape, double target, DwellNormalization norm) {
  DwellModel m;
  m.kind = DwellKind::Weibull;
  m.shape = shape;
  switch (norm) {
    case DwellNormalization::Explicit: m.scale = target; break;
    case DwellNormalization::SharedMean: m.scale = scale_for_mean(target, shape); break;
    case DwellNormalization::SharedMedian: m.scale = scale_for_median(target, shape); break;
  }
  m.validate();
  return m;
}

double ks_statistic(std::vector<double> samples, double shape, double scale) {
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = weibull_cdf(samples[i], shape, scale);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_critical(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace dwell

namespace {

namespace pr = protocol;

struct ClientSession {
  std::size_t slot = 0;
  std::string id;
  double kill = 0.0;
  bool alive = true;
  ClientRuntime runtime;
  std::optional<TaskExecution> exec;
  bool busy = false;  // computing or blocked on a checkpoint ack
  bool waiting = false;

  explicit ClientSession(const PolicyConfig& p) : runtime(p) {}
};

using SessionPtr = std::shared_ptr<ClientSession>;
using ReplyFn = std::function<void(double, const pr::ServerMessage&)>;

class VirtualSwarm {
 public:
  VirtualSwarm(const ExperimentConfig& cfg, const SwarmOptions& opts)
      : cfg_(cfg),
        opts_(opts),
        kernels_(KernelRegistry::builtin()),
        kernel_(kernels_.get(cfg.kernel_id)),
        clock_(std::make_shared<ManualClock>()),
        source_(std::make_shared<BuiltinSource>(cfg)),
        sink_(opts.event_log_path ? std::make_shared<EventSink>(*opts.event_log_path)
                                  : std::make_shared<EventSink>()) {
    BundleRegistry bundles = opts.bundles;
    if (!bundles.find(cfg.kernel_id)) {
      bundles.add(cfg.kernel_id, std::string(opts.bundle_bytes, 'x'), "");
    }
    ManagerConfig mc;
    mc.overhead = cfg.overhead;
    mc.codec.threshold = cfg.compression_threshold;
    mc.idle_timeout_s = cfg.idle_timeout();
    manager_ = std::make_unique<TaskManager>(mc, source_, sink_, clock_, std::move(bundles));
    for (std::size_t i = 0; i < cfg.worker_slots; ++i) slot_rng_.emplace_back(derive_seed(cfg.rng_seed, i));
    session_counts_.assign(cfg.worker_slots, 0);
  }

  SwarmResult run() {
    clock_->set(0.0);
    manager_->poll();
    for (std::size_t i = 0; i < cfg_.worker_slots; ++i) {
      at(0.0, [this, i] { start_session(i, 0.0); });
    }
    const double reap_every = std::clamp(cfg_.idle_timeout() / 4.0, 0.05, 1.0);
    schedule_reaper(reap_every, reap_every);

    while (!queue_.empty() && !finished_) {
      auto ev = queue_.top();
      queue_.pop();
      if (ev.t > cfg_.max_time_s) {
        end_time_ = cfg_.max_time_s;
        break;
      }
      now_ = ev.t;
      ev.fn();
    }
    if (!finished_) {
      end_time_ = std::max(end_time_, now_);
      finish(end_time_, "abort");
    }

    SwarmResult r;
    r.drained = manager_->drained();
    r.runtime_s = end_time_;
    r.stats = manager_->stats();
    r.results = source_->results();
    r.events = sink_->snapshot();
    r.sessions = sessions_started_;
    sink_->flush();
    return r;
  }

 private:
  struct Event {
    double t;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
  };

  void at(double t, std::function<void()> fn) { queue_.push(Event{t, next_seq_++, std::move(fn)}); }

  double transfer(std::uint64_t bytes) const {
    return cfg_.network.latency_s + static_cast<double>(bytes) / cfg_.network.bandwidth_bytes_per_s;
  }

  /// Runs `handler` on the server when a message of `in_bytes` sent at `t`
  /// reaches it and has been serviced. The handler returns the reply size;
  /// the reply is delivered to `deliver` unless the session died first.
  void exchange(const SessionPtr& s, double t, std::uint64_t in_bytes, std::function<std::uint64_t()> handler,
                std::function<void(double)> deliver) {
    const double arrival = t + transfer(in_bytes);
    if (arrival >= s->kill) return;  // the page was gone before the request left the network
    at(arrival, [this, s, in_bytes, handler = std::move(handler), deliver = std::move(deliver)] {
      const double start = std::max(now_, server_free_);
      const double done = start + cfg_.network.server_service_s +
                          static_cast<double>(in_bytes) * cfg_.network.server_per_byte_s;
      server_free_ = done;
      at(done, [this, s, handler, deliver] {
        if (finished_) return;
        clock_->set(now_);
        const auto out_bytes = handler();
        if (manager_->drained()) {
          finish(now_, "drain");
          return;
        }
        const double back = now_ + transfer(out_bytes);
        if (!s->alive || back >= s->kill || !deliver) return;
        at(back, [this, s, deliver] {
          if (s->alive) deliver(now_);
        });
      });
    });
  }

  void send(const SessionPtr& s, double t, pr::ClientMessage msg, ReplyFn on_reply) {
    const auto in_frame = pr::encode(msg, manager_->config().codec);
    const auto in_bytes = pr::wire_cost(in_frame, cfg_.transport, cfg_.overhead);
    auto reply = std::make_shared<pr::ServerMessage>();
    exchange(
        s, t, in_bytes,
        [this, s, msg = std::move(msg), in_bytes, reply] {
          manager_->record_bytes(s->id, cfg_.transport, Direction::In, in_bytes);
          *reply = manager_->handle(cfg_.transport, s->id, msg);
          const auto out_bytes = pr::wire_cost(pr::encode(*reply, manager_->config().codec), cfg_.transport,
                                               cfg_.overhead);
          manager_->record_bytes(s->id, cfg_.transport, Direction::Out, out_bytes);
          return out_bytes;
        },
        on_reply ? std::function<void(double)>([reply, on_reply](double t2) { on_reply(t2, *reply); })
                 : std::function<void(double)>());
  }

  void client_event(const SessionPtr& s, double t, EventKind kind) {
    MetricEvent e;
    e.t = t;
    e.kind = kind;
    e.session = s->id;
    sink_->append(std::move(e));
  }

  void begin_wait(const SessionPtr& s, double t) {
    if (s->waiting) return;
    s->waiting = true;
    client_event(s, t, EventKind::WaitStart);
  }

  void end_wait(const SessionPtr& s, double t) {
    if (!s->waiting) return;
    s->waiting = false;
    client_event(s, t, EventKind::WaitEnd);
  }

  double draw_dwell(std::size_t slot) {
    const auto index = session_counts_[slot]++;
    if (opts_.dwell_override) return opts_.dwell_override(slot, index);
    return dwell::sample(cfg_.dwell, slot_rng_[slot]);
  }

  void start_session(std::size_t slot, double t) {
    if (finished_) return;
    auto s = std::make_shared<ClientSession>(cfg_.policy);
    s->slot = slot;
    s->id = "v" + std::to_string(++sessions_started_);
    s->kill = t + draw_dwell(slot);
    live_.push_back(s);
    if (std::isfinite(s->kill)) at(s->kill, [this, s] { kill(s); });

    // Dwell starts with the bundle fetch.
    const auto half = cfg_.overhead.request_response_exchange / 2;
    exchange(
        s, t, half,
        [this, s, half] {
          manager_->record_bytes(s->id, Transport::RequestResponse, Direction::In, half);
          const auto* b = manager_->bundle(cfg_.kernel_id, s->id, cfg_.transport);
          const auto out = half + (b ? b->body.size() : 0);
          manager_->record_bytes(s->id, Transport::RequestResponse, Direction::Out, out);
          return out;
        },
        [this, s](double t2) { at(t2 + cfg_.network.worker_start_s, [this, s] { connect(s, now_); }); });
  }

  void connect(const SessionPtr& s, double t) {
    if (!s->alive) return;
    if (cfg_.transport == Transport::Stream) {
      // Upgrade handshake: one header exchange before any frame.
      const auto half = cfg_.overhead.request_response_exchange / 2;
      exchange(
          s, t, half,
          [this, s, half] {
            manager_->record_bytes(s->id, Transport::Stream, Direction::In, half);
            manager_->record_bytes(s->id, Transport::Stream, Direction::Out, half);
            return half;
          },
          [this, s](double t2) { hello(s, t2); });
    } else {
      hello(s, t);
    }
  }

  void hello(const SessionPtr& s, double t) {
    pr::Hello h;
    h.client_info = {{"agent", "virtual"}, {"slot", s->slot}};
    h.session = s->id;
    send(s, t, h, [this, s](double t2, const pr::ServerMessage& m) {
      if (const auto* w = std::get_if<pr::Welcome>(&m)) s->id = w->session;
      pump(s, t2);
    });
  }

  /// Sends `msg`, transparently re-registering if the server reaped the
  /// session while it was busy.
  void call(const SessionPtr& s, double t, pr::ClientMessage msg, ReplyFn on_reply) {
    send(s, t, msg, [this, s, msg, on_reply](double t2, const pr::ServerMessage& m) {
      const auto* err = std::get_if<pr::ErrorReply>(&m);
      if (err && err->reason == "unknown_session") {
        pr::Hello h;
        h.client_info = {{"agent", "virtual"}, {"slot", s->slot}, {"rejoin", true}};
        send(s, t2, h, [this, s, msg, on_reply](double t3, const pr::ServerMessage& w) {
          if (const auto* wel = std::get_if<pr::Welcome>(&w)) s->id = wel->session;
          send(s, t3, msg, on_reply);
        });
        return;
      }
      if (on_reply) on_reply(t2, m);
    });
  }

  void pump(const SessionPtr& s, double t) {
    if (!s->alive || s->busy) return;
    auto step = s->runtime.next_action();
    if (step.finished) return;
    if (step.request) {
      if (!step.request->async) begin_wait(s, t);
      call(s, t, pr::RequestTasks{step.request->count},
           [this, s](double t2, const pr::ServerMessage& m) { on_tasks(s, t2, m); });
    }
    if (step.run) {
      start_task(s, t, std::move(*step.run));
    } else if (step.idle()) {
      begin_wait(s, t);
    }
  }

  void on_tasks(const SessionPtr& s, double t, const pr::ServerMessage& m) {
    if (const auto* tasks = std::get_if<pr::Tasks>(&m)) {
      s->runtime.on_tasks(tasks->tasks);
    } else if (std::holds_alternative<pr::Drained>(m)) {
      s->runtime.on_tasks({});
    } else {
      s->runtime.on_request_failed();
    }
    end_wait(s, t);
    pump(s, t);
  }

  void start_task(const SessionPtr& s, double t, Task task) {
    s->busy = true;
    s->exec.emplace(std::move(task), kernel_, cfg_.policy.checkpoint_every, !cfg_.execute_kernels);
    run_segment(s, t);
  }

  void run_segment(const SessionPtr& s, double t) {
    const auto units = s->exec->next_segment_units();
    TaskExecution::Segment seg;
    try {
      seg = s->exec->advance();
    } catch (const KernelFailure&) {
      s->exec.reset();
      s->busy = false;
      pump(s, t);
      return;
    }
    const double done = t + static_cast<double>(units) * cfg_.compute_scale;
    at(done, [this, s, seg = std::move(seg)] {
      if (!s->alive) return;
      if (std::holds_alternative<pr::Partial>(seg.message)) {
        // Checkpoints are synchronous: compute resumes once acknowledged.
        call(s, now_, seg.message, [this, s](double t2, const pr::ServerMessage&) { run_segment(s, t2); });
        return;
      }
      call(s, now_, seg.message, {});
      s->exec.reset();
      s->busy = false;
      pump(s, now_);
    });
  }

  void kill(const SessionPtr& s) {
    if (!s->alive || finished_) return;
    s->alive = false;
    end_wait(s, now_);
    clock_->set(now_);
    if (cfg_.transport == Transport::Stream) manager_->close_session(s->id, "disconnect");
    std::erase(live_, s);
    const auto slot = s->slot;
    at(now_ + cfg_.respawn_delay_s, [this, slot] { start_session(slot, now_); });
  }

  void schedule_reaper(double t, double every) {
    at(t, [this, every] {
      if (finished_) return;
      clock_->set(now_);
      manager_->reap_idle();
      if (now_ - last_poll_ >= 1.0) {
        manager_->poll();
        last_poll_ = now_;
      }
      schedule_reaper(now_ + every, every);
    });
  }

  void finish(double t, std::string_view reason) {
    if (finished_) return;
    finished_ = true;
    end_time_ = t;
    clock_->set(t);
    for (const auto& s : live_) end_wait(s, t);
    manager_->poll();  // flush pending pushes
    manager_->close_all(reason);
  }

  ExperimentConfig cfg_;
  const SwarmOptions& opts_;
  KernelRegistry kernels_;
  const Kernel& kernel_;
  std::shared_ptr<ManualClock> clock_;
  std::shared_ptr<BuiltinSource> source_;
  std::shared_ptr<EventSink> sink_;
  std::unique_ptr<TaskManager> manager_;
  std::vector<SplitMix64> slot_rng_;
  std::vector<std::size_t> session_counts_;
  std::vector<SessionPtr> live_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
  double server_free_ = 0.0;
  double last_poll_ = 0.0;
  double end_time_ = 0.0;
  bool finished_ = false;
  std::size_t sessions_started_ = 0;
};

}  // namespace

SwarmResult run_virtual_swarm(const ExperimentConfig& config, const SwarmOptions& options) {
  config.validate();
  VirtualSwarm sim(config, options);
  return sim.run();
}

}  // namespace webswarm
