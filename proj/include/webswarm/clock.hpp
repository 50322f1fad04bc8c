#pragma once

#include <atomic>
#include <chrono>

namespace webswarm {

/// Seconds since some fixed origin.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

/// Externally driven clock; the virtual-time swarm advances it.
class ManualClock final : public Clock {
 public:
  double now() const override { return t_.load(std::memory_order_relaxed); }
  void set(double t) { t_.store(t, std::memory_order_relaxed); }

 private:
  std::atomic<double> t_{0.0};
};

}  // namespace webswarm
