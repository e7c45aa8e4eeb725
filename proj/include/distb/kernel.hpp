#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace distb {

using EntityId = std::uint64_t;

/// Id of the system itself: genesis miner, SDN controller.
inline constexpr EntityId kSystemId = 0;

/// Simulated time in whole milliseconds since the start of a run.
class SimTime {
 public:
  constexpr SimTime() = default;
  constexpr explicit SimTime(std::uint64_t ticks) : ticks_(ticks) {}

  static constexpr SimTime ms(std::uint64_t v) { return SimTime(v); }
  static constexpr SimTime seconds(double s) {
    return SimTime(static_cast<std::uint64_t>(s * 1000.0 + 0.5));
  }

  constexpr std::uint64_t ticks() const { return ticks_; }
  constexpr double to_seconds() const { return static_cast<double>(ticks_) / 1000.0; }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(SimTime o) const { return SimTime(ticks_ + o.ticks_); }
  constexpr SimTime& operator+=(SimTime o) {
    ticks_ += o.ticks_;
    return *this;
  }
  // Saturates at zero.
  constexpr SimTime operator-(SimTime o) const {
    return SimTime(ticks_ > o.ticks_ ? ticks_ - o.ticks_ : 0);
  }

 private:
  std::uint64_t ticks_ = 0;
};

enum class EventKind : std::uint8_t {
  PacketSend,
  PacketArrive,
  MobilityStep,
  BlockPropose,
  Vote,
  AttackAttempt,
  MetricWindow,
  RuleTimeout,
};

std::string_view to_string(EventKind kind);

/// xoshiro256** seeded through splitmix64 from (root_seed, stream_id).
///
/// The state is initialised from four splitmix64 outputs whose seed is
/// `root_seed ^ (stream_id * 0xD1B54A32D192ED03)`. All derived draws use
/// integer arithmetic or IEEE-754 doubles built from the top 53 bits, so a
/// stream is reproducible across platforms.
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform01();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);
  /// Exponential with the given rate (events per unit).
  double exponential(double rate);

 private:
  std::uint64_t s_[4];
};

class PastEventError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class HandlerError : public std::runtime_error {
 public:
  HandlerError(const std::string& what, SimTime time, std::uint64_t seq, EntityId target,
               EventKind kind)
      : std::runtime_error(what), time(time), seq(seq), target(target), kind(kind) {}

  SimTime time;
  std::uint64_t seq;
  EntityId target;
  EventKind kind;
};

struct RunSummary {
  std::uint64_t events_processed = 0;
  double wall_seconds = 0.0;
};

/// Single-threaded discrete-event engine. Events are dispatched in strict
/// (time, seq) order where seq is the global insertion counter.
class Kernel {
 public:
  using Handler = std::function<void()>;

  explicit Kernel(std::uint64_t root_seed);

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  /// Returns the assigned seq. Throws PastEventError if time < now().
  std::uint64_t schedule(SimTime time, EntityId target, EventKind kind, Handler handler);
  std::uint64_t schedule_in(SimTime delay, EntityId target, EventKind kind, Handler handler) {
    return schedule(now_ + delay, target, kind, std::move(handler));
  }

  /// Processes every event with time <= t_end, then sets now() to t_end.
  /// A throwing handler aborts the run with a HandlerError naming the event.
  RunSummary run_until(SimTime t_end);

  SimTime now() const { return now_; }
  std::uint64_t root_seed() const { return root_seed_; }
  std::size_t pending() const { return heap_.size(); }

  void register_stream(std::uint64_t stream_id);
  /// Throws std::out_of_range for a stream that was never registered.
  RngStream& rng(std::uint64_t stream_id);

  /// One `time<TAB>seq<TAB>target<TAB>kind` line per dispatched event.
  void set_trace(std::ostream* out) { trace_ = out; }

 private:
  struct Event {
    SimTime time;
    std::uint64_t seq;
    EntityId target;
    EventKind kind;
    Handler handler;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  std::uint64_t root_seed_;
  SimTime now_{};
  std::uint64_t next_seq_ = 0;
  std::vector<Event> heap_;
  std::unordered_map<std::uint64_t, RngStream> streams_;
  std::ostream* trace_ = nullptr;
};

}  // namespace distb
