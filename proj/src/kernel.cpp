#include "distb/kernel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace distb {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PacketSend: return "PacketSend";
    case EventKind::PacketArrive: return "PacketArrive";
    case EventKind::MobilityStep: return "MobilityStep";
    case EventKind::BlockPropose: return "BlockPropose";
    case EventKind::Vote: return "Vote";
    case EventKind::AttackAttempt: return "AttackAttempt";
    case EventKind::MetricWindow: return "MetricWindow";
    case EventKind::RuleTimeout: return "RuleTimeout";
  }
  return "Unknown";
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t root_seed, std::uint64_t stream_id) {
  std::uint64_t sm = root_seed ^ (stream_id * 0xD1B54A32D192ED03ULL);
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t RngStream::below(std::uint64_t n) {
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

bool RngStream::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01() < p;
}

double RngStream::exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

Kernel::Kernel(std::uint64_t root_seed) : root_seed_(root_seed) {}

std::uint64_t Kernel::schedule(SimTime time, EntityId target, EventKind kind, Handler handler) {
  if (time < now_) {
    throw PastEventError(fmt::format("past event: {} scheduled at t={} while now={}",
                                     to_string(kind), time.ticks(), now_.ticks()));
  }
  const std::uint64_t seq = next_seq_++;
  heap_.push_back(Event{time, seq, target, kind, std::move(handler)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
  return seq;
}

RunSummary Kernel::run_until(SimTime t_end) {
  const auto wall_start = std::chrono::steady_clock::now();
  RunSummary summary;
  while (!heap_.empty() && heap_.front().time <= t_end) {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event ev = std::move(heap_.back());
    heap_.pop_back();
    now_ = ev.time;
    if (trace_ != nullptr) {
      *trace_ << ev.time.ticks() << '\t' << ev.seq << '\t' << ev.target << '\t'
              << to_string(ev.kind) << '\n';
    }
    try {
      if (ev.handler) ev.handler();
    } catch (const HandlerError&) {
      throw;
    } catch (const std::exception& e) {
      throw HandlerError(fmt::format("event seq={} t={} target={} kind={} failed: {}", ev.seq,
                                     ev.time.ticks(), ev.target, to_string(ev.kind), e.what()),
                         ev.time, ev.seq, ev.target, ev.kind);
    }
    ++summary.events_processed;
  }
  if (now_ < t_end) now_ = t_end;
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return summary;
}

void Kernel::register_stream(std::uint64_t stream_id) {
  streams_.try_emplace(stream_id, root_seed_, stream_id);
}

RngStream& Kernel::rng(std::uint64_t stream_id) {
  auto it = streams_.find(stream_id);
  if (it == streams_.end()) {
    throw std::out_of_range(fmt::format("unknown rng stream {}", stream_id));
  }
  return it->second;
}

}  // namespace distb
