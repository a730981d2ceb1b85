/**
 * @file sim_core.hpp
 * @brief Discrete-event engine: integer microsecond clock, (time, seq)
 *        ordered event queue and named reproducible random streams.
 */

#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qsched {

/// Simulation time (or a duration) in integer microseconds.
struct SimTime {
    std::int64_t ticks = 0;

    static constexpr SimTime us(std::int64_t v) { return SimTime{v}; }
    static constexpr SimTime ms(std::int64_t v) { return SimTime{v * 1000}; }
    static constexpr SimTime sec(std::int64_t v) { return SimTime{v * 1000000}; }
    static SimTime from_seconds(double s) { return SimTime{static_cast<std::int64_t>(std::llround(s * 1e6))}; }
    static constexpr SimTime max() { return SimTime{std::numeric_limits<std::int64_t>::max()}; }

    constexpr double seconds() const { return static_cast<double>(ticks) / 1e6; }

    constexpr auto operator<=>(const SimTime&) const = default;
    constexpr SimTime operator+(SimTime o) const { return SimTime{ticks + o.ticks}; }
    constexpr SimTime operator-(SimTime o) const { return SimTime{ticks - o.ticks}; }
    constexpr SimTime& operator+=(SimTime o) { ticks += o.ticks; return *this; }
};

class SchedulingInPast : public std::logic_error {
  public:
    SchedulingInPast(SimTime at, SimTime now)
        : std::logic_error("event scheduled at " + std::to_string(at.ticks) + " us, clock is at " +
                           std::to_string(now.ticks) + " us") {}
};

class InvalidRange : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class EventKind : std::uint8_t {
    FrameBoundary,
    PacketArrival,
    WaypointReached,
    NeighborRefresh,
    PollDue,
    ContentionSlot,
    SimEnd,
};

template <class Payload>
struct Event {
    SimTime fire_at;
    std::uint64_t seq = 0;  // assigned by the engine on insertion
    EventKind kind = EventKind::SimEnd;
    Payload payload{};
};

struct EventHandle {
    std::uint64_t seq = 0;
    SimTime fire_at;
};

/**
 * Single-threaded event loop. Events pop in (fire_at, seq) order, so two
 * events at the same instant fire in insertion order.
 */
template <class Payload>
class Engine {
  public:
    using event_type = Event<Payload>;

    SimTime now() const { return now_; }
    std::size_t pending() const { return queue_.size(); }
    bool empty() const { return queue_.empty(); }

    EventHandle schedule(event_type ev) {
        if (ev.fire_at < now_) throw SchedulingInPast(ev.fire_at, now_);
        ev.seq = next_seq_++;
        queue_.push(ev);
        return EventHandle{ev.seq, ev.fire_at};
    }

    EventHandle schedule(SimTime at, EventKind kind, Payload payload = {}) {
        return schedule(event_type{at, 0, kind, std::move(payload)});
    }

    /// Processes every event with fire_at <= end, then parks the clock at end.
    /// The handler is called as handler(const event_type&, Engine&).
    template <class Handler>
    std::uint64_t run_until(SimTime end, Handler&& handler) {
        std::uint64_t processed = 0;
        while (!queue_.empty() && queue_.top().fire_at <= end) {
            event_type ev = queue_.top();
            queue_.pop();
            now_ = ev.fire_at;
            handler(static_cast<const event_type&>(ev), *this);
            ++processed;
        }
        if (end > now_) now_ = end;
        return processed;
    }

  private:
    struct Later {
        bool operator()(const event_type& a, const event_type& b) const {
            if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<event_type, std::vector<event_type>, Later> queue_;
    SimTime now_{};
    std::uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

enum class StreamId : std::uint64_t { Mobility = 1, Traffic = 2, Contention = 3 };

inline std::string_view to_string(StreamId id) {
    switch (id) {
        case StreamId::Mobility: return "mobility";
        case StreamId::Traffic: return "traffic";
        case StreamId::Contention: return "contention";
    }
    return "?";
}

/// splitmix64 finalizer; spreads (master_seed, stream) pairs over the seed space.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/**
 * One named sub-stream of the run's randomness. The engine is mt19937_64,
 * whose output sequence is fixed by the standard; all conversions to real
 * numbers are done here rather than through <random> distributions, which
 * are implementation-defined.
 */
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, StreamId id)
        : id_(id), gen_(mix_seed(master_seed ^ mix_seed(static_cast<std::uint64_t>(id)))) {}

    StreamId id() const { return id_; }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw InvalidRange("below(0)");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    /// Standard normal by Box-Muller; the second variate is kept for the next call.
    double standard_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    StreamId id_;
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Uniform real in [lo, hi); lo == hi returns lo.
inline double draw_uniform(RngStream& stream, double lo, double hi) {
    if (lo > hi) throw InvalidRange("draw_uniform: lo > hi");
    if (lo == hi) return lo;
    const double v = lo + (hi - lo) * stream.uniform01();
    return v < hi ? v : std::nextafter(hi, lo);
}

}  // namespace qsched
