/**
 * @file mobility.hpp
 * @brief Random-waypoint motion in a rectangular arena and range-gated
 *        reachability of the coordinator, refreshed periodically.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "qsched/sim_core.hpp"

namespace qsched {

using NodeId = std::uint32_t;

/// The granting coordinator; subscriber nodes are numbered from 1.
inline constexpr NodeId kCoordinator = 0;

struct Position {
    double x = 0.0;  // meters
    double y = 0.0;

    bool operator==(const Position&) const = default;
};

inline double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Arena {
    double width = 1000.0;
    double height = 1000.0;

    bool contains(Position p) const { return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height; }
    Position center() const { return Position{width / 2.0, height / 2.0}; }
};

/// One leg of a node's trajectory: straight line from origin (the position at
/// depart_time) to waypoint at constant speed.
struct MobilityState {
    NodeId node = 0;
    Position origin;
    Position waypoint;
    double speed_mps = 0.0;
    SimTime depart_time;

    /// SimTime::max() for a stationary node.
    SimTime arrival_time() const {
        const double d = distance(origin, waypoint);
        if (d == 0.0) return depart_time;
        if (speed_mps <= 0.0) return SimTime::max();
        return depart_time + SimTime::us(static_cast<std::int64_t>(std::ceil(d / speed_mps * 1e6)));
    }
};

inline Position position_at(const MobilityState& st, SimTime t) {
    if (st.speed_mps <= 0.0 || t <= st.depart_time) return st.origin;
    const double leg = distance(st.origin, st.waypoint);
    if (leg == 0.0) return st.waypoint;
    const double travelled = st.speed_mps * (t - st.depart_time).seconds();
    if (travelled >= leg) return st.waypoint;
    const double f = travelled / leg;
    return Position{st.origin.x + (st.waypoint.x - st.origin.x) * f,
                    st.origin.y + (st.waypoint.y - st.origin.y) * f};
}

inline Position random_position(const Arena& arena, RngStream& rng) {
    const double x = draw_uniform(rng, 0.0, arena.width);
    const double y = draw_uniform(rng, 0.0, arena.height);
    return Position{x, y};
}

/// Starts a new leg from the current waypoint towards a fresh uniform one.
inline Position pick_waypoint(MobilityState& st, const Arena& arena, RngStream& rng, SimTime now) {
    st.origin = st.waypoint;
    st.waypoint = random_position(arena, rng);
    st.depart_time = now;
    return st.waypoint;
}

inline bool in_range(Position a, Position b, double radius) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy <= radius * radius;
}

struct NeighborSnapshot {
    SimTime taken_at;
    std::vector<NodeId> reachable;  // sorted

    bool contains(NodeId n) const { return std::binary_search(reachable.begin(), reachable.end(), n); }
};

inline NeighborSnapshot refresh_neighbors(SimTime now, std::span<const MobilityState> states,
                                          Position coordinator, double radius) {
    NeighborSnapshot snap{now, {}};
    for (const auto& st : states) {
        if (in_range(position_at(st, now), coordinator, radius)) snap.reachable.push_back(st.node);
    }
    std::sort(snap.reachable.begin(), snap.reachable.end());
    return snap;
}

struct MobilityConfig {
    Arena arena;
    double speed_mps = 50.0 / 3.6;
    double radio_range_m = 750.0;
    SimTime refresh_interval = SimTime::sec(2);
};

/**
 * Subscriber nodes 1..n under random waypoint with zero pause; the
 * coordinator sits still at the arena center.
 */
class MobilityModel {
  public:
    MobilityModel(MobilityConfig cfg, std::uint32_t nodes, RngStream& rng) : cfg_(cfg) {
        states_.reserve(nodes);
        for (NodeId n = 1; n <= nodes; ++n) {
            MobilityState st;
            st.node = n;
            st.speed_mps = cfg_.speed_mps;
            st.waypoint = random_position(cfg_.arena, rng);
            pick_waypoint(st, cfg_.arena, rng, SimTime{});
            states_.push_back(st);
        }
    }

    const MobilityConfig& config() const { return cfg_; }
    Position coordinator() const { return cfg_.arena.center(); }
    std::span<const MobilityState> states() const { return states_; }
    const MobilityState& state(NodeId n) const { return states_.at(n - 1); }

    Position position(NodeId n, SimTime t) const {
        return n == kCoordinator ? coordinator() : position_at(state(n), t);
    }

    /// Called when node n reaches its waypoint; returns the next arrival time.
    SimTime advance(NodeId n, RngStream& rng, SimTime now) {
        auto& st = states_.at(n - 1);
        pick_waypoint(st, cfg_.arena, rng, now);
        return st.arrival_time();
    }

    NeighborSnapshot refresh(SimTime now) const {
        return refresh_neighbors(now, states_, coordinator(), cfg_.radio_range_m);
    }

  private:
    MobilityConfig cfg_;
    std::vector<MobilityState> states_;
};

}  // namespace qsched
