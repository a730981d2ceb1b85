/**
 * @file scenario.hpp
 * @brief Wires engine, mobility, traffic and scheduler into one run, and runs
 *        the five-class paired comparison.
 *
 * Same-instant ordering comes from the engine's insertion order. Every
 * periodic event is scheduled one period ahead, so a refresh at t was
 * inserted 2 s earlier than the frame boundary at t (inserted 5 ms earlier),
 * and a packet arrival at t was inserted one frame interval earlier. The
 * effect: at a given instant the neighbor table refreshes first, then
 * packets arrive, then the frame is scheduled.
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsched/config.hpp"
#include "qsched/mac_sched.hpp"
#include "qsched/metrics.hpp"
#include "qsched/mobility.hpp"
#include "qsched/sim_core.hpp"
#include "qsched/traffic.hpp"

namespace qsched {

struct PositionSample {
    SimTime time;
    NodeId node = 0;
    Position pos;
};

struct PollLog {
    SimTime time;
    FlowId cid = 0;
};

struct RunOptions {
    bool keep_audit = false;
};

struct RunResult {
    ScenarioConfig config;
    std::vector<FlowInfo> flows;
    std::vector<PacketRecord> records;  // pkt_id order
    std::vector<FlowStats> stats;
    std::vector<AuditRow> audit;
    std::vector<FrameUsage> usage;
    std::vector<PositionSample> positions;
    std::vector<PollLog> polls;
    std::uint64_t contention_attempts = 0;
    std::uint64_t contention_collisions = 0;
    std::uint64_t events = 0;
    SimTime clock_end;  // engine clock when the run returned
    double wall_seconds = 0.0;

    SimTime elapsed() const { return config.sim_end(); }
};

namespace detail {

struct SimPayload {
    std::uint32_t index = 0;  // node id for traffic and mobility events, frame index low bits otherwise
    std::uint64_t seq = 0;    // frame index or per-node video frame number
};

}  // namespace detail

/// One complete run. Throws ValidationError on a bad config.
inline RunResult simulate(const ScenarioConfig& cfg, const RunOptions& opts = {}) {
    cfg.validate();
    const auto wall0 = std::chrono::steady_clock::now();

    RunResult res;
    res.config = cfg;
    const SimTime end = cfg.sim_end();
    const MacConfig mac = cfg.mac();
    const MobilityConfig mob_cfg = cfg.mobility();

    RngStream mob_rng(cfg.seed, StreamId::Mobility);
    RngStream traffic_rng(cfg.seed, StreamId::Traffic);
    RngStream contention_rng(cfg.seed, StreamId::Contention);

    MobilityModel mobility(mob_cfg, cfg.nodes, mob_rng);
    UplinkScheduler sched(mac, opts.keep_audit);

    std::vector<VideoSourceConfig> sources(cfg.nodes + 1);
    const VideoSourceConfig base = cfg.traffic();
    for (NodeId n = 1; n <= cfg.nodes; ++n) {
        const FlowId cid = sched.add_flow(n, cfg.qos_class);
        res.flows.push_back(sched.flow(cid).info());
        sources[n] = base;
        if (cfg.phase_spread) {
            const auto span = static_cast<std::uint64_t>(base.frame_interval().ticks);
            sources[n].start_time = base.start_time + SimTime::us(static_cast<std::int64_t>(traffic_rng.below(span)));
        }
        sched.activate(cid, sources[n].start_time);
    }

    using Payload = detail::SimPayload;
    Engine<Payload> engine;
    NeighborSnapshot snap;

    auto sample_positions = [&](SimTime t) {
        res.positions.push_back(PositionSample{t, kCoordinator, mobility.coordinator()});
        for (NodeId n = 1; n <= cfg.nodes; ++n) res.positions.push_back(PositionSample{t, n, mobility.position(n, t)});
    };

    // Insertion order at t = 0: refresh, waypoints, arrivals, frame 0.
    engine.schedule(SimTime{}, EventKind::NeighborRefresh);
    for (NodeId n = 1; n <= cfg.nodes; ++n) {
        const SimTime arr = mobility.state(n).arrival_time();
        if (arr != SimTime::max() && arr > SimTime{}) engine.schedule(arr, EventKind::WaypointReached, Payload{n, 0});
    }
    for (NodeId n = 1; n <= cfg.nodes; ++n) {
        engine.schedule(frame_emission_time(sources[n], 0), EventKind::PacketArrival, Payload{n, 0});
    }
    engine.schedule(SimTime{}, EventKind::FrameBoundary, Payload{0, 0});
    engine.schedule(end, EventKind::SimEnd);

    PacketId next_pkt = 0;
    auto record_of = [&](const Packet& p) -> PacketRecord& { return res.records.at(p.pkt_id); };

    auto on_event = [&](const Event<Payload>& ev, Engine<Payload>& eng) {
        const SimTime now = ev.fire_at;
        switch (ev.kind) {
            case EventKind::NeighborRefresh: {
                snap = mobility.refresh(now);
                sample_positions(now);
                eng.schedule(now + mob_cfg.refresh_interval, EventKind::NeighborRefresh);
                break;
            }
            case EventKind::WaypointReached: {
                const NodeId n = ev.payload.index;
                const SimTime next = mobility.advance(n, mob_rng, now);
                // Zero-length legs (degenerate arena) would loop forever at one instant.
                if (next != SimTime::max() && next > now) eng.schedule(next, EventKind::WaypointReached, ev.payload);
                break;
            }
            case EventKind::PacketArrival: {
                const NodeId n = ev.payload.index;
                const std::uint64_t k = ev.payload.seq;
                const VideoFrame vf = next_frame(sources[n], k, traffic_rng);
                const FlowId cid = n - 1;
                for (auto& p : fragment(vf.bytes, cfg.mtu, now, cid, n, next_pkt)) {
                    res.records.push_back(
                        PacketRecord{p.pkt_id, cid, n, cfg.qos_class, p.size, now, std::nullopt, std::nullopt,
                                     Disposition::Queued});
                    ++next_pkt;
                    if (!sched.flow(cid).enqueue(p)) res.records.back().disposition = Disposition::Dropped;
                }
                eng.schedule(frame_emission_time(sources[n], k + 1), EventKind::PacketArrival, Payload{n, k + 1});
                break;
            }
            case EventKind::FrameBoundary: {
                const std::uint64_t k = ev.payload.seq;
                FrameOutcome out = sched.run_frame(k, snap, contention_rng);
                for (const auto& p : out.map.polls) res.polls.push_back(PollLog{now, p.cid});
                for (const auto& p : out.delivered) {
                    auto& r = record_of(p);
                    r.t_st = p.t_st;
                    r.t_rx = p.t_rx;
                    r.disposition = Disposition::Delivered;
                }
                for (const auto& p : out.dropped) {
                    auto& r = record_of(p);
                    r.t_st = p.t_st;
                    r.disposition = Disposition::Dropped;
                }
                const SimTime next = mac.frame_start(k + 1);
                if (next < end) eng.schedule(next, EventKind::FrameBoundary, Payload{0, k + 1});
                break;
            }
            case EventKind::SimEnd:
            case EventKind::PollDue:
            case EventKind::ContentionSlot:
                break;
        }
    };

    if (end > SimTime{}) res.events = engine.run_until(end, on_event);
    res.clock_end = engine.now();

    // Anything still on the air at the horizon counts as queued.
    for (auto& r : res.records) {
        if (r.disposition == Disposition::Delivered && *r.t_rx > end) {
            r.disposition = Disposition::Queued;
            r.t_st.reset();
            r.t_rx.reset();
        }
    }

    res.stats = collect_stats(res.records, res.flows);
    res.audit.assign(sched.audit().begin(), sched.audit().end());
    res.usage.assign(sched.usage().begin(), sched.usage().end());
    for (const auto& f : sched.flows()) {
        res.contention_attempts += f.contention.attempts;
        res.contention_collisions += f.contention.collisions;
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
}

// ---------------------------------------------------------------------------
// Five-class comparison
// ---------------------------------------------------------------------------

/// Failure of one (class, seed) run inside a comparison.
class RunFailure : public std::runtime_error {
  public:
    RunFailure(ServiceClass cls, std::uint64_t seed, const std::string& what)
        : std::runtime_error(std::string("class ") + std::string(to_string(cls)) + ", seed " + std::to_string(seed) +
                             ": " + what),
          cls_(cls),
          seed_(seed) {}
    ServiceClass cls() const { return cls_; }
    std::uint64_t seed() const { return seed_; }

  private:
    ServiceClass cls_;
    std::uint64_t seed_;
};

struct ClassRun {
    std::uint64_t seed = 0;
    ServiceClass cls = ServiceClass::BE;
    SummaryRow network;
    std::vector<SummaryRow> per_node;
    std::vector<PositionSample> positions;
    std::vector<PacketRecord> records;  // only when CompareOptions::keep_records
    std::vector<FlowInfo> flows;
    double wall_seconds = 0.0;
};

/// a.delay_sum/a.delivered < b.delay_sum/b.delivered, exactly.
inline bool mean_less(std::int64_t num_a, std::uint64_t den_a, std::int64_t num_b, std::uint64_t den_b) {
    return static_cast<__int128>(num_a) * static_cast<__int128>(den_b) <
           static_cast<__int128>(num_b) * static_cast<__int128>(den_a);
}

struct SeedVerdict {
    std::uint64_t seed = 0;
    bool delay_order = false;   // UGS < ertPS < rtPS < BE < nrtPS
    bool jitter_order = false;  // ertPS minimum, nrtPS maximum, ertPS < UGS
};

/// `runs` holds one seed's five runs in class order.
inline SeedVerdict judge_seed(std::span<const ClassRun> runs) {
    if (runs.size() != kAllClasses.size()) throw std::invalid_argument("judge_seed: need one run per class");
    auto at = [&](ServiceClass c) -> const SummaryRow& { return runs[static_cast<std::size_t>(c)].network; };
    auto d_less = [&](ServiceClass a, ServiceClass b) {
        return at(a).delivered > 0 && at(b).delivered > 0 &&
               mean_less(at(a).delay_sum, at(a).delivered, at(b).delay_sum, at(b).delivered);
    };
    auto j_less = [&](ServiceClass a, ServiceClass b) {
        return at(a).jitter_count > 0 && at(b).jitter_count > 0 &&
               mean_less(at(a).jitter_sum, at(a).jitter_count, at(b).jitter_sum, at(b).jitter_count);
    };
    using C = ServiceClass;
    SeedVerdict v;
    v.seed = runs.front().seed;
    v.delay_order = d_less(C::UGS, C::ertPS) && d_less(C::ertPS, C::rtPS) && d_less(C::rtPS, C::BE) &&
                    d_less(C::BE, C::nrtPS);
    bool jit = true;
    for (C c : kAllClasses) {
        if (c != C::ertPS) jit = jit && j_less(C::ertPS, c);
        if (c != C::nrtPS) jit = jit && j_less(c, C::nrtPS);
    }
    v.jitter_order = jit && j_less(C::ertPS, C::UGS);
    return v;
}

struct CompareOptions {
    bool parallel = true;
    bool keep_records = false;
};

struct Comparison {
    ScenarioConfig config;
    std::vector<std::uint64_t> seeds;
    std::vector<ClassRun> runs;  // seed-major, class order within a seed
    std::vector<SeedVerdict> verdicts;
    double wall_seconds = 0.0;

    std::span<const ClassRun> seed_runs(std::size_t seed_index) const {
        return std::span<const ClassRun>(runs).subspan(seed_index * kAllClasses.size(), kAllClasses.size());
    }
};

/**
 * Runs every class against every seed with otherwise identical config. The
 * class does not touch the mobility or traffic streams, so the five runs of
 * one seed see the same motion and the same frames.
 */
inline Comparison compare_classes(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                  const CompareOptions& opts = {}) {
    if (seeds.empty()) throw std::invalid_argument("compare_classes: need at least one seed");
    cfg.validate();
    const auto wall0 = std::chrono::steady_clock::now();

    auto one = [cfg, keep = opts.keep_records](std::uint64_t seed, ServiceClass cls) {
        ScenarioConfig c = cfg;
        c.seed = seed;
        c.qos_class = cls;
        try {
            RunResult r = simulate(c);
            ClassRun out;
            out.seed = seed;
            out.cls = cls;
            out.network = summarize(r.stats, Group::Network).front();
            out.per_node = summarize(r.stats, Group::Node);
            out.positions = std::move(r.positions);
            out.flows = std::move(r.flows);
            if (keep) out.records = std::move(r.records);
            out.wall_seconds = r.wall_seconds;
            return out;
        } catch (const RunFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw RunFailure(cls, seed, e.what());
        }
    };

    Comparison cmp;
    cmp.config = cfg;
    cmp.seeds = seeds;
    if (opts.parallel) {
        std::vector<std::future<ClassRun>> futs;
        for (auto s : seeds) {
            for (auto c : kAllClasses) futs.push_back(std::async(std::launch::async, one, s, c));
        }
        // Collect all before rethrowing so no task outlives the call.
        std::exception_ptr first;
        for (auto& f : futs) {
            try {
                cmp.runs.push_back(f.get());
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
    } else {
        for (auto s : seeds) {
            for (auto c : kAllClasses) cmp.runs.push_back(one(s, c));
        }
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) cmp.verdicts.push_back(judge_seed(cmp.seed_runs(i)));
    cmp.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return cmp;
}

}  // namespace qsched
