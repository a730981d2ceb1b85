/**
 * @file mac_sched.hpp
 * @brief Frame-based uplink scheduler at the coordinator for the five
 *        802.16e scheduling services (UGS, ertPS, rtPS, nrtPS, BE).
 *
 * Every frame the coordinator builds a GrantMap that partitions the uplink
 * capacity into a contention region, unicast poll opportunities and data
 * grants. Allocation is strict priority UGS > ertPS > rtPS > nrtPS > BE,
 * FIFO (by request time, then CID) inside a class. nrtPS gets its minimum
 * reserved rate ahead of BE and competes for the residual after BE.
 *
 * Request latencies per class:
 *   - UGS: fixed-size grant every grant period, no request at all.
 *   - ertPS: unsolicited grant every grant period; the size is whatever the
 *     piggyback in the previous grant asked for.
 *   - rtPS / nrtPS: a poll at frame k, the response is granted from frame k+1.
 *   - BE: contention request at frame k, granted from frame k+1.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qsched/mobility.hpp"
#include "qsched/sim_core.hpp"
#include "qsched/traffic.hpp"

namespace qsched {

/// Declaration order is allocation priority.
enum class ServiceClass : std::uint8_t { UGS = 0, ertPS = 1, rtPS = 2, nrtPS = 3, BE = 4 };

inline constexpr std::array<ServiceClass, 5> kAllClasses{ServiceClass::UGS, ServiceClass::ertPS, ServiceClass::rtPS,
                                                         ServiceClass::nrtPS, ServiceClass::BE};

inline std::string_view to_string(ServiceClass c) {
    switch (c) {
        case ServiceClass::UGS: return "UGS";
        case ServiceClass::ertPS: return "ertPS";
        case ServiceClass::rtPS: return "rtPS";
        case ServiceClass::nrtPS: return "nrtPS";
        case ServiceClass::BE: return "BE";
    }
    return "?";
}

/// Case-insensitive; accepts "BestEffort" for BE.
inline std::optional<ServiceClass> parse_service_class(std::string_view s) {
    std::string low;
    for (char ch : s) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (low == "ugs") return ServiceClass::UGS;
    if (low == "ertps") return ServiceClass::ertPS;
    if (low == "rtps") return ServiceClass::rtPS;
    if (low == "nrtps") return ServiceClass::nrtPS;
    if (low == "be" || low == "besteffort" || low == "best_effort") return ServiceClass::BE;
    return std::nullopt;
}

inline constexpr bool higher_priority(ServiceClass a, ServiceClass b) {
    return static_cast<int>(a) < static_cast<int>(b);
}

struct MacConfig {
    SimTime frame_duration = SimTime::ms(5);
    std::uint64_t channel_rate_bps = 10'000'000;
    std::uint32_t packet_overhead = 10;   // MAC header per packet
    std::uint32_t request_overhead = 6;   // one bandwidth-request opportunity
    std::uint32_t grant_overhead = 6;     // per data grant in the map
    SimTime propagation = SimTime::us(5);
    SimTime processing = SimTime::us(0);  // fixed per-packet crypto cost at the receiver
    std::uint32_t queue_capacity = 500;   // packets per flow

    std::uint64_t ugs_reserved_rate_bps = 620'000;
    std::uint32_t ugs_grant_period = 8;   // frames
    std::uint64_t ertps_reserved_rate_bps = 458'000;
    std::uint32_t ertps_grant_period = 1;
    std::uint64_t ertps_max_burst = 12'000;
    SimTime rtps_poll_interval = SimTime::ms(20);
    std::uint64_t rtps_reserved_rate_bps = 0;
    SimTime nrtps_poll_interval = SimTime::sec(1);
    std::uint64_t nrtps_reserved_rate_bps = 458'000;
    bool nrtps_contention = false;
    std::uint32_t be_cw_initial = 16;     // frames
    std::uint32_t be_cw_max = 1024;

    std::uint64_t capacity_bytes() const {
        return channel_rate_bps * static_cast<std::uint64_t>(frame_duration.ticks) / 8'000'000ULL;
    }

    /// Air time of `bytes` at the channel rate, rounded up to whole microseconds.
    SimTime airtime(std::uint64_t bytes) const {
        return SimTime::us(static_cast<std::int64_t>((bytes * 8'000'000ULL + channel_rate_bps - 1) / channel_rate_bps));
    }

    SimTime frame_start(std::uint64_t frame_idx) const {
        return SimTime::us(static_cast<std::int64_t>(frame_idx) * frame_duration.ticks);
    }

    std::uint64_t reserved_rate(ServiceClass c) const {
        switch (c) {
            case ServiceClass::UGS: return ugs_reserved_rate_bps;
            case ServiceClass::ertPS: return ertps_reserved_rate_bps;
            case ServiceClass::rtPS: return rtps_reserved_rate_bps;
            case ServiceClass::nrtPS: return nrtps_reserved_rate_bps;
            case ServiceClass::BE: return 0;
        }
        return 0;
    }

    void validate() const {
        if (frame_duration.ticks <= 0) throw std::invalid_argument("frame_duration must be > 0");
        if (channel_rate_bps == 0) throw std::invalid_argument("channel_rate_bps must be > 0");
        if (capacity_bytes() == 0) throw std::invalid_argument("uplink capacity per frame is zero");
        if (queue_capacity == 0) throw std::invalid_argument("queue_capacity must be > 0");
        if (ugs_grant_period == 0 || ertps_grant_period == 0) throw std::invalid_argument("grant periods must be >= 1 frame");
        if (rtps_poll_interval.ticks <= 0 || nrtps_poll_interval.ticks <= 0)
            throw std::invalid_argument("poll intervals must be > 0");
        if (be_cw_initial == 0 || be_cw_max < be_cw_initial) throw std::invalid_argument("contention window bounds");
        if (propagation.ticks < 0 || processing.ticks < 0) throw std::invalid_argument("negative delay constant");
    }
};

struct FlowInfo {
    FlowId cid = 0;
    NodeId node = 0;
    ServiceClass cls = ServiceClass::BE;
};

struct ContentionState {
    std::uint32_t window = 0;
    std::int64_t backoff = -1;  // frames until transmission; -1 = not contending
    std::uint64_t attempts = 0;
    std::uint64_t collisions = 0;
};

/// One uplink connection. queued_bytes counts MAC bytes (payload plus the
/// per-packet header), which is what requests and grants are sized in.
struct ServiceFlow {
    FlowId cid = 0;
    NodeId node = 0;
    ServiceClass cls = ServiceClass::BE;
    std::uint64_t reserved_rate_bps = 0;
    std::uint32_t grant_period = 1;
    SimTime poll_interval;
    std::uint32_t packet_overhead = 0;
    std::uint32_t queue_capacity = 0;

    std::deque<Packet> queue;
    std::uint64_t queued_bytes = 0;
    std::uint64_t pending_request = 0;
    SimTime pending_since;
    std::uint64_t current_grant = 0;           // ertPS: size of the next unsolicited grant
    std::optional<std::uint64_t> anchor_frame; // UGS/ertPS: first unsolicited grant
    ContentionState contention;
    std::uint64_t dropped = 0;

    std::uint64_t backlog() const { return queued_bytes; }
    FlowInfo info() const { return FlowInfo{cid, node, cls}; }

    /// Tail drop: a full queue rejects the newest packet.
    bool enqueue(Packet p) {
        if (queue.size() >= queue_capacity) {
            ++dropped;
            return false;
        }
        queued_bytes += p.size + packet_overhead;
        queue.push_back(std::move(p));
        return true;
    }
};

inline ServiceFlow make_flow(FlowId cid, NodeId node, ServiceClass cls, const MacConfig& cfg) {
    ServiceFlow f;
    f.cid = cid;
    f.node = node;
    f.cls = cls;
    f.reserved_rate_bps = cfg.reserved_rate(cls);
    f.grant_period = cls == ServiceClass::UGS ? cfg.ugs_grant_period : cls == ServiceClass::ertPS ? cfg.ertps_grant_period : 1;
    f.poll_interval = cls == ServiceClass::nrtPS ? cfg.nrtps_poll_interval : cfg.rtps_poll_interval;
    f.packet_overhead = cfg.packet_overhead;
    f.queue_capacity = cfg.queue_capacity;
    f.contention.window = cfg.be_cw_initial;
    return f;
}

enum class RequestVia : std::uint8_t { UnicastPoll, Piggyback, Contention };

struct BandwidthRequest {
    FlowId cid = 0;
    std::uint64_t bytes = 0;
    SimTime issued_at;
    RequestVia via = RequestVia::UnicastPoll;
};

struct GrantEntry {
    FlowId cid = 0;
    ServiceClass cls = ServiceClass::BE;
    std::uint64_t requested = 0;  // what the flow was entitled to ask for this frame
    std::uint64_t granted = 0;    // payload bytes, grant overhead excluded
    std::uint32_t overhead = 0;
    std::uint64_t offset = 0;     // byte offset of the grant inside the uplink subframe
    bool placed = false;          // false when the frame had no room for this grant
};

struct PollEntry {
    FlowId cid = 0;
    std::uint64_t offset = 0;
};

struct GrantMap {
    std::uint64_t frame_idx = 0;
    std::uint64_t capacity = 0;
    std::uint64_t contention_bytes = 0;
    std::uint32_t poll_cost = 0;
    std::vector<PollEntry> polls;
    std::vector<GrantEntry> entries;

    std::uint64_t used_bytes() const {
        std::uint64_t u = contention_bytes + static_cast<std::uint64_t>(polls.size()) * poll_cost;
        for (const auto& e : entries) u += e.granted + e.overhead;
        return u;
    }
};

struct GrantSize {
    std::uint64_t payload = 0;
    std::uint32_t overhead = 0;

    bool issued() const { return overhead > 0 || payload > 0; }
    std::uint64_t total() const { return payload + overhead; }
};

/// ceil(rate * frame * period / 8) in bytes.
inline std::uint64_t rate_to_grant_bytes(std::uint64_t rate_bps, SimTime frame, std::uint32_t period) {
    const std::uint64_t bits_x1e6 = rate_bps * static_cast<std::uint64_t>(frame.ticks) * period;
    return (bits_x1e6 + 8'000'000ULL - 1) / 8'000'000ULL;
}

inline bool on_grant_period(const ServiceFlow& f, std::uint64_t frame_idx) {
    if (!f.anchor_frame || frame_idx < *f.anchor_frame) return false;
    return (frame_idx - *f.anchor_frame) % f.grant_period == 0;
}

/// Fixed-size unsolicited grant; zero away from the flow's grant period.
inline GrantSize ugs_grant(const ServiceFlow& f, std::uint64_t frame_idx, const MacConfig& cfg) {
    if (!on_grant_period(f, frame_idx)) return {};
    return GrantSize{rate_to_grant_bytes(f.reserved_rate_bps, cfg.frame_duration, f.grant_period), cfg.grant_overhead};
}

/// Unsolicited grant sized by the last piggyback.
inline GrantSize ertps_grant(const ServiceFlow& f, std::uint64_t frame_idx, const MacConfig& cfg) {
    if (!on_grant_period(f, frame_idx)) return {};
    return GrantSize{f.current_grant, cfg.grant_overhead};
}

/// Piggyback carried in an ertPS grant: the next grant covers the backlog left
/// after this one, clamped to the burst limit.
inline BandwidthRequest ertps_piggyback(ServiceFlow& f, SimTime now, const MacConfig& cfg) {
    f.current_grant = std::min(f.backlog(), cfg.ertps_max_burst);
    return BandwidthRequest{f.cid, f.current_grant, now, RequestVia::Piggyback};
}

/// Polls run off one coordinator-wide timer at multiples of the poll interval.
inline bool poll_due(SimTime now, SimTime interval) {
    return interval.ticks > 0 && now.ticks % interval.ticks == 0;
}

struct RtpsDecision {
    bool poll = false;          // unicast request opportunity in this frame
    std::uint64_t grant = 0;    // data bytes the pending request entitles the flow to
};

inline RtpsDecision rtps_poll_and_grant(const ServiceFlow& f, std::uint64_t frame_idx, const MacConfig& cfg) {
    return RtpsDecision{poll_due(cfg.frame_start(frame_idx), f.poll_interval), f.pending_request};
}

inline bool nrtps_poll(const ServiceFlow& f, SimTime now) { return poll_due(now, f.poll_interval); }

/// Answer to a unicast poll: the whole current backlog.
inline BandwidthRequest poll_response(ServiceFlow& f, SimTime now) {
    f.pending_request = f.backlog();
    f.pending_since = now;
    return BandwidthRequest{f.cid, f.pending_request, now, RequestVia::UnicastPoll};
}

/**
 * One frame of the single-slot contention region. Backlogged flows without
 * an outstanding request draw a backoff in [0, window); a flow transmits
 * when its backoff reaches zero. Two or more transmitters collide, double
 * their windows (up to be_cw_max) and redraw; a lone transmitter's request
 * for its whole backlog is registered and its window reset.
 */
inline std::vector<BandwidthRequest> be_contention(std::span<ServiceFlow* const> flows, std::uint64_t frame_idx,
                                                   RngStream& rng, const MacConfig& cfg) {
    if (flows.empty()) throw std::invalid_argument("be_contention: no contending flows");
    const SimTime now = cfg.frame_start(frame_idx);
    std::vector<ServiceFlow*> senders;
    for (ServiceFlow* f : flows) {
        auto& cs = f->contention;
        const bool eligible = f->backlog() > 0 && f->pending_request == 0;
        if (!eligible) {
            cs.backoff = -1;
            continue;
        }
        if (cs.backoff < 0) cs.backoff = static_cast<std::int64_t>(rng.below(cs.window));
        if (cs.backoff == 0) senders.push_back(f);
        else --cs.backoff;
    }
    std::vector<BandwidthRequest> granted;
    if (senders.size() == 1) {
        ServiceFlow* f = senders.front();
        ++f->contention.attempts;
        f->pending_request = f->backlog();
        f->pending_since = now;
        f->contention.window = cfg.be_cw_initial;
        f->contention.backoff = -1;
        granted.push_back(BandwidthRequest{f->cid, f->pending_request, now, RequestVia::Contention});
    } else {
        for (ServiceFlow* f : senders) {
            auto& cs = f->contention;
            ++cs.attempts;
            ++cs.collisions;
            cs.window = std::min(cs.window * 2, cfg.be_cw_max);
            cs.backoff = static_cast<std::int64_t>(rng.below(cs.window));
        }
    }
    return granted;
}

/// Drains whole packets from the queue head while they fit in the grant;
/// packet i starts at data_start plus the air time of everything before it.
inline std::vector<Packet> serve_grant(ServiceFlow& f, std::uint64_t granted, SimTime data_start, const MacConfig& cfg) {
    std::vector<Packet> sent;
    std::uint64_t used = 0;
    while (!f.queue.empty()) {
        const std::uint64_t need = std::uint64_t{f.queue.front().size} + cfg.packet_overhead;
        if (used + need > granted) break;
        Packet p = std::move(f.queue.front());
        f.queue.pop_front();
        f.queued_bytes -= need;
        p.t_st = data_start + cfg.airtime(used);
        used += need;
        sent.push_back(std::move(p));
    }
    return sent;
}

struct TransmitResult {
    std::vector<Packet> delivered;
    std::vector<Packet> dropped;
};

inline TransmitResult transmit(std::vector<Packet> pkts, const NeighborSnapshot& snap, const MacConfig& cfg) {
    TransmitResult r;
    for (auto& p : pkts) {
        if (snap.contains(p.node)) {
            p.t_rx = *p.t_st + cfg.airtime(p.size) + cfg.propagation + cfg.processing;
            r.delivered.push_back(std::move(p));
        } else {
            r.dropped.push_back(std::move(p));
        }
    }
    return r;
}

struct AuditRow {
    std::uint64_t frame_idx = 0;
    FlowId cid = 0;
    ServiceClass cls = ServiceClass::BE;
    std::uint64_t requested = 0;
    std::uint64_t granted = 0;
    std::uint64_t queue_bytes = 0;
};

struct FrameUsage {
    std::uint64_t frame_idx = 0;
    std::uint64_t capacity = 0;
    std::uint64_t used = 0;
};

struct FrameOutcome {
    GrantMap map;
    std::vector<Packet> delivered;
    std::vector<Packet> dropped;
    std::vector<BandwidthRequest> requests;
};

class CapacityViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/**
 * Owns every service flow at the coordinator and runs one MAC frame at a
 * time. Not thread-safe; one instance per simulation run.
 */
class UplinkScheduler {
  public:
    explicit UplinkScheduler(MacConfig cfg, bool keep_audit = false) : cfg_(cfg), keep_audit_(keep_audit) {
        cfg_.validate();
    }

    const MacConfig& config() const { return cfg_; }

    FlowId add_flow(NodeId node, ServiceClass cls) {
        const auto cid = static_cast<FlowId>(flows_.size());
        flows_.push_back(make_flow(cid, node, cls, cfg_));
        return cid;
    }

    ServiceFlow& flow(FlowId cid) { return flows_.at(cid); }
    const ServiceFlow& flow(FlowId cid) const { return flows_.at(cid); }
    std::span<ServiceFlow> flows() { return flows_; }
    std::span<const ServiceFlow> flows() const { return flows_; }

    /**
     * Starts the unsolicited grant schedule of a UGS/ertPS flow at the first
     * frame at or after `start`. UGS grants are then shifted to the first of
     * the next grant_period frames whose already-admitted UGS load leaves room
     * for one more fixed grant, so that fixed grants never collide in a frame.
     */
    void activate(FlowId cid, SimTime start) {
        auto& f = flows_.at(cid);
        const auto fd = static_cast<std::uint64_t>(cfg_.frame_duration.ticks);
        std::uint64_t k0 = (static_cast<std::uint64_t>(std::max<std::int64_t>(0, start.ticks)) + fd - 1) / fd;
        if (f.cls == ServiceClass::ertPS) {
            f.anchor_frame = k0;
            f.current_grant = rate_to_grant_bytes(f.reserved_rate_bps, cfg_.frame_duration, f.grant_period);
        } else if (f.cls == ServiceClass::UGS) {
            const std::uint64_t size =
                rate_to_grant_bytes(f.reserved_rate_bps, cfg_.frame_duration, f.grant_period) + cfg_.grant_overhead;
            std::uint64_t chosen = k0;
            for (std::uint64_t d = 0; d < f.grant_period; ++d) {
                const std::uint64_t phase = (k0 + d) % f.grant_period;
                if (ugs_phase_load_[{f.grant_period, phase}] + size <= cfg_.capacity_bytes()) {
                    chosen = k0 + d;
                    break;
                }
            }
            ugs_phase_load_[{f.grant_period, chosen % f.grant_period}] += size;
            f.anchor_frame = chosen;
        }
    }

    /// Allocation for one frame. Reads flow state; does not modify it.
    GrantMap build_grant_map(std::uint64_t frame_idx, const NeighborSnapshot& snap) const {
        GrantMap map;
        map.frame_idx = frame_idx;
        map.capacity = cfg_.capacity_bytes();
        map.poll_cost = cfg_.request_overhead;
        const SimTime now = cfg_.frame_start(frame_idx);
        std::uint64_t avail = map.capacity;

        bool any_contender = false;
        for (const auto& f : flows_) {
            if (snap.contains(f.node) && contends(f) && f.backlog() > 0 && f.pending_request == 0) any_contender = true;
        }
        if (any_contender && cfg_.request_overhead <= avail) {
            map.contention_bytes = cfg_.request_overhead;
            avail -= map.contention_bytes;
        }

        std::vector<std::size_t> polls_by_class[5];
        std::vector<GrantEntry> by_class[5];

        auto place = [&](GrantEntry& e, std::uint64_t want) {
            if (want == 0 || avail <= cfg_.grant_overhead) return;
            e.granted = std::min(want, avail - cfg_.grant_overhead);
            e.overhead = cfg_.grant_overhead;
            e.placed = true;
            avail -= e.granted + e.overhead;
        };

        // UGS: all or nothing.
        for (const auto& f : flows_) {
            if (f.cls != ServiceClass::UGS || !snap.contains(f.node)) continue;
            const GrantSize g = ugs_grant(f, frame_idx, cfg_);
            if (!g.issued()) continue;
            GrantEntry e{f.cid, f.cls, g.payload, 0, 0, 0};
            if (g.total() <= avail) {
                e.granted = g.payload;
                e.overhead = g.overhead;
                e.placed = true;
                avail -= g.total();
            }
            by_class[0].push_back(e);
        }
        // ertPS: unsolicited, shrinks to what is left.
        for (const auto& f : flows_) {
            if (f.cls != ServiceClass::ertPS || !snap.contains(f.node)) continue;
            const GrantSize g = ertps_grant(f, frame_idx, cfg_);
            if (!on_grant_period(f, frame_idx)) continue;
            GrantEntry e{f.cid, f.cls, g.payload, 0, 0, 0};
            if (cfg_.grant_overhead <= avail) {
                e.granted = std::min(g.payload, avail - cfg_.grant_overhead);
                e.overhead = cfg_.grant_overhead;
                e.placed = true;
                avail -= e.granted + e.overhead;
            }
            by_class[1].push_back(e);
        }
        // Unicast poll opportunities and request-based grants.
        auto request_order = fifo_order(snap);
        std::vector<std::pair<std::size_t, std::uint64_t>> nrtps_rest;  // (index in by_class[3], remaining)
        for (ServiceClass c : {ServiceClass::rtPS, ServiceClass::nrtPS}) {
            const auto ci = static_cast<std::size_t>(c);
            for (const auto& f : flows_) {
                if (f.cls != c || !snap.contains(f.node)) continue;
                if (poll_due(now, f.poll_interval) && cfg_.request_overhead <= avail) {
                    polls_by_class[ci].push_back(f.cid);
                    avail -= cfg_.request_overhead;
                }
            }
            for (std::size_t idx : request_order) {
                const auto& f = flows_[idx];
                if (f.cls != c || f.pending_request == 0) continue;
                std::uint64_t want = f.pending_request;
                GrantEntry e{f.cid, f.cls, want, 0, 0, 0};
                if (c == ServiceClass::nrtPS) {
                    const std::uint64_t quota = rate_to_grant_bytes(f.reserved_rate_bps, cfg_.frame_duration, 1);
                    e.requested = std::min(want, quota);
                    place(e, e.requested);
                    by_class[ci].push_back(e);
                    nrtps_rest.emplace_back(by_class[ci].size() - 1, want - e.granted);
                    continue;
                }
                place(e, want);
                by_class[ci].push_back(e);
            }
        }
        for (std::size_t idx : request_order) {
            const auto& f = flows_[idx];
            if (f.cls != ServiceClass::BE || f.pending_request == 0) continue;
            GrantEntry e{f.cid, f.cls, f.pending_request, 0, 0, 0};
            place(e, f.pending_request);
            by_class[4].push_back(e);
        }
        // nrtPS beyond its minimum rate shares whatever BE left.
        for (auto [i, rest] : nrtps_rest) {
            auto& e = by_class[3][i];
            if (rest == 0) continue;
            if (!e.placed) {
                place(e, rest);
            } else {
                const std::uint64_t extra = std::min(rest, avail);
                e.granted += extra;
                avail -= extra;
            }
        }

        // Layout: contention region, then per class its polls and grants.
        std::uint64_t cursor = map.contention_bytes;
        for (std::size_t ci = 0; ci < 5; ++ci) {
            for (std::size_t cid : polls_by_class[ci]) {
                map.polls.push_back(PollEntry{static_cast<FlowId>(cid), cursor});
                cursor += cfg_.request_overhead;
            }
            for (auto& e : by_class[ci]) {
                e.offset = cursor;
                cursor += e.granted + e.overhead;
                map.entries.push_back(e);
            }
        }
        return map;
    }

    /**
     * Runs frame `frame_idx`: builds and checks the map, drains the granted
     * queues onto the air, then collects poll responses, ertPS piggybacks and
     * contention requests, all of which take effect from the next frame.
     */
    FrameOutcome run_frame(std::uint64_t frame_idx, const NeighborSnapshot& snap, RngStream& contention_rng) {
        FrameOutcome out;
        out.map = build_grant_map(frame_idx, snap);
        const SimTime start = cfg_.frame_start(frame_idx);
        const std::uint64_t used = out.map.used_bytes();
        if (used > out.map.capacity) {
            throw CapacityViolation("frame " + std::to_string(frame_idx) + " oversubscribed: " + std::to_string(used) +
                                    " > " + std::to_string(out.map.capacity));
        }
        usage_.push_back(FrameUsage{frame_idx, out.map.capacity, used});

        if (keep_audit_) {
            for (const auto& e : out.map.entries) {
                audit_.push_back(AuditRow{frame_idx, e.cid, e.cls, e.requested, e.granted, flows_[e.cid].backlog()});
            }
        }

        for (const auto& e : out.map.entries) {
            auto& f = flows_[e.cid];
            if (!e.placed) continue;
            auto sent = serve_grant(f, e.granted, start + cfg_.airtime(e.offset + e.overhead), cfg_);
            if (e.cls != ServiceClass::UGS && e.cls != ServiceClass::ertPS) {
                f.pending_request -= std::min(f.pending_request, e.granted);
            }
            auto tx = transmit(std::move(sent), snap, cfg_);
            for (auto& p : tx.delivered) out.delivered.push_back(std::move(p));
            for (auto& p : tx.dropped) out.dropped.push_back(std::move(p));
        }

        for (const auto& p : out.map.polls) out.requests.push_back(poll_response(flows_[p.cid], start));
        for (const auto& e : out.map.entries) {
            if (e.cls == ServiceClass::ertPS && e.placed) {
                out.requests.push_back(ertps_piggyback(flows_[e.cid], start, cfg_));
            }
        }
        if (out.map.contention_bytes > 0) {
            std::vector<ServiceFlow*> contenders;
            for (auto& f : flows_) {
                if (snap.contains(f.node) && contends(f)) contenders.push_back(&f);
            }
            for (auto& r : be_contention(contenders, frame_idx, contention_rng, cfg_)) out.requests.push_back(r);
        }
        return out;
    }

    std::span<const FrameUsage> usage() const { return usage_; }
    std::span<const AuditRow> audit() const { return audit_; }

  private:
    bool contends(const ServiceFlow& f) const {
        return f.cls == ServiceClass::BE || (f.cls == ServiceClass::nrtPS && cfg_.nrtps_contention);
    }

    /// Indices of reachable flows ordered by (request time, cid).
    std::vector<std::size_t> fifo_order(const NeighborSnapshot& snap) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < flows_.size(); ++i) {
            if (snap.contains(flows_[i].node)) idx.push_back(i);
        }
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return flows_[a].pending_since < flows_[b].pending_since;
        });
        return idx;
    }

    MacConfig cfg_;
    bool keep_audit_;
    std::vector<ServiceFlow> flows_;
    std::map<std::pair<std::uint32_t, std::uint64_t>, std::uint64_t> ugs_phase_load_;
    std::vector<FrameUsage> usage_;
    std::vector<AuditRow> audit_;
};

}  // namespace qsched
