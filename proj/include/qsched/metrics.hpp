/**
 * @file metrics.hpp
 * @brief Throughput, delay and jitter over the packet trace.
 *
 * Three delays exist per delivered packet:
 *   - link delay   t_rx - t_st  (send to receive over the air)
 *   - e2e delay    t_rx - t_gen (includes uplink queueing and request latency)
 * Summaries report e2e delay as "delay" and jitter as the mean absolute
 * difference of consecutive e2e delays within a flow. Link delay is reported
 * next to it. All sums are exact integers; means are formatted from them.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsched/mac_sched.hpp"
#include "qsched/sim_core.hpp"
#include "qsched/traffic.hpp"

namespace qsched {

enum class Disposition : std::uint8_t { Delivered, Dropped, Queued };

inline std::string_view to_string(Disposition d) {
    switch (d) {
        case Disposition::Delivered: return "delivered";
        case Disposition::Dropped: return "dropped";
        case Disposition::Queued: return "queued";
    }
    return "?";
}

struct PacketRecord {
    PacketId pkt_id = 0;
    FlowId flow = 0;
    NodeId node = 0;
    ServiceClass cls = ServiceClass::BE;
    std::uint32_t size = 0;
    SimTime t_gen;
    std::optional<SimTime> t_st;
    std::optional<SimTime> t_rx;
    Disposition disposition = Disposition::Queued;
};

class NotDelivered : public std::invalid_argument {
  public:
    explicit NotDelivered(PacketId id) : std::invalid_argument("packet " + std::to_string(id) + " was not delivered") {}
};

class InvalidWindow : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Send-to-receive delay, t_rx - t_st.
inline std::int64_t delay(const PacketRecord& r) {
    if (r.disposition != Disposition::Delivered || !r.t_rx || !r.t_st) throw NotDelivered(r.pkt_id);
    return (*r.t_rx - *r.t_st).ticks;
}

/// Generation-to-receive delay, t_rx - t_gen.
inline std::int64_t e2e_delay(const PacketRecord& r) {
    if (r.disposition != Disposition::Delivered || !r.t_rx) throw NotDelivered(r.pkt_id);
    return (*r.t_rx - r.t_gen).ticks;
}

inline std::int64_t jitter(std::int64_t d_t, std::int64_t d_p) { return d_t >= d_p ? d_t - d_p : d_p - d_t; }

struct FlowStats {
    FlowId flow = 0;
    NodeId node = 0;
    ServiceClass cls = ServiceClass::BE;
    std::uint64_t generated = 0;
    std::uint64_t delivered_packets = 0;
    std::uint64_t delivered_bits = 0;
    std::uint64_t drops = 0;
    std::uint64_t queued = 0;
    std::vector<std::int64_t> delays;         // e2e, delivery order
    std::vector<std::int64_t> link_delays;    // t_rx - t_st
    std::vector<std::int64_t> jitter_samples; // |delays[i] - delays[i-1]|

    void add(const PacketRecord& r) {
        ++generated;
        switch (r.disposition) {
            case Disposition::Dropped: ++drops; return;
            case Disposition::Queued: ++queued; return;
            case Disposition::Delivered: break;
        }
        ++delivered_packets;
        delivered_bits += std::uint64_t{r.size} * 8;
        const std::int64_t d = e2e_delay(r);
        if (!delays.empty()) jitter_samples.push_back(jitter(d, delays.back()));
        delays.push_back(d);
        link_delays.push_back(delay(r));
    }
};

/// Per-flow statistics in flow-id order. Records must be in generation order
/// within each flow (pkt_id order is).
inline std::vector<FlowStats> collect_stats(std::span<const PacketRecord> records, std::span<const FlowInfo> flows) {
    std::vector<FlowStats> out(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) {
        out[i].flow = flows[i].cid;
        out[i].node = flows[i].node;
        out[i].cls = flows[i].cls;
    }
    for (const auto& r : records) out.at(r.flow).add(r);
    return out;
}

struct Throughput {
    double mbps = 0.0;
    double packets_per_s = 0.0;
};

/// Application throughput over `elapsed_s`, MAC overhead excluded.
inline Throughput throughput(const FlowStats& s, double elapsed_s) {
    if (!(elapsed_s > 0.0)) throw InvalidWindow("throughput: elapsed time must be > 0");
    return Throughput{static_cast<double>(s.delivered_bits) / elapsed_s / 1e6,
                      static_cast<double>(s.delivered_packets) / elapsed_s};
}

enum class SeriesMode : std::uint8_t { Cumulative, PerBin };

struct TimeSeries {
    SimTime bin_width;
    std::vector<std::pair<SimTime, double>> points;  // (bin end, Mb/s)
};

/**
 * Delivered-bit throughput over contiguous bins covering [0, end]; the last
 * bin is shortened if end is not a multiple of bin. Cumulative mode divides
 * everything delivered by bin end; per-bin mode only that bin's bits by its
 * width. `divisor` turns an aggregate into a per-flow average.
 */
inline TimeSeries throughput_series(std::span<const PacketRecord> records, SimTime bin, SeriesMode mode, SimTime end,
                                    std::uint32_t divisor = 1) {
    if (bin.ticks <= 0) throw InvalidWindow("throughput_series: bin must be > 0");
    if (divisor == 0) divisor = 1;
    TimeSeries ts{bin, {}};
    if (end.ticks <= 0) return ts;
    const std::size_t nbins = static_cast<std::size_t>((end.ticks + bin.ticks - 1) / bin.ticks);
    std::vector<std::uint64_t> bits(nbins, 0);
    for (const auto& r : records) {
        if (r.disposition != Disposition::Delivered || !r.t_rx || *r.t_rx > end) continue;
        auto b = static_cast<std::size_t>(r.t_rx->ticks == 0 ? 0 : (r.t_rx->ticks - 1) / bin.ticks);
        bits[std::min(b, nbins - 1)] += std::uint64_t{r.size} * 8;
    }
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < nbins; ++i) {
        const SimTime lo = SimTime::us(static_cast<std::int64_t>(i) * bin.ticks);
        const SimTime hi = std::min(end, lo + bin);
        total += bits[i];
        double v = 0.0;
        if (mode == SeriesMode::Cumulative) v = static_cast<double>(total) / static_cast<double>(hi.ticks);
        else v = static_cast<double>(bits[i]) / static_cast<double>((hi - lo).ticks);
        ts.points.emplace_back(hi, v / divisor);
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

enum class Group : std::uint8_t { Flow, Node, Network };

/// Exact accumulators for one summary row.
struct SummaryRow {
    std::string key;  // flow id, node id, or "all"
    std::uint32_t flows = 0;
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t queued = 0;
    std::uint64_t delivered_bits = 0;
    std::int64_t delay_sum = 0;
    std::int64_t link_delay_sum = 0;
    std::int64_t jitter_sum = 0;
    std::uint64_t jitter_count = 0;

    void absorb(const FlowStats& s) {
        ++flows;
        generated += s.generated;
        delivered += s.delivered_packets;
        dropped += s.drops;
        queued += s.queued;
        delivered_bits += s.delivered_bits;
        for (auto d : s.delays) delay_sum += d;
        for (auto d : s.link_delays) link_delay_sum += d;
        for (auto j : s.jitter_samples) jitter_sum += j;
        jitter_count += s.jitter_samples.size();
    }

    double mean_delay_us() const { return delivered ? static_cast<double>(delay_sum) / delivered : 0.0; }
    double mean_link_delay_us() const { return delivered ? static_cast<double>(link_delay_sum) / delivered : 0.0; }
    double mean_jitter_us() const { return jitter_count ? static_cast<double>(jitter_sum) / jitter_count : 0.0; }
    double throughput_mbps(SimTime elapsed) const {
        return elapsed.ticks > 0 ? static_cast<double>(delivered_bits) / static_cast<double>(elapsed.ticks) : 0.0;
    }
};

inline std::vector<SummaryRow> summarize(std::span<const FlowStats> stats, Group group) {
    std::map<std::uint64_t, SummaryRow> rows;
    SummaryRow all;
    all.key = "all";
    if (group == Group::Network) {
        for (const auto& s : stats) all.absorb(s);
        return {all};
    }
    for (const auto& s : stats) {
        const std::uint64_t k = group == Group::Flow ? s.flow : s.node;
        auto& row = rows[k];
        row.key = std::to_string(k);
        row.absorb(s);
    }
    std::vector<SummaryRow> out;
    out.reserve(rows.size());
    for (auto& [k, row] : rows) out.push_back(std::move(row));
    return out;
}

/// num/den rounded half away from zero to `decimals` places, as text.
/// Integer arithmetic only, so any reader with the same sums prints the same bytes.
inline std::string fixed_ratio(std::int64_t num, std::int64_t den, int decimals) {
    if (den == 0) num = 0, den = 1;
    if (den < 0) num = -num, den = -den;
    const bool neg = num < 0;
    __int128 n = neg ? -static_cast<__int128>(num) : num;
    __int128 scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const __int128 q = (n * scale * 2 + den) / (2 * static_cast<__int128>(den));
    const auto whole = static_cast<std::int64_t>(q / scale);
    auto frac = static_cast<std::int64_t>(q % scale);
    std::string s = (neg && q != 0 ? "-" : "") + std::to_string(whole);
    if (decimals > 0) {
        std::string f = std::to_string(frac);
        s += "." + std::string(static_cast<std::size_t>(decimals) - f.size(), '0') + f;
    }
    return s;
}

}  // namespace qsched
