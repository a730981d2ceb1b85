/**
 * @file traffic.hpp
 * @brief Video-conferencing source: periodic frames of (optionally) random
 *        size, fragmented into MTU-sized packets.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qsched/mobility.hpp"
#include "qsched/sim_core.hpp"

namespace qsched {

using FlowId = std::uint32_t;
using PacketId = std::uint64_t;

struct VideoSourceConfig {
    double fps = 25.0;
    std::uint32_t frame_bytes_mean = 2290;
    double frame_bytes_cv = 0.15;
    SimTime start_time = SimTime::sec(2);
    std::uint32_t mtu = 1500;
    /// Frames emitted at or after load_step_at have their mean scaled by
    /// load_step_factor. Disabled when load_step_at is unset.
    std::optional<SimTime> load_step_at;
    double load_step_factor = 1.0;

    void validate() const {
        if (!(fps > 0.0)) throw std::invalid_argument("fps must be > 0");
        if (frame_bytes_mean == 0) throw std::invalid_argument("frame_bytes_mean must be > 0");
        if (!(frame_bytes_cv >= 0.0 && frame_bytes_cv < 1.0)) throw std::invalid_argument("frame_bytes_cv must be in [0, 1)");
        if (mtu == 0) throw std::invalid_argument("mtu must be > 0");
        if (!(load_step_factor > 0.0)) throw std::invalid_argument("load_step_factor must be > 0");
    }

    SimTime frame_interval() const { return SimTime::us(std::llround(1e6 / fps)); }
};

struct Packet {
    PacketId pkt_id = 0;
    FlowId flow = 0;
    NodeId node = 0;
    std::uint32_t size = 0;  // application bytes
    SimTime t_gen;
    std::optional<SimTime> t_st;
    std::optional<SimTime> t_rx;
};

struct VideoFrame {
    SimTime emit_at;
    std::uint32_t bytes = 0;
};

inline SimTime frame_emission_time(const VideoSourceConfig& cfg, std::uint64_t k) {
    return cfg.start_time + SimTime::us(std::llround(static_cast<double>(k) * 1e6 / cfg.fps));
}

/// Frame k of the source. Sizes follow a normal(mean, cv*mean) truncated to
/// [1, 2*mean] and rounded to whole bytes; cv = 0 draws nothing.
inline VideoFrame next_frame(const VideoSourceConfig& cfg, std::uint64_t k, RngStream& rng) {
    VideoFrame f;
    f.emit_at = frame_emission_time(cfg, k);
    double mean = cfg.frame_bytes_mean;
    if (cfg.load_step_at && f.emit_at >= *cfg.load_step_at) mean *= cfg.load_step_factor;
    if (cfg.frame_bytes_cv == 0.0) {
        f.bytes = static_cast<std::uint32_t>(std::max<long long>(1, std::llround(mean)));
        return f;
    }
    const double sd = cfg.frame_bytes_cv * mean;
    double v = 0.0;
    do {
        v = mean + sd * rng.standard_normal();
    } while (v < 1.0 || v > 2.0 * mean);
    f.bytes = static_cast<std::uint32_t>(std::clamp<long long>(std::llround(v), 1, std::llround(2.0 * mean)));
    return f;
}

/// Splits a frame into ceil(bytes/mtu) packets, all full-size except the last.
inline std::vector<Packet> fragment(std::uint32_t frame_bytes, std::uint32_t mtu, SimTime t, FlowId flow,
                                    NodeId node = 0, PacketId first_id = 0) {
    if (frame_bytes == 0) throw std::invalid_argument("fragment: empty frame");
    if (mtu == 0) throw std::invalid_argument("fragment: mtu must be > 0");
    std::vector<Packet> out;
    out.reserve((frame_bytes + mtu - 1) / mtu);
    std::uint32_t left = frame_bytes;
    PacketId id = first_id;
    while (left > 0) {
        const std::uint32_t sz = std::min(left, mtu);
        out.push_back(Packet{id++, flow, node, sz, t, std::nullopt, std::nullopt});
        left -= sz;
    }
    return out;
}

}  // namespace qsched
