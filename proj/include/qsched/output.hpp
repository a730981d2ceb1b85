/**
 * @file output.hpp
 * @brief CSV and text writers for runs and comparisons.
 *
 * Every CSV starts with one comment line
 *
 *     # qsched mode=<run|compare> [seeds=a,b,...] key=value ...
 *
 * carrying the full configuration, so `config_from_header` can replay it.
 * Column schemas:
 *
 *   trace.csv       pkt_id,flow,node,class,size_B,t_gen_us,t_st_us,t_rx_us,disposition
 *   summary.csv     class,node,flows,delivered,dropped,throughput_mbps,mean_delay_us,mean_jitter_us
 *   comparison.csv  seed,class,flows,delivered,dropped,queued,mean_flow_throughput_mbps,
 *                   mean_delay_us,mean_jitter_us,mean_link_delay_us,delay_order_ok,jitter_order_ok
 *   grants.csv      frame_idx,cid,class,requested_B,granted_B,queue_B
 *   positions.csv   time_us,node,x_m,y_m
 *   series.csv      bin_end_us,cumulative_mbps,per_bin_mbps   (per-flow average)
 *
 * Times that do not apply (a dropped packet's t_rx) are left empty.
 */

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsched/config.hpp"
#include "qsched/metrics.hpp"
#include "qsched/scenario.hpp"

namespace qsched {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::string header_line(const ScenarioConfig& cfg, std::string_view mode,
                               const std::vector<std::uint64_t>& seeds = {}) {
    std::string s = "# qsched mode=" + std::string(mode);
    if (!seeds.empty()) {
        s += " seeds=";
        for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
    }
    return s + " " + cfg.to_kv_line() + "\n";
}

namespace detail {

inline std::string opt_time(const std::optional<SimTime>& t) { return t ? std::to_string(t->ticks) : std::string(); }

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, std::span<const PacketRecord> records) {
    os << "pkt_id,flow,node,class,size_B,t_gen_us,t_st_us,t_rx_us,disposition\n";
    for (const auto& r : records) {
        os << r.pkt_id << ',' << r.flow << ',' << r.node << ',' << to_string(r.cls) << ',' << r.size << ','
           << r.t_gen.ticks << ',' << detail::opt_time(r.t_st) << ',' << detail::opt_time(r.t_rx) << ','
           << to_string(r.disposition) << '\n';
    }
}

inline void write_summary_row(std::ostream& os, ServiceClass cls, const SummaryRow& row, SimTime elapsed) {
    os << to_string(cls) << ',' << row.key << ',' << row.flows << ',' << row.delivered << ',' << row.dropped << ','
       << fixed_ratio(static_cast<std::int64_t>(row.delivered_bits), elapsed.ticks, 6) << ','
       << fixed_ratio(row.delay_sum, static_cast<std::int64_t>(row.delivered), 3) << ','
       << fixed_ratio(row.jitter_sum, static_cast<std::int64_t>(row.jitter_count), 3) << '\n';
}

/// One row per node, then the network row with node = "all".
inline void write_summary_csv(std::ostream& os, const RunResult& r) {
    os << "class,node,flows,delivered,dropped,throughput_mbps,mean_delay_us,mean_jitter_us\n";
    for (const auto& row : summarize(r.stats, Group::Node)) write_summary_row(os, r.config.qos_class, row, r.elapsed());
    write_summary_row(os, r.config.qos_class, summarize(r.stats, Group::Network).front(), r.elapsed());
}

inline void write_audit_csv(std::ostream& os, std::span<const AuditRow> rows) {
    os << "frame_idx,cid,class,requested_B,granted_B,queue_B\n";
    for (const auto& a : rows) {
        os << a.frame_idx << ',' << a.cid << ',' << to_string(a.cls) << ',' << a.requested << ',' << a.granted << ','
           << a.queue_bytes << '\n';
    }
}

inline void write_positions_csv(std::ostream& os, std::span<const PositionSample> rows) {
    os << "time_us,node,x_m,y_m\n";
    for (const auto& p : rows) {
        os << p.time.ticks << ',' << p.node << ',' << detail::fixed(p.pos.x, 3) << ',' << detail::fixed(p.pos.y, 3)
           << '\n';
    }
}

inline void write_series_csv(std::ostream& os, const RunResult& r) {
    const SimTime bin = SimTime::from_seconds(r.config.series_bin_ms / 1000.0);
    const auto cum = throughput_series(r.records, bin, SeriesMode::Cumulative, r.elapsed(), r.config.nodes);
    const auto per = throughput_series(r.records, bin, SeriesMode::PerBin, r.elapsed(), r.config.nodes);
    os << "bin_end_us,cumulative_mbps,per_bin_mbps\n";
    for (std::size_t i = 0; i < cum.points.size(); ++i) {
        os << cum.points[i].first.ticks << ',' << detail::fixed(cum.points[i].second, 6) << ','
           << detail::fixed(per.points[i].second, 6) << '\n';
    }
}

inline void write_comparison_csv(std::ostream& os, const Comparison& cmp) {
    os << "seed,class,flows,delivered,dropped,queued,mean_flow_throughput_mbps,mean_delay_us,mean_jitter_us,"
          "mean_link_delay_us,delay_order_ok,jitter_order_ok\n";
    const SimTime elapsed = cmp.config.sim_end();
    for (std::size_t i = 0; i < cmp.seeds.size(); ++i) {
        const auto& v = cmp.verdicts[i];
        for (const auto& run : cmp.seed_runs(i)) {
            const auto& n = run.network;
            os << run.seed << ',' << to_string(run.cls) << ',' << n.flows << ',' << n.delivered << ',' << n.dropped
               << ',' << n.queued << ','
               << fixed_ratio(static_cast<std::int64_t>(n.delivered_bits),
                              elapsed.ticks * static_cast<std::int64_t>(std::max<std::uint32_t>(n.flows, 1)), 6)
               << ',' << fixed_ratio(n.delay_sum, static_cast<std::int64_t>(n.delivered), 3) << ','
               << fixed_ratio(n.jitter_sum, static_cast<std::int64_t>(n.jitter_count), 3) << ','
               << fixed_ratio(n.link_delay_sum, static_cast<std::int64_t>(n.delivered), 3) << ','
               << (v.delay_order ? "true" : "false") << ',' << (v.jitter_order ? "true" : "false") << '\n';
        }
    }
}

/// Per-node rows of every (seed, class) run.
inline void write_comparison_nodes_csv(std::ostream& os, const Comparison& cmp) {
    os << "seed,class,node,flows,delivered,dropped,throughput_mbps,mean_delay_us,mean_jitter_us\n";
    const SimTime elapsed = cmp.config.sim_end();
    for (const auto& run : cmp.runs) {
        for (const auto& row : run.per_node) {
            os << run.seed << ',';
            write_summary_row(os, run.cls, row, elapsed);
        }
    }
}

inline std::string run_text_summary(const RunResult& r) {
    std::ostringstream os;
    const auto net = summarize(r.stats, Group::Network).front();
    os << "qsched run: class " << to_string(r.config.qos_class) << ", seed " << r.config.seed << ", " << r.config.nodes
       << " nodes, " << r.config.sim_time_s << " s\n";
    os << "  packets generated  " << net.generated << "\n";
    os << "  delivered          " << net.delivered << "\n";
    os << "  dropped            " << net.dropped << "\n";
    os << "  still queued       " << net.queued << "\n";
    os << "  throughput         " << fixed_ratio(static_cast<std::int64_t>(net.delivered_bits), r.elapsed().ticks, 6)
       << " Mb/s total, "
       << fixed_ratio(static_cast<std::int64_t>(net.delivered_bits),
                      r.elapsed().ticks * static_cast<std::int64_t>(std::max<std::uint32_t>(net.flows, 1)), 6)
       << " Mb/s per flow\n";
    os << "  mean delay         " << fixed_ratio(net.delay_sum, static_cast<std::int64_t>(net.delivered), 3)
       << " us (generation to receive)\n";
    os << "  mean link delay    " << fixed_ratio(net.link_delay_sum, static_cast<std::int64_t>(net.delivered), 3)
       << " us (send to receive)\n";
    os << "  mean jitter        " << fixed_ratio(net.jitter_sum, static_cast<std::int64_t>(net.jitter_count), 3)
       << " us\n";
    if (r.contention_attempts > 0) {
        os << "  contention         " << r.contention_attempts << " attempts, " << r.contention_collisions
           << " collisions\n";
    }
    os << "  events             " << r.events << ", wall " << detail::fixed(r.wall_seconds, 3) << " s\n";
    return os.str();
}

inline std::string compare_text_summary(const Comparison& cmp) {
    std::ostringstream os;
    os << "qsched compare: " << cmp.seeds.size() << " seed(s) x 5 classes, wall "
       << detail::fixed(cmp.wall_seconds, 3) << " s\n";
    os << "  seed   class   delay_us      jitter_us     Mb/s/flow\n";
    const SimTime elapsed = cmp.config.sim_end();
    for (std::size_t i = 0; i < cmp.seeds.size(); ++i) {
        for (const auto& run : cmp.seed_runs(i)) {
            const auto& n = run.network;
            char line[160];
            std::snprintf(line, sizeof line, "  %-6llu %-7s %-13s %-13s %s\n",
                          static_cast<unsigned long long>(run.seed), std::string(to_string(run.cls)).c_str(),
                          fixed_ratio(n.delay_sum, static_cast<std::int64_t>(n.delivered), 1).c_str(),
                          fixed_ratio(n.jitter_sum, static_cast<std::int64_t>(n.jitter_count), 1).c_str(),
                          fixed_ratio(static_cast<std::int64_t>(n.delivered_bits),
                                      elapsed.ticks * static_cast<std::int64_t>(std::max<std::uint32_t>(n.flows, 1)), 6)
                              .c_str());
            os << line;
        }
        const auto& v = cmp.verdicts[i];
        os << "  seed " << v.seed << ": delay order UGS<ertPS<rtPS<BE<nrtPS " << (v.delay_order ? "holds" : "FAILS")
           << "; jitter order (ertPS min, nrtPS max, ertPS<UGS) " << (v.jitter_order ? "holds" : "FAILS") << "\n";
    }
    std::size_t d = 0, j = 0;
    for (const auto& v : cmp.verdicts) d += v.delay_order, j += v.jitter_order;
    os << "  delay order held in " << d << "/" << cmp.verdicts.size() << " seeds, jitter order in " << j << "/"
       << cmp.verdicts.size() << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

template <class Writer>
std::string render(const std::string& header, Writer&& w) {
    std::ostringstream os;
    os << header;
    w(os);
    return os.str();
}

struct EmitOptions {
    bool trace = true;
    bool grants = false;
    bool positions = false;
    bool series = true;
};

/// Writes the files of one run into `dir`; returns the paths written.
inline std::vector<std::filesystem::path> emit_outputs(const RunResult& r, const std::filesystem::path& dir,
                                                       const EmitOptions& opts = {}, const std::string& prefix = "") {
    ensure_dir(dir);
    const std::string head = header_line(r.config, "run");
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& body) {
        const auto p = dir / (prefix + name);
        write_file(p, body);
        written.push_back(p);
    };
    put("summary.csv", render(head, [&](std::ostream& os) { write_summary_csv(os, r); }));
    if (opts.trace) put("trace.csv", render(head, [&](std::ostream& os) { write_trace_csv(os, r.records); }));
    if (opts.series) put("series.csv", render(head, [&](std::ostream& os) { write_series_csv(os, r); }));
    if (opts.grants) put("grants.csv", render(head, [&](std::ostream& os) { write_audit_csv(os, r.audit); }));
    if (opts.positions) {
        put("positions.csv", render(head, [&](std::ostream& os) { write_positions_csv(os, r.positions); }));
    }
    put("summary.txt", run_text_summary(r));
    return written;
}

/// Comparison tables, plus per-run traces and positions when asked for.
inline std::vector<std::filesystem::path> emit_outputs(const Comparison& cmp, const std::filesystem::path& dir,
                                                       const EmitOptions& opts = {}) {
    ensure_dir(dir);
    const std::string head = header_line(cmp.config, "compare", cmp.seeds);
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& body) {
        const auto p = dir / name;
        write_file(p, body);
        written.push_back(p);
    };
    put("comparison.csv", render(head, [&](std::ostream& os) { write_comparison_csv(os, cmp); }));
    put("comparison_nodes.csv", render(head, [&](std::ostream& os) { write_comparison_nodes_csv(os, cmp); }));
    for (const auto& run : cmp.runs) {
        ScenarioConfig c = cmp.config;
        c.seed = run.seed;
        c.qos_class = run.cls;
        const std::string h = header_line(c, "run");
        const std::string stem = std::string(to_string(run.cls)) + "_seed" + std::to_string(run.seed) + "_";
        if (opts.trace && !run.records.empty()) {
            put(stem + "trace.csv", render(h, [&](std::ostream& os) { write_trace_csv(os, run.records); }));
        }
        if (opts.positions) {
            put(stem + "positions.csv", render(h, [&](std::ostream& os) { write_positions_csv(os, run.positions); }));
        }
    }
    put("summary.txt", compare_text_summary(cmp));
    return written;
}

}  // namespace qsched
