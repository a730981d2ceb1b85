// Independent recomputation of summary.csv from trace.csv text.
//
// Reads the trace as plain text in one pass, keeps only running integer sums
// per node and the last delivered delay per flow, and formats the result with
// its own long-division rounding. Shares nothing with the library except
// that both agree on the column layout.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

namespace trace_detail {

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// num/den to `places` decimals, ties away from zero; num >= 0, den > 0.
inline std::string decimal(unsigned long long num, unsigned long long den, int places) {
    if (den == 0) {
        num = 0;
        den = 1;
    }
    unsigned long long whole = num / den;
    unsigned long long rem = num % den;
    std::string digits;
    for (int i = 0; i < places; ++i) {
        rem *= 10;
        digits.push_back(static_cast<char>('0' + rem / den));
        rem %= den;
    }
    // Round on the remainder that is left.
    if (2 * static_cast<unsigned __int128>(rem) >= den) {
        int i = places - 1;
        while (i >= 0 && digits[static_cast<std::size_t>(i)] == '9') digits[static_cast<std::size_t>(i--)] = '0';
        if (i >= 0) ++digits[static_cast<std::size_t>(i)];
        else ++whole;
    }
    return std::to_string(whole) + (places > 0 ? "." + digits : "");
}

}  // namespace trace_detail

struct NodeSums {
    std::set<unsigned long> flows;
    unsigned long long delivered = 0, dropped = 0, bits = 0;
    long long delay = 0, jitter = 0;
    unsigned long long jitter_n = 0;
};

/**
 * `trace` is the full file, header comment included. `nodes` is the number of
 * subscribers (each owns one flow) so that silent nodes still get a row.
 * Returns summary.csv without its comment line.
 */
inline std::string replay_summary(const std::string& trace, unsigned nodes, long long elapsed_us) {
    std::istringstream in(trace);
    std::string line;
    std::map<unsigned long, NodeSums> by_node;
    std::map<unsigned long, long long> last_delay;  // per flow
    std::string cls;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            // The comment line carries the configuration; take the class from it.
            if (auto at = line.find(" qos_class="); at != std::string::npos) {
                const auto from = at + 11;
                cls = line.substr(from, line.find(' ', from) - from);
            }
            continue;
        }
        if (!header_seen) {
            if (line != "pkt_id,flow,node,class,size_B,t_gen_us,t_st_us,t_rx_us,disposition") {
                throw std::runtime_error("unexpected trace header: " + line);
            }
            header_seen = true;
            continue;
        }
        const auto f = trace_detail::split(line);
        if (f.size() != 9) throw std::runtime_error("bad trace row: " + line);
        const unsigned long flow = std::stoul(f[1]);
        const unsigned long node = std::stoul(f[2]);
        if (f[3] != cls) throw std::runtime_error("class " + f[3] + " differs from the header's " + cls);
        auto& s = by_node[node];
        s.flows.insert(flow);
        if (f[8] == "dropped") {
            ++s.dropped;
        } else if (f[8] == "delivered") {
            ++s.delivered;
            s.bits += std::stoull(f[4]) * 8;
            const long long d = std::stoll(f[7]) - std::stoll(f[5]);
            s.delay += d;
            if (auto it = last_delay.find(flow); it != last_delay.end()) {
                s.jitter += d > it->second ? d - it->second : it->second - d;
                ++s.jitter_n;
            }
            last_delay[flow] = d;
        }
    }
    NodeSums all;
    std::ostringstream out;
    out << "class,node,flows,delivered,dropped,throughput_mbps,mean_delay_us,mean_jitter_us\n";
    auto row = [&](const std::string& key, const NodeSums& s, std::size_t flows) {
        out << cls << ',' << key << ',' << flows << ',' << s.delivered << ',' << s.dropped << ','
            << trace_detail::decimal(s.bits, static_cast<unsigned long long>(elapsed_us), 6) << ','
            << trace_detail::decimal(static_cast<unsigned long long>(s.delay), s.delivered, 3) << ','
            << trace_detail::decimal(static_cast<unsigned long long>(s.jitter), s.jitter_n, 3) << '\n';
    };
    for (unsigned n = 1; n <= nodes; ++n) {
        NodeSums s;
        if (auto it = by_node.find(n); it != by_node.end()) s = it->second;
        const std::size_t flows = s.flows.empty() ? 1 : s.flows.size();
        row(std::to_string(n), s, flows);
        all.delivered += s.delivered;
        all.dropped += s.dropped;
        all.bits += s.bits;
        all.delay += s.delay;
        all.jitter += s.jitter;
        all.jitter_n += s.jitter_n;
    }
    row("all", all, nodes);
    return out.str();
}

}  // namespace oracle
