// Exhaustive reference allocator for small scheduler instances.
//
// The scheduler fills each frame greedily in priority order. This oracle
// states the same policy declaratively: among every feasible assignment of
// bytes to the frame's demand items, pick the lexicographically largest
// vector of per-item values, items listed in priority order. It enumerates
// every assignment instead of filling greedily, and keeps its own copy of
// each flow's queue, request and grant-size state. It shares no code with the
// scheduler beyond the configuration struct.
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qsched/mac_sched.hpp"

namespace oracle {

using qsched::MacConfig;
using qsched::ServiceClass;

struct Flow {
    ServiceClass cls = ServiceClass::BE;
    std::deque<std::uint64_t> queue;  // MAC sizes (payload + packet header)
    std::uint64_t pending = 0;
    std::int64_t pending_since = 0;
    std::uint64_t next_grant = 0;  // ertPS
    std::optional<std::uint64_t> anchor;

    std::uint64_t backlog() const {
        std::uint64_t b = 0;
        for (auto s : queue) b += s;
        return b;
    }
};

struct Outcome {
    std::map<std::uint32_t, std::pair<std::uint64_t, bool>> grants;  // cid -> (payload, placed)
    std::vector<std::uint32_t> polls;
    std::uint64_t contention = 0;
};

/// Largest prefix of `queue` whose total fits in `granted`, found by trying every prefix.
inline std::size_t drain_count(const std::deque<std::uint64_t>& queue, std::uint64_t granted) {
    std::size_t best = 0;
    for (std::size_t n = 0; n <= queue.size(); ++n) {
        std::uint64_t sum = 0;
        for (std::size_t i = 0; i < n; ++i) sum += queue[i];
        if (sum <= granted) best = n;
    }
    return best;
}

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

inline std::uint64_t sized(std::uint64_t rate_bps, const MacConfig& c, std::uint32_t period) {
    return ceil_div(rate_bps * static_cast<std::uint64_t>(c.frame_duration.ticks) * period, 8'000'000ULL);
}

class Allocator {
  public:
    explicit Allocator(MacConfig cfg) : c_(cfg) {}

    std::uint32_t add(ServiceClass cls) {
        Flow f;
        f.cls = cls;
        if (cls == ServiceClass::ertPS) {
            f.anchor = 0;
            f.next_grant = sized(c_.ertps_reserved_rate_bps, c_, c_.ertps_grant_period);
        }
        if (cls == ServiceClass::UGS) {
            const std::uint64_t size = sized(c_.ugs_reserved_rate_bps, c_, c_.ugs_grant_period) + c_.grant_overhead;
            const std::uint64_t cap = cap_bytes();
            std::uint64_t chosen = 0;
            for (std::uint64_t d = 0; d < c_.ugs_grant_period; ++d) {
                if (phase_load_[d] + size <= cap) {
                    chosen = d;
                    break;
                }
            }
            phase_load_[chosen] += size;
            f.anchor = chosen;
        }
        flows_.push_back(f);
        return static_cast<std::uint32_t>(flows_.size() - 1);
    }

    Flow& flow(std::uint32_t cid) { return flows_.at(cid); }

    /// Allocation and state update for frame k.
    Outcome step(std::uint64_t k) {
        const std::int64_t now = static_cast<std::int64_t>(k) * c_.frame_duration.ticks;
        const std::uint64_t cap = cap_bytes();
        Outcome out;

        bool contender = false;
        for (const auto& f : flows_) contender = contender || (f.cls == ServiceClass::BE && f.backlog() > 0 && f.pending == 0);
        std::uint64_t base = 0;
        if (contender && c_.request_overhead <= cap) base = out.contention = c_.request_overhead;

        // Demand items in priority order. kind: 0 grant, 1 poll, 2 nrtPS extra.
        struct Item {
            std::uint32_t cid;
            int kind;
            std::uint64_t hi;   // upper bound of payload
            bool all_or_nothing;
            bool zero_ok;       // placing a zero-payload grant is meaningful
            std::size_t depends = SIZE_MAX;
        };
        std::vector<Item> items;
        auto fifo = [&](ServiceClass cls) {
            std::vector<std::uint32_t> v;
            for (std::uint32_t i = 0; i < flows_.size(); ++i) {
                if (flows_[i].cls == cls && flows_[i].pending > 0) v.push_back(i);
            }
            std::stable_sort(v.begin(), v.end(), [&](auto a, auto b) {
                return flows_[a].pending_since < flows_[b].pending_since;
            });
            return v;
        };
        auto on_period = [&](const Flow& f, std::uint32_t period) {
            return f.anchor && k >= *f.anchor && (k - *f.anchor) % period == 0;
        };
        for (std::uint32_t i = 0; i < flows_.size(); ++i) {
            const auto& f = flows_[i];
            if (f.cls == ServiceClass::UGS && on_period(f, c_.ugs_grant_period)) {
                items.push_back({i, 0, sized(c_.ugs_reserved_rate_bps, c_, c_.ugs_grant_period), true, true});
            }
        }
        for (std::uint32_t i = 0; i < flows_.size(); ++i) {
            const auto& f = flows_[i];
            if (f.cls == ServiceClass::ertPS && on_period(f, c_.ertps_grant_period)) {
                items.push_back({i, 0, f.next_grant, false, true});
            }
        }
        std::map<std::uint32_t, std::size_t> min_item;
        for (ServiceClass cls : {ServiceClass::rtPS, ServiceClass::nrtPS}) {
            const auto interval = cls == ServiceClass::rtPS ? c_.rtps_poll_interval : c_.nrtps_poll_interval;
            for (std::uint32_t i = 0; i < flows_.size(); ++i) {
                if (flows_[i].cls == cls && now % interval.ticks == 0) items.push_back({i, 1, 1, true, false});
            }
            for (auto i : fifo(cls)) {
                std::uint64_t hi = flows_[i].pending;
                if (cls == ServiceClass::nrtPS) {
                    hi = std::min(hi, sized(c_.nrtps_reserved_rate_bps, c_, 1));
                    min_item[i] = items.size();
                }
                items.push_back({i, 0, hi, false, false});
            }
        }
        for (auto i : fifo(ServiceClass::BE)) items.push_back({i, 0, flows_[i].pending, false, false});
        for (auto i : fifo(ServiceClass::nrtPS)) items.push_back({i, 2, flows_[i].pending, false, false, min_item[i]});

        // Every assignment: value vector compared lexicographically.
        const std::size_t n = items.size();
        std::vector<std::uint64_t> pay(n), val(n), best_val, best_pay;
        std::vector<bool> placed(n), best_placed;
        std::vector<std::uint64_t> cur_val(n);
        bool have = false;
        auto rec = [&](auto&& self, std::size_t idx, std::uint64_t used) -> void {
            if (idx == n) {
                if (!have || cur_val > best_val) {
                    have = true;
                    best_val = cur_val;
                    best_pay = pay;
                    best_placed = placed;
                }
                return;
            }
            const Item& it = items[idx];
            // Unplaced.
            pay[idx] = 0;
            placed[idx] = false;
            cur_val[idx] = 0;
            self(self, idx + 1, used);
            if (it.kind == 1) {
                if (used + c_.request_overhead <= cap) {
                    placed[idx] = true;
                    cur_val[idx] = 1;
                    self(self, idx + 1, used + c_.request_overhead);
                }
                return;
            }
            std::uint64_t lo = it.zero_ok ? 0 : 1;
            std::uint64_t hi = it.hi;
            std::uint64_t over = c_.grant_overhead;
            if (it.kind == 2) {
                const std::size_t d = it.depends;
                hi = it.hi - pay[d];
                if (placed[d]) over = 0, lo = 1;  // extends the existing grant
            }
            if (it.all_or_nothing) lo = hi;
            for (std::uint64_t g = lo; g <= hi; ++g) {
                if (used + g + over > cap) break;
                pay[idx] = g;
                placed[idx] = true;
                cur_val[idx] = g + (it.zero_ok ? 1 : 0);
                self(self, idx + 1, used + g + over);
            }
            pay[idx] = 0;
            placed[idx] = false;
            cur_val[idx] = 0;
        };
        rec(rec, 0, base);

        // Collapse items into per-flow grants.
        for (std::size_t i = 0; i < n; ++i) {
            const auto& it = items[i];
            if (it.kind == 1) {
                if (best_placed[i]) out.polls.push_back(it.cid);
                continue;
            }
            auto& g = out.grants[it.cid];
            g.first += best_pay[i];
            g.second = g.second || best_placed[i];
        }

        // Apply: drain, reduce requests, then poll responses and piggybacks.
        for (auto& [cid, g] : out.grants) {
            if (!g.second) continue;
            auto& f = flows_[cid];
            const std::size_t cnt = drain_count(f.queue, g.first);
            for (std::size_t j = 0; j < cnt; ++j) f.queue.pop_front();
            if (f.cls != ServiceClass::UGS && f.cls != ServiceClass::ertPS) f.pending -= std::min(f.pending, g.first);
        }
        for (auto cid : out.polls) {
            flows_[cid].pending = flows_[cid].backlog();
            flows_[cid].pending_since = now;
        }
        for (auto& [cid, g] : out.grants) {
            auto& f = flows_[cid];
            if (f.cls == ServiceClass::ertPS && g.second) f.next_grant = std::min(f.backlog(), c_.ertps_max_burst);
        }
        return out;
    }

  private:
    std::uint64_t cap_bytes() const {
        return c_.channel_rate_bps * static_cast<std::uint64_t>(c_.frame_duration.ticks) / 8'000'000ULL;
    }

    MacConfig c_;
    std::vector<Flow> flows_;
    std::map<std::uint64_t, std::uint64_t> phase_load_;
};

}  // namespace oracle
