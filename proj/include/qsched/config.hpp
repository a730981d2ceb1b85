/**
 * @file config.hpp
 * @brief Scenario configuration: defaults, key-value / JSON loading,
 *        command-line overrides and validation.
 *
 * Key-value grammar, one setting per line:
 *
 *     # comment
 *     key = value
 *
 * Blank lines and lines starting with '#' are ignored. Keys are the names
 * listed by ScenarioConfig::keys(). A file whose first non-blank character
 * is '{' (or whose name ends in ".json") is read as a flat JSON object with
 * the same keys. Later sources win: defaults, then the file, then overrides.
 */

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsched/mac_sched.hpp"
#include "qsched/mobility.hpp"
#include "qsched/traffic.hpp"

namespace qsched {

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::invalid_argument {
  public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

  private:
    std::string field_;
};

struct ScenarioConfig {
    std::uint32_t nodes = 10;
    double arena_width_m = 1000.0;
    double arena_height_m = 1000.0;
    double sim_time_s = 100.0;
    double speed_kmh = 50.0;
    double refresh_interval_s = 2.0;
    double radio_range_m = 750.0;
    ServiceClass qos_class = ServiceClass::ertPS;
    std::uint64_t seed = 1;

    double fps = 25.0;
    std::uint32_t frame_bytes_mean = 2290;
    double frame_bytes_cv = 0.15;
    double app_start_s = 2.0;
    std::uint32_t mtu = 1500;
    bool phase_spread = true;
    double load_step_s = 0.0;  // 0 disables the step
    double load_step_factor = 1.0;

    std::uint64_t channel_rate_bps = 10'000'000;
    std::int64_t frame_duration_us = 5000;
    std::uint32_t packet_overhead_B = 10;
    std::uint32_t request_overhead_B = 6;
    std::uint32_t grant_overhead_B = 6;
    std::int64_t propagation_us = 5;
    std::int64_t aes_delay_us = 0;
    std::uint32_t queue_capacity = 500;
    std::uint64_t ugs_reserved_rate_bps = 620'000;
    std::uint32_t ugs_grant_period = 8;
    std::uint64_t ertps_reserved_rate_bps = 458'000;
    std::uint32_t ertps_grant_period = 1;
    std::uint64_t ertps_max_burst_B = 12'000;
    std::int64_t rtps_poll_interval_us = 20'000;
    std::int64_t nrtps_poll_interval_us = 1'000'000;
    std::uint64_t nrtps_reserved_rate_bps = 458'000;
    bool nrtps_contention = false;
    std::uint32_t be_cw_initial = 16;
    std::uint32_t be_cw_max = 1024;
    double series_bin_ms = 100.0;

    SimTime sim_end() const { return SimTime::from_seconds(sim_time_s); }

    MacConfig mac() const {
        MacConfig m;
        m.frame_duration = SimTime::us(frame_duration_us);
        m.channel_rate_bps = channel_rate_bps;
        m.packet_overhead = packet_overhead_B;
        m.request_overhead = request_overhead_B;
        m.grant_overhead = grant_overhead_B;
        m.propagation = SimTime::us(propagation_us);
        m.processing = SimTime::us(aes_delay_us);
        m.queue_capacity = queue_capacity;
        m.ugs_reserved_rate_bps = ugs_reserved_rate_bps;
        m.ugs_grant_period = ugs_grant_period;
        m.ertps_reserved_rate_bps = ertps_reserved_rate_bps;
        m.ertps_grant_period = ertps_grant_period;
        m.ertps_max_burst = ertps_max_burst_B;
        m.rtps_poll_interval = SimTime::us(rtps_poll_interval_us);
        m.nrtps_poll_interval = SimTime::us(nrtps_poll_interval_us);
        m.nrtps_reserved_rate_bps = nrtps_reserved_rate_bps;
        m.nrtps_contention = nrtps_contention;
        m.be_cw_initial = be_cw_initial;
        m.be_cw_max = be_cw_max;
        return m;
    }

    MobilityConfig mobility() const {
        MobilityConfig m;
        m.arena = Arena{arena_width_m, arena_height_m};
        m.speed_mps = speed_kmh / 3.6;
        m.radio_range_m = radio_range_m;
        m.refresh_interval = SimTime::from_seconds(refresh_interval_s);
        return m;
    }

    VideoSourceConfig traffic() const {
        VideoSourceConfig v;
        v.fps = fps;
        v.frame_bytes_mean = frame_bytes_mean;
        v.frame_bytes_cv = frame_bytes_cv;
        v.start_time = SimTime::from_seconds(app_start_s);
        v.mtu = mtu;
        if (load_step_s > 0.0) v.load_step_at = SimTime::from_seconds(load_step_s);
        v.load_step_factor = load_step_factor;
        return v;
    }

    /// Sets one field from text. Throws ParseError for unknown keys or values
    /// that do not parse as the field's type.
    void set(std::string_view key, std::string_view value);

    /// Every key in canonical order.
    static const std::vector<std::string>& keys();

    /// Canonical text of one field.
    std::string get(std::string_view key) const;

    /// Throws ValidationError naming the first field out of range.
    void validate() const;

    /// All fields as "key=value" joined by single spaces, canonical order.
    std::string to_kv_line() const {
        std::string s;
        for (const auto& k : keys()) {
            if (!s.empty()) s += ' ';
            s += k + "=" + get(k);
        }
        return s;
    }

    bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

template <class T>
T parse_int(std::string_view key, std::string_view v) {
    T out{};
    const std::string t = trim(v);
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc{} || p != t.data() + t.size() || t.empty())
        throw ParseError("bad integer for " + std::string(key) + ": '" + t + "'");
    return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
    const std::string t = trim(v);
    try {
        std::size_t used = 0;
        const double d = std::stod(t, &used);
        if (used != t.size() || !std::isfinite(d)) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ParseError("bad number for " + std::string(key) + ": '" + t + "'");
    }
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    std::string t = trim(v);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ParseError("bad boolean for " + std::string(key) + ": '" + t + "'");
}

/// Shortest text that reads back to the same double.
inline std::string fmt_real(double d) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, d);
        if (std::strtod(buf, nullptr) == d) break;
    }
    return buf;
}

struct Field {
    std::string name;
    std::function<void(ScenarioConfig&, std::string_view)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

template <class T>
Field int_field(std::string name, T ScenarioConfig::*m) {
    return Field{name,
                 [m, name](ScenarioConfig& c, std::string_view v) { c.*m = parse_int<T>(name, v); },
                 [m](const ScenarioConfig& c) { return std::to_string(c.*m); }};
}

inline Field real_field(std::string name, double ScenarioConfig::*m) {
    return Field{name,
                 [m, name](ScenarioConfig& c, std::string_view v) { c.*m = parse_real(name, v); },
                 [m](const ScenarioConfig& c) { return fmt_real(c.*m); }};
}

inline Field bool_field(std::string name, bool ScenarioConfig::*m) {
    return Field{name,
                 [m, name](ScenarioConfig& c, std::string_view v) { c.*m = parse_bool(name, v); },
                 [m](const ScenarioConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        using C = ScenarioConfig;
        std::vector<Field> v;
        v.push_back(int_field("nodes", &C::nodes));
        v.push_back(real_field("arena_width_m", &C::arena_width_m));
        v.push_back(real_field("arena_height_m", &C::arena_height_m));
        v.push_back(real_field("sim_time_s", &C::sim_time_s));
        v.push_back(real_field("speed_kmh", &C::speed_kmh));
        v.push_back(real_field("refresh_interval_s", &C::refresh_interval_s));
        v.push_back(real_field("radio_range_m", &C::radio_range_m));
        v.push_back(Field{"qos_class",
                          [](C& c, std::string_view s) {
                              auto cls = parse_service_class(trim(s));
                              if (!cls) throw ParseError("unknown qos_class '" + trim(s) + "'");
                              c.qos_class = *cls;
                          },
                          [](const C& c) { return std::string(to_string(c.qos_class)); }});
        v.push_back(int_field("seed", &C::seed));
        v.push_back(real_field("fps", &C::fps));
        v.push_back(int_field("frame_bytes_mean", &C::frame_bytes_mean));
        v.push_back(real_field("frame_bytes_cv", &C::frame_bytes_cv));
        v.push_back(real_field("app_start_s", &C::app_start_s));
        v.push_back(int_field("mtu", &C::mtu));
        v.push_back(bool_field("phase_spread", &C::phase_spread));
        v.push_back(real_field("load_step_s", &C::load_step_s));
        v.push_back(real_field("load_step_factor", &C::load_step_factor));
        v.push_back(int_field("channel_rate_bps", &C::channel_rate_bps));
        v.push_back(int_field("frame_duration_us", &C::frame_duration_us));
        v.push_back(int_field("packet_overhead_B", &C::packet_overhead_B));
        v.push_back(int_field("request_overhead_B", &C::request_overhead_B));
        v.push_back(int_field("grant_overhead_B", &C::grant_overhead_B));
        v.push_back(int_field("propagation_us", &C::propagation_us));
        v.push_back(int_field("aes_delay_us", &C::aes_delay_us));
        v.push_back(int_field("queue_capacity", &C::queue_capacity));
        v.push_back(int_field("ugs_reserved_rate_bps", &C::ugs_reserved_rate_bps));
        v.push_back(int_field("ugs_grant_period", &C::ugs_grant_period));
        v.push_back(int_field("ertps_reserved_rate_bps", &C::ertps_reserved_rate_bps));
        v.push_back(int_field("ertps_grant_period", &C::ertps_grant_period));
        v.push_back(int_field("ertps_max_burst_B", &C::ertps_max_burst_B));
        v.push_back(int_field("rtps_poll_interval_us", &C::rtps_poll_interval_us));
        v.push_back(int_field("nrtps_poll_interval_us", &C::nrtps_poll_interval_us));
        v.push_back(int_field("nrtps_reserved_rate_bps", &C::nrtps_reserved_rate_bps));
        v.push_back(bool_field("nrtps_contention", &C::nrtps_contention));
        v.push_back(int_field("be_cw_initial", &C::be_cw_initial));
        v.push_back(int_field("be_cw_max", &C::be_cw_max));
        v.push_back(real_field("series_bin_ms", &C::series_bin_ms));
        return v;
    }();
    return f;
}

/// Short spellings accepted on input; output always uses the canonical key.
inline std::string_view canonical_key(std::string_view key) {
    static constexpr std::pair<std::string_view, std::string_view> aliases[] = {
        {"sim_time", "sim_time_s"},           {"speed", "speed_kmh"},
        {"refresh_interval", "refresh_interval_s"}, {"radio_range", "radio_range_m"},
        {"master_seed", "seed"},              {"class", "qos_class"},
        {"frame_duration", "frame_duration_us"}, {"channel_rate", "channel_rate_bps"},
    };
    for (auto [a, c] : aliases) {
        if (a == key) return c;
    }
    return key;
}

inline const Field& field(std::string_view key) {
    key = canonical_key(key);
    for (const auto& f : fields()) {
        if (f.name == key) return f;
    }
    throw ParseError("unknown config key '" + std::string(key) + "'");
}

}  // namespace detail

inline void ScenarioConfig::set(std::string_view key, std::string_view value) {
    detail::field(detail::trim(key)).set(*this, value);
}

inline std::string ScenarioConfig::get(std::string_view key) const { return detail::field(key).get(*this); }

inline const std::vector<std::string>& ScenarioConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> v;
        for (const auto& f : detail::fields()) v.push_back(f.name);
        return v;
    }();
    return k;
}

inline void ScenarioConfig::validate() const {
    auto need = [](bool ok, const char* field, const std::string& what) {
        if (!ok) throw ValidationError(field, what);
    };
    need(nodes >= 1, "nodes", "must be >= 1 (got " + std::to_string(nodes) + ")");
    need(arena_width_m >= 0.0, "arena_width_m", "must be >= 0");
    need(arena_height_m >= 0.0, "arena_height_m", "must be >= 0");
    need(sim_time_s >= 0.0, "sim_time_s", "must be >= 0");
    need(speed_kmh >= 0.0, "speed_kmh", "must be >= 0");
    need(refresh_interval_s > 0.0, "refresh_interval_s", "must be > 0");
    need(radio_range_m >= 0.0, "radio_range_m", "must be >= 0");
    need(fps > 0.0, "fps", "must be > 0");
    need(frame_bytes_mean > 0, "frame_bytes_mean", "must be > 0");
    need(frame_bytes_cv >= 0.0 && frame_bytes_cv < 1.0, "frame_bytes_cv", "must be in [0, 1)");
    need(app_start_s >= 0.0, "app_start_s", "must be >= 0");
    need(mtu > 0, "mtu", "must be > 0");
    need(load_step_s >= 0.0, "load_step_s", "must be >= 0 (0 disables)");
    need(load_step_factor > 0.0, "load_step_factor", "must be > 0");
    need(channel_rate_bps > 0, "channel_rate_bps", "must be > 0");
    need(frame_duration_us > 0, "frame_duration_us", "must be > 0");
    need(channel_rate_bps * static_cast<std::uint64_t>(frame_duration_us) / 8'000'000ULL > 0, "frame_duration_us",
         "uplink capacity per frame rounds to zero bytes");
    need(propagation_us >= 0, "propagation_us", "must be >= 0");
    need(aes_delay_us >= 0, "aes_delay_us", "must be >= 0");
    need(queue_capacity >= 1, "queue_capacity", "must be >= 1");
    need(ugs_grant_period >= 1, "ugs_grant_period", "must be >= 1 frame");
    need(ertps_grant_period >= 1, "ertps_grant_period", "must be >= 1 frame");
    need(rtps_poll_interval_us > 0, "rtps_poll_interval_us", "must be > 0");
    need(nrtps_poll_interval_us > 0, "nrtps_poll_interval_us", "must be > 0");
    need(nrtps_poll_interval_us <= 1'000'000, "nrtps_poll_interval_us", "must be <= 1000000 (poll at least every second)");
    need(be_cw_initial >= 1, "be_cw_initial", "must be >= 1");
    need(be_cw_max >= be_cw_initial, "be_cw_max", "must be >= be_cw_initial");
    need(series_bin_ms > 0.0, "series_bin_ms", "must be > 0");
}

/// Applies "key = value" lines onto cfg.
inline void apply_kv_text(ScenarioConfig& cfg, std::string_view text, const std::string& origin = "config") {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
        }
        try {
            cfg.set(t.substr(0, eq), t.substr(eq + 1));
        } catch (const ParseError& e) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_json_text(ScenarioConfig& cfg, std::string_view text, const std::string& origin = "config") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(origin + ": top level must be an object");
    for (const auto& [k, v] : j.items()) {
        std::string text_value;
        if (v.is_string()) text_value = v.get<std::string>();
        else if (v.is_boolean()) text_value = v.get<bool>() ? "true" : "false";
        else if (v.is_number_integer()) text_value = v.dump();
        else if (v.is_number()) text_value = detail::fmt_real(v.get<double>());
        else throw ParseError(origin + ": value of '" + k + "' must be a scalar");
        cfg.set(k, text_value);
    }
}

/// Parses "key=value" (override syntax).
inline std::pair<std::string, std::string> split_override(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw ParseError("override must be key=value, got '" + std::string(kv) + "'");
    return {detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1))};
}

/**
 * Defaults, then the file at `path` (skipped when empty), then `overrides`
 * ("key=value" each). The result is validated.
 */
inline ScenarioConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    ScenarioConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open config file '" + path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        const auto first = text.find_first_not_of(" \t\r\n");
        const bool json = (path.size() >= 5 && path.substr(path.size() - 5) == ".json") ||
                          (first != std::string::npos && text[first] == '{');
        if (json) apply_json_text(cfg, text, path);
        else apply_kv_text(cfg, text, path);
    }
    for (const auto& o : overrides) {
        auto [k, v] = split_override(o);
        cfg.set(k, v);
    }
    cfg.validate();
    return cfg;
}

/// Rebuilds a config from an output header line ("# qsched key=value ...").
inline ScenarioConfig config_from_header(std::string_view line) {
    std::string t = detail::trim(line);
    const std::string tag = "# qsched";
    if (t.rfind(tag, 0) != 0) throw ParseError("not a qsched output header");
    ScenarioConfig cfg;
    std::istringstream in(t.substr(tag.size()));
    std::string tok;
    while (in >> tok) {
        auto [k, v] = split_override(tok);
        if (k == "mode" || k == "seeds") continue;
        cfg.set(k, v);
    }
    cfg.validate();
    return cfg;
}

}  // namespace qsched
