// qsched: run one scheduling class, or compare all five under paired seeds.
//
//   qsched run     [--config F] [--class C] [--seed S] [--out DIR] [--grants] [--positions] [--set k=v]...
//   qsched compare [--config F] [--seed S] [--seeds N] [--out DIR] [--trace] [--positions] [--set k=v]...
//
// Exit status: 0 success, 1 bad configuration or arguments, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qsched/qsched.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kRuntime = 2;

std::filesystem::path output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("QSCHED_OUT"); env && *env) return env;
    return "qsched_out";
}

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool positions = false;
};

qsched::ScenarioConfig build_config(const Common& c, const std::string& cls) {
    std::vector<std::string> overrides = c.sets;
    if (!cls.empty()) overrides.push_back("qos_class=" + cls);
    if (c.seed) overrides.push_back("seed=" + std::to_string(*c.seed));
    return qsched::load_config(c.config, overrides);
}

void print_paths(const std::vector<std::filesystem::path>& paths) {
    for (const auto& p : paths) std::cout << "  wrote " << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qsched - uplink QoS scheduling simulator for mobile video nodes"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "key=value or JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", common.sets, "override one config key (key=value), repeatable");
        sub->add_option("--seed", common.seed, "master seed (first seed for compare)");
        sub->add_option("--out", common.out, "output directory (default $QSCHED_OUT or ./qsched_out)");
        sub->add_flag("--positions", common.positions, "write the node position trace");
    };

    auto* run = app.add_subcommand("run", "simulate one scheduling class");
    add_common(run);
    std::string cls;
    bool grants = false;
    bool run_trace = true;
    run->add_option("--class", cls, "UGS, ertPS, rtPS, nrtPS or BE");
    run->add_flag("--trace,!--no-trace", run_trace, "write the packet trace (default on)");
    run->add_flag("--grants", grants, "write the per-frame grant audit");

    auto* cmp = app.add_subcommand("compare", "all five classes under paired seeds");
    add_common(cmp);
    std::uint64_t nseeds = 5;
    bool cmp_trace = false;
    bool serial = false;
    cmp->add_option("--seeds", nseeds, "number of consecutive seeds starting at --seed")->check(CLI::PositiveNumber);
    cmp->add_flag("--trace", cmp_trace, "also write one packet trace per (class, seed)");
    cmp->add_flag("--serial", serial, "run the simulations one after another");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kBadInput;
    }

    try {
        if (*run) {
            const auto cfg = build_config(common, cls);
            const auto result = qsched::simulate(cfg, qsched::RunOptions{grants});
            qsched::EmitOptions eo;
            eo.trace = run_trace;
            eo.grants = grants;
            eo.positions = common.positions;
            const auto paths = qsched::emit_outputs(result, output_dir(common.out), eo);
            std::cout << qsched::run_text_summary(result);
            print_paths(paths);
        } else {
            const auto cfg = build_config(common, "");
            std::vector<std::uint64_t> seeds;
            for (std::uint64_t i = 0; i < nseeds; ++i) seeds.push_back(cfg.seed + i);
            qsched::CompareOptions co;
            co.parallel = !serial;
            co.keep_records = cmp_trace;
            const auto result = qsched::compare_classes(cfg, seeds, co);
            qsched::EmitOptions eo;
            eo.trace = cmp_trace;
            eo.positions = common.positions;
            const auto paths = qsched::emit_outputs(result, output_dir(common.out), eo);
            std::cout << qsched::compare_text_summary(result);
            print_paths(paths);
        }
    } catch (const qsched::ParseError& e) {
        std::cerr << "qsched: " << e.what() << "\n";
        return kBadInput;
    } catch (const qsched::ValidationError& e) {
        std::cerr << "qsched: invalid configuration: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "qsched: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}
