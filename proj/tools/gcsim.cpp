// gcsim: scenario-driven simulator for the group key management schemes.
//
//   gcsim run <scenario-file> [--seed N] [--trace FILE] [--stats FILE]
//             [--insecure-dump-keys]
//   gcsim diff <trace-a> <trace-b>
//
// Exit codes: 0 success, 1 usage or scenario error, 2 invariant violation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "gcs/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"group key management scheme simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::uint64_t seed = 0;
    std::string trace_path;
    std::string stats_path;
    bool dump_keys = false;
    auto* run_cmd = app.add_subcommand("run", "execute a scenario file");
    run_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    run_cmd->add_option("--seed", seed, "run seed (default 0)");
    run_cmd->add_option("--trace", trace_path, "write the canonical trace here");
    run_cmd->add_option("--stats", stats_path, "write key=value statistics here");
    run_cmd->add_flag("--insecure-dump-keys", dump_keys,
                      "include raw key material in the trace");

    std::string diff_a;
    std::string diff_b;
    auto* diff_cmd = app.add_subcommand("diff", "structurally compare two traces");
    diff_cmd->add_option("a", diff_a, "first trace file")->required();
    diff_cmd->add_option("b", diff_b, "second trace file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const gcs::Scenario scenario = gcs::parse_scenario(read_file(scenario_path));
            const gcs::RunResult result = gcs::run(scenario, seed, dump_keys);
            if (trace_path.empty()) {
                std::cout << result.trace;
            } else {
                write_file(trace_path, result.trace);
            }
            if (!stats_path.empty()) write_file(stats_path, result.stats.to_text());
            return 0;
        }
        const std::string diff = gcs::compare_runs(read_file(diff_a), read_file(diff_b));
        if (diff.empty()) return 0;
        std::cout << diff;
        return 1;
    } catch (const gcs::InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
