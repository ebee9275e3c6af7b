#pragma once

// Scenario-driven runner: parses line-oriented event scripts, executes them
// against the chosen scheme with every protocol invariant checked after
// each event, and emits a canonical trace plus flat key=value statistics.
// Two runs of the same (scenario, seed) produce byte-identical traces.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcs/adversary.hpp"

namespace gcs {

enum class Scheme { Lkh, LkhStrong, LkhStrongOpt, Cs, CsStrong };

std::string to_string(Scheme s);
std::optional<Scheme> scheme_from_token(const std::string& token);
bool scheme_is_stateful(Scheme s);

struct Event {
    enum class Op {
        Setup,
        Join,
        Leave,
        Corrupt,
        Reveal,
        Broadcast,
        Recover,
        ForwardRecover,
        CorruptReceiver,
    };
    Op op = Op::Setup;
    std::vector<UserId> users;   // Setup
    UserId user;                 // Join/Leave/Corrupt/Reveal/ForwardRecover
    std::uint32_t at_time = 0;   // ForwardRecover: closure starts here
    RevocationSet revoked;       // Broadcast
    Bytes message;               // Broadcast payload
    std::uint32_t receiver = 0;  // CorruptReceiver
    int line = 0;
};

struct Scenario {
    Scheme scheme = Scheme::Lkh;
    int degree = 3;
    std::uint32_t n = 8;
    int kappa = 128;
    std::vector<Event> events;

    bool stateful() const { return scheme_is_stateful(scheme); }
    std::size_t key_len() const { return static_cast<std::size_t>(kappa) / 8; }
};

Scenario parse_scenario(const std::string& text);

struct EventStats {
    std::uint32_t time = 0;
    std::string op;
    std::size_t ciphertexts = 0;
    std::size_t bytes = 0;
    std::size_t tree_height = 0;
    std::uint64_t prf_controller = 0;
    std::uint64_t prf_member_max = 0;
};

struct RunStats {
    std::string scheme;
    std::uint64_t seed = 0;
    std::vector<EventStats> events;
    std::size_t tape_ciphertexts = 0;
    std::size_t final_recovery_group_keys = 0;
    std::size_t final_recovery_plaintexts = 0;

    std::string to_text() const;
};

struct RunResult {
    std::string trace;
    RunStats stats;
};

// Throws InvariantViolation when a protocol check fails (CLI exit code 2);
// scenario-level misuse propagates the module error.
RunResult run(const Scenario& scenario, std::uint64_t seed, bool dump_keys = false);

// Line-oriented structural diff of two traces; empty when identical.
std::string compare_runs(const std::string& trace_a, const std::string& trace_b);

}  // namespace gcs
