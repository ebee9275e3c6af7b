#pragma once

// Record-then-corrupt attack machinery: an append-only tape of everything
// sent on the broadcast channel, byte-level capture of one participant's
// state, and a key-recovery closure that decrypts whatever the captured
// keys (and their forward PRF derivations) can reach on the tape. The
// closure only ever moves forward through the PRF; no step inverts one.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gcs/lkh.hpp"
#include "gcs/stateless.hpp"

namespace gcs {

struct TapeEntry {
    std::uint32_t time = 0;  // event time, or broadcast sequence number
    std::variant<RekeyMessage, BroadcastMessage> message;
    // Which key protects payload after this entry: public metadata an
    // eavesdropper gleans from watching the payload channel.
    GroupKeyRef group_key;
    Bytes wire;  // frozen encoding; entries are immutable once recorded
};

class TrafficTape {
  public:
    void record(std::uint32_t time, const RekeyMessage& msg, GroupKeyRef group_key);
    void record(const BroadcastMessage& msg);

    const std::vector<TapeEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

  private:
    std::vector<TapeEntry> entries_;
};

// Byte copy of a victim's non-erased keys at corruption time.
struct CapturedState {
    std::string source;
    std::uint32_t captured_at = 0;
    std::map<VersionedKeyId, SecretKey> keys;
};

// Copies all non-erased keys and marks the member adversary-controlled
// (a corrupted leaver keeps its keys instead of erasing them).
CapturedState corrupt(Member& m, std::uint32_t t);
CapturedState corrupt(const ReceiverSecrets& rs, std::uint32_t t);

// The group key only: a strict subset of what corrupt() yields.
SecretKey reveal(const Member& m, std::uint32_t t);

struct Derivation {
    enum class How { Captured, Decrypted, Evolved } how = How::Captured;
    VersionedKeyId base;       // key the step started from
    std::uint32_t steps = 0;   // forward evolutions applied (Evolved)
    bool enc_derived = false;  // decryption used f_base(0) rather than base
    std::size_t entry = 0, unit = 0, item = 0;  // tape coordinates (Decrypted)
};

struct RecoveredKey {
    VersionedKeyId id;
    SecretKey key;
    Derivation via;
    std::uint32_t chain_len = 0;  // derivation steps back to captured bytes
};

struct RecoveredGroupKey {
    SecretKey key;
    std::uint32_t chain_len = 0;
};

struct RecoveryReport {
    std::map<VersionedKeyId, RecoveredKey> known;
    std::map<std::uint32_t, RecoveredGroupKey> group_keys;  // per time / seq
    std::map<std::uint32_t, Bytes> plaintexts;              // per broadcast seq

    // One line per recovered group key: recovered t=<n> keyfp=<8-hex> via=<len>
    std::string to_trace() const;
};

// Fixpoint over the tape: every ciphertext whose key id is reachable from
// the captured keys (directly, via f(.,0), or via at most `tape size`
// forward f(.,1) steps) is decrypted and its transported keys join the
// known set. The integrity tag arbitrates key/ciphertext matches.
RecoveryReport recover_closure(const TrafficTape& tape, const CapturedState& captured);

// Same closure restricted to entries with time >= revoked_at: what a
// victim corrupted before its revocation still reaches afterwards.
RecoveryReport forward_recover(const TrafficTape& tape, const CapturedState& captured,
                               std::uint32_t revoked_at);

// Closure over a broadcast tape; session keys and payloads per sequence.
RecoveryReport stateless_recover(const TrafficTape& tape, const CapturedState& captured);

// Real-or-random challenge on the current group key; one query per game.
class TestOracle {
  public:
    struct Challenge {
        SecretKey key;
        bool real = false;
    };
    Challenge test(const Member& m, std::uint32_t t, DeterministicRng& rng);

  private:
    bool used_ = false;
};

}  // namespace gcs
