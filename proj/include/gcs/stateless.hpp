#pragma once

// Subset-cover revocation with the complete subtree method (Naor-Naor-
// Lotspiech style): receivers are leaves of a full binary tree, every node
// carries an independent long-lived key, and a broadcast encrypts a fresh
// session key under the roots of the subtrees covering the non-revoked
// receivers. Strong mode additionally evolves every long-lived key after a
// revocation broadcast; receivers that missed broadcasts catch up by
// applying the epoch delta, which keeps them stateless.

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "gcs/crypto.hpp"

namespace gcs {

enum class CsMode { Baseline, Strong };

using RevocationSet = std::set<std::uint32_t>;  // receiver numbers 1..N

struct BroadcastMessage {
    std::uint32_t seq = 0;
    std::uint32_t epoch = 0;     // key epoch the header was encrypted at
    bool revocation = false;     // center evolved its keys after sending
    std::vector<std::uint32_t> indices;  // heap indices of the cover roots
    std::vector<Ciphertext> header;      // session key under each cover key
    Ciphertext body;                     // payload under the session key

    std::size_t ciphertext_count() const { return header.size() + 1; }
    Bytes encode() const;
    static BroadcastMessage decode(const Bytes& wire);
};

// Center state: keys for all 2N-1 nodes, heap-indexed from 1.
struct SubsetSystem {
    std::uint32_t n = 0;
    CsMode mode = CsMode::Baseline;
    std::size_t key_len = 16;
    std::uint32_t epoch = 0;
    std::uint32_t seq = 0;
    std::vector<HeldKey> node_keys;  // [1 .. 2n-1]; slot 0 unused

    PrfMeter meter;
    std::uint64_t last_broadcast_next_evals = 0;
};

// One receiver's long-lived secrets: the log2(N)+1 keys on its root-to-leaf
// path plus the epoch those keys are at.
struct ReceiverSecrets {
    std::uint32_t user = 0;  // 1..N
    CsMode mode = CsMode::Baseline;
    std::uint32_t epoch = 0;
    std::vector<HeldKey> path_keys;  // root first, leaf last

    PrfMeter meter;
    std::uint64_t last_msg_prf = 0;
    std::uint32_t last_search_probes = 0;
};

// Draws 2N-1 independent node keys and hands each receiver its path.
// N must be a power of two, at least 2.
std::pair<SubsetSystem, std::vector<ReceiverSecrets>> cs_init(std::uint32_t n, CsMode mode,
                                                              std::size_t key_len,
                                                              DeterministicRng& rng);

// Roots of the maximal complete subtrees covering exactly the non-revoked
// leaves (the subtrees hanging off the Steiner tree of the revoked set),
// ascending heap order. Empty revocation set yields {root}; revoking every
// leaf yields an empty cover.
std::vector<std::uint32_t> steiner_cover(std::uint32_t n, const RevocationSet& revoked);

BroadcastMessage broadcast(SubsetSystem& sys, const RevocationSet& revoked, const Bytes& message,
                           DeterministicRng& rng);

// Returns the payload, or nullopt when this receiver is revoked. Throws
// DecryptFailure if the receiver's epoch is ahead of the message (state
// loss it cannot repair). Strong-mode receivers first catch up by the epoch
// delta and afterwards evolve their keys iff the message says the center
// did.
std::optional<Bytes> receiver_decrypt(ReceiverSecrets& rs, const BroadcastMessage& msg);

// PRF evaluations spent on the most recent message.
inline std::uint64_t receiver_prf_budget(const ReceiverSecrets& rs) { return rs.last_msg_prf; }

// Heap arithmetic helpers shared with the tests.
std::uint32_t heap_depth(std::uint32_t index);
// Binary search over the candidate depths of `leaf`'s ancestors; counts the
// candidates inspected in *probes. At most one cover root can match.
std::optional<std::uint32_t> find_covering_ancestor(std::uint32_t n, std::uint32_t leaf,
                                                    const std::vector<std::uint32_t>& indices,
                                                    std::uint32_t* probes = nullptr);

}  // namespace gcs
