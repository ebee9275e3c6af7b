#pragma once

// Stateful group communication over a key tree: a group controller and
// member state machines driven by setup/join/leave events at virtual times
// t = 0,1,2,... Three rekeying policies share one message shape:
//
//  - Baseline: classic group-oriented rekeying (fresh keys along the
//    affected path, each encrypted under a current key).
//  - Strong: new keys are encrypted under the ephemeral derivation f_k(0)
//    of the base key, and every surviving key evolves to f_k(1) after the
//    event, so state captured later cannot decrypt recorded traffic.
//  - StrongOpt: joins skip fresh keys entirely; existing members get a bare
//    "key update" notice and evolve everything in place, only the joiner
//    receives a ciphertext. Leaves behave exactly like Strong.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "gcs/key_tree.hpp"

namespace gcs {

enum class RekeyPolicy { Baseline, Strong, StrongOpt };

std::string to_string(RekeyPolicy p);

enum class RekeyKind : std::uint8_t { Setup = 0, Join = 1, Leave = 2, KeyUpdateNotice = 3 };

struct RekeyUnit {
    std::vector<UserId> recipients;  // explicit on the wire, sorted
    std::vector<Ciphertext> items;
};

struct RekeyMessage {
    std::uint32_t time = 0;
    RekeyKind kind = RekeyKind::Setup;
    std::vector<RekeyUnit> units;
    std::optional<UserId> new_member;  // bookkeeping only, not on the wire

    std::size_t ciphertext_count() const;
    Bytes encode() const;
    static RekeyMessage decode(const Bytes& wire);
};

// Which key encrypts actual group traffic after an event. For optimized
// joins the payload key is f_root(0), not the root key itself.
struct GroupKeyRef {
    VersionedKeyId id;
    bool enc_derived = false;
};

// Debug record of every key version the controller ever produced, with its
// lifecycle. Harness-only: lets the suite assert that replaced key material
// is gone from member state and that recovered keys are genuine.
struct LedgerEntry {
    VersionedKeyId id;
    Bytes key_bytes;
    std::uint32_t installed_at = 0;
    std::optional<std::uint32_t> replaced_at;
};

class KeyLedger {
  public:
    void record_install(const VersionedKeyId& id, const SecretKey& key, std::uint32_t t);
    void mark_replaced(const VersionedKeyId& id, std::uint32_t t);
    void record_group_key(std::uint32_t t, GroupKeyRef ref, const SecretKey& key);

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    std::optional<Bytes> bytes_of(const VersionedKeyId& id) const;
    bool was_ever_key(const Bytes& bytes) const { return all_bytes_.count(bytes) != 0; }
    bool is_replaced_key(const Bytes& bytes) const { return replaced_bytes_.count(bytes) != 0; }

    struct GroupKeyRecord {
        GroupKeyRef ref;
        Bytes bytes;
    };
    const std::map<std::uint32_t, GroupKeyRecord>& group_keys() const { return group_keys_; }

  private:
    std::vector<LedgerEntry> entries_;
    std::map<VersionedKeyId, std::size_t> index_;
    std::set<Bytes> replaced_bytes_;
    std::set<Bytes> all_bytes_;
    std::map<std::uint32_t, GroupKeyRecord> group_keys_;
};

class Member {
  public:
    Member() = default;
    // `now` is the controller time when the member came into existence; the
    // first message it accepts carries time now+1 (or 0 at setup).
    Member(UserId id, RekeyPolicy policy, std::int64_t now, HeldKey individual);

    const UserId& id() const { return id_; }
    RekeyPolicy policy() const { return policy_; }
    std::int64_t time() const { return time_; }
    bool accepted(std::uint32_t t) const;

    // Held keys in leaf-to-root order; the last entry is the group key node.
    const std::vector<HeldKey>& path() const { return path_; }
    NodeId root_node() const;

    // Installs a key delivered over the out-of-band private channel (the
    // mid-path keys at setup). Call in leaf-to-root order.
    void preload(HeldKey key);

    // Processes one rekeying message: decrypts the units addressed to this
    // member, installs new keys, evolves surviving ones per policy, erases
    // outdated material, and sets acc[t].
    void rekey(const RekeyMessage& msg);

    const SecretKey& current_group_key() const;

    void erase_all();
    bool corrupted() const { return corrupted_; }
    void mark_corrupted() { corrupted_ = true; }

    std::uint64_t last_event_prf() const { return last_event_prf_; }
    const PrfMeter& meter() const { return meter_; }

  private:
    struct DecryptedItem {
        VersionedKeyId base;           // key id the ciphertext named
        std::vector<HeldKey> bundle;   // transported keys, top-down order
    };
    std::vector<DecryptedItem> decrypt_units(const RekeyMessage& msg);
    std::size_t position_of(NodeId node) const;  // npos when absent

    UserId id_;
    RekeyPolicy policy_ = RekeyPolicy::Baseline;
    std::int64_t time_ = -1;
    std::map<std::uint32_t, bool> acc_;
    std::vector<HeldKey> path_;  // leaf first, root last
    SecretKey group_key_;
    bool corrupted_ = false;
    PrfMeter meter_;
    std::uint64_t last_event_prf_ = 0;
};

class Controller {
  public:
    // Builds the tree, opens the run ledger and emits the setup message:
    // one unit per member carrying the group key under that member's
    // individual key (the part of initial delivery an eavesdropper sees;
    // the rest of the keyset travels on the private channel). The returned
    // members have already accepted the message.
    static std::tuple<Controller, std::vector<Member>, RekeyMessage> setup(
        const std::vector<UserId>& members, RekeyPolicy policy, int degree, std::size_t key_len,
        DeterministicRng& rng);

    // Models the out-of-band agreement of an individual key before a join;
    // the returned copy seeds the joining member's state.
    HeldKey establish_individual_key(const UserId& u, DeterministicRng& rng);

    RekeyMessage join(const UserId& u, DeterministicRng& rng);
    RekeyMessage leave(const UserId& u, DeterministicRng& rng);

    std::uint32_t time() const { return time_; }
    RekeyPolicy policy() const { return policy_; }
    std::size_t key_len() const { return key_len_; }
    std::set<UserId> members() const { return tree_.members(); }
    bool is_member(const UserId& u) const { return tree_.has_user(u); }
    const KeyTree& tree() const { return tree_; }

    SecretKey current_group_key() const;
    GroupKeyRef group_key_ref() const;

    const KeyLedger& ledger() const { return ledger_; }
    std::uint64_t last_event_prf() const { return last_event_prf_; }

  private:
    Controller(RekeyPolicy policy, std::size_t key_len) : policy_(policy), key_len_(key_len) {}

    // Evolves every tree key except `skip`, recording the ledger turnover.
    void evolve_all_except(std::optional<NodeId> skip, std::uint32_t t);
    VersionedKeyId install_fresh_logged(NodeId node, SecretKey key, std::uint32_t t);

    RekeyPolicy policy_ = RekeyPolicy::Baseline;
    std::size_t key_len_ = 16;
    std::uint32_t time_ = 0;
    KeyTree tree_;
    std::map<UserId, HeldKey> pending_;  // out-of-band individual keys
    bool group_enc_derived_ = false;
    KeyLedger ledger_;
    PrfMeter meter_;
    std::uint64_t last_event_prf_ = 0;
};

// Harness checks, run after every event in simulations and tests.

// Every accepted member agrees with the controller on the group key and
// holds only key material present in the controller tree.
void verify_member_sync(const Controller& ctrl, const std::vector<const Member*>& members);

// No honest member state contains bytes of any key version already replaced.
void verify_erasure_hygiene(const Controller& ctrl, const std::vector<const Member*>& members);

}  // namespace gcs
