#include "gcs/lkh.hpp"

#include <algorithm>

#include "gcs/errors.hpp"

namespace gcs {

namespace {
constexpr std::size_t npos = static_cast<std::size_t>(-1);

std::vector<UserId> sorted_users(const std::set<UserId>& users) {
    return {users.begin(), users.end()};
}
}  // namespace

std::string to_string(RekeyPolicy p) {
    switch (p) {
        case RekeyPolicy::Baseline: return "baseline";
        case RekeyPolicy::Strong: return "strong";
        case RekeyPolicy::StrongOpt: return "strong-opt";
    }
    return "?";
}

std::size_t RekeyMessage::ciphertext_count() const {
    std::size_t n = 0;
    for (const auto& u : units) n += u.items.size();
    return n;
}

Bytes RekeyMessage::encode() const {
    Bytes out;
    put_u32(out, time);
    out.push_back(static_cast<std::uint8_t>(kind));
    put_u16(out, static_cast<std::uint16_t>(units.size()));
    for (const auto& unit : units) {
        put_u16(out, static_cast<std::uint16_t>(unit.recipients.size()));
        for (const auto& r : unit.recipients) put_blob16(out, Bytes(r.begin(), r.end()));
        put_u16(out, static_cast<std::uint16_t>(unit.items.size()));
        for (const auto& ct : unit.items) {
            const Bytes enc = ct.encode();
            out.insert(out.end(), enc.begin(), enc.end());
        }
    }
    return out;
}

RekeyMessage RekeyMessage::decode(const Bytes& wire) {
    RekeyMessage msg;
    std::size_t pos = 0;
    msg.time = get_u32(wire, pos);
    if (pos >= wire.size()) throw WireError("truncated message");
    const std::uint8_t kind_byte = wire[pos++];
    if (kind_byte > 3) throw WireError("unknown message kind");
    msg.kind = static_cast<RekeyKind>(kind_byte);
    const std::uint16_t unit_count = get_u16(wire, pos);
    for (std::uint16_t i = 0; i < unit_count; ++i) {
        RekeyUnit unit;
        const std::uint16_t rc = get_u16(wire, pos);
        for (std::uint16_t r = 0; r < rc; ++r) {
            Bytes name = get_blob16(wire, pos);
            unit.recipients.emplace_back(name.begin(), name.end());
        }
        const std::uint16_t ic = get_u16(wire, pos);
        for (std::uint16_t c = 0; c < ic; ++c) unit.items.push_back(Ciphertext::decode(wire, pos));
        msg.units.push_back(std::move(unit));
    }
    if (pos != wire.size()) throw WireError("trailing bytes in rekey message");
    return msg;
}

void KeyLedger::record_install(const VersionedKeyId& id, const SecretKey& key, std::uint32_t t) {
    if (index_.count(id)) throw InvariantViolation("key id installed twice: " + id.to_string());
    index_[id] = entries_.size();
    entries_.push_back({id, key.bytes(), t, std::nullopt});
    all_bytes_.insert(key.bytes());
}

void KeyLedger::mark_replaced(const VersionedKeyId& id, std::uint32_t t) {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvariantViolation("replacing unknown key " + id.to_string());
    LedgerEntry& e = entries_[it->second];
    if (!e.replaced_at) {
        e.replaced_at = t;
        replaced_bytes_.insert(e.key_bytes);
    }
}

void KeyLedger::record_group_key(std::uint32_t t, GroupKeyRef ref, const SecretKey& key) {
    group_keys_[t] = {ref, key.bytes()};
}

std::optional<Bytes> KeyLedger::bytes_of(const VersionedKeyId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].key_bytes;
}

Member::Member(UserId id, RekeyPolicy policy, std::int64_t now, HeldKey individual)
    : id_(std::move(id)), policy_(policy), time_(now) {
    path_.push_back(std::move(individual));
}

bool Member::accepted(std::uint32_t t) const {
    auto it = acc_.find(t);
    return it != acc_.end() && it->second;
}

NodeId Member::root_node() const {
    if (path_.empty()) throw NotSynchronized(id_ + " holds no keys");
    return path_.back().id.node;
}

void Member::preload(HeldKey key) { path_.push_back(std::move(key)); }

std::size_t Member::position_of(NodeId node) const {
    for (std::size_t i = 0; i < path_.size(); ++i)
        if (path_[i].id.node == node) return i;
    return npos;
}

std::vector<Member::DecryptedItem> Member::decrypt_units(const RekeyMessage& msg) {
    std::vector<const Ciphertext*> mine;
    for (const auto& unit : msg.units) {
        if (std::find(unit.recipients.begin(), unit.recipients.end(), id_) ==
            unit.recipients.end())
            continue;
        for (const auto& ct : unit.items) mine.push_back(&ct);
    }

    const bool strongish = policy_ != RekeyPolicy::Baseline;
    std::vector<DecryptedItem> out;
    std::vector<bool> done(mine.size(), false);
    std::map<NodeId, HeldKey> pool;  // keys learned earlier in this message

    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t i = 0; i < mine.size(); ++i) {
            if (done[i]) continue;
            const Ciphertext& ct = *mine[i];
            const SecretKey* base = nullptr;
            auto pit = pool.find(ct.key_id.node);
            if (pit != pool.end() && pit->second.id == ct.key_id) {
                base = &pit->second.key;
            } else {
                const std::size_t pos = position_of(ct.key_id.node);
                if (pos != npos && path_[pos].id == ct.key_id) base = &path_[pos].key;
            }
            if (base == nullptr) continue;

            bool use_enc = false;
            switch (msg.kind) {
                case RekeyKind::Setup: break;
                case RekeyKind::Join:
                    // The new group key rides under the old group key itself;
                    // everything else under the ephemeral derivation.
                    use_enc = strongish &&
                              !(path_.size() >= 2 && ct.key_id.node == path_.back().id.node);
                    break;
                case RekeyKind::Leave: use_enc = strongish; break;
                case RekeyKind::KeyUpdateNotice: use_enc = true; break;
            }

            Bytes pt;
            if (use_enc) {
                SecretKey ek = prf_eval(*base, PrfLabel::Enc, &meter_);
                pt = gcs::decrypt(ek, ct);  // tag mismatch here means desync
                ek.erase();
            } else {
                pt = gcs::decrypt(*base, ct);
            }
            DecryptedItem item;
            item.base = ct.key_id;
            item.bundle = decode_key_bundle(pt);
            for (const auto& hk : item.bundle) pool[hk.id.node] = hk;
            out.push_back(std::move(item));
            done[i] = true;
            progress = true;
        }
    }
    return out;
}

void Member::rekey(const RekeyMessage& msg) {
    if (static_cast<std::int64_t>(msg.time) != time_ + 1)
        throw StaleState(id_ + ": message for time " + std::to_string(msg.time));
    const std::uint64_t prf_before = meter_.total();

    bool addressed = false;
    for (const auto& unit : msg.units)
        if (std::find(unit.recipients.begin(), unit.recipients.end(), id_) !=
            unit.recipients.end()) {
            addressed = true;
            break;
        }
    if (!addressed && !(policy_ == RekeyPolicy::StrongOpt && msg.kind == RekeyKind::KeyUpdateNotice))
        throw NotSynchronized("no unit addressed to " + id_);

    std::vector<DecryptedItem> items = decrypt_units(msg);

    std::set<NodeId> fresh;
    switch (msg.kind) {
        case RekeyKind::Setup: {
            for (const auto& item : items)
                for (const auto& hk : item.bundle) {
                    path_.push_back(hk);
                    fresh.insert(hk.id.node);
                }
            break;
        }
        case RekeyKind::Join:
        case RekeyKind::KeyUpdateNotice: {
            for (const auto& item : items) {
                const std::size_t base_pos = position_of(item.base.node);
                if (base_pos == npos) throw NotSynchronized(id_ + ": decrypted via unheld key");
                const std::size_t insert_at = base_pos + 1;
                for (const auto& hk : item.bundle) {
                    const std::size_t pos = position_of(hk.id.node);
                    if (pos != npos) {
                        path_[pos].key.erase();
                        path_[pos] = hk;
                    } else {
                        // Bundles arrive top-down, so repeated insertion at the
                        // same slot lands them in leaf-to-root order.
                        path_.insert(path_.begin() + static_cast<std::ptrdiff_t>(insert_at), hk);
                    }
                    fresh.insert(hk.id.node);
                }
            }
            break;
        }
        case RekeyKind::Leave: {
            if (items.empty()) throw NotSynchronized(id_ + ": no decryptable rekeying item");
            std::set<NodeId> learned;
            for (const auto& item : items)
                for (const auto& hk : item.bundle) learned.insert(hk.id.node);
            // Exactly one item is decrypted with a key this member already
            // held; it anchors the replaced tail of the path. Everything the
            // member used to hold above that anchor is superseded (including
            // a spliced-out inner node, which simply never reappears).
            const DecryptedItem* entry = nullptr;
            for (const auto& item : items) {
                if (learned.count(item.base.node)) continue;
                if (entry != nullptr)
                    throw InvariantViolation(id_ + ": multiple rekey entry points");
                entry = &item;
            }
            if (entry == nullptr) throw NotSynchronized(id_ + ": no entry into rekey message");
            const std::size_t anchor = position_of(entry->base.node);
            if (anchor == npos) throw NotSynchronized(id_ + ": decrypted via unheld key");

            std::vector<HeldKey> chain;  // anchor's new parent upward to root
            if (entry->bundle.size() != 1)
                throw InvariantViolation("leave rekeying carries one key per item");
            chain.push_back(entry->bundle.front());
            bool grew = true;
            while (grew) {
                grew = false;
                for (const auto& item : items) {
                    if (&item == entry) continue;
                    if (item.base == chain.back().id) {
                        if (item.bundle.size() != 1)
                            throw InvariantViolation("leave rekeying carries one key per item");
                        chain.push_back(item.bundle.front());
                        grew = true;
                    }
                }
            }
            for (std::size_t i = anchor + 1; i < path_.size(); ++i) path_[i].key.erase();
            path_.resize(anchor + 1);
            for (const auto& hk : chain) {
                path_.push_back(hk);
                fresh.insert(hk.id.node);
            }
            break;
        }
    }

    if (msg.kind != RekeyKind::KeyUpdateNotice || !items.empty()) {
        if (path_.empty() || !fresh.count(path_.back().id.node))
            throw NotSynchronized(id_ + ": rekeying delivered no group key");
    }

    const bool strongish = policy_ != RekeyPolicy::Baseline;
    auto evolve_in_place = [this](HeldKey& hk) {
        SecretKey next = prf_eval(hk.key, PrfLabel::Next, &meter_);
        hk.key.erase();
        hk.key = std::move(next);
        hk.id.epoch += 1;
    };
    if (strongish && (msg.kind == RekeyKind::Join || msg.kind == RekeyKind::Leave)) {
        // Every key evolves except the just-installed group key.
        for (std::size_t i = 0; i + 1 < path_.size(); ++i) evolve_in_place(path_[i]);
    } else if (msg.kind == RekeyKind::KeyUpdateNotice) {
        // Optimized join: existing members evolve everything in place; the
        // joiner received post-evolution keys and only evolves its own.
        for (auto& hk : path_)
            if (!fresh.count(hk.id.node)) evolve_in_place(hk);
    }

    group_key_.erase();
    if (msg.kind == RekeyKind::KeyUpdateNotice) {
        group_key_ = prf_eval(path_.back().key, PrfLabel::Enc, &meter_);
    } else {
        group_key_ = path_.back().key;
    }

    acc_[msg.time] = true;
    time_ = msg.time;
    last_event_prf_ = meter_.total() - prf_before;
}

const SecretKey& Member::current_group_key() const {
    if (time_ < 0 || !accepted(static_cast<std::uint32_t>(time_)))
        throw NotSynchronized(id_ + " has not accepted the current rekeying");
    return group_key_;
}

void Member::erase_all() {
    for (auto& hk : path_) hk.key.erase();
    group_key_.erase();
}

std::tuple<Controller, std::vector<Member>, RekeyMessage> Controller::setup(
    const std::vector<UserId>& users, RekeyPolicy policy, int degree, std::size_t key_len,
    DeterministicRng& rng) {
    if (users.empty()) throw InvariantViolation("setup needs at least one member");
    Controller ctrl(policy, key_len);
    ctrl.tree_ = KeyTree::build(users, degree, key_len, rng);
    for (const auto& [id, node] : ctrl.tree_.nodes())
        ctrl.ledger_.record_install(node.key_id, node.key, 0);

    const NodeId root = ctrl.tree_.root();
    const HeldKey root_key{ctrl.tree_.at(root).key_id, ctrl.tree_.at(root).key};
    ctrl.ledger_.record_group_key(0, {root_key.id, false}, root_key.key);

    RekeyMessage msg;
    msg.time = 0;
    msg.kind = RekeyKind::Setup;

    std::vector<Member> members;
    members.reserve(users.size());
    for (const auto& u : users) {
        const NodeId leaf = ctrl.tree_.leaf_of(u);
        Member m(u, policy, -1, HeldKey{ctrl.tree_.at(leaf).key_id, ctrl.tree_.at(leaf).key});
        const auto path = ctrl.tree_.path_to_root(leaf);
        for (std::size_t i = 1; i + 1 < path.size(); ++i)
            m.preload({ctrl.tree_.at(path[i]).key_id, ctrl.tree_.at(path[i]).key});
        members.push_back(std::move(m));

        RekeyUnit unit;
        unit.recipients = {u};
        unit.items.push_back(encrypt(ctrl.tree_.at(leaf).key, encode_key_bundle({root_key}),
                                     ctrl.tree_.at(leaf).key_id, rng));
        msg.units.push_back(std::move(unit));
    }
    for (auto& m : members) m.rekey(msg);
    return {std::move(ctrl), std::move(members), std::move(msg)};
}

HeldKey Controller::establish_individual_key(const UserId& u, DeterministicRng& rng) {
    if (tree_.has_user(u)) throw AlreadyMember(u);
    auto old = pending_.find(u);
    if (old != pending_.end()) {
        ledger_.mark_replaced(old->second.id, time_);
        pending_.erase(old);
    }
    const NodeId leaf = tree_.reserve_node_id();
    HeldKey hk{{leaf, 0, 0}, rng.gen_key(key_len_)};
    ledger_.record_install(hk.id, hk.key, time_);
    pending_[u] = hk;
    return hk;
}

void Controller::evolve_all_except(std::optional<NodeId> skip, std::uint32_t t) {
    std::vector<NodeId> ids;
    ids.reserve(tree_.node_count());
    for (const auto& [id, _] : tree_.nodes()) ids.push_back(id);
    for (const NodeId id : ids) {
        if (skip && *skip == id) continue;
        const VersionedKeyId old_id = tree_.at(id).key_id;
        const VersionedKeyId new_id = tree_.evolve(id, &meter_);
        ledger_.mark_replaced(old_id, t);
        ledger_.record_install(new_id, tree_.at(id).key, t);
    }
}

VersionedKeyId Controller::install_fresh_logged(NodeId node, SecretKey key, std::uint32_t t) {
    const VersionedKeyId id = tree_.install_fresh(node, std::move(key));
    ledger_.record_install(id, tree_.at(node).key, t);
    return id;
}

RekeyMessage Controller::join(const UserId& u, DeterministicRng& rng) {
    if (tree_.has_user(u)) throw AlreadyMember(u);
    auto pit = pending_.find(u);
    if (pit == pending_.end()) throw NoIndividualKey(u);
    const std::uint32_t t = time_ + 1;
    const std::uint64_t prf_before = meter_.total();
    const std::set<UserId> old_members = tree_.members();
    HeldKey indiv = pit->second;

    const NodeId jp = tree_.find_joining_point();
    const bool split = tree_.at(jp).user.has_value();

    RekeyMessage msg;
    msg.time = t;
    msg.new_member = u;
    bool enc_derived_group = false;

    if (policy_ == RekeyPolicy::StrongOpt && !split) {
        // Optimized join: no fresh keys; the whole tree evolves in place and
        // only the joiner gets a ciphertext (its new path, post-evolution,
        // under the ephemeral derivation of its individual key).
        msg.kind = RekeyKind::KeyUpdateNotice;
        SecretKey joiner_ek = prf_eval(indiv.key, PrfLabel::Enc, &meter_);
        const AttachResult att = tree_.attach(jp, u, {indiv.id, indiv.key}, indiv.id.node);
        evolve_all_except(std::nullopt, t);

        std::vector<HeldKey> bundle;  // root down to the joining point
        const auto up = tree_.path_to_root(att.parent);
        for (auto it = up.rbegin(); it != up.rend(); ++it)
            bundle.push_back({tree_.at(*it).key_id, tree_.at(*it).key});

        RekeyUnit notice;
        notice.recipients = sorted_users(old_members);
        RekeyUnit joiner;
        joiner.recipients = {u};
        joiner.items.push_back(encrypt(joiner_ek, encode_key_bundle(bundle), indiv.id, rng));
        joiner_ek.erase();
        msg.units.push_back(std::move(notice));
        msg.units.push_back(std::move(joiner));
        enc_derived_group = true;
    } else {
        // Group-oriented join; with a full tree the chosen leaf is split and
        // its owner's individual key stands in as the encryption base for
        // the new inner node's key.
        const bool strong = policy_ != RekeyPolicy::Baseline;
        msg.kind = RekeyKind::Join;
        const AttachResult att = tree_.attach(jp, u, {indiv.id, indiv.key}, indiv.id.node);

        const auto up = tree_.path_to_root(att.parent);
        const std::vector<NodeId> path(up.rbegin(), up.rend());  // root first

        std::vector<HeldKey> bases;
        for (const NodeId n : path) bases.push_back({tree_.at(n).key_id, tree_.at(n).key});
        if (att.split)
            bases.back() = {tree_.at(att.moved_leaf).key_id, tree_.at(att.moved_leaf).key};

        std::vector<HeldKey> freshened;
        for (std::size_t i = 0; i < path.size(); ++i) {
            if (!(att.split && i + 1 == path.size())) ledger_.mark_replaced(bases[i].id, t);
            const VersionedKeyId nid = install_fresh_logged(path[i], rng.gen_key(key_len_), t);
            freshened.push_back({nid, tree_.at(path[i]).key});
        }

        RekeyUnit existing;
        existing.recipients = sorted_users(old_members);
        for (std::size_t i = 0; i < path.size(); ++i) {
            const HeldKey& base = bases[i];
            if (strong && i > 0) {
                SecretKey ek = prf_eval(base.key, PrfLabel::Enc, &meter_);
                existing.items.push_back(
                    encrypt(ek, encode_key_bundle({freshened[i]}), base.id, rng));
                ek.erase();
            } else {
                existing.items.push_back(
                    encrypt(base.key, encode_key_bundle({freshened[i]}), base.id, rng));
            }
        }

        RekeyUnit joiner;
        joiner.recipients = {u};
        if (strong) {
            SecretKey ek = prf_eval(indiv.key, PrfLabel::Enc, &meter_);
            joiner.items.push_back(encrypt(ek, encode_key_bundle(freshened), indiv.id, rng));
            ek.erase();
        } else {
            joiner.items.push_back(encrypt(indiv.key, encode_key_bundle(freshened), indiv.id, rng));
        }

        if (!existing.recipients.empty()) msg.units.push_back(std::move(existing));
        msg.units.push_back(std::move(joiner));

        if (strong) evolve_all_except(tree_.root(), t);
    }

    pit->second.key.erase();
    pending_.erase(pit);

    time_ = t;
    group_enc_derived_ = enc_derived_group;
    const SecretKey gk = current_group_key();
    if (group_enc_derived_) ++meter_.enc_evals;
    ledger_.record_group_key(t, group_key_ref(), gk);
    last_event_prf_ = meter_.total() - prf_before;
    return msg;
}

RekeyMessage Controller::leave(const UserId& u, DeterministicRng& rng) {
    if (!tree_.has_user(u)) throw NotMember(u);
    const std::uint32_t t = time_ + 1;
    const std::uint64_t prf_before = meter_.total();
    const bool strong = policy_ != RekeyPolicy::Baseline;

    const DetachResult det = tree_.detach(u);
    ledger_.mark_replaced(det.removed_leaf_key, t);
    if (det.spliced_key) ledger_.mark_replaced(*det.spliced_key, t);

    const auto up = tree_.path_to_root(det.leaving_point);
    const std::vector<NodeId> path(up.rbegin(), up.rend());  // root first

    std::vector<HeldKey> freshened;
    for (const NodeId n : path) {
        ledger_.mark_replaced(tree_.at(n).key_id, t);
        const VersionedKeyId nid = install_fresh_logged(n, rng.gen_key(key_len_), t);
        freshened.push_back({nid, tree_.at(n).key});
    }

    RekeyMessage msg;
    msg.time = t;
    msg.kind = RekeyKind::Leave;
    RekeyUnit unit;
    unit.recipients = sorted_users(tree_.members());
    for (std::size_t i = 0; i < path.size(); ++i) {
        for (const NodeId child : tree_.at(path[i]).children) {
            HeldKey base;
            if (i + 1 < path.size() && child == path[i + 1]) {
                base = freshened[i + 1];  // the path child carries its new key
            } else {
                base = {tree_.at(child).key_id, tree_.at(child).key};
            }
            if (strong) {
                SecretKey ek = prf_eval(base.key, PrfLabel::Enc, &meter_);
                unit.items.push_back(encrypt(ek, encode_key_bundle({freshened[i]}), base.id, rng));
                ek.erase();
            } else {
                unit.items.push_back(
                    encrypt(base.key, encode_key_bundle({freshened[i]}), base.id, rng));
            }
        }
    }
    if (!unit.recipients.empty()) msg.units.push_back(std::move(unit));

    if (strong) evolve_all_except(tree_.root(), t);

    pending_.erase(u);
    time_ = t;
    group_enc_derived_ = false;
    ledger_.record_group_key(t, group_key_ref(), current_group_key());
    last_event_prf_ = meter_.total() - prf_before;
    return msg;
}

SecretKey Controller::current_group_key() const {
    const TreeNode& root = tree_.at(tree_.root());
    if (group_enc_derived_) return prf_eval(root.key, PrfLabel::Enc, nullptr);
    return root.key;
}

GroupKeyRef Controller::group_key_ref() const {
    return {tree_.at(tree_.root()).key_id, group_enc_derived_};
}

void verify_member_sync(const Controller& ctrl, const std::vector<const Member*>& members) {
    const std::uint32_t t = ctrl.time();
    const SecretKey gk = ctrl.current_group_key();
    for (const Member* m : members) {
        if (!m->accepted(t)) continue;
        if (!m->current_group_key().same_bytes(gk))
            throw InvariantViolation("group key mismatch for " + m->id());
        const auto& nodes = ctrl.tree().nodes();
        for (const HeldKey& hk : m->path()) {
            auto it = nodes.find(hk.id.node);
            if (it == nodes.end() || !(it->second.key_id == hk.id) ||
                !it->second.key.same_bytes(hk.key))
                throw InvariantViolation(m->id() + " holds stale key " + hk.id.to_string());
        }
        // The held sequence must be exactly this member's leaf-to-root path.
        const auto expected = ctrl.tree().path_to_root(ctrl.tree().leaf_of(m->id()));
        if (expected.size() != m->path().size())
            throw InvariantViolation(m->id() + " path length mismatch");
        for (std::size_t i = 0; i < expected.size(); ++i)
            if (expected[i] != m->path()[i].id.node)
                throw InvariantViolation(m->id() + " path order mismatch");
    }
}

void verify_erasure_hygiene(const Controller& ctrl, const std::vector<const Member*>& members) {
    for (const Member* m : members) {
        if (m->corrupted()) continue;
        for (const HeldKey& hk : m->path()) {
            if (hk.key.erased()) continue;
            if (ctrl.ledger().is_replaced_key(hk.key.bytes()))
                throw InvariantViolation(m->id() + " retains replaced key material");
        }
    }
}

}  // namespace gcs
