#include "gcs/adversary.hpp"

#include <array>
#include <set>
#include <sstream>

#include "gcs/errors.hpp"

namespace gcs {

void TrafficTape::record(std::uint32_t time, const RekeyMessage& msg, GroupKeyRef group_key) {
    entries_.push_back({time, msg, group_key, msg.encode()});
}

void TrafficTape::record(const BroadcastMessage& msg) {
    entries_.push_back({msg.seq, msg, {{kSessionNode, msg.seq, 0}, false}, msg.encode()});
}

CapturedState corrupt(Member& m, std::uint32_t t) {
    CapturedState cap;
    cap.source = m.id();
    cap.captured_at = t;
    for (const HeldKey& hk : m.path()) {
        if (hk.key.erased()) continue;
        cap.keys[hk.id] = hk.key;
    }
    m.mark_corrupted();
    return cap;
}

CapturedState corrupt(const ReceiverSecrets& rs, std::uint32_t t) {
    CapturedState cap;
    cap.source = "r" + std::to_string(rs.user);
    cap.captured_at = t;
    for (const HeldKey& hk : rs.path_keys) {
        if (hk.key.erased()) continue;
        cap.keys[hk.id] = hk.key;
    }
    return cap;
}

SecretKey reveal(const Member& m, std::uint32_t t) {
    if (m.time() != static_cast<std::int64_t>(t) || !m.accepted(t))
        throw NotSynchronized(m.id() + " holds no group key for time " + std::to_string(t));
    return m.current_group_key();
}

namespace {

class Closure {
  public:
    Closure(const TrafficTape& tape, const CapturedState& captured, std::uint32_t min_time)
        : tape_(tape), min_time_(min_time), depth_bound_(static_cast<std::uint32_t>(tape.size())) {
        for (const auto& [id, key] : captured.keys) {
            RecoveredKey rk{id, key, {}, 0};
            rk.via.how = Derivation::How::Captured;
            rk.via.base = id;
            report_.known.emplace(id, std::move(rk));
        }
    }

    RecoveryReport run() {
        bool progress = true;
        while (progress) {
            progress = false;
            for (std::size_t ei = 0; ei < tape_.entries().size(); ++ei) {
                const TapeEntry& entry = tape_.entries()[ei];
                if (entry.time < min_time_) continue;
                if (const auto* rm = std::get_if<RekeyMessage>(&entry.message)) {
                    for (std::size_t ui = 0; ui < rm->units.size(); ++ui)
                        for (std::size_t ii = 0; ii < rm->units[ui].items.size(); ++ii)
                            progress |= try_key_ciphertext(rm->units[ui].items[ii], ei, ui, ii);
                } else {
                    const auto& bm = std::get<BroadcastMessage>(entry.message);
                    for (std::size_t ii = 0; ii < bm.header.size(); ++ii)
                        progress |= try_key_ciphertext(bm.header[ii], ei, 0, ii);
                    progress |= try_payload(bm, ei);
                }
            }
        }
        collect_group_keys();
        return std::move(report_);
    }

  private:
    // Closest known version of (node, gen) at or below `target`'s epoch,
    // within the forward-derivation budget.
    const RecoveredKey* nearest_base(const VersionedKeyId& target) {
        auto it = report_.known.upper_bound(target);
        if (it == report_.known.begin()) return nullptr;
        --it;
        const VersionedKeyId& id = it->first;
        if (id.node != target.node || id.gen != target.gen) return nullptr;
        if (target.epoch - id.epoch > depth_bound_) return nullptr;
        return &it->second;
    }

    // Walks a known key forward to exactly `target`, registering every
    // intermediate evolution. Returns nullptr when unreachable.
    const RecoveredKey* derive_to(const VersionedKeyId& target) {
        const RecoveredKey* base = nearest_base(target);
        if (base == nullptr) return nullptr;
        while (!(base->id == target)) {
            RecoveredKey next;
            next.id = base->id.evolved();
            next.key = prf_eval(base->key, PrfLabel::Next);
            next.via.how = Derivation::How::Evolved;
            next.via.base = base->id;
            next.via.steps = 1;
            next.chain_len = base->chain_len + 1;
            base = &report_.known.emplace(next.id, std::move(next)).first->second;
        }
        return base;
    }

    struct Opened {
        Bytes plaintext;
        bool enc_derived = false;
    };

    std::optional<Opened> open(const Ciphertext& ct) {
        const RecoveredKey* base = derive_to(ct.key_id);
        if (base == nullptr) return std::nullopt;
        if (auto pt = try_decrypt(base->key, ct)) return Opened{std::move(*pt), false};
        SecretKey ek = prf_eval(base->key, PrfLabel::Enc);
        if (auto pt = try_decrypt(ek, ct)) return Opened{std::move(*pt), true};
        return std::nullopt;
    }

    bool try_key_ciphertext(const Ciphertext& ct, std::size_t ei, std::size_t ui, std::size_t ii) {
        const std::array<std::size_t, 3> coord{ei, ui, ii};
        if (done_.count(coord)) return false;
        auto opened = open(ct);
        if (!opened) return false;
        done_.insert(coord);
        const RecoveredKey& base = report_.known.at(ct.key_id);
        for (const HeldKey& hk : decode_key_bundle(opened->plaintext)) {
            if (report_.known.count(hk.id)) continue;
            RecoveredKey rk{hk.id, hk.key, {}, base.chain_len + 1};
            rk.via.how = Derivation::How::Decrypted;
            rk.via.base = ct.key_id;
            rk.via.enc_derived = opened->enc_derived;
            rk.via.entry = ei;
            rk.via.unit = ui;
            rk.via.item = ii;
            report_.known.emplace(hk.id, std::move(rk));
        }
        return true;
    }

    bool try_payload(const BroadcastMessage& bm, std::size_t ei) {
        if (report_.plaintexts.count(bm.seq)) return false;
        auto it = report_.known.find(bm.body.key_id);
        if (it == report_.known.end()) return false;
        auto pt = try_decrypt(it->second.key, bm.body);
        if (!pt) return false;
        (void)ei;
        report_.plaintexts[bm.seq] = std::move(*pt);
        return true;
    }

    void collect_group_keys() {
        for (const TapeEntry& entry : tape_.entries()) {
            if (entry.time < min_time_) continue;
            const GroupKeyRef& ref = entry.group_key;
            const RecoveredKey* base = nullptr;
            if (ref.id.node == kSessionNode) {
                auto it = report_.known.find(ref.id);
                if (it != report_.known.end()) base = &it->second;
            } else {
                base = derive_to(ref.id);
            }
            if (base == nullptr) continue;
            RecoveredGroupKey gk;
            gk.chain_len = base->chain_len;
            if (ref.enc_derived) {
                gk.key = prf_eval(base->key, PrfLabel::Enc);
                gk.chain_len += 1;
            } else {
                gk.key = base->key;
            }
            report_.group_keys.emplace(entry.time, std::move(gk));
        }
    }

    const TrafficTape& tape_;
    std::uint32_t min_time_;
    std::uint32_t depth_bound_;
    RecoveryReport report_;
    std::set<std::array<std::size_t, 3>> done_;
};

}  // namespace

RecoveryReport recover_closure(const TrafficTape& tape, const CapturedState& captured) {
    return Closure(tape, captured, 0).run();
}

RecoveryReport forward_recover(const TrafficTape& tape, const CapturedState& captured,
                               std::uint32_t revoked_at) {
    return Closure(tape, captured, revoked_at).run();
}

RecoveryReport stateless_recover(const TrafficTape& tape, const CapturedState& captured) {
    return Closure(tape, captured, 0).run();
}

std::string RecoveryReport::to_trace() const {
    std::ostringstream out;
    for (const auto& [t, gk] : group_keys)
        out << "recovered t=" << t << " keyfp=" << gk.key.fingerprint() << " via=" << gk.chain_len
            << "\n";
    return out.str();
}

TestOracle::Challenge TestOracle::test(const Member& m, std::uint32_t t, DeterministicRng& rng) {
    if (used_) throw AlreadyTested("challenge oracle already queried");
    used_ = true;
    if (m.time() != static_cast<std::int64_t>(t) || !m.accepted(t))
        throw NotSynchronized(m.id() + " has no group key at time " + std::to_string(t));
    Challenge ch;
    ch.real = (rng.next_u64() & 1) != 0;
    if (ch.real) {
        ch.key = m.current_group_key();
    } else {
        ch.key = rng.gen_key(m.current_group_key().size());
    }
    return ch;
}

}  // namespace gcs
