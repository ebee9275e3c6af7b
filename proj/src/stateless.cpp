#include "gcs/stateless.hpp"

#include <algorithm>

#include "gcs/errors.hpp"

namespace gcs {

namespace {

bool power_of_two(std::uint32_t v) { return v >= 2 && (v & (v - 1)) == 0; }

void check_revoked_range(std::uint32_t n, const RevocationSet& revoked) {
    for (std::uint32_t r : revoked)
        if (r < 1 || r > n) throw BadN("revoked receiver out of range");
}

}  // namespace

std::uint32_t heap_depth(std::uint32_t index) {
    std::uint32_t d = 0;
    while (index > 1) {
        index >>= 1;
        ++d;
    }
    return d;
}

Bytes BroadcastMessage::encode() const {
    Bytes out;
    put_u32(out, seq);
    put_u32(out, epoch);
    out.push_back(revocation ? 1 : 0);
    put_u16(out, static_cast<std::uint16_t>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        put_u32(out, indices[i]);
        const Bytes enc = header[i].encode();
        out.insert(out.end(), enc.begin(), enc.end());
    }
    const Bytes enc = body.encode();
    out.insert(out.end(), enc.begin(), enc.end());
    return out;
}

BroadcastMessage BroadcastMessage::decode(const Bytes& wire) {
    BroadcastMessage msg;
    std::size_t pos = 0;
    msg.seq = get_u32(wire, pos);
    msg.epoch = get_u32(wire, pos);
    if (pos >= wire.size()) throw WireError("truncated message");
    msg.revocation = wire[pos++] != 0;
    const std::uint16_t m = get_u16(wire, pos);
    for (std::uint16_t i = 0; i < m; ++i) {
        msg.indices.push_back(get_u32(wire, pos));
        msg.header.push_back(Ciphertext::decode(wire, pos));
    }
    msg.body = Ciphertext::decode(wire, pos);
    if (pos != wire.size()) throw WireError("trailing bytes in broadcast message");
    return msg;
}

std::pair<SubsetSystem, std::vector<ReceiverSecrets>> cs_init(std::uint32_t n, CsMode mode,
                                                              std::size_t key_len,
                                                              DeterministicRng& rng) {
    if (!power_of_two(n)) throw BadN("receiver count must be a power of two >= 2");
    SubsetSystem sys;
    sys.n = n;
    sys.mode = mode;
    sys.key_len = key_len;
    sys.node_keys.resize(2 * n);
    for (std::uint32_t i = 1; i <= 2 * n - 1; ++i)
        sys.node_keys[i] = {{i, 0, 0}, rng.gen_key(key_len)};

    std::vector<ReceiverSecrets> receivers;
    receivers.reserve(n);
    const std::uint32_t depth = heap_depth(n);  // == log2(n)
    for (std::uint32_t u = 1; u <= n; ++u) {
        ReceiverSecrets rs;
        rs.user = u;
        rs.mode = mode;
        const std::uint32_t leaf = n + u - 1;
        for (std::uint32_t d = 0; d <= depth; ++d)
            rs.path_keys.push_back(sys.node_keys[leaf >> (depth - d)]);
        receivers.push_back(std::move(rs));
    }
    return {std::move(sys), std::move(receivers)};
}

std::vector<std::uint32_t> steiner_cover(std::uint32_t n, const RevocationSet& revoked) {
    if (!power_of_two(n)) throw BadN("receiver count must be a power of two >= 2");
    check_revoked_range(n, revoked);
    if (revoked.empty()) return {1};

    // Mark the Steiner tree of the revoked leaves; the cover is every
    // unmarked node whose parent is marked.
    std::vector<bool> marked(2 * n, false);
    for (std::uint32_t r : revoked) {
        std::uint32_t idx = n + r - 1;
        while (idx >= 1 && !marked[idx]) {
            marked[idx] = true;
            idx >>= 1;
        }
    }
    std::vector<std::uint32_t> cover;
    for (std::uint32_t idx = 2; idx <= 2 * n - 1; ++idx)
        if (!marked[idx] && marked[idx >> 1]) cover.push_back(idx);
    return cover;
}

BroadcastMessage broadcast(SubsetSystem& sys, const RevocationSet& revoked, const Bytes& message,
                           DeterministicRng& rng) {
    if (sys.n == 0) throw BadN("subset system not initialized");
    check_revoked_range(sys.n, revoked);
    const std::uint64_t next_before = sys.meter.next_evals;

    BroadcastMessage msg;
    msg.seq = ++sys.seq;
    msg.epoch = sys.epoch;
    msg.indices = steiner_cover(sys.n, revoked);

    SecretKey session = rng.gen_key(sys.key_len);
    const VersionedKeyId session_id{kSessionNode, msg.seq, 0};
    const Bytes session_bundle = encode_key_bundle({{session_id, session}});
    for (std::uint32_t idx : msg.indices) {
        const HeldKey& base = sys.node_keys[idx];
        if (sys.mode == CsMode::Strong) {
            SecretKey ek = prf_eval(base.key, PrfLabel::Enc, &sys.meter);
            msg.header.push_back(encrypt(ek, session_bundle, base.id, rng));
            ek.erase();
        } else {
            msg.header.push_back(encrypt(base.key, session_bundle, base.id, rng));
        }
    }
    msg.body = encrypt(session, message, session_id, rng);
    session.erase();

    msg.revocation = sys.mode == CsMode::Strong && !revoked.empty();
    if (msg.revocation) {
        for (std::uint32_t i = 1; i <= 2 * sys.n - 1; ++i) {
            HeldKey& hk = sys.node_keys[i];
            SecretKey next = prf_eval(hk.key, PrfLabel::Next, &sys.meter);
            hk.key.erase();
            hk.key = std::move(next);
            hk.id.epoch += 1;
        }
        sys.epoch += 1;
    }
    sys.last_broadcast_next_evals = sys.meter.next_evals - next_before;
    return msg;
}

std::optional<std::uint32_t> find_covering_ancestor(std::uint32_t n, std::uint32_t leaf,
                                                    const std::vector<std::uint32_t>& indices,
                                                    std::uint32_t* probes) {
    const std::set<std::uint32_t> index_set(indices.begin(), indices.end());
    // Strict ancestors of cover roots: exactly the nodes above the cover.
    std::set<std::uint32_t> above;
    for (std::uint32_t idx : indices)
        for (std::uint32_t a = idx >> 1; a >= 1; a >>= 1) above.insert(a);

    if (leaf < n || leaf > 2 * n - 1) throw BadN("leaf index out of range");
    const std::uint32_t depth = heap_depth(leaf);
    std::uint32_t inspected = 0;
    std::int64_t lo = 0, hi = depth;
    std::optional<std::uint32_t> found;
    while (lo <= hi) {
        const std::uint32_t mid = static_cast<std::uint32_t>((lo + hi) / 2);
        const std::uint32_t cand = leaf >> (depth - mid);
        ++inspected;
        if (index_set.count(cand)) {
            found = cand;
            break;
        }
        if (above.count(cand)) {
            lo = mid + 1;  // the covering subtree root lies deeper
        } else {
            hi = mid - 1;  // inside a cover subtree, or a revoked gap
        }
    }
    if (probes != nullptr) *probes = inspected;
    return found;
}

std::optional<Bytes> receiver_decrypt(ReceiverSecrets& rs, const BroadcastMessage& msg) {
    const std::uint64_t prf_before = rs.meter.total();
    if (rs.epoch > msg.epoch)
        throw DecryptFailure("receiver epoch " + std::to_string(rs.epoch) +
                             " ahead of message epoch " + std::to_string(msg.epoch));

    // Catch up on missed revocation broadcasts before anything else.
    for (std::uint32_t step = rs.epoch; step < msg.epoch; ++step) {
        for (HeldKey& hk : rs.path_keys) {
            SecretKey next = prf_eval(hk.key, PrfLabel::Next, &rs.meter);
            hk.key.erase();
            hk.key = std::move(next);
            hk.id.epoch += 1;
        }
    }
    rs.epoch = msg.epoch;

    const std::uint32_t n = static_cast<std::uint32_t>(1)
                            << (static_cast<std::uint32_t>(rs.path_keys.size()) - 1);
    const std::uint32_t leaf = n + rs.user - 1;
    const std::optional<std::uint32_t> anc =
        find_covering_ancestor(n, leaf, msg.indices, &rs.last_search_probes);

    std::optional<Bytes> plaintext;
    if (anc) {
        const std::size_t j = static_cast<std::size_t>(
            std::find(msg.indices.begin(), msg.indices.end(), *anc) - msg.indices.begin());
        const HeldKey& base = rs.path_keys[heap_depth(*anc)];
        if (!(base.id == msg.header[j].key_id))
            throw DecryptFailure("subset key version mismatch");
        Bytes bundle_bytes;
        if (rs.mode == CsMode::Strong) {
            SecretKey ek = prf_eval(base.key, PrfLabel::Enc, &rs.meter);
            bundle_bytes = decrypt(ek, msg.header[j]);
            ek.erase();
        } else {
            bundle_bytes = decrypt(base.key, msg.header[j]);
        }
        auto bundle = decode_key_bundle(bundle_bytes);
        if (bundle.size() != 1) throw WireError("broadcast header carries one session key");
        plaintext = decrypt(bundle.front().key, msg.body);
        bundle.front().key.erase();
    }

    // Revoked receivers observe the broadcast too and stay in lockstep.
    if (msg.revocation) {
        for (HeldKey& hk : rs.path_keys) {
            SecretKey next = prf_eval(hk.key, PrfLabel::Next, &rs.meter);
            hk.key.erase();
            hk.key = std::move(next);
            hk.id.epoch += 1;
        }
        rs.epoch = msg.epoch + 1;
    }
    rs.last_msg_prf = rs.meter.total() - prf_before;
    return plaintext;
}

}  // namespace gcs
