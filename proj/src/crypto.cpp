#include "gcs/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstring>

namespace gcs {

namespace {

// Domain-separation prefixes for the keyed hash. 0x00/0x01 are the PRF
// labels; the stream and tag prefixes keep encryption out of the label
// domain the protocols evolve keys over.
constexpr std::uint8_t kPrefixStream = 0x02;
constexpr std::uint8_t kPrefixTag = 0x03;
constexpr std::size_t kStreamBlock = 64;

void keyed_hash(const Bytes& key, const Bytes& msg, std::uint8_t* out, std::size_t out_len) {
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    crypto_generichash(out, out_len, msg.data(), msg.size(), key.data(), key.size());
}

}  // namespace

std::string VersionedKeyId::to_string() const {
    return std::to_string(node) + ":" + std::to_string(gen) + ":" + std::to_string(epoch);
}

void VersionedKeyId::encode(Bytes& out) const {
    put_u32(out, node);
    put_u32(out, gen);
    put_u32(out, epoch);
}

VersionedKeyId VersionedKeyId::decode(const Bytes& in, std::size_t& pos) {
    VersionedKeyId id;
    id.node = get_u32(in, pos);
    id.gen = get_u32(in, pos);
    id.epoch = get_u32(in, pos);
    return id;
}

SecretKey SecretKey::from_bytes(Bytes b) {
    SecretKey k;
    k.bytes_ = std::move(b);
    return k;
}

const Bytes& SecretKey::bytes() const {
    if (erased_) throw ErasedKeyError("read of erased key");
    return bytes_;
}

void SecretKey::erase() {
    std::fill(bytes_.begin(), bytes_.end(), std::uint8_t{0});
    erased_ = true;
}

bool SecretKey::same_bytes(const SecretKey& other) const {
    if (erased_ || other.erased_) return false;
    return bytes_ == other.bytes_;
}

std::string SecretKey::fingerprint() const { return gcs::fingerprint(bytes()); }

DeterministicRng::DeterministicRng(std::uint64_t seed) {
    Bytes seed_msg;
    const char tag[] = "gcs-drbg-v1";
    seed_msg.insert(seed_msg.end(), tag, tag + sizeof(tag) - 1);
    put_u64(seed_msg, seed);
    state_key_.resize(32);
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    crypto_generichash(state_key_.data(), state_key_.size(), seed_msg.data(), seed_msg.size(),
                       nullptr, 0);
}

void DeterministicRng::fill(Bytes& out) {
    std::size_t done = 0;
    std::array<std::uint8_t, kStreamBlock> block{};
    while (done < out.size()) {
        Bytes ctr;
        put_u64(ctr, counter_++);
        keyed_hash(state_key_, ctr, block.data(), block.size());
        const std::size_t n = std::min(block.size(), out.size() - done);
        std::memcpy(out.data() + done, block.data(), n);
        done += n;
    }
}

Bytes DeterministicRng::bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
}

SecretKey DeterministicRng::gen_key(std::size_t key_len) {
    return SecretKey::from_bytes(bytes(key_len));
}

std::uint64_t DeterministicRng::next_u64() {
    Bytes b = bytes(8);
    std::size_t pos = 0;
    return get_u64(b, pos);
}

std::uint64_t DeterministicRng::below(std::uint64_t bound) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % bound;
}

SecretKey prf_eval(const SecretKey& key, PrfLabel label, PrfMeter* meter) {
    const Bytes& kb = key.bytes();
    if (meter != nullptr) {
        if (label == PrfLabel::Enc) {
            ++meter->enc_evals;
        } else {
            ++meter->next_evals;
        }
    }
    Bytes msg{static_cast<std::uint8_t>(label)};
    Bytes out(kb.size());
    keyed_hash(kb, msg, out.data(), out.size());
    return SecretKey::from_bytes(std::move(out));
}

namespace {

Bytes keystream_xor(const Bytes& key, const Bytes& nonce, const Bytes& data) {
    Bytes out(data.size());
    std::array<std::uint8_t, kStreamBlock> block{};
    std::size_t done = 0;
    std::uint32_t block_no = 0;
    while (done < data.size()) {
        Bytes msg{kPrefixStream};
        msg.insert(msg.end(), nonce.begin(), nonce.end());
        put_u32(msg, block_no++);
        keyed_hash(key, msg, block.data(), block.size());
        const std::size_t n = std::min(block.size(), data.size() - done);
        for (std::size_t i = 0; i < n; ++i) out[done + i] = data[done + i] ^ block[i];
        done += n;
    }
    return out;
}

Bytes compute_tag(const Bytes& key, const Bytes& nonce, const Bytes& body) {
    Bytes msg{kPrefixTag};
    msg.insert(msg.end(), nonce.begin(), nonce.end());
    msg.insert(msg.end(), body.begin(), body.end());
    Bytes tag(kTagSize);
    keyed_hash(key, msg, tag.data(), tag.size());
    return tag;
}

}  // namespace

Ciphertext encrypt(const SecretKey& key, const Bytes& plaintext, const VersionedKeyId& key_id,
                   DeterministicRng& rng) {
    Ciphertext ct;
    ct.key_id = key_id;
    ct.nonce = rng.bytes(kNonceSize);
    ct.body = keystream_xor(key.bytes(), ct.nonce, plaintext);
    ct.tag = compute_tag(key.bytes(), ct.nonce, ct.body);
    return ct;
}

std::optional<Bytes> try_decrypt(const SecretKey& key, const Ciphertext& ct) {
    if (compute_tag(key.bytes(), ct.nonce, ct.body) != ct.tag) return std::nullopt;
    return keystream_xor(key.bytes(), ct.nonce, ct.body);
}

Bytes decrypt(const SecretKey& key, const Ciphertext& ct) {
    auto pt = try_decrypt(key, ct);
    if (!pt) throw DecryptFailure("integrity tag mismatch");
    return std::move(*pt);
}

Bytes Ciphertext::encode() const {
    Bytes out;
    Bytes id_bytes;
    key_id.encode(id_bytes);
    put_blob16(out, id_bytes);
    put_blob16(out, nonce);
    put_blob16(out, body);
    put_blob16(out, tag);
    return out;
}

Ciphertext Ciphertext::decode(const Bytes& in, std::size_t& pos) {
    Ciphertext ct;
    Bytes id_bytes = get_blob16(in, pos);
    if (id_bytes.size() != VersionedKeyId::kWireSize) throw WireError("bad key id width");
    std::size_t id_pos = 0;
    ct.key_id = VersionedKeyId::decode(id_bytes, id_pos);
    ct.nonce = get_blob16(in, pos);
    ct.body = get_blob16(in, pos);
    ct.tag = get_blob16(in, pos);
    return ct;
}

std::string Ciphertext::fingerprint() const { return gcs::fingerprint(encode()); }

Bytes encode_key_bundle(const std::vector<HeldKey>& keys) {
    Bytes out;
    put_u16(out, static_cast<std::uint16_t>(keys.size()));
    for (const auto& hk : keys) {
        hk.id.encode(out);
        put_blob16(out, hk.key.bytes());
    }
    return out;
}

std::vector<HeldKey> decode_key_bundle(const Bytes& in) {
    std::size_t pos = 0;
    const std::uint16_t count = get_u16(in, pos);
    std::vector<HeldKey> keys;
    keys.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        HeldKey hk;
        hk.id = VersionedKeyId::decode(in, pos);
        hk.key = SecretKey::from_bytes(get_blob16(in, pos));
        keys.push_back(std::move(hk));
    }
    if (pos != in.size()) throw WireError("trailing bytes in key bundle");
    return keys;
}

std::string fingerprint(const Bytes& data) {
    std::array<std::uint8_t, 16> digest{};
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    crypto_generichash(digest.data(), digest.size(), data.data(), data.size(), nullptr, 0);
    return to_hex(Bytes(digest.begin(), digest.begin() + 4));
}

std::string to_hex(const Bytes& data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
    put_u16(out, static_cast<std::uint16_t>(v >> 16));
    put_u16(out, static_cast<std::uint16_t>(v));
}

void put_u64(Bytes& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
    put_u32(out, static_cast<std::uint32_t>(v));
}

namespace {
void need(const Bytes& in, std::size_t pos, std::size_t n) {
    if (pos + n > in.size()) throw WireError("truncated message");
}
}  // namespace

std::uint16_t get_u16(const Bytes& in, std::size_t& pos) {
    need(in, pos, 2);
    const std::uint16_t v = static_cast<std::uint16_t>(in[pos] << 8 | in[pos + 1]);
    pos += 2;
    return v;
}

std::uint32_t get_u32(const Bytes& in, std::size_t& pos) {
    const std::uint32_t hi = get_u16(in, pos);
    const std::uint32_t lo = get_u16(in, pos);
    return hi << 16 | lo;
}

std::uint64_t get_u64(const Bytes& in, std::size_t& pos) {
    const std::uint64_t hi = get_u32(in, pos);
    const std::uint64_t lo = get_u32(in, pos);
    return hi << 32 | lo;
}

void put_blob16(Bytes& out, const Bytes& blob) {
    if (blob.size() > UINT16_MAX) throw WireError("blob too large");
    put_u16(out, static_cast<std::uint16_t>(blob.size()));
    out.insert(out.end(), blob.begin(), blob.end());
}

Bytes get_blob16(const Bytes& in, std::size_t& pos) {
    const std::uint16_t n = get_u16(in, pos);
    need(in, pos, n);
    Bytes blob(in.begin() + static_cast<std::ptrdiff_t>(pos),
               in.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return blob;
}

}  // namespace gcs
