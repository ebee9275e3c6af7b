#pragma once

// Primitives shared by every scheme: a keyed PRF with the two derivation
// labels used for key evolution, a nonce-based stream cipher with a short
// integrity tag (so wrong-key detection is deterministic), key generation
// from a single seeded generator, and secure erasure.

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcs/errors.hpp"

namespace gcs {

using Bytes = std::vector<std::uint8_t>;

using NodeId = std::uint32_t;
using UserId = std::string;

// Node id 0 is reserved for per-message session keys (stateless schemes).
inline constexpr NodeId kSessionNode = 0;

// Identifies one version of the key installed at a tree node: `gen` bumps
// when a fresh key replaces the old one, `epoch` counts forward PRF
// evolutions applied since that install.
struct VersionedKeyId {
    NodeId node = 0;
    std::uint32_t gen = 0;
    std::uint32_t epoch = 0;

    auto operator<=>(const VersionedKeyId&) const = default;

    VersionedKeyId evolved(std::uint32_t steps = 1) const { return {node, gen, epoch + steps}; }
    std::string to_string() const;

    static constexpr std::size_t kWireSize = 12;
    void encode(Bytes& out) const;
    static VersionedKeyId decode(const Bytes& in, std::size_t& pos);
};

// The two PRF inputs: ENC derives the ephemeral encryption key f_k(0),
// NEXT derives the successor key f_k(1).
enum class PrfLabel : std::uint8_t { Enc = 0, Next = 1 };

// Counts PRF evaluations performed by one protocol participant.
struct PrfMeter {
    std::uint64_t enc_evals = 0;
    std::uint64_t next_evals = 0;

    std::uint64_t total() const { return enc_evals + next_evals; }
    void reset() { enc_evals = next_evals = 0; }
};

// Fixed-width key material with erasure semantics. Once erased, the bytes
// are zeroed and any further use throws ErasedKeyError.
class SecretKey {
  public:
    SecretKey() = default;
    static SecretKey from_bytes(Bytes b);

    const Bytes& bytes() const;
    std::size_t size() const { return bytes_.size(); }
    bool empty() const { return bytes_.empty(); }
    bool erased() const { return erased_; }
    void erase();

    bool same_bytes(const SecretKey& other) const;
    std::string fingerprint() const;

  private:
    Bytes bytes_;
    bool erased_ = false;
};

inline void secure_erase(SecretKey& k) { k.erase(); }

// Deterministic byte source; the whole simulation draws from one instance
// so a (scenario, seed) pair reproduces bit-identical runs.
class DeterministicRng {
  public:
    explicit DeterministicRng(std::uint64_t seed);

    void fill(Bytes& out);
    Bytes bytes(std::size_t n);
    SecretKey gen_key(std::size_t key_len);
    std::uint64_t next_u64();
    // Uniform in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound);

  private:
    Bytes state_key_;
    std::uint64_t counter_ = 0;
};

inline SecretKey gen_key(DeterministicRng& rng, std::size_t key_len) { return rng.gen_key(key_len); }

// f_k(label): keyed hash over the 1-octet label domain, output as wide as
// the input key. Deterministic; forward-only (nothing maps the output back).
SecretKey prf_eval(const SecretKey& key, PrfLabel label, PrfMeter* meter = nullptr);

struct Ciphertext {
    VersionedKeyId key_id;  // which key version the sender encrypted under
    Bytes nonce;
    Bytes body;
    Bytes tag;

    Bytes encode() const;
    static Ciphertext decode(const Bytes& in, std::size_t& pos);
    std::string fingerprint() const;
};

inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 8;

Ciphertext encrypt(const SecretKey& key, const Bytes& plaintext, const VersionedKeyId& key_id,
                   DeterministicRng& rng);
Bytes decrypt(const SecretKey& key, const Ciphertext& ct);
// Non-throwing variant used where a wrong key is an expected outcome.
std::optional<Bytes> try_decrypt(const SecretKey& key, const Ciphertext& ct);

// A key carried together with its version id.
struct HeldKey {
    VersionedKeyId id;
    SecretKey key;
};

// Plaintext format for ciphertexts that transport keys.
Bytes encode_key_bundle(const std::vector<HeldKey>& keys);
std::vector<HeldKey> decode_key_bundle(const Bytes& in);

// First 8 hex digits of an unkeyed hash; safe to show in traces.
std::string fingerprint(const Bytes& data);

std::string to_hex(const Bytes& data);

// Big-endian wire helpers.
void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
std::uint16_t get_u16(const Bytes& in, std::size_t& pos);
std::uint32_t get_u32(const Bytes& in, std::size_t& pos);
std::uint64_t get_u64(const Bytes& in, std::size_t& pos);
void put_blob16(Bytes& out, const Bytes& blob);
Bytes get_blob16(const Bytes& in, std::size_t& pos);

}  // namespace gcs
