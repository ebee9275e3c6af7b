#include <doctest.h>

#include <set>

#include "gcs/crypto.hpp"
#include "gcs/errors.hpp"

using namespace gcs;

TEST_CASE("key generation is reproducible and distinct per draw") {
    DeterministicRng rng(0);
    const SecretKey k0 = rng.gen_key(16);
    const SecretKey k1 = rng.gen_key(16);
    CHECK(k0.size() == 16);
    CHECK_FALSE(k0.same_bytes(k1));

    DeterministicRng again(0);
    CHECK(again.gen_key(16).same_bytes(k0));
    CHECK(again.gen_key(16).same_bytes(k1));

    DeterministicRng other(1);
    CHECK_FALSE(other.gen_key(16).same_bytes(k0));

    DeterministicRng wide(7);
    CHECK(wide.gen_key(32).size() == 32);
}

TEST_CASE("prf evaluation is deterministic and label-separated") {
    DeterministicRng rng(42);
    const SecretKey k = rng.gen_key(16);
    CHECK(prf_eval(k, PrfLabel::Enc).same_bytes(prf_eval(k, PrfLabel::Enc)));
    CHECK(prf_eval(k, PrfLabel::Enc).size() == k.size());

    for (int i = 0; i < 1000; ++i) {
        const SecretKey r = rng.gen_key(16);
        CHECK_FALSE(prf_eval(r, PrfLabel::Enc).same_bytes(prf_eval(r, PrfLabel::Next)));
    }
}

TEST_CASE("evolution chains reproduce across runs") {
    auto chain3 = [](std::uint64_t seed) {
        DeterministicRng rng(seed);
        SecretKey k = rng.gen_key(16);
        for (int i = 0; i < 3; ++i) k = prf_eval(k, PrfLabel::Next);
        return k;
    };
    CHECK(chain3(9).same_bytes(chain3(9)));
    CHECK_FALSE(chain3(9).same_bytes(chain3(10)));
}

TEST_CASE("encrypt/decrypt round trip and wrong-key rejection") {
    DeterministicRng rng(3);
    const SecretKey k = rng.gen_key(16);
    const SecretKey other = rng.gen_key(16);
    const Bytes msg{'h', 'e', 'l', 'l', 'o'};
    const VersionedKeyId id{4, 1, 2};

    const Ciphertext ct = encrypt(k, msg, id, rng);
    CHECK(ct.key_id == id);
    CHECK(ct.body.size() == msg.size());
    CHECK(decrypt(k, ct) == msg);
    CHECK_THROWS_AS(decrypt(other, ct), DecryptFailure);

    // Same key and plaintext twice: fresh nonce, different body.
    const Ciphertext ct2 = encrypt(k, msg, id, rng);
    CHECK(ct.nonce != ct2.nonce);
    CHECK(ct.body != ct2.body);
}

TEST_CASE("round trip holds across plaintext sizes") {
    DeterministicRng rng(11);
    for (std::size_t len : {std::size_t{0}, std::size_t{1}, std::size_t{63}, std::size_t{64},
                            std::size_t{65}, std::size_t{1000}}) {
        const SecretKey k = rng.gen_key(16);
        const Bytes msg = rng.bytes(len);
        CHECK(decrypt(k, encrypt(k, msg, {1, 0, 0}, rng)) == msg);
    }
}

TEST_CASE("erased keys refuse every use") {
    DeterministicRng rng(5);
    SecretKey k = rng.gen_key(16);
    const Ciphertext ct = encrypt(k, Bytes{1, 2, 3}, {1, 0, 0}, rng);

    secure_erase(k);
    CHECK(k.erased());
    CHECK_THROWS_AS(prf_eval(k, PrfLabel::Enc), ErasedKeyError);
    CHECK_THROWS_AS(decrypt(k, ct), ErasedKeyError);
    CHECK_THROWS_AS((void)encrypt(k, Bytes{1}, {1, 0, 0}, rng), ErasedKeyError);
    secure_erase(k);  // idempotent
    CHECK(k.erased());
}

TEST_CASE("ciphertext wire encoding round trips") {
    DeterministicRng rng(8);
    for (int i = 0; i < 20; ++i) {
        const SecretKey k = rng.gen_key(16);
        const Ciphertext ct = encrypt(k, rng.bytes(i * 7), {static_cast<NodeId>(i), 2, 3}, rng);
        const Bytes wire = ct.encode();
        std::size_t pos = 0;
        const Ciphertext back = Ciphertext::decode(wire, pos);
        CHECK(pos == wire.size());
        CHECK(back.key_id == ct.key_id);
        CHECK(back.nonce == ct.nonce);
        CHECK(back.body == ct.body);
        CHECK(back.tag == ct.tag);
        CHECK(decrypt(k, back) == decrypt(k, ct));
    }
}

TEST_CASE("key bundles round trip") {
    DeterministicRng rng(21);
    std::vector<HeldKey> keys;
    for (std::uint32_t i = 0; i < 5; ++i) keys.push_back({{i + 1, i, i * 2}, rng.gen_key(16)});
    const auto back = decode_key_bundle(encode_key_bundle(keys));
    REQUIRE(back.size() == keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        CHECK(back[i].id == keys[i].id);
        CHECK(back[i].key.same_bytes(keys[i].key));
    }
    CHECK_THROWS_AS(decode_key_bundle(Bytes{0, 9}), WireError);
}

TEST_CASE("fingerprints are 8 lowercase hex digits") {
    DeterministicRng rng(2);
    const SecretKey k = rng.gen_key(16);
    const std::string fp = k.fingerprint();
    CHECK(fp.size() == 8);
    for (char c : fp) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
}

TEST_CASE("prf meter tallies by label") {
    DeterministicRng rng(1);
    const SecretKey k = rng.gen_key(16);
    PrfMeter meter;
    prf_eval(k, PrfLabel::Enc, &meter);
    prf_eval(k, PrfLabel::Next, &meter);
    prf_eval(k, PrfLabel::Next, &meter);
    CHECK(meter.enc_evals == 1);
    CHECK(meter.next_evals == 2);
    CHECK(meter.total() == 3);
}
