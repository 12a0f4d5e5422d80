#pragma once

#include <functional>
#include <map>
#include <optional>

#include "qext/rng.hpp"

namespace qext::qfhe {

// classical-message FHE model: a ciphertext is an AEAD box under a master key
// that only this oracle holds; evaluation opens, applies and reseals
struct key_pair {
  bytes pk;  // 8-byte key id
  bytes sk;  // 32 bytes
};

using program = std::function<bytes(const std::vector<bytes>&)>;

class oracle {
 public:
  static constexpr size_t id_len = 8;
  static constexpr size_t nonce_len = crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  static constexpr size_t overhead = id_len + nonce_len + crypto_aead_xchacha20poly1305_ietf_ABYTES;

  key_pair keygen(rng& r) {
    key_pair kp;
    do {
      kp.pk = r.take(id_len);
    } while (keys_.count(kp.pk));
    kp.sk = r.take(32);
    keys_[kp.pk] = {kp.sk, r.take(crypto_aead_xchacha20poly1305_ietf_KEYBYTES)};
    return kp;
  }

  bytes encrypt(const bytes& pk, const bytes& m, rng& r) const { return seal(entry(pk), pk, m, r); }

  std::optional<bytes> decrypt(const bytes& sk, const bytes& ct) const {
    if (ct.size() < overhead) return std::nullopt;
    auto it = keys_.find(slice(ct, 0, id_len));
    if (it == keys_.end() || sk.size() != it->second.sk.size()) return std::nullopt;
    if (sodium_memcmp(sk.data(), it->second.sk.data(), sk.size()) != 0) return std::nullopt;
    return open(it->second, ct);
  }

  // homomorphic application of f to ciphertexts under one key
  bytes eval(const bytes& pk, const program& f, const std::vector<bytes>& cts, rng& r) const {
    const auto& e = entry(pk);
    std::vector<bytes> plain;
    for (auto& ct : cts) {
      if (ct.size() < overhead || slice(ct, 0, id_len) != pk) throw argument_error("qfhe eval: ciphertext under another key");
      auto m = open(e, ct);
      if (!m) throw argument_error("qfhe eval: ciphertext failed authentication");
      plain.push_back(std::move(*m));
    }
    return seal(e, pk, f(plain), r);
  }

  static bytes pk_of(const bytes& ct) {
    if (ct.size() < overhead) throw decode_error("ciphertext too short");
    return slice(ct, 0, id_len);
  }

  static size_t ciphertext_len(size_t plain_len) { return plain_len + overhead; }

 private:
  struct key_entry {
    bytes sk;
    bytes master;
  };

  const key_entry& entry(const bytes& pk) const {
    auto it = keys_.find(pk);
    if (it == keys_.end()) throw argument_error("unknown qfhe public key");
    return it->second;
  }

  static bytes seal(const key_entry& e, const bytes& pk, const bytes& m, rng& r) {
    ensure_sodium();
    bytes ct = pk;
    auto nonce = r.take(nonce_len);
    append(ct, nonce);
    bytes box(m.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
    unsigned long long len = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(box.data(), &len, m.data(), m.size(), pk.data(), pk.size(), nullptr,
                                               nonce.data(), e.master.data());
    box.resize(size_t(len));
    append(ct, box);
    return ct;
  }

  static std::optional<bytes> open(const key_entry& e, const bytes& ct) {
    ensure_sodium();
    bytes m(ct.size() - overhead);
    unsigned long long len = 0;
    if (crypto_aead_xchacha20poly1305_ietf_decrypt(m.data(), &len, nullptr, ct.data() + id_len + nonce_len,
                                                   ct.size() - id_len - nonce_len, ct.data(), id_len,
                                                   ct.data() + id_len, e.master.data()) != 0)
      return std::nullopt;
    m.resize(size_t(len));
    return m;
  }

  std::map<bytes, key_entry> keys_;
};

}  // namespace qext::qfhe
