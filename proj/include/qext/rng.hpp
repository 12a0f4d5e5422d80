#pragma once

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <string_view>

#include "qext/bytes.hpp"

namespace qext {

using seed32 = std::array<uint8_t, 32>;

inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw capability_error("libsodium failed to initialize");
}

// keyed BLAKE2b over (label, material); used for all labeled derivation
inline seed32 derive_seed(const seed32& parent, std::string_view label, const bytes& material = {}) {
  ensure_sodium();
  crypto_generichash_state st;
  crypto_generichash_init(&st, parent.data(), parent.size(), 32);
  uint32_t n = uint32_t(label.size());
  uint8_t len[4] = {uint8_t(n), uint8_t(n >> 8), uint8_t(n >> 16), uint8_t(n >> 24)};
  crypto_generichash_update(&st, len, 4);
  crypto_generichash_update(&st, reinterpret_cast<const uint8_t*>(label.data()), label.size());
  crypto_generichash_update(&st, material.data(), material.size());
  seed32 out;
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

inline bytes hash_bytes(const bytes& data, size_t out_len = 32) {
  ensure_sodium();
  bytes out(out_len);
  crypto_generichash(out.data(), out_len, data.data(), data.size(), nullptr, 0);
  return out;
}

inline seed32 seed_from_hex(std::string_view hex) {
  auto b = from_hex(hex);
  if (b.size() != 32) throw config_error("seed must be 32 bytes of hex");
  seed32 s;
  std::memcpy(s.data(), b.data(), 32);
  return s;
}

inline seed32 seed_from_u64(uint64_t v) {
  seed32 zero{};
  writer w;
  w.u64(v);
  return derive_seed(zero, "seed/u64", w.data());
}

inline std::string seed_hex(const seed32& s) { return to_hex(s.data(), s.size()); }

// counter-mode PRF stream (ChaCha20 keystream). Plain value type: copying it is a
// snapshot of the stream position, which is what rewinding needs.
class rng {
 public:
  rng() : rng(seed32{}, "default") {}
  rng(const seed32& seed, std::string_view label) : key_(derive_seed(seed, label)) {}

  rng derive(std::string_view label) const {
    rng out;
    out.key_ = derive_seed(key_, label);
    return out;
  }

  void fill(uint8_t* out, size_t n) {
    while (n) {
      uint64_t block = pos_ >> 6;
      size_t off = size_t(pos_ & 63);
      if (block != cached_) refill(block);
      size_t take = std::min(n, size_t(64) - off);
      std::memcpy(out, buf_.data() + off, take);
      out += take;
      n -= take;
      pos_ += take;
    }
  }

  bytes take(size_t n) {
    bytes out(n);
    fill(out.data(), n);
    return out;
  }

  seed32 seed() {
    seed32 s;
    fill(s.data(), 32);
    return s;
  }

  uint64_t u64() {
    uint8_t b[8];
    fill(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
  }

  // uniform in [0, n), rejection sampled
  uint64_t below(uint64_t n) {
    if (n == 0) throw argument_error("below(0)");
    if ((n & (n - 1)) == 0) return u64() & (n - 1);
    uint64_t limit = ~uint64_t(0) - (~uint64_t(0) % n);
    for (;;) {
      uint64_t v = u64();
      if (v < limit) return v % n;
    }
  }

  int bit() {
    uint8_t b;
    fill(&b, 1);
    return b & 1;
  }

  bitvec bits(size_t n) {
    auto raw = take((n + 7) / 8);
    return to_bits(raw, n);
  }

  uint64_t position() const { return pos_; }
  const seed32& key() const { return key_; }

  bytes serialize() const {
    writer w;
    w.raw(key_.data(), key_.size()).u64(pos_);
    return w.take();
  }
  static rng deserialize(reader& r) {
    rng out;
    auto k = r.raw(32);
    std::memcpy(out.key_.data(), k.data(), 32);
    out.pos_ = r.u64();
    out.cached_ = ~uint64_t(0);
    return out;
  }

 private:
  void refill(uint64_t block) {
    ensure_sodium();
    // 96-bit nonce carries the high half of the block index, counter the low half
    uint8_t nonce[crypto_stream_chacha20_ietf_NONCEBYTES] = {0};
    uint32_t hi = uint32_t(block >> 32);
    for (int i = 0; i < 4; ++i) nonce[i] = uint8_t(hi >> (8 * i));
    buf_.fill(0);
    crypto_stream_chacha20_ietf_xor_ic(buf_.data(), buf_.data(), 64, nonce, uint32_t(block), key_.data());
    cached_ = block;
  }

  seed32 key_{};
  uint64_t pos_ = 0;
  uint64_t cached_ = ~uint64_t(0);
  std::array<uint8_t, 64> buf_{};
};

template <typename T>
void shuffle(std::vector<T>& v, rng& r) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[r.below(i)]);
}

}  // namespace qext
