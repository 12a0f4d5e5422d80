#pragma once

#include <immintrin.h>
#include <wmmintrin.h>

#include <vector>

#include "qext/circuit.hpp"
#include "qext/rng.hpp"

namespace qext::garble {

// wrapper so labels can live in std containers without attribute warnings
struct block {
  __m128i v;
};

inline block operator^(block a, block b) { return {_mm_xor_si128(a.v, b.v)}; }
inline block load(const uint8_t* p) { return {_mm_loadu_si128(reinterpret_cast<const __m128i*>(p))}; }
inline void store(uint8_t* p, block b) { _mm_storeu_si128(reinterpret_cast<__m128i*>(p), b.v); }
inline int lsb(block b) { return _mm_cvtsi128_si32(b.v) & 1; }

// fixed-key AES-128; the key is public and only makes pi a fixed permutation
class fixed_aes {
 public:
  fixed_aes() {
    alignas(16) uint8_t key[16];
    for (int i = 0; i < 16; ++i) key[i] = uint8_t(0x3a ^ (i * 29));
    expand(load(key).v);
  }

  block operator()(block b) const {
    __m128i x = _mm_xor_si128(b.v, rk_[0]);
    for (int i = 1; i < 10; ++i) x = _mm_aesenc_si128(x, rk_[i]);
    return {_mm_aesenclast_si128(x, rk_[10])};
  }

 private:
  template <int rcon>
  static __m128i step(__m128i k) {
    __m128i t = _mm_aeskeygenassist_si128(k, rcon);
    t = _mm_shuffle_epi32(t, 0xff);
    k = _mm_xor_si128(k, _mm_slli_si128(k, 4));
    k = _mm_xor_si128(k, _mm_slli_si128(k, 4));
    k = _mm_xor_si128(k, _mm_slli_si128(k, 4));
    return _mm_xor_si128(k, t);
  }
  void expand(__m128i k) {
    rk_[0] = k;
    rk_[1] = step<0x01>(rk_[0]);
    rk_[2] = step<0x02>(rk_[1]);
    rk_[3] = step<0x04>(rk_[2]);
    rk_[4] = step<0x08>(rk_[3]);
    rk_[5] = step<0x10>(rk_[4]);
    rk_[6] = step<0x20>(rk_[5]);
    rk_[7] = step<0x40>(rk_[6]);
    rk_[8] = step<0x80>(rk_[7]);
    rk_[9] = step<0x1b>(rk_[8]);
    rk_[10] = step<0x36>(rk_[9]);
  }
  __m128i rk_[11];
};

inline const fixed_aes& pi() {
  static const fixed_aes p;
  return p;
}

// 128-bit left shift by one, no reduction
inline block dbl(block x) {
  __m128i carry = _mm_slli_si128(_mm_srli_epi64(x.v, 63), 8);
  return {_mm_or_si128(_mm_slli_epi64(x.v, 1), carry)};
}

// H(A, B, g) = pi(K) xor K with K = 2A xor 4B xor g
inline block hash2(block a, block b, uint64_t gid) {
  block k = dbl(a) ^ dbl(dbl(b)) ^ block{_mm_set_epi64x(0, int64_t(gid))};
  return pi()(k) ^ k;
}

inline block random_block(rng& r) {
  uint8_t buf[16];
  r.fill(buf, 16);
  return load(buf);
}

struct garbled_circuit {
  std::vector<uint8_t> tables;  // 64 bytes per AND gate, in gate order
  std::vector<block> zero_labels;  // label of value 0 on every wire
  block delta;
  bitvec decode;  // per output
};

// free-XOR garbling with point-and-permute
inline garbled_circuit garble(const bool_circuit& c, rng& r) {
  garbled_circuit g;
  g.delta = random_block(r);
  g.delta.v = _mm_or_si128(g.delta.v, _mm_set_epi64x(0, 1));
  g.zero_labels.resize(c.wire_count());
  for (uint32_t i = 0; i < c.input_bits(); ++i) g.zero_labels[i] = random_block(r);
  g.tables.resize(c.and_count() * 64);
  size_t t = 0;
  for (size_t gi = 0; gi < c.gates.size(); ++gi) {
    const auto& gt = c.gates[gi];
    auto& out = g.zero_labels[gt.out];
    switch (gt.op) {
      case gate_op::xor_: out = g.zero_labels[gt.a] ^ g.zero_labels[gt.b]; break;
      case gate_op::not_: out = g.zero_labels[gt.a] ^ g.delta; break;
      case gate_op::and_: {
        out = random_block(r);
        block a0 = g.zero_labels[gt.a], b0 = g.zero_labels[gt.b];
        for (int va = 0; va < 2; ++va)
          for (int vb = 0; vb < 2; ++vb) {
            block la = va ? (a0 ^ g.delta) : a0;
            block lb = vb ? (b0 ^ g.delta) : b0;
            block lo = (va & vb) ? (out ^ g.delta) : out;
            int row = 2 * lsb(la) + lsb(lb);
            store(&g.tables[t + size_t(row) * 16], hash2(la, lb, gi) ^ lo);
          }
        t += 64;
        break;
      }
    }
  }
  for (auto o : c.outputs) g.decode.push_back(uint8_t(lsb(g.zero_labels[o])));
  return g;
}

inline block label_for(const garbled_circuit& g, uint32_t wire, int v) {
  return v ? (g.zero_labels[wire] ^ g.delta) : g.zero_labels[wire];
}

inline bitvec evaluate(const bool_circuit& c, const std::vector<uint8_t>& tables, std::vector<block> inputs,
                       const bitvec& decode) {
  if (inputs.size() != c.input_bits()) throw protocol_error("garbled input label count mismatch");
  if (tables.size() != c.and_count() * 64) throw protocol_error("garbled table size mismatch");
  if (decode.size() != c.outputs.size()) throw protocol_error("decode table size mismatch");
  std::vector<block> w(c.wire_count());
  std::copy(inputs.begin(), inputs.end(), w.begin());
  size_t t = 0;
  for (size_t gi = 0; gi < c.gates.size(); ++gi) {
    const auto& gt = c.gates[gi];
    switch (gt.op) {
      case gate_op::xor_: w[gt.out] = w[gt.a] ^ w[gt.b]; break;
      case gate_op::not_: w[gt.out] = w[gt.a]; break;
      case gate_op::and_: {
        block a = w[gt.a], b = w[gt.b];
        int row = 2 * lsb(a) + lsb(b);
        w[gt.out] = load(&tables[t + size_t(row) * 16]) ^ hash2(a, b, gi);
        t += 64;
        break;
      }
    }
  }
  bitvec out(c.outputs.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = uint8_t(lsb(w[c.outputs[i]]) ^ decode[i]);
  return out;
}

}  // namespace qext::garble
