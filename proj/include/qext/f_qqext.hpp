#pragma once

#include "qext/circuit.hpp"
#include "qext/commit.hpp"

namespace qext {

// gate-level recomputation of a commitment: bit that is 1 iff comm == Comm(msg; rand)
inline circuit_builder::bit commitment_matches(circuit_builder& cb, const commit::scheme& s,
                                               const circuit_builder::word& msg, const circuit_builder::word& rand,
                                               const circuit_builder::word& comm) {
  using word = circuit_builder::word;
  if (msg.size() != s.msg_bits || rand.size() != size_t(s.rand_len()) * 8 || comm.size() != size_t(s.rows()) * 8)
    throw argument_error("commitment gadget width mismatch");
  std::vector<circuit_builder::bit> checks;
  for (size_t i = s.rand_bits(); i < rand.size(); ++i) checks.push_back(cb.not_(rand[i]));
  uint32_t w = s.w;
  uint32_t offset = s.q() - (1u << (s.beta - 1));
  for (uint32_t row = 0; row < s.rows(); ++row) {
    word acc = circuit_builder::constant_word(offset, w);
    for (uint32_t c = 0; c < s.n; ++c) {
      auto term = cb.and_each(circuit_builder::constant_word(s.a[row * s.n + c], w), rand[c]);
      acc = cb.add(acc, term);
    }
    word v(w, circuit_builder::zero());
    for (uint32_t b = 0; b < s.beta; ++b) v[b] = rand[s.n + row * s.beta + b];
    acc = cb.add(acc, v);
    if (row < s.msg_bits) acc[w - 1] = cb.xor_(acc[w - 1], msg[row]);
    word expect(8, circuit_builder::zero());
    for (uint32_t b = 0; b < w; ++b) expect[b] = acc[b];
    word got(comm.begin() + row * 8, comm.begin() + row * 8 + 8);
    checks.push_back(cb.equal(expect, got));
  }
  return cb.all(checks);
}

// f: sender (flag, td, c, c*_1..ell, SK2), receiver (d, r_1..ell).
// outputs SK2 iff c = Comm(r_1..r_ell; d) and c*_i = Comm(td_i; r_i) for all i
struct f_layout {
  uint32_t ell = 16;
  commit::scheme bit_scheme;
  commit::scheme vec_scheme;
  static constexpr size_t sk_len = 32;

  f_layout(uint32_t ell_, const seed32& seed) : ell(ell_) {
    if (ell == 0) throw config_error("ell must be positive");
    bit_scheme = commit::scheme(1, seed, "qqext/bit-commit");
    vec_scheme = commit::scheme(ell * bit_scheme.rand_len() * 8, seed, "qqext/vector-commit");
  }

  size_t td_len() const { return (ell + 7) / 8; }
  size_t r_len() const { return bit_scheme.rand_len(); }
  size_t c_len() const { return vec_scheme.commitment_len(); }
  size_t cstar_len() const { return bit_scheme.commitment_len(); }
  size_t d_len() const { return vec_scheme.rand_len(); }

  size_t off_td() const { return 1; }
  size_t off_c() const { return off_td() + td_len(); }
  size_t off_cstar(uint32_t i) const { return off_c() + c_len() + size_t(i) * cstar_len(); }
  size_t off_sk() const { return off_cstar(ell); }
  size_t sender_len() const { return off_sk() + sk_len; }
  size_t receiver_len() const { return d_len() + size_t(ell) * r_len(); }
  size_t output_len() const { return 1 + sk_len; }

  bytes sender_input(const bytes& td, const bytes& c, const std::vector<bytes>& cstar, const bytes& sk2) const {
    if (td.size() != td_len() || c.size() != c_len() || cstar.size() != ell || sk2.size() != sk_len)
      throw argument_error("f: malformed sender input parts");
    bytes out{1};
    append(out, td);
    append(out, c);
    for (auto& x : cstar) {
      if (x.size() != cstar_len()) throw argument_error("f: malformed c*");
      append(out, x);
    }
    append(out, sk2);
    return out;
  }

  // sender input standing for bottom: flag 0, same length
  bytes bottom_sender_input() const { return bytes(sender_len(), 0); }

  bytes receiver_input(const bytes& d, const std::vector<bytes>& r) const {
    if (d.size() != d_len() || r.size() != ell) throw argument_error("f: malformed receiver input parts");
    bytes out = d;
    for (auto& x : r) {
      if (x.size() != r_len()) throw argument_error("f: malformed r_i");
      append(out, x);
    }
    return out;
  }

  bytes r_concat(const bytes& receiver) const { return slice(receiver, d_len(), size_t(ell) * r_len()); }

  bytes native(const bytes& s, const bytes& r) const {
    if (s[0] != 1) return encode_bottom(output_len());
    auto td = slice(s, off_td(), td_len());
    auto c = slice(s, off_c(), c_len());
    auto d = slice(r, 0, d_len());
    if (!vec_scheme.verify_open(c, r_concat(r), d)) return encode_bottom(output_len());
    for (uint32_t i = 0; i < ell; ++i) {
      bytes m{uint8_t(get_bit(td, i))};
      auto ri = slice(r, d_len() + i * r_len(), r_len());
      if (!bit_scheme.verify_open(slice(s, off_cstar(i), cstar_len()), m, ri)) return encode_bottom(output_len());
    }
    return encode_value(slice(s, off_sk(), sk_len), output_len());
  }

  bool_circuit build_circuit() const;
};

inline bool_circuit f_layout::build_circuit() const {
  circuit_builder cb(uint32_t(sender_len() * 8), uint32_t(receiver_len() * 8));
  std::vector<circuit_builder::bit> checks;
  checks.push_back(cb.equal(cb.sender_word(0, 8), circuit_builder::constant_word(1, 8)));
  auto d = cb.receiver_word(0, uint32_t(d_len() * 8));
  auto rs = cb.receiver_word(uint32_t(d_len() * 8), uint32_t(ell * r_len() * 8));
  checks.push_back(commitment_matches(cb, vec_scheme, rs, d, cb.sender_word(uint32_t(off_c() * 8), uint32_t(c_len() * 8))));
  for (uint32_t i = 0; i < ell; ++i) {
    circuit_builder::word m{cb.sender(uint32_t(off_td() * 8 + i))};
    circuit_builder::word ri(rs.begin() + i * r_len() * 8, rs.begin() + (i + 1) * r_len() * 8);
    checks.push_back(
        commitment_matches(cb, bit_scheme, m, ri, cb.sender_word(uint32_t(off_cstar(i) * 8), uint32_t(cstar_len() * 8))));
  }
  auto ok = cb.all(checks);
  // tag byte is 0x01 exactly when every check passes
  circuit_builder::word tag(8, circuit_builder::zero());
  tag[0] = ok;
  cb.output(tag);
  cb.output(cb.and_each(cb.sender_word(uint32_t(off_sk() * 8), uint32_t(sk_len * 8)), ok));
  return cb.finish();
}

inline functionality build_f_qqext(const f_layout& lay) {
  functionality fn;
  fn.name = "f";
  fn.sender_len = lay.sender_len();
  fn.receiver_len = lay.receiver_len();
  fn.output_len = lay.output_len();
  fn.native = [lay](const bytes& s, const bytes& r) { return lay.native(s, r); };
  fn.circuit = std::make_shared<const bool_circuit>(lay.build_circuit());
  return fn;
}

}  // namespace qext
