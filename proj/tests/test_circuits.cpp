#include <gtest/gtest.h>

#include "qext/f_qqext.hpp"

using namespace qext;

namespace {

uint64_t word_value(const bitvec& bits, size_t off, size_t n) {
  uint64_t v = 0;
  for (size_t i = 0; i < n; ++i) v |= uint64_t(bits[off + i]) << i;
  return v;
}

// extractor-style inputs: c* commits td bit by bit, c commits the r_i under d
std::pair<bytes, bytes> valid_inputs(const f_layout& lay, rng& r, bytes td) {
  std::vector<bytes> rs, cstar;
  for (uint32_t i = 0; i < lay.ell; ++i) {
    rs.push_back(lay.bit_scheme.sample_randomness(r));
    cstar.push_back(lay.bit_scheme.commit(bytes{uint8_t(get_bit(td, i))}, rs.back()));
  }
  bytes rcat;
  for (auto& x : rs) append(rcat, x);
  auto d = lay.vec_scheme.sample_randomness(r);
  auto c = lay.vec_scheme.commit(rcat, d);
  return {lay.sender_input(td, c, cstar, r.take(32)), lay.receiver_input(d, rs)};
}

}  // namespace

TEST(circuits, adder_matches_integers) {
  circuit_builder cb(8, 8);
  auto sum = cb.add(cb.sender_word(0, 8), cb.receiver_word(0, 8));
  cb.output(sum);
  cb.output(cb.equal(cb.sender_word(0, 8), cb.receiver_word(0, 8)));
  auto c = cb.finish();
  for (uint32_t a = 0; a < 256; a += 7)
    for (uint32_t b = 0; b < 256; b += 3) {
      auto out = c.eval(to_bits(bytes{uint8_t(a)}), to_bits(bytes{uint8_t(b)}));
      EXPECT_EQ(word_value(out, 0, 8), (a + b) & 255);
      EXPECT_EQ(out[8], a == b);
    }
}

TEST(circuits, constant_folding_and_constant_outputs) {
  circuit_builder cb(2, 0);
  auto x = cb.sender(0);
  EXPECT_EQ(cb.and_(x, circuit_builder::zero()).v, circuit_builder::zero().v);
  EXPECT_EQ(cb.xor_(x, circuit_builder::zero()).v, x.v);
  EXPECT_EQ(cb.xor_(x, x).v, circuit_builder::zero().v);
  cb.output(circuit_builder::one());
  cb.output(circuit_builder::zero());
  cb.output(cb.or_(x, cb.sender(1)));
  auto c = cb.finish();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      auto out = c.eval({uint8_t(a), uint8_t(b)}, {});
      EXPECT_EQ(out, (bitvec{1, 0, uint8_t(a | b)}));
    }
}

TEST(circuits, text_round_trip) {
  circuit_builder cb(4, 4);
  cb.output(cb.add(cb.sender_word(0, 4), cb.receiver_word(0, 4)));
  cb.output(cb.not_(cb.sender(2)));
  auto c = cb.finish();
  auto text = c.to_text();
  EXPECT_NE(text.find(" -> "), std::string::npos);
  auto back = bool_circuit::from_text(text);
  EXPECT_EQ(back.to_text(), text);
  rng r(seed_from_u64(1), "text");
  for (int t = 0; t < 64; ++t) {
    auto s = r.bits(4), rv = r.bits(4);
    EXPECT_EQ(back.eval(s, rv), c.eval(s, rv));
  }
}

TEST(circuits, text_parser_rejects_bad_input) {
  EXPECT_THROW(bool_circuit::from_text("AND 0 1 -> 2\n"), decode_error);
  EXPECT_THROW(bool_circuit::from_text("inputs 1 1\nAND 0 5 -> 2\n"), decode_error);
  EXPECT_THROW(bool_circuit::from_text("inputs 1 1\nAND 0 1 -> 3\n"), decode_error);
  EXPECT_THROW(bool_circuit::from_text("inputs 1 1\nOR 0 1 -> 2\n"), decode_error);
  EXPECT_THROW(bool_circuit::from_text("inputs 1 1\noutputs 7\n"), decode_error);
}

TEST(circuits, eval_width_mismatch) {
  circuit_builder cb(2, 2);
  cb.output(cb.and_(cb.sender(0), cb.receiver(0)));
  auto c = cb.finish();
  EXPECT_THROW(c.eval({1}, {1, 1}), argument_error);
}

TEST(circuits, commitment_gadget_matches_scheme) {
  commit::scheme s(8, seed_from_u64(2), "gadget");
  uint32_t sb = s.msg_bits + s.rows() * 8, rb = s.rand_len() * 8;
  circuit_builder cb(sb, rb);
  auto ok = commitment_matches(cb, s, cb.sender_word(0, s.msg_bits), cb.receiver_word(0, rb),
                               cb.sender_word(s.msg_bits, s.rows() * 8));
  cb.output(ok);
  auto c = cb.finish();
  rng r(seed_from_u64(3), "gadget");
  for (int t = 0; t < 300; ++t) {
    bytes m = r.take(1);
    auto rand = s.sample_randomness(r);
    auto com = s.commit(m, rand);
    if (t % 3 == 1) com[r.below(com.size())] ^= uint8_t(1u << r.below(8));
    if (t % 3 == 2) m[0] ^= 1;
    bytes sender = m;
    append(sender, com);
    auto out = c.eval(to_bits(sender, sb), to_bits(rand, rb));
    EXPECT_EQ(out[0], s.verify_open(com, m, rand) ? 1 : 0);
  }
}

TEST(circuits, f_semantics) {
  f_layout lay(16, seed_from_u64(4));
  auto fn = build_f_qqext(lay);
  rng r(seed_from_u64(5), "f");
  bytes td{0x5a, 0x0f};
  auto [s, rv] = valid_inputs(lay, r, td);
  auto out = eval_native(fn, s, rv);
  ASSERT_FALSE(is_bottom(out));
  EXPECT_EQ(*decode_output(out), slice(s, lay.off_sk(), 32));
  EXPECT_EQ(eval_circuit(fn, s, rv), out);

  // honest receiver: c* commit zero, td has a one bit
  std::vector<bytes> rs, cstar;
  for (uint32_t i = 0; i < lay.ell; ++i) {
    rs.push_back(lay.bit_scheme.sample_randomness(r));
    cstar.push_back(lay.bit_scheme.commit(bytes{0}, rs.back()));
  }
  bytes rcat;
  for (auto& x : rs) append(rcat, x);
  auto d = lay.vec_scheme.sample_randomness(r);
  auto c = lay.vec_scheme.commit(rcat, d);
  auto hs = lay.sender_input(td, c, cstar, r.take(32));
  auto hr = lay.receiver_input(d, rs);
  EXPECT_TRUE(is_bottom(eval_native(fn, hs, hr)));
  EXPECT_TRUE(is_bottom(eval_circuit(fn, hs, hr)));
  // degenerate all-zero td releases SK2
  auto zs = lay.sender_input(bytes{0, 0}, c, cstar, r.take(32));
  EXPECT_FALSE(is_bottom(eval_native(fn, zs, hr)));
  EXPECT_EQ(eval_circuit(fn, zs, hr), eval_native(fn, zs, hr));
  // sender bottom input
  EXPECT_TRUE(is_bottom(eval_native(fn, lay.bottom_sender_input(), rv)));
  EXPECT_THROW(eval_native(fn, bytes(3), rv), argument_error);
}

TEST(circuits, f_native_circuit_agreement) {
  f_layout lay(16, seed_from_u64(6));
  auto fn = build_f_qqext(lay);
  rng r(seed_from_u64(7), "agree");
  int released = 0;
  for (int t = 0; t < 1000; ++t) {
    bytes s, rv;
    if (t % 3 == 2) {
      s = r.take(fn.sender_len);
      s[0] = 1;
      rv = r.take(fn.receiver_len);
    } else {
      std::tie(s, rv) = valid_inputs(lay, r, r.take(2));
      if (t % 3 == 1) {
        // flip one bit anywhere in the checked region
        size_t bit = r.below((lay.off_sk()) * 8 + rv.size() * 8);
        if (bit < lay.off_sk() * 8)
          s[bit / 8] ^= uint8_t(1u << (bit % 8));
        else
          bit -= lay.off_sk() * 8, rv[bit / 8] ^= uint8_t(1u << (bit % 8));
      }
    }
    auto a = eval_native(fn, s, rv);
    ASSERT_EQ(eval_circuit(fn, s, rv), a) << "trial " << t;
    released += !is_bottom(a);
  }
  EXPECT_GE(released, 300);
}

TEST(circuits, f_single_flips_fail) {
  f_layout lay(16, seed_from_u64(8));
  rng r(seed_from_u64(9), "flip");
  auto [s, rv] = valid_inputs(lay, r, bytes{0xff, 0x01});
  for (size_t bit = 0; bit < lay.off_sk() * 8; bit += 13) {
    auto t = s;
    t[bit / 8] ^= uint8_t(1u << (bit % 8));
    EXPECT_TRUE(is_bottom(lay.native(t, rv))) << "sender bit " << bit;
  }
  for (size_t bit = 0; bit < rv.size() * 8; bit += 11) {
    auto t = rv;
    t[bit / 8] ^= uint8_t(1u << (bit % 8));
    EXPECT_TRUE(is_bottom(lay.native(s, t))) << "receiver bit " << bit;
  }
}
