#include <gtest/gtest.h>

#include "qext/f_qqext.hpp"
#include "qext/sfe.hpp"

using namespace qext;
using namespace qext::sfe;

namespace {

// 8-bit adder functionality with a circuit refinement, output tagged
functionality adder() {
  functionality fn;
  fn.name = "add8";
  fn.sender_len = 1;
  fn.receiver_len = 1;
  fn.output_len = 2;
  fn.native = [](const bytes& s, const bytes& r) { return encode_value({uint8_t(s[0] + r[0])}, 2); };
  circuit_builder cb(8, 8);
  cb.output(circuit_builder::constant_word(1, 8));
  cb.output(cb.add(cb.sender_word(0, 8), cb.receiver_word(0, 8)));
  fn.circuit = std::make_shared<const bool_circuit>(cb.finish());
  return fn;
}

functionality sender_only() {
  functionality fn;
  fn.name = "echo";
  fn.sender_len = 2;
  fn.receiver_len = 0;
  fn.output_len = 3;
  fn.native = [](const bytes& s, const bytes&) { return encode_value(s, 3); };
  circuit_builder cb(16, 0);
  cb.output(circuit_builder::constant_word(1, 8));
  cb.output(cb.sender_word(0, 16));
  fn.circuit = std::make_shared<const bool_circuit>(cb.finish());
  return fn;
}

bytes run(context& ctx, backend b, const functionality& fn, const bytes& s, const bytes& rin, rng& r) {
  auto [m1, st] = receiver_msg1(ctx, b, fn, rin, r);
  auto m2 = sender_msg2(ctx, fn, s, m1, r);
  return receiver_output(st, fn, m2);
}

}  // namespace

TEST(sfe, ideal_round_trip_and_log) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(2), "p");
  auto fn = adder();
  EXPECT_EQ(run(ctx, backend::ideal, fn, {200}, {100}, r), (bytes{1, 44}));
  ASSERT_EQ(ctx.input_log().size(), 1u);
  EXPECT_EQ(ctx.input_log()[0].receiver_input, bytes{100});
  EXPECT_EQ(ctx.input_log()[0].sender_input, bytes{200});
}

TEST(sfe, msg1_shape_independent_of_input) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(3), "p");
  auto fn = adder();
  auto [a, sa] = receiver_msg1(ctx, backend::ideal, fn, {0}, r);
  auto [b, sb] = receiver_msg1(ctx, backend::ideal, fn, {255}, r);
  EXPECT_EQ(a.payload.size(), b.payload.size());
  EXPECT_EQ(slice(a.payload, 0, 16), slice(b.payload, 0, 16));
  auto [ga, gsa] = receiver_msg1(ctx, backend::garbled, fn, {0}, r);
  auto [gb, gsb] = receiver_msg1(ctx, backend::garbled, fn, {255}, r);
  EXPECT_EQ(ga.payload.size(), gb.payload.size());
}

TEST(sfe, garbled_msg1_has_one_ot_per_receiver_bit) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(4), "p");
  f_layout lay(16, seed_from_u64(5));
  auto fn = build_f_qqext(lay);
  auto [m1, st] = receiver_msg1(ctx, backend::garbled, fn, bytes(fn.receiver_len, 0), r);
  reader rd(m1.payload);
  rd.raw(16);
  EXPECT_EQ(rd.u32(), fn.receiver_len * 8);
  EXPECT_EQ(rd.remaining(), fn.receiver_len * 8 * 16);
}

TEST(sfe, empty_receiver_input) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(6), "p");
  auto fn = sender_only();
  for (auto b : {backend::ideal, backend::garbled}) EXPECT_EQ(run(ctx, b, fn, {7, 9}, {}, r), (bytes{1, 7, 9}));
}

TEST(sfe, state_consumed_once) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(7), "p");
  auto fn = adder();
  for (auto b : {backend::ideal, backend::garbled}) {
    auto [m1, st] = receiver_msg1(ctx, b, fn, {1}, r);
    auto m2 = sender_msg2(ctx, fn, {2}, m1, r);
    EXPECT_EQ(receiver_output(st, fn, m2), (bytes{1, 3}));
    EXPECT_THROW(receiver_output(st, fn, m2), consumed_error);
  }
}

TEST(sfe, tampering_and_cross_session) {
  context ctx(seed_from_u64(1), "sfe"), other(seed_from_u64(9), "sfe");
  rng r(seed_from_u64(8), "p");
  auto fn = adder();
  auto [m1, st] = receiver_msg1(ctx, backend::ideal, fn, {1}, r);
  auto bad = m1;
  bad.payload[40] ^= 1;
  EXPECT_THROW(sender_msg2(ctx, fn, {2}, bad, r), protocol_error);
  EXPECT_THROW(sender_msg2(other, fn, {2}, m1, r), protocol_error);
  auto [m1b, stb] = receiver_msg1(other, backend::ideal, fn, {1}, r);
  auto foreign = sender_msg2(other, fn, {2}, m1b, r);
  EXPECT_THROW(receiver_output(st, fn, foreign), protocol_error);
  auto m2 = sender_msg2(ctx, fn, {2}, m1, r);
  auto t = m2;
  t.payload[35] ^= 4;
  EXPECT_THROW(receiver_output(st, fn, t), protocol_error);
  msg2 wrong{backend::garbled, m2.payload};
  EXPECT_THROW(receiver_output(st, fn, wrong), protocol_error);
  EXPECT_EQ(receiver_output(st, fn, m2), (bytes{1, 3}));

  auto [g1, gst] = receiver_msg1(ctx, backend::garbled, fn, {1}, r);
  auto gbad = g1;
  gbad.payload[30] ^= 1;
  EXPECT_THROW(sender_msg2(ctx, fn, {2}, gbad, r), protocol_error);
  EXPECT_THROW(sender_msg2(other, fn, {2}, g1, r), protocol_error);
}

TEST(sfe, envelope_is_recomputable) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(10), "p");
  auto fn = adder();
  auto [m1, st] = receiver_msg1(ctx, backend::ideal, fn, {5}, r);
  auto m2 = sender_msg2(ctx, fn, {6}, m1, r);
  EXPECT_EQ(expected_msg2(st, eval_native(fn, {6}, {5})).payload, m2.payload);
}

TEST(sfe, garbled_matches_ideal_small) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(11), "p");
  auto fn = adder();
  for (int t = 0; t < 200; ++t) {
    bytes s = r.take(1), rin = r.take(1);
    EXPECT_EQ(run(ctx, backend::garbled, fn, s, rin, r), run(ctx, backend::ideal, fn, s, rin, r));
  }
}

TEST(sfe, garbled_matches_ideal_on_f) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(12), "p");
  f_layout lay(16, seed_from_u64(13));
  auto fn = build_f_qqext(lay);
  for (int t = 0; t < 20; ++t) {
    std::vector<bytes> rs, cstar;
    auto td = r.take(2);
    for (uint32_t i = 0; i < lay.ell; ++i) {
      rs.push_back(lay.bit_scheme.sample_randomness(r));
      cstar.push_back(lay.bit_scheme.commit(bytes{uint8_t(get_bit(td, i))}, rs.back()));
    }
    bytes rcat;
    for (auto& x : rs) append(rcat, x);
    auto d = lay.vec_scheme.sample_randomness(r);
    auto s = lay.sender_input(td, lay.vec_scheme.commit(rcat, d), cstar, r.take(32));
    auto rin = lay.receiver_input(d, rs);
    if (t % 2) rin[r.below(rin.size())] ^= 1;
    auto ideal = run(ctx, backend::ideal, fn, s, rin, r);
    EXPECT_EQ(run(ctx, backend::garbled, fn, s, rin, r), ideal);
    EXPECT_EQ(is_bottom(ideal), t % 2 == 1);
  }
}

TEST(sfe, garbled_without_circuit_is_config_error) {
  context ctx(seed_from_u64(1), "sfe");
  rng r(seed_from_u64(14), "p");
  auto fn = adder();
  fn.circuit.reset();
  EXPECT_THROW(receiver_msg1(ctx, backend::garbled, fn, {1}, r), config_error);
  EXPECT_THROW(receiver_msg1(ctx, backend::ideal, fn, {1, 2}, r), argument_error);
}
