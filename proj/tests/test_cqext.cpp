#include <gtest/gtest.h>

#include "qext/cqext.hpp"

using namespace qext;
using namespace qext::cqext;

namespace {

setup_ptr make_setup(uint32_t k = 16) {
  params p;
  p.k = k;
  p.public_seed = seed_from_u64(77);
  return std::make_shared<const setup>(p);
}

struct instance_pair {
  bytes x, w;
};

instance_pair sample_instance(uint64_t s) {
  rng r(seed_from_u64(s), "inst");
  auto w = r.take(16);
  return {hash_bytes(w, 32), w};
}

// brute-force claw check straight from the support definition
bool tuple_verifies(const ntcf::key& k, const ntcf::zvec& y, const tuple& t) {
  const auto& p = k.prm;
  if (!ntcf::chk(k, t.b, t.x, y)) return false;
  std::optional<uint32_t> x0, x1;
  for (uint32_t x = 0; x < p.domain_size(); ++x) {
    if (ntcf::chk(k, 0, x, y)) x0 = x;
    if (ntcf::chk(k, 1, x, y)) x1 = x;
  }
  if (!x0 || !x1) return false;
  int acc = 0;
  for (uint32_t i = 0; i < p.x_bits; ++i) acc ^= t.d[i] & (((*x0 ^ *x1) >> i) & 1);
  bool good = false;
  for (uint32_t i = 0; i < p.x_bits; ++i) good |= t.d[i] != 0;
  return good && acc == t.u;
}

}  // namespace

TEST(cqext, config_errors) {
  params p;
  p.k = 0;
  EXPECT_THROW(setup{p}, config_error);
  p.k = 4;
  p.backend = sfe::backend::garbled;
  EXPECT_THROW(setup{p}, config_error);
  EXPECT_EQ(params{}.divergence_threshold(), 6u);
}

TEST(cqext, extractor_gets_witness_classical_gets_bottom) {
  auto su = make_setup();
  auto rel = preimage_relation(16);
  for (uint64_t t = 0; t < 10; ++t) {
    auto [x, w] = sample_instance(t);
    auto dev = run_honest(su, x, w, receiver_kind::device, seed_from_u64(100 + t));
    ASSERT_FALSE(dev.abort);
    ASSERT_TRUE(dev.output);
    EXPECT_TRUE(rel.holds(x, *dev.output));
    auto cl = run_honest(su, x, w, receiver_kind::classical, seed_from_u64(100 + t));
    EXPECT_FALSE(cl.abort);
    EXPECT_FALSE(cl.output);
    EXPECT_EQ(dev.lengths, cl.lengths);
    EXPECT_EQ(dev.lengths.size(), 8u);
    auto gs = run_honest(su, x, w, receiver_kind::guesser, seed_from_u64(100 + t));
    EXPECT_FALSE(gs.output);
  }
}

TEST(cqext, semi_malicious_sender_randomness) {
  auto su = make_setup();
  auto [x, w] = sample_instance(1);
  auto base = honest_sender(x, w);
  party_factory chosen = [&](setup_ptr s, session_context* ctx, const seed32&) {
    return base(std::move(s), ctx, seed32{});  // adversary picks all-zero randomness
  };
  auto res = extract(su, chosen, seed_from_u64(5));
  ASSERT_TRUE(res.output);
  EXPECT_EQ(*res.output, w);
}

TEST(cqext, aborting_sender) {
  auto su = make_setup();
  auto [x, w] = sample_instance(2);
  auto base = honest_sender(x, w);
  party_factory aborting = [&](setup_ptr s, session_context* ctx, const seed32& sd) -> std::unique_ptr<party> {
    return std::make_unique<abort_at>(base(std::move(s), ctx, sd), "challenges");
  };
  auto res = extract(su, aborting, seed_from_u64(6));
  ASSERT_TRUE(res.abort);
  EXPECT_EQ(res.abort->round, 3u);
  EXPECT_EQ(res.abort->from, "S");
  EXPECT_FALSE(res.output);
  EXPECT_EQ(res.transcript.size(), 3u);
}

TEST(cqext, f_rejects_tampering) {
  auto su = make_setup(4);
  auto [x, w] = sample_instance(3);
  auto s = make_session(su, seed_from_u64(7), honest_sender(x, w), receiver_of(receiver_kind::device));
  s.run_until(7);
  auto& snd = find_sender(s.get("S"))->core();
  auto& rcv = find_receiver(s.get("R"))->core();
  auto sin = snd.sfe_input();
  auto rin = rcv.receiver_input();
  EXPECT_EQ(decode_output(eval_native(su->f(), sin, rin)), w);
  // any single flipped receiver bit breaks a commitment check
  rng r(seed_from_u64(8), "flip");
  for (int t = 0; t < 50; ++t) {
    auto bad = rin;
    bad[r.below(bad.size())] ^= uint8_t(1u << r.below(8));
    EXPECT_TRUE(is_bottom(eval_native(su->f(), sin, bad)));
  }
  auto flag = sin;
  flag[0] = 0;
  EXPECT_TRUE(is_bottom(eval_native(su->f(), flag, rin)));
  // opened share of (0, 0) as the sender recorded it
  auto op = sin;
  size_t sh_off = 1 + su->key_len() + 4 + su->y_len() + 1 + 2 * su->shares().rows() + 1;
  op[sh_off] ^= 2;
  EXPECT_TRUE(is_bottom(eval_native(su->f(), op, rin)));
}

TEST(cqext, zk_view_matches_real) {
  auto su = make_setup();
  auto [x, w] = sample_instance(4);
  for (uint64_t t = 0; t < 5; ++t) {
    auto real = run_honest(su, x, w, receiver_kind::classical, seed_from_u64(200 + t));
    auto sim = zk_simulate(su, x, receiver_of(receiver_kind::classical), seed_from_u64(200 + t));
    EXPECT_EQ(real.view, sim.view);
    EXPECT_FALSE(sim.output);
  }
  // the device receiver would get the witness in the real world, never in simulation
  auto sim = zk_simulate(su, x, receiver_of(receiver_kind::device), seed_from_u64(9));
  EXPECT_FALSE(sim.abort);
  EXPECT_FALSE(sim.output);
  EXPECT_THROW(zk_simulate(su, x, receiver_of(receiver_kind::classical, false), seed_from_u64(9)), capability_error);
}

TEST(cqext, zk_aborting_receiver) {
  auto su = make_setup();
  auto [x, w] = sample_instance(5);
  auto base = receiver_of(receiver_kind::classical);
  party_factory ab = [&](setup_ptr s, session_context* ctx, const seed32& sd) -> std::unique_ptr<party> {
    return std::make_unique<abort_at>(base(std::move(s), ctx, sd), "grid");
  };
  auto real = run(su, seed_from_u64(10), honest_sender(x, w), ab);
  auto sim = zk_simulate(su, x, ab, seed_from_u64(10));
  ASSERT_TRUE(real.abort && sim.abort);
  EXPECT_EQ(real.abort->round, 4u);
  EXPECT_EQ(sim.abort->round, 4u);
  EXPECT_EQ(real.view, sim.view);
}

TEST(cqext, hybrid_against_device_adversary) {
  auto su = make_setup();
  auto [x, w] = sample_instance(6);
  int got = 0;
  for (uint64_t t = 0; t < 10; ++t) {
    auto seed = seed_from_u64(300 + t);
    auto res = hybrid_h2_extract(su, x, w, receiver_of(receiver_kind::device), seed);
    for (auto n : res.inner_rewinds) EXPECT_LE(n, 256u);
    EXPECT_LE(res.outer_rewinds, 16u);
    if (res.aborted) {
      EXPECT_LT(res.divergence, 6u);
      continue;
    }
    ASSERT_TRUE(res.tuples) << res.reason;
    ++got;
    EXPECT_GE(res.tuples->size(), 6u);
    // the keys and images the receiver saw, from a plain run with the same seed
    auto s = make_session(su, seed, honest_sender(x, w), receiver_of(receiver_kind::device));
    s.run_until(2);
    auto& snd = find_sender(s.get("S"))->core();
    for (auto& tp : *res.tuples) EXPECT_TRUE(tuple_verifies(snd.trapdoors()[tp.i].k, snd.images()[tp.i], tp));
  }
  EXPECT_GE(got, 6);
}

TEST(cqext, hybrid_against_classical) {
  auto su = make_setup();
  auto [x, w] = sample_instance(7);
  for (uint64_t t = 0; t < 5; ++t) {
    auto a = hybrid_h2_extract(su, x, w, receiver_of(receiver_kind::classical), seed_from_u64(400 + t));
    EXPECT_FALSE(a.tuples);
    auto b = hybrid_h2_extract(su, x, w, receiver_of(receiver_kind::guesser), seed_from_u64(400 + t));
    EXPECT_FALSE(b.tuples);
  }
  EXPECT_THROW(hybrid_h2_extract(su, x, w, receiver_of(receiver_kind::device, false), seed_from_u64(1)),
               capability_error);
}
