#include <gtest/gtest.h>

#include <algorithm>

#include "qext/qzk.hpp"

using namespace qext;

namespace {

// brute force over cycles starting at vertex 0
bool has_hamiltonian_cycle(const ham::graph& g) {
  std::vector<uint32_t> rest;
  for (uint32_t v = 1; v < g.n; ++v) rest.push_back(v);
  do {
    ham::cycle c{0};
    c.insert(c.end(), rest.begin(), rest.end());
    bool ok = true;
    for (uint32_t i = 0; i < g.n && ok; ++i) ok = g.edge(c[i], c[(i + 1) % g.n]);
    if (ok) return true;
  } while (std::next_permutation(rest.begin(), rest.end()));
  return false;
}

qzk::params small(bool classical = false) {
  qzk::params p;
  p.k = 4;
  p.k_wi = 12;
  p.qext.k = 8;
  p.classical_variant = classical;
  p.public_seed = seed_from_u64(77);
  return p;
}

qzk::setup_ptr make_setup(qzk::params p) { return std::make_shared<const qzk::setup>(p); }

struct rwi_case {
  wi::instance in;
  wi::witness lang, trap;
};

rwi_case make_case(const qzk::setup& su, rng& r) {
  rwi_case out;
  auto [g, c] = ham::planted(su.prm().graph_n, r);
  out.in.x = g;
  out.in.k = su.prm().k;
  out.in.td = su.random_td(r);
  out.lang = {wi::branch::language, c, {}};
  out.trap.which = wi::branch::trapdoor;
  const auto& s = su.shares();
  for (uint32_t j = 0; j < out.in.k; ++j) {
    auto sh0 = su.random_td(r);
    auto sh1 = xor_bytes(sh0, out.in.td);
    for (auto* sh : {&sh0, &sh1}) {
      auto rand = s.sample_randomness(r);
      out.in.grid.push_back(s.commit(*sh, rand));
      out.trap.shares.push_back({*sh, rand});
    }
  }
  return out;
}

// direct check of the trapdoor condition from a binary vector laid out as
// (sh_0 bits, randomness bits of side 0, randomness bits of side 1) per j
bool trapdoor_oracle(const commit::scheme& s, const wi::instance& in, const std::vector<uint8_t>& z) {
  size_t per = s.msg_bits + 2 * size_t(s.rand_bits()), off = 0;
  for (uint32_t j = 0; j < in.k; ++j, off += per) {
    bytes sh0(s.msg_len(), 0), r0(s.rand_len(), 0), r1(s.rand_len(), 0);
    for (uint32_t b = 0; b < s.msg_bits; ++b) set_bit(sh0, b, z[off + b]);
    for (uint32_t b = 0; b < s.rand_bits(); ++b) {
      set_bit(r0, b, z[off + s.msg_bits + b]);
      set_bit(r1, b, z[off + s.msg_bits + s.rand_bits() + b]);
    }
    auto sh1 = xor_bytes(sh0, in.td);
    if (!s.verify_open(in.grid[j * 2], sh0, r0) || !s.verify_open(in.grid[j * 2 + 1], sh1, r1)) return false;
  }
  return true;
}

}  // namespace

TEST(ham, planted_and_non_member_instances) {
  rng r(seed_from_u64(1), "t");
  for (int t = 0; t < 20; ++t) {
    auto [g, c] = ham::planted(8, r);
    EXPECT_TRUE(ham::is_cycle(g, c));
    EXPECT_EQ(c[0], 0u);
    EXPECT_FALSE(has_hamiltonian_cycle(ham::non_member(8, r)));
    auto pi = ham::random_perm(8, r);
    ham::cycle pc;
    for (auto v : c) pc.push_back(pi[v]);
    EXPECT_TRUE(ham::is_cycle(ham::permute(g, pi), pc));
    auto b = g.serialize();
    reader rd(b);
    EXPECT_EQ(ham::graph::deserialize(rd), g);
  }
}

TEST(ham, rejects_malformed_graphs) {
  ham::graph g(4);
  g.set(1, 1);
  auto b = g.serialize();
  reader rd(b);
  EXPECT_THROW(ham::graph::deserialize(rd), decode_error);
  ham::graph ok(4);
  EXPECT_FALSE(ham::is_cycle(ok, {0, 1, 2, 2}));
}

TEST(wi, linear_system_matches_direct_opening_check) {
  auto su = make_setup(small());
  rng r(seed_from_u64(2), "t");
  auto cs = make_case(*su, r);
  wi::lin_system ls(su->shares(), cs.in);
  auto z = ls.witness_vector(cs.trap.shares);
  EXPECT_EQ(ls.apply(z), ls.target());
  EXPECT_TRUE(trapdoor_oracle(su->shares(), cs.in, z));
  // single-bit perturbations and random vectors: the two checks agree
  int agreed = 0;
  for (int t = 0; t < 300; ++t) {
    auto y = z;
    if (t % 3 == 0) {
      y = r.bits(ls.vars());
    } else {
      y[r.below(y.size())] ^= 1;
    }
    bool a = ls.apply(y) == ls.target();
    agreed += a == trapdoor_oracle(su->shares(), cs.in, y);
  }
  EXPECT_EQ(agreed, 300);
  // shares that xor to another td
  auto other = cs.in;
  other.td[0] ^= 1;
  wi::lin_system ls2(su->shares(), other);
  EXPECT_NE(ls2.apply(z), ls2.target());
}

TEST(wi, both_branches_accept_with_equal_decisions) {
  auto su = make_setup(small());
  rng r(seed_from_u64(3), "t");
  const auto& p = su->prm();
  for (int t = 0; t < 10; ++t) {
    auto cs = make_case(*su, r);
    auto ch = from_bits(r.bits(p.k_wi));
    bool dec[2];
    size_t len[2];
    int i = 0;
    for (auto* w : {&cs.lang, &cs.trap}) {
      wi::prover pv(su->wi(), su->shares(), cs.in, *w, p.k_wi, seed_from_u64(100 + t));
      auto first = pv.first();
      auto resp = pv.respond(ch);
      dec[i] = wi::verify(su->wi(), su->shares(), cs.in, p.k_wi, first, ch, resp);
      len[i++] = first.size() + resp.size();
    }
    EXPECT_TRUE(dec[0]);
    EXPECT_EQ(dec[0], dec[1]);
    EXPECT_EQ(len[0], len[1]);
  }
}

TEST(wi, rejects_tampering_and_bad_witnesses) {
  auto su = make_setup(small());
  rng r(seed_from_u64(4), "t");
  const auto& p = su->prm();
  auto cs = make_case(*su, r);
  wi::prover pv(su->wi(), su->shares(), cs.in, cs.trap, p.k_wi, seed_from_u64(5));
  auto first = pv.first();
  auto ch = from_bits(r.bits(p.k_wi));
  auto resp = pv.respond(ch);
  ASSERT_TRUE(wi::verify(su->wi(), su->shares(), cs.in, p.k_wi, first, ch, resp));
  for (size_t at : {size_t(0), size_t(2), resp.size() / 2, resp.size() - 1}) {
    auto bad = resp;
    bad[at] ^= 0x10;
    EXPECT_FALSE(wi::verify(su->wi(), su->shares(), cs.in, p.k_wi, first, ch, bad)) << at;
  }
  auto bad_first = first;
  bad_first[bad_first.size() - 3] ^= 1;
  EXPECT_FALSE(wi::verify(su->wi(), su->shares(), cs.in, p.k_wi, bad_first, ch, resp));
  EXPECT_FALSE(wi::verify(su->wi(), su->shares(), cs.in, p.k_wi, first, ch, bytes(resp.begin(), resp.end() - 1)));
  // witnesses that do not verify are refused up front
  auto wrong = cs.trap;
  wrong.shares[1].randomness[0] ^= 1;
  EXPECT_THROW(wi::prover(su->wi(), su->shares(), cs.in, wrong, p.k_wi, seed_from_u64(6)), argument_error);
  auto wrong_cycle = cs.lang;
  std::swap(wrong_cycle.cycle[1], wrong_cycle.cycle[2]);
  if (!ham::is_cycle(cs.in.x, wrong_cycle.cycle)) {
    EXPECT_THROW(wi::prover(su->wi(), su->shares(), cs.in, wrong_cycle, p.k_wi, seed_from_u64(6)), argument_error);
  }
}

TEST(wi, generic_cheater_on_non_member_fails) {
  auto su = make_setup(small());
  rng r(seed_from_u64(7), "t");
  const auto& p = su->prm();
  int accepts = 0;
  for (int t = 0; t < 60; ++t) {
    auto cs = make_case(*su, r);
    cs.in.x = ham::non_member(p.graph_n, r);
    cs.in.td[0] ^= 1;  // shares no longer xor to td either
    wi::prover pv(su->wi(), su->shares(), cs.in, std::nullopt, p.k_wi, seed_from_u64(200 + t));
    auto first = pv.first();
    auto ch = from_bits(r.bits(p.k_wi));
    accepts += wi::verify(su->wi(), su->shares(), cs.in, p.k_wi, first, ch, pv.respond(ch));
  }
  EXPECT_EQ(accepts, 0);
}

TEST(qzk, honest_runs_accept) {
  auto su = make_setup(small());
  rng r(seed_from_u64(8), "t");
  for (int t = 0; t < 6; ++t) {
    auto [g, c] = ham::planted(8, r);
    auto res = qzk::run_honest(su, g, c, seed_from_u64(300 + t));
    EXPECT_FALSE(res.abort) << res.abort->reason;
    EXPECT_TRUE(res.accepted);
    EXPECT_EQ(res.transcript.size(), qzk::schedule(false).size());
  }
}

TEST(qzk, same_seed_same_transcript) {
  auto su = make_setup(small());
  rng r(seed_from_u64(9), "t");
  auto [g, c] = ham::planted(8, r);
  auto a = qzk::run_honest(su, g, c, seed_from_u64(1));
  auto b = qzk::run_honest(su, g, c, seed_from_u64(1));
  ASSERT_EQ(a.transcript.size(), b.transcript.size());
  for (size_t i = 0; i < a.transcript.size(); ++i) EXPECT_EQ(a.transcript[i].payload, b.transcript[i].payload);
}

TEST(qzk, inconsistent_reveal_makes_prover_abort_before_wi) {
  auto su = make_setup(small());
  rng r(seed_from_u64(10), "t");
  auto [g, c] = ham::planted(8, r);
  uint32_t reveal_round = 0;
  auto sched = qzk::schedule(false);
  for (size_t i = 0; i < sched.size(); ++i)
    if (sched[i].type == "reveal") reveal_round = uint32_t(i + 1);
  for (auto mode : {qzk::verifier_mode::wrong_rqext, qzk::verifier_mode::wrong_td}) {
    auto res = qzk::run(su, seed_from_u64(11), qzk::prover_of(g, c, qzk::prover_mode::honest), qzk::verifier_of(g, mode));
    ASSERT_TRUE(res.abort);
    EXPECT_EQ(res.abort->from, "P");
    EXPECT_EQ(res.abort->round, reveal_round);
    EXPECT_FALSE(res.accepted);
    for (auto& rec : res.transcript) EXPECT_NE(rec.type, "wi_commit");
  }
  auto res = qzk::run(su, seed_from_u64(11), qzk::prover_of(g, c, qzk::prover_mode::honest),
                      qzk::verifier_of(g, qzk::verifier_mode::wrong_rqext));
  EXPECT_NE(res.abort->reason.find("does not reproduce keys"), std::string::npos) << res.abort->reason;
}

TEST(qzk, soundness_attacks_do_not_convince) {
  auto su = make_setup(small());
  rng r(seed_from_u64(12), "t");
  auto [g, c] = ham::planted(8, r);
  auto bad = ham::non_member(8, r);
  auto recorded = qzk::record_of(qzk::run_honest(su, g, c, seed_from_u64(13)).transcript);
  int counts[3] = {0, 0, 0};
  for (int t = 0; t < 15; ++t) {
    auto seed = seed_from_u64(400 + t);
    counts[0] += qzk::run(su, seed, qzk::prover_of(bad, std::nullopt, qzk::prover_mode::no_witness), qzk::verifier_of(bad)).accepted;
    counts[1] += qzk::run(su, seed, qzk::prover_of(bad, std::nullopt, qzk::prover_mode::td_guesser), qzk::verifier_of(bad)).accepted;
    counts[2] += qzk::run(su, seed, qzk::prover_of(g, std::nullopt, qzk::prover_mode::replayer, recorded), qzk::verifier_of(g)).accepted;
  }
  EXPECT_EQ(counts[0], 0);
  EXPECT_EQ(counts[1], 0);
  EXPECT_EQ(counts[2], 0);
}

TEST(qzk, tiny_td_lets_the_guesser_through_sometimes) {
  // with a 1-bit td the trapdoor branch is open to guessing: a control on the attack wiring
  auto p = small();
  p.td_bits = 1;
  auto su = make_setup(p);
  rng r(seed_from_u64(14), "t");
  auto bad = ham::non_member(8, r);
  int accepts = 0;
  for (int t = 0; t < 12; ++t)
    accepts += qzk::run(su, seed_from_u64(500 + t), qzk::prover_of(bad, std::nullopt, qzk::prover_mode::td_guesser),
                        qzk::verifier_of(bad)).accepted;
  EXPECT_GT(accepts, 0);
  EXPECT_LT(accepts, 12);
}

TEST(qzk, quantum_simulator_matches_real_shape) {
  auto su = make_setup(small());
  rng r(seed_from_u64(15), "t");
  for (int t = 0; t < 4; ++t) {
    auto [g, c] = ham::planted(8, r);
    auto seed = seed_from_u64(600 + t);
    auto real = qzk::run_honest(su, g, c, seed);
    auto sim = qzk::simulate_q(su, g, qzk::verifier_of(g), seed);
    EXPECT_FALSE(sim.abort) << sim.abort->reason;
    EXPECT_TRUE(real.accepted);
    EXPECT_TRUE(sim.accepted);
    EXPECT_EQ(qzk::shape_of(real.transcript), qzk::shape_of(sim.transcript));
    // the verifier's own messages before any prover-dependent step agree byte for byte
    EXPECT_EQ(real.transcript[0].payload, sim.transcript[0].payload);
  }
}

TEST(qzk, simulator_extracts_the_committed_td) {
  auto su = make_setup(small());
  rng r(seed_from_u64(16), "t");
  auto [g, c] = ham::planted(8, r);
  auto s = qzk::make_session(su, seed_from_u64(17), qzk::prover_of(g, std::nullopt, qzk::prover_mode::sim_q),
                             qzk::verifier_of(g));
  s.run();
  auto* pv = qzk::find_prover(s.get("P"));
  auto* vf = qzk::find_verifier(s.get("V"));
  ASSERT_TRUE(pv->extracted());
  EXPECT_EQ(*pv->extracted(), vf->td());
  EXPECT_TRUE(vf->accepted());
}

TEST(qzk, aborting_verifier_aborts_simulation_at_same_round) {
  auto su = make_setup(small());
  rng r(seed_from_u64(18), "t");
  auto [g, c] = ham::planted(8, r);
  for (std::string at : {"challenges", "queries", "reveal"}) {
    qzk::party_factory v = [&, at](qzk::setup_ptr s, session_context* ctx, const seed32& sd) -> std::unique_ptr<party> {
      return std::make_unique<abort_at>(qzk::verifier_of(g)(s, ctx, sd), at);
    };
    auto real = qzk::run(su, seed_from_u64(19), qzk::prover_of(g, c, qzk::prover_mode::honest), v);
    auto sim = qzk::simulate_q(su, g, v, seed_from_u64(19));
    ASSERT_TRUE(real.abort && sim.abort) << at;
    EXPECT_EQ(real.abort->round, sim.abort->round) << at;
    EXPECT_EQ(sim.abort->from, "V");
  }
  // a lying verifier: the simulator aborts where the prover does
  auto real = qzk::run(su, seed_from_u64(20), qzk::prover_of(g, c, qzk::prover_mode::honest),
                       qzk::verifier_of(g, qzk::verifier_mode::wrong_td));
  auto sim = qzk::simulate_q(su, g, qzk::verifier_of(g, qzk::verifier_mode::wrong_td), seed_from_u64(20));
  ASSERT_TRUE(real.abort && sim.abort);
  EXPECT_EQ(real.abort->round, sim.abort->round);
}

TEST(qzk, classical_variant_dual_simulators) {
  auto su = make_setup(small(true));
  rng r(seed_from_u64(21), "t");
  auto [g, c] = ham::planted(8, r);
  auto real = qzk::run_honest(su, g, c, seed_from_u64(22));
  EXPECT_TRUE(real.accepted);
  EXPECT_EQ(real.transcript.size(), qzk::schedule(true).size());

  auto dual = qzk::simulate_dual(su, g, qzk::verifier_of(g), seed_from_u64(22));
  EXPECT_TRUE(dual.classical_ok) << (dual.classical.abort ? dual.classical.abort->reason : dual.classical.sim_failure);
  EXPECT_TRUE(dual.quantum_ok);
  EXPECT_EQ(qzk::shape_of(real.transcript), qzk::shape_of(dual.classical.transcript));
  EXPECT_GT(dual.classical.archive.size(), dual.classical.transcript.size());

  // a verifier that cannot be rewound: only the device simulator works
  auto q = qzk::simulate_dual(su, g, qzk::verifier_of(g, qzk::verifier_mode::honest, false), seed_from_u64(23));
  EXPECT_FALSE(q.classical_ok);
  EXPECT_NE(q.classical.sim_failure.find("cannot be snapshotted"), std::string::npos);
  EXPECT_TRUE(q.quantum_ok);
  EXPECT_THROW(qzk::simulate_c(make_setup(small(false)), g, qzk::verifier_of(g), seed_from_u64(1)), config_error);
}

TEST(qzk, config_errors) {
  auto p = small();
  p.k = 0;
  EXPECT_THROW(qzk::setup{p}, config_error);
  p = small();
  p.k_wi = 0;
  EXPECT_THROW(qzk::setup{p}, config_error);
  p = small();
  p.graph_n = 2;
  EXPECT_THROW(qzk::setup{p}, config_error);
  auto su = make_setup(small());
  rng r(seed_from_u64(24), "t");
  auto [g, c] = ham::planted(8, r);
  auto wrong = c;
  std::reverse(wrong.begin() + 1, wrong.end());
  if (!ham::is_cycle(g, wrong)) {
    EXPECT_THROW(qzk::run_honest(su, g, wrong, seed_from_u64(1)), argument_error);
  }
}
