#include <gtest/gtest.h>

#include "qext/session.hpp"

using namespace qext;

namespace {

// toy two-party exchange: A sends a random byte, B echoes it xored with its own
class toy : public party {
 public:
  toy(std::string role, seed32 seed) : role_(std::move(role)), r_(seed, "toy/" + role_) {}
  std::string role() const override { return role_; }
  void receive(const message& m) override {
    if (m.payload.size() != 1) throw protocol_error("toy: bad payload");
    last_ = m.payload[0];
  }
  message send(const std::string& type) override {
    if (abort_on == type) throw protocol_error("toy: refusing " + type);
    return {type, {uint8_t(r_.take(1)[0] ^ last_)}, {}};
  }
  std::unique_ptr<party> clone() const override {
    if (!snapshotable) return nullptr;
    return std::make_unique<toy>(*this);
  }
  void fork(std::string_view branch) override { r_ = r_.derive(branch); }

  bool snapshotable = true;
  std::string abort_on;

 private:
  std::string role_;
  rng r_;
  uint8_t last_ = 0;
};

std::vector<step> schedule() { return {{"A", "B", "m1"}, {"B", "A", "m2"}, {"A", "B", "m3"}, {"B", "A", "m4"}}; }

session make(uint64_t s, bool swap = false) {
  std::vector<std::unique_ptr<party>> ps;
  ps.push_back(std::make_unique<toy>("A", seed_from_u64(s)));
  ps.push_back(std::make_unique<toy>("B", seed_from_u64(s + 1000)));
  if (swap) std::swap(ps[0], ps[1]);
  return session("s" + std::to_string(s), {"toy", "{}", ""}, schedule(), std::move(ps), nullptr);
}

std::vector<bytes> payloads(const std::vector<record>& rs) {
  std::vector<bytes> out;
  for (auto& r : rs) out.push_back(r.payload);
  return out;
}

}  // namespace

TEST(session, deterministic) {
  auto a = make(1), b = make(1), c = make(2);
  a.run();
  b.run();
  c.run();
  EXPECT_EQ(payloads(a.records()), payloads(b.records()));
  EXPECT_NE(payloads(a.records()), payloads(c.records()));
  EXPECT_EQ(a.records().size(), 4u);
  EXPECT_TRUE(a.done());
}

TEST(session, swapped_parties) {
  try {
    make(1, true);
    FAIL();
  } catch (const session_error& e) {
    EXPECT_NE(std::string(e.what()).find("round 0"), std::string::npos);
  }
}

TEST(session, abort_is_a_record) {
  auto s = make(3);
  dynamic_cast<toy&>(s.get("B")).abort_on = "m2";
  s.run();
  ASSERT_TRUE(s.aborted());
  auto r = s.abort_record();
  ASSERT_TRUE(r);
  EXPECT_EQ(r->round, 2u);
  EXPECT_EQ(r->from, "B");
  EXPECT_EQ(s.records().size(), 2u);
}

TEST(session, restore_replays_and_forks) {
  auto s = make(4);
  s.run_until(2);
  auto tok = s.snapshot();
  s.run();
  auto first = payloads(s.records());
  s.restore(tok);
  EXPECT_EQ(s.round(), 2u);
  s.run();
  EXPECT_EQ(payloads(s.records()), first);
  EXPECT_EQ(s.id(), "s4/b1");

  s.restore(tok, {"A"});
  s.run();
  auto forked = payloads(s.records());
  EXPECT_EQ(s.id(), "s4/b2");
  EXPECT_EQ(std::vector<bytes>(forked.begin(), forked.begin() + 2), std::vector<bytes>(first.begin(), first.begin() + 2));
  EXPECT_NE(forked[2], first[2]);
  EXPECT_EQ(s.archive().size(), 4u + 2u + 2u);
  EXPECT_EQ(s.archive().back().session, "s4/b2");
}

TEST(session, foreign_token_and_capability) {
  auto a = make(5), b = make(6);
  auto tok = a.snapshot();
  EXPECT_THROW(b.restore(tok), restore_error);
  dynamic_cast<toy&>(b.get("A")).snapshotable = false;
  EXPECT_THROW(b.snapshot(), capability_error);
}

TEST(qfhe, eval_commutes_with_decrypt) {
  qfhe::oracle o;
  rng r(seed_from_u64(7), "fhe");
  auto kp = o.keygen(r);
  for (int t = 0; t < 1000; ++t) {
    auto m = r.take(1 + r.below(40));
    uint8_t k = r.take(1)[0];
    qfhe::program f = [k](const std::vector<bytes>& in) {
      bytes out = in[0];
      for (auto& b : out) b = uint8_t(b * 3 + k);
      return out;
    };
    auto ct = o.encrypt(kp.pk, m, r);
    EXPECT_EQ(ct.size(), qfhe::oracle::ciphertext_len(m.size()));
    auto e = o.decrypt(kp.sk, o.eval(kp.pk, f, {ct}, r));
    ASSERT_TRUE(e);
    EXPECT_EQ(*e, f({m}));
  }
}

TEST(qfhe, key_separation) {
  qfhe::oracle o;
  rng r(seed_from_u64(8), "fhe");
  auto a = o.keygen(r), b = o.keygen(r);
  auto ct = o.encrypt(a.pk, {1, 2, 3}, r);
  EXPECT_FALSE(o.decrypt(b.sk, ct));
  EXPECT_THROW(o.eval(b.pk, [](auto& v) { return v[0]; }, {ct}, r), argument_error);
  auto t = ct;
  t.back() ^= 1;
  EXPECT_FALSE(o.decrypt(a.sk, t));
  EXPECT_EQ(qfhe::oracle::pk_of(ct), a.pk);
}

TEST(obf, releases_iff_lock_matches) {
  obf_oracle o;
  rng r(seed_from_u64(9), "obf");
  bytes lock = r.take(16), payload = r.take(32);
  auto p = build_cc_circuit([](const bytes& x) -> std::optional<bytes> { return x; }, lock, payload);
  auto h = o.obfuscate(p, r);
  EXPECT_EQ(h.size(), obf_oracle::handle_len);
  EXPECT_EQ(o.eval(h, lock), payload);
  for (int t = 0; t < 10000; ++t) EXPECT_FALSE(o.eval(h, r.take(16)));
  auto sim = o.simulate(r);
  EXPECT_EQ(sim.size(), h.size());
  EXPECT_TRUE(o.known(sim));
  EXPECT_FALSE(o.eval(sim, lock));
  EXPECT_THROW(build_cc_circuit({}, lock, payload), config_error);
  EXPECT_THROW(build_cc_circuit([](const bytes& x) -> std::optional<bytes> { return x; }, {}, payload), config_error);
}
