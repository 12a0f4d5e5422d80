#pragma once

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "qext/f_qqext.hpp"
#include "qext/session.hpp"

namespace qext::qqext {

struct params {
  uint32_t ell = 16;  // bits of td, one c*_i each
  uint32_t witness_len = 16;
  sfe::backend backend = sfe::backend::ideal;
  seed32 public_seed{};

  void validate() const {
    if (ell == 0 || ell > 256) throw config_error("qqext: ell must be in [1, 256]");
    if (witness_len == 0) throw config_error("qqext: witness_len must be positive");
  }
};

constexpr size_t lock_len = 16;
constexpr size_t sk_len = 32;

class setup {
 public:
  explicit setup(params p) : p_((p.validate(), p)), lay_(p_.ell, p_.public_seed), fn_(build_f_qqext(lay_)) {}
  setup(const setup&) = delete;
  setup& operator=(const setup&) = delete;

  const params& prm() const { return p_; }
  const f_layout& layout() const { return lay_; }
  const functionality& f() const { return fn_; }
  // CT1 plaintext: 0x01 || td || w
  size_t ct1_plain_len() const { return 1 + lay_.td_len() + p_.witness_len; }

  bytes random_td(rng& r) const {
    auto td = r.take(lay_.td_len());
    for (size_t b = p_.ell; b < td.size() * 8; ++b) set_bit(td, b, 0);
    return td;
  }

 private:
  params p_;
  f_layout lay_;
  functionality fn_;
};

using setup_ptr = std::shared_ptr<const setup>;

// ---- msg1 wire format

struct msg1 {
  bytes ct1;
  bytes handle;
  bytes otp;

  bytes serialize() const {
    nlohmann::ordered_json j;
    j["ct1_hex"] = to_hex(ct1);
    j["obf_handle_id"] = to_hex(handle);
    j["otp_hex"] = to_hex(otp);
    auto s = j.dump();
    return bytes(s.begin(), s.end());
  }

  static msg1 parse(const setup& su, const bytes& b) {
    msg1 m;
    try {
      auto j = nlohmann::json::parse(std::string(b.begin(), b.end()));
      m.ct1 = from_hex(j.at("ct1_hex").get<std::string>());
      m.handle = from_hex(j.at("obf_handle_id").get<std::string>());
      m.otp = from_hex(j.at("otp_hex").get<std::string>());
      if (j.size() != 3) throw protocol_error("msg1 has extra fields");
    } catch (const nlohmann::json::exception& e) {
      throw protocol_error(std::string("malformed msg1: ") + e.what());
    } catch (const decode_error& e) {
      throw protocol_error(std::string("malformed msg1: ") + e.what());
    }
    if (m.otp.size() != sk_len) throw protocol_error("msg1 otp has wrong length");
    if (m.handle.size() != obf_oracle::handle_len) throw protocol_error("msg1 handle has wrong length");
    if (m.ct1.size() != qfhe::oracle::ciphertext_len(su.ct1_plain_len()))
      throw protocol_error("msg1 ciphertext has wrong length");
    return m;
  }
};

// ---- sender as a pure transition over its serialized state

enum class sender_mode : uint8_t {
  honest = 0,
  simulator = 1,  // CT1 of zeros, simulated handle, uniform otp, bottom into f
  zero_td = 2,    // degenerate td = 0 (rejected in honest mode)
  refuse_sfe = 3, // follows the protocol up to its SFE message, then refuses
};

enum class phase : uint8_t { want_c, send_msg1, want_cstar, want_sfe1, send_sfe2, done };

struct sender_state {
  sender_mode mode = sender_mode::honest;
  phase ph = phase::want_c;
  rng r;
  bytes instance, witness;
  bytes td, c, sk2;
  std::vector<bytes> cstar;
  bytes sfe1;

  bytes serialize() const {
    writer w;
    w.u8(uint8_t(mode)).u8(uint8_t(ph)).raw(r.serialize());
    w.blob(instance).blob(witness).blob(td).blob(c).blob(sk2).u32(uint32_t(cstar.size()));
    for (auto& x : cstar) w.blob(x);
    w.blob(sfe1);
    return w.take();
  }
  static sender_state deserialize(const bytes& b) {
    reader rd(b);
    sender_state s;
    s.mode = sender_mode(rd.u8());
    s.ph = phase(rd.u8());
    if (uint8_t(s.mode) > 3 || uint8_t(s.ph) > 5) throw decode_error("sender state has bad tags");
    s.r = rng::deserialize(rd);
    s.instance = rd.blob(), s.witness = rd.blob(), s.td = rd.blob(), s.c = rd.blob(), s.sk2 = rd.blob();
    uint32_t n = rd.u32();
    if (n > 4096) throw decode_error("sender state too large");
    for (uint32_t i = 0; i < n; ++i) s.cstar.push_back(rd.blob());
    s.sfe1 = rd.blob();
    rd.expect_done();
    return s;
  }
};

inline bytes initial_state(const setup& su, const seed32& randomness, const bytes& instance, const bytes& witness,
                           sender_mode mode = sender_mode::honest) {
  if (witness.size() != su.prm().witness_len) throw argument_error("qqext: witness has wrong length");
  sender_state s;
  s.mode = mode;
  s.r = rng(randomness, "qqext/sender");
  s.instance = instance;
  s.witness = witness;
  return s.serialize();
}

// the compute-and-compare inner procedure: Dec(SK1, CT) -> SK2', Dec(SK2', CT*)
inline std::function<std::optional<bytes>(const bytes&)> lock_inner(const qfhe::oracle* fhe, bytes sk1, bytes cstar_ct) {
  return [fhe, sk1 = std::move(sk1), cstar_ct = std::move(cstar_ct)](const bytes& ct) -> std::optional<bytes> {
    auto sk2 = fhe->decrypt(sk1, ct);
    if (!sk2) return std::nullopt;
    return fhe->decrypt(*sk2, cstar_ct);
  };
}

inline bytes sender_receive(const setup& su, session_context& env, const bytes& state, const message& m) {
  (void)env;
  auto s = sender_state::deserialize(state);
  const auto& lay = su.layout();
  if (m.type == "commit_r" && s.ph == phase::want_c) {
    if (m.payload.size() != lay.c_len()) throw protocol_error("commitment c has wrong length");
    s.c = m.payload;
    s.ph = phase::send_msg1;
  } else if (m.type == "commit_td" && s.ph == phase::want_cstar) {
    if (m.payload.size() != size_t(lay.ell) * lay.cstar_len()) throw protocol_error("c* has wrong length");
    for (uint32_t i = 0; i < lay.ell; ++i) s.cstar.push_back(slice(m.payload, i * lay.cstar_len(), lay.cstar_len()));
    s.ph = phase::want_sfe1;
  } else if (m.type == "sfe1" && s.ph == phase::want_sfe1) {
    s.sfe1 = m.payload;
    s.ph = phase::send_sfe2;
  } else {
    throw protocol_error("sender did not expect '" + m.type + "' now");
  }
  return s.serialize();
}

inline std::pair<bytes, message> sender_send(const setup& su, session_context& env, const bytes& state,
                                             const std::string& type) {
  auto s = sender_state::deserialize(state);
  const auto& lay = su.layout();
  if (type == "msg1" && s.ph == phase::send_msg1) {
    auto kp1 = env.fhe.keygen(s.r);
    auto kp2 = env.fhe.keygen(s.r);
    msg1 m;
    if (s.mode == sender_mode::simulator) {
      m.ct1 = env.fhe.encrypt(kp1.pk, bytes(su.ct1_plain_len(), 0), s.r);
      m.handle = env.obf.simulate(s.r);
      m.otp = s.r.take(sk_len);
    } else {
      if (s.mode == sender_mode::zero_td) {
        s.td = bytes(lay.td_len(), 0);
      } else {
        do {
          s.td = su.random_td(s.r);
        } while (all_zero(s.td));
      }
      bytes pt{1};
      append(pt, s.td);
      append(pt, s.witness);
      m.ct1 = env.fhe.encrypt(kp1.pk, pt, s.r);
      auto lock = s.r.take(lock_len);
      auto k = s.r.take(sk_len);
      auto cstar_ct = env.fhe.encrypt(kp2.pk, lock, s.r);
      m.handle = env.obf.obfuscate(build_cc_circuit(lock_inner(&env.fhe, kp1.sk, cstar_ct), lock, k), s.r);
      m.otp = xor_bytes(k, kp1.sk);
    }
    s.sk2 = kp2.sk;
    s.ph = phase::want_cstar;
    return {s.serialize(), {type, m.serialize(), {}}};
  }
  if (type == "sfe2" && s.ph == phase::send_sfe2) {
    if (s.mode == sender_mode::refuse_sfe) throw protocol_error("sender refuses to run the SFE");
    bytes in = s.mode == sender_mode::simulator ? lay.bottom_sender_input()
                                                : lay.sender_input(s.td, s.c, s.cstar, s.sk2);
    auto m2 = sfe::sender_msg2(env.sfe, su.f(), in, sfe::message::deserialize(s.sfe1), s.r);
    s.ph = phase::done;
    return {s.serialize(), {type, m2.serialize(), {}}};
  }
  throw protocol_error("sender cannot send '" + type + "' now");
}

// the sender's td as recorded in its state, for checking extraction
inline bytes state_td(const bytes& state) { return sender_state::deserialize(state).td; }

// the td a sender with this initial state draws at msg1; it depends only on
// the declared randomness, so a dummy commitment reproduces it
inline bytes drawn_td(const setup& su, const bytes& init) {
  session_context env(seed_from_u64(0));
  auto st = sender_receive(su, env, init, {"commit_r", bytes(su.layout().c_len(), 0), {}});
  return state_td(sender_send(su, env, st, "msg1").first);
}

class sender_party : public party {
 public:
  sender_party(setup_ptr su, session_context* env, bytes state)
      : su_(std::move(su)), env_(env), state_(std::move(state)) {}
  std::string role() const override { return "S"; }
  void receive(const message& m) override { state_ = sender_receive(*su_, *env_, state_, m); }
  message send(const std::string& type) override {
    auto [st, m] = sender_send(*su_, *env_, state_, type);
    state_ = std::move(st);
    return m;
  }
  std::unique_ptr<party> clone() const override { return std::make_unique<sender_party>(*this); }
  const bytes& state() const { return state_; }

 private:
  setup_ptr su_;
  session_context* env_;
  bytes state_;
};

// ---- receiver

struct receiver_secrets {
  bytes d;
  std::vector<bytes> r;
  bytes c;
};

inline receiver_secrets receiver_commit(const setup& su, rng& r) {
  const auto& lay = su.layout();
  receiver_secrets out;
  for (uint32_t i = 0; i < lay.ell; ++i) out.r.push_back(lay.bit_scheme.sample_randomness(r));
  bytes cat;
  for (auto& x : out.r) append(cat, x);
  out.d = lay.vec_scheme.sample_randomness(r);
  out.c = lay.vec_scheme.commit(cat, out.d);
  return out;
}

class receiver_party : public party {
 public:
  receiver_party(setup_ptr su, session_context* env, const seed32& seed)
      : su_(std::move(su)), env_(env), r_(seed, "qqext/receiver") {}
  std::string role() const override { return "R"; }
  void receive(const message& m) override {
    if (m.type == "msg1") {
      m1_ = msg1::parse(*su_, m.payload);
    } else if (m.type == "sfe2") {
      if (!st_) throw protocol_error("sfe2 before sfe1");
      output_ = decode_output(sfe::receiver_output(*st_, su_->f(), sfe::message::deserialize(m.payload)));
      done_ = true;
    } else {
      throw protocol_error("receiver got unexpected '" + m.type + "'");
    }
  }
  message send(const std::string& type) override {
    const auto& lay = su_->layout();
    if (type == "commit_r") {
      sec_ = receiver_commit(*su_, r_);
      return {type, sec_.c, {}};
    }
    if (type == "commit_td") {
      bytes out;
      for (auto& ri : sec_.r) append(out, lay.bit_scheme.commit(bytes{0}, ri));
      return {type, out, {}};
    }
    if (type == "sfe1") {
      auto [m1, st] = sfe::receiver_msg1(env_->sfe, su_->prm().backend, su_->f(), lay.receiver_input(sec_.d, sec_.r), r_);
      st_ = st;
      return {type, m1.serialize(), {}};
    }
    throw protocol_error("receiver cannot send '" + type + "'");
  }
  std::unique_ptr<party> clone() const override { return std::make_unique<receiver_party>(*this); }

  bool done() const { return done_; }
  const std::optional<bytes>& output() const { return output_; }
  const std::optional<msg1>& first_message() const { return m1_; }
  const sfe::receiver_state* sfe_state() const { return st_ ? &*st_ : nullptr; }

 private:
  setup_ptr su_;
  session_context* env_;
  rng r_;
  receiver_secrets sec_;
  std::optional<msg1> m1_;
  std::optional<sfe::receiver_state> st_;
  std::optional<bytes> output_;
  bool done_ = false;
};

// ---- drivers

// anti-mauling order: c strictly before msg1
inline const std::vector<step>& schedule() {
  static const std::vector<step> s = {
      {"R", "S", "commit_r"}, {"S", "R", "msg1"}, {"R", "S", "commit_td"}, {"R", "S", "sfe1"}, {"S", "R", "sfe2"},
  };
  return s;
}

inline std::string params_json(const params& p) {
  return "{\"ell\":" + std::to_string(p.ell) + ",\"witness_len\":" + std::to_string(p.witness_len) + ",\"sfe\":\"" +
         sfe::backend_name(p.backend) + "\"}";
}

struct run_result {
  std::vector<record> transcript;
  std::optional<bytes> output;
  std::optional<record> abort;
  std::vector<size_t> lengths;
  bytes sender_state;
  std::optional<msg1> first;
  sfe::context sfe_ctx;
  std::optional<sfe::receiver_state> sfe_state;
};

using receiver_factory = std::function<std::unique_ptr<party>(setup_ptr, session_context*, const seed32&)>;

inline receiver_factory honest_receiver() {
  return [](setup_ptr su, session_context* env, const seed32& s) -> std::unique_ptr<party> {
    return std::make_unique<receiver_party>(std::move(su), env, s);
  };
}

inline receiver_party* find_receiver(party& p) {
  if (auto* r = dynamic_cast<receiver_party*>(&p)) return r;
  if (auto* a = dynamic_cast<abort_at*>(&p)) return find_receiver(a->inner());
  return nullptr;
}

inline run_result run_with_state(setup_ptr su, const seed32& seed, const bytes& sender_init,
                                 const receiver_factory& receiver = honest_receiver()) {
  auto ctx = std::make_unique<session_context>(derive_seed(seed, "qqext/ctx"));
  std::vector<std::unique_ptr<party>> ps;
  ps.push_back(receiver(su, ctx.get(), derive_seed(seed, "qqext/R")));
  ps.push_back(std::make_unique<sender_party>(su, ctx.get(), sender_init));
  session s("qqext", {"qqext", params_json(su->prm()), seed_hex(seed)}, schedule(), std::move(ps), std::move(ctx));
  s.run();
  run_result out;
  out.transcript = s.records();
  out.abort = s.abort_record();
  for (auto& r : s.records())
    if (!r.is_abort()) out.lengths.push_back(r.payload.size());
  out.sender_state = dynamic_cast<sender_party&>(s.get("S")).state();
  if (auto* r = find_receiver(s.get("R"))) {
    if (r->done()) out.output = r->output();
    out.first = r->first_message();
    if (auto* st = r->sfe_state()) out.sfe_state = *st;
  }
  out.sfe_ctx = s.context().sfe;
  return out;
}

inline run_result run_honest(setup_ptr su, const bytes& instance, const bytes& witness, const seed32& seed,
                             sender_mode mode = sender_mode::honest) {
  auto init = initial_state(*su, derive_seed(seed, "qqext/S"), instance, witness, mode);
  return run_with_state(std::move(su), seed, init);
}

inline run_result zk_simulate(setup_ptr su, const bytes& instance, const receiver_factory& receiver,
                              const seed32& seed) {
  auto init = initial_state(*su, derive_seed(seed, "qqext/S"), instance, bytes(su->prm().witness_len, 0),
                            sender_mode::simulator);
  return run_with_state(std::move(su), seed, init, receiver);
}

// a semi-malicious sender: its code is the transition pair, its randomness is
// whatever initial state it declares
struct sender_machine {
  bytes state;
  std::function<bytes(const setup&, session_context&, const bytes&, const message&)> receive = sender_receive;
  std::function<std::pair<bytes, message>(const setup&, session_context&, const bytes&, const std::string&)> send =
      sender_send;
};

struct nbb_result {
  std::optional<bytes> witness;
  bytes td;
  std::string reason;
  // what the extractor holds about the sender, all of it sealed under PK1
  size_t sealed_state_len = 0;
  size_t sealed_output_len = 0;
  bytes pk1;
};

// non-black-box extraction: run the sender's remaining code under the
// sender's own FHE key, then unlock SK1 with the encrypted SFE output
inline nbb_result nbb_extract(setup_ptr su, const sender_machine& snd, const seed32& seed) {
  const auto& lay = su->layout();
  session_context env(derive_seed(seed, "qqext/ctx"));
  rng r(derive_seed(seed, "qqext/ext"), "qqext/receiver");
  nbb_result res;

  auto sec = receiver_commit(*su, r);
  bytes state;
  msg1 m1;
  try {
    state = snd.receive(*su, env, snd.state, {"commit_r", sec.c, {}});
    auto [st, out] = snd.send(*su, env, state, "msg1");
    state = std::move(st);
    m1 = msg1::parse(*su, out.payload);
  } catch (const protocol_error& e) {
    res.reason = std::string("sender aborted before msg1: ") + e.what();
    return res;
  }
  auto pk1 = qfhe::oracle::pk_of(m1.ct1);
  res.pk1 = pk1;

  bytes secrets = sec.d;
  append(secrets, sec.c);
  for (auto& ri : sec.r) append(secrets, ri);
  auto enc_state = env.fhe.encrypt(pk1, state, r);
  auto enc_secrets = env.fhe.encrypt(pk1, secrets, r);
  res.sealed_state_len = enc_state.size();

  auto split = [&lay](const bytes& sc) {
    receiver_secrets s;
    s.d = slice(sc, 0, lay.d_len());
    s.c = slice(sc, lay.d_len(), lay.c_len());
    for (uint32_t i = 0; i < lay.ell; ++i) s.r.push_back(slice(sc, lay.d_len() + lay.c_len() + i * lay.r_len(), lay.r_len()));
    return s;
  };

  // c*_i = Comm(td_i; r_i) under the encryption, td read from CT1
  qfhe::program commit_td = [&](const std::vector<bytes>& in) {
    auto s = split(in[1]);
    auto td = slice(in[0], 1, lay.td_len());
    bytes out;
    for (uint32_t i = 0; i < lay.ell; ++i) append(out, lay.bit_scheme.commit(bytes{uint8_t(get_bit(td, i))}, s.r[i]));
    return out;
  };
  auto enc_cstar = env.fhe.eval(pk1, commit_td, {m1.ct1, enc_secrets}, r);

  // the SFE interaction, both sides, under the encryption; yields SK2 or zeros
  std::string sfe_failure;
  qfhe::program interact = [&](const std::vector<bytes>& in) {
    auto s = split(in[1]);
    rng rr(derive_seed(seed, "qqext/ext-sfe"), "qqext/receiver");
    try {
      auto st = snd.receive(*su, env, in[0], {"commit_td", in[2], {}});
      auto [m, rst] = sfe::receiver_msg1(env.sfe, su->prm().backend, su->f(), lay.receiver_input(s.d, s.r), rr);
      st = snd.receive(*su, env, st, {"sfe1", m.serialize(), {}});
      auto [st2, m2] = snd.send(*su, env, st, "sfe2");
      auto out = decode_output(sfe::receiver_output(rst, su->f(), sfe::message::deserialize(m2.payload)));
      if (out) return *out;
      sfe_failure = "SFE output was bottom";
    } catch (const protocol_error& e) {
      sfe_failure = e.what();
    }
    return bytes(sk_len, 0);
  };
  auto enc_out = env.fhe.eval(pk1, interact, {enc_state, enc_secrets, enc_cstar}, r);
  res.sealed_output_len = enc_out.size();

  auto k = env.obf.eval(m1.handle, enc_out);
  if (!k) {
    res.reason = "locked program released nothing" + (sfe_failure.empty() ? "" : " (" + sfe_failure + ")");
    return res;
  }
  auto sk1 = xor_bytes(*k, m1.otp);
  auto pt = env.fhe.decrypt(sk1, m1.ct1);
  if (!pt || pt->size() != su->ct1_plain_len() || (*pt)[0] != 1) {
    res.reason = "CT1 did not decrypt under the unlocked key";
    return res;
  }
  res.td = slice(*pt, 1, lay.td_len());
  res.witness = slice(*pt, 1 + lay.td_len(), su->prm().witness_len);
  return res;
}

}  // namespace qext::qqext
