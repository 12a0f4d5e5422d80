#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qext/circuit.hpp"
#include "qext/commit.hpp"
#include "qext/ntcf.hpp"
#include "qext/session.hpp"

namespace qext::cqext {

struct params {
  ntcf::params ntcf = ntcf::preset("toy8");
  uint32_t k = 16;
  sfe::backend backend = sfe::backend::ideal;
  uint32_t witness_len = 16;
  uint32_t threshold = 0;  // divergence threshold of the hybrid; 0 picks ceil(log2 k) + 2
  seed32 public_seed{};    // commitment matrices

  void validate() const {
    ntcf.validate();
    if (k == 0) throw config_error("cqext: k must be at least 1");
    if (k > 64) throw config_error("cqext: k above 64");
    if (backend != sfe::backend::ideal) throw config_error("cqext: F is native-only, use the ideal sfe backend");
    if (witness_len == 0) throw config_error("cqext: witness_len must be positive");
  }

  uint32_t divergence_threshold() const {
    if (threshold) return threshold;
    return uint32_t(std::ceil(std::log2(double(k)))) + 2;
  }
};

// (instance, witness) checker
struct relation {
  std::string name;
  size_t witness_len = 0;
  std::function<bool(const bytes&, const bytes&)> holds;
};

// demo relation: instance = BLAKE2b(witness)
inline relation preimage_relation(size_t witness_len) {
  return {"preimage", witness_len, [witness_len](const bytes& inst, const bytes& w) {
            return w.size() == witness_len && inst == hash_bytes(w, 32);
          }};
}

struct answer {
  int bit = 0;   // b on challenge 0, u on challenge 1
  bitvec bits;   // J(x) or d
};

struct tuple {
  uint32_t i = 0;
  int b = 0;
  uint32_t x = 0;
  bitvec d;
  int u = 0;
};

class setup;
bytes eval_f(const setup& su, const bytes& s, const bytes& r);

// public parameters both parties derive: share commitment block, F and sizes
class setup {
 public:
  explicit setup(params p) : p_(std::move(p)) {
    p_.validate();
    shares_ = commit::scheme(1 + p_.ntcf.w_len, p_.public_seed, "cqext/shares");
    fn_.name = "F";
    fn_.sender_len = sender_len();
    fn_.receiver_len = receiver_len();
    fn_.output_len = 1 + p_.witness_len;
    fn_.native = [this](const bytes& s, const bytes& r) { return eval_f(*this, s, r); };
  }

  // F captures this object, so it must stay put
  setup(const setup&) = delete;
  setup& operator=(const setup&) = delete;

  const params& prm() const { return p_; }
  const commit::scheme& shares() const { return shares_; }
  const functionality& f() const { return fn_; }
  uint32_t k() const { return p_.k; }

  size_t key_len() const { return 24 + 4 * (size_t(p_.ntcf.m) * p_.ntcf.n + p_.ntcf.m); }
  size_t y_len() const { return 4 * size_t(p_.ntcf.m); }
  size_t open_len() const { return shares_.msg_len() + shares_.rand_len(); }
  size_t row_len() const { return 2 * size_t(shares_.rows()) + 1 + open_len(); }
  size_t block_len() const { return key_len() + 4 + y_len() + 1 + size_t(p_.k) * row_len(); }
  size_t sender_len() const { return 1 + size_t(p_.k) * block_len() + p_.witness_len; }
  size_t receiver_len() const { return size_t(p_.k) * p_.k * open_len(); }

  bytes encode_answer(const answer& a) const {
    bytes out(shares_.msg_len(), 0);
    set_bit(out, 0, a.bit);
    for (uint32_t i = 0; i < p_.ntcf.w_len; ++i) set_bit(out, 1 + i, a.bits[i]);
    return out;
  }
  answer decode_answer(const bytes& m) const {
    if (m.size() != shares_.msg_len()) throw decode_error("answer has wrong length");
    answer a;
    a.bit = get_bit(m, 0);
    a.bits.resize(p_.ntcf.w_len);
    for (uint32_t i = 0; i < p_.ntcf.w_len; ++i) a.bits[i] = uint8_t(get_bit(m, 1 + i));
    return a;
  }

  // a share with the slack bits cleared
  bytes random_share(rng& r) const {
    auto s = r.take(shares_.msg_len());
    for (uint32_t b = shares_.msg_bits; b < shares_.msg_len() * 8; ++b) set_bit(s, b, 0);
    return s;
  }

 private:
  params p_;
  commit::scheme shares_;
  functionality fn_;
};

using setup_ptr = std::shared_ptr<const setup>;

inline bool check_answer(const setup& su, ntcf::trapdoor& td, const ntcf::zvec& y, int v, const answer& a,
                         tuple* out = nullptr) {
  const auto& p = su.prm().ntcf;
  try {
    if (v == 0) {
      auto x = ntcf::j_decode(p, a.bits);
      if (ntcf::inv(td, a.bit, y) != x) return false;
      if (out) out->b = a.bit, out->x = x;
    } else {
      if (!ntcf::in_good_set(p, a.bits)) return false;
      auto c = ntcf::claw_of(td, y);
      if (ntcf::claw_equation(p, c, a.bits) != a.bit) return false;
      if (out) out->d = a.bits, out->u = a.bit;
    }
  } catch (const error&) {
    return false;
  }
  return true;
}

inline bytes eval_f(const setup& su, const bytes& s, const bytes& r) {
  const auto& p = su.prm();
  const auto& sch = su.shares();
  auto bottom = encode_bottom(su.f().output_len);
  if (s[0] != 1) return bottom;
  try {
    reader rs(s), rr(r);
    rs.u8();
    for (uint32_t i = 0; i < p.k; ++i) {
      ntcf::trapdoor td;
      td.k = ntcf::key::deserialize(rs.raw(su.key_len()));
      td.s = rs.u32();
      if (!ntcf::in_domain(p.ntcf, td.s)) return bottom;
      td.s_vec = ntcf::encode_x(p.ntcf, td.s);
      auto y = ntcf::deserialize_y(rs, p.ntcf);
      int v = rs.u8() & 1;
      std::optional<bytes> a;
      for (uint32_t j = 0; j < p.k; ++j) {
        bytes c[2] = {rs.raw(sch.rows()), rs.raw(sch.rows())};
        int w = rs.u8() & 1;
        auto sh_open = rs.raw(sch.msg_len()), d_open = rs.raw(sch.rand_len());
        auto sh = rr.raw(sch.msg_len()), d = rr.raw(sch.rand_len());
        if (!sch.verify_open(c[w], sh_open, d_open) || !sch.verify_open(c[1 - w], sh, d)) return bottom;
        auto aj = xor_bytes(sh_open, sh);
        if (a && *a != aj) return bottom;
        a = aj;
      }
      if (!check_answer(su, td, y, v, su.decode_answer(*a))) return bottom;
    }
    auto w = rs.raw(p.witness_len);
    rs.expect_done();
    return encode_value(w, su.f().output_len);
  } catch (const error&) {
    return bottom;
  }
}

// ---- wire formats

inline std::vector<ntcf::key> parse_keys(const setup& su, const bytes& b) {
  if (b.size() != su.k() * su.key_len()) throw protocol_error("keys message has wrong length");
  reader rd(b);
  std::vector<ntcf::key> out;
  for (uint32_t i = 0; i < su.k(); ++i) {
    try {
      out.push_back(ntcf::key::deserialize(rd.raw(su.key_len())));
    } catch (const config_error& e) {
      throw protocol_error(std::string("bad key parameters: ") + e.what());
    }
    if (!(out.back().prm == su.prm().ntcf)) throw protocol_error("key parameters differ from the session's");
  }
  return out;
}

inline std::vector<ntcf::zvec> parse_images(const setup& su, const bytes& b) {
  if (b.size() != su.k() * su.y_len()) throw protocol_error("images message has wrong length");
  reader rd(b);
  std::vector<ntcf::zvec> out;
  for (uint32_t i = 0; i < su.k(); ++i) out.push_back(ntcf::deserialize_y(rd, su.prm().ntcf));
  return out;
}

inline bitvec parse_bits(const bytes& b, size_t n, const char* what) {
  if (b.size() != (n + 7) / 8) throw protocol_error(std::string(what) + " message has wrong length");
  auto bits = to_bits(b, n);
  if (from_bits(bits) != b) throw protocol_error(std::string(what) + " message has nonzero padding");
  return bits;
}

inline std::vector<bytes> parse_grid(const setup& su, const bytes& b) {
  reader rd(b);
  if (b.size() < 8 || rd.u32() != su.k() || rd.u32() != su.k()) throw protocol_error("grid has wrong shape");
  std::vector<bytes> out;
  for (size_t n = 0; n < size_t(su.k()) * su.k() * 2; ++n) {
    out.push_back(rd.blob());
    if (out.back().size() != su.shares().commitment_len()) throw protocol_error("grid commitment has wrong length");
  }
  rd.expect_done();
  return out;
}

inline std::vector<commit::opening> parse_openings(const setup& su, const bytes& b) {
  size_t n = size_t(su.k()) * su.k();
  if (b.size() != n * su.open_len()) throw protocol_error("openings message has wrong length");
  reader rd(b);
  std::vector<commit::opening> out;
  for (size_t i = 0; i < n; ++i) {
    commit::opening o;
    o.message = rd.raw(su.shares().msg_len());
    o.randomness = rd.raw(su.shares().rand_len());
    out.push_back(std::move(o));
  }
  return out;
}

// ---- sender

enum class sender_mode { honest, simulator };

class sender_core {
 public:
  sender_core(setup_ptr su, session_context* ctx, const seed32& randomness, bytes instance, bytes witness,
              sender_mode mode = sender_mode::honest)
      : su_(std::move(su)), ctx_(ctx), rng_(randomness, "cqext/sender"), instance_(std::move(instance)),
        witness_(std::move(witness)), mode_(mode) {
    if (witness_.size() != su_->prm().witness_len) throw argument_error("cqext: witness has wrong length");
  }

  bytes keys() {
    writer w;
    for (uint32_t i = 0; i < su_->k(); ++i) {
      auto [k, td] = ntcf::gen(su_->prm().ntcf, rng_);
      w.raw(k.serialize());
      tds_.push_back(std::move(td));
    }
    return w.take();
  }
  void on_images(const bytes& b) { ys_ = parse_images(*su_, b); }
  bytes challenges() {
    v_ = rng_.bits(su_->k());
    return from_bits(v_);
  }
  void on_grid(const bytes& b) { grid_ = parse_grid(*su_, b); }
  bytes queries() {
    w_ = rng_.bits(size_t(su_->k()) * su_->k());
    return from_bits(w_);
  }
  void on_openings(const bytes& b) { opened_ = parse_openings(*su_, b); }
  void on_sfe1(const bytes& b) { m1_ = sfe::message::deserialize(b); }
  bytes sfe2() {
    if (!m1_) throw protocol_error("sfe2 before sfe1");
    return sfe::sender_msg2(ctx_->sfe, su_->f(), sfe_input(), *m1_, rng_).serialize();
  }

  // F's sender input: everything the sender knows, or bottom for the simulator
  bytes sfe_input() const {
    if (mode_ == sender_mode::simulator) return bytes(su_->sender_len(), 0);
    const auto& sch = su_->shares();
    writer s;
    s.u8(1);
    for (uint32_t i = 0; i < su_->k(); ++i) {
      s.raw(tds_[i].k.serialize()).u32(tds_[i].s).raw(ntcf::serialize_y(ys_[i])).u8(v_[i]);
      for (uint32_t j = 0; j < su_->k(); ++j) {
        size_t idx = size_t(i) * su_->k() + j;
        s.raw(grid_[idx * 2]).raw(grid_[idx * 2 + 1]).u8(w_[idx]);
        const auto& o = opened_[idx];
        s.raw(o.message.size() == sch.msg_len() ? o.message : bytes(sch.msg_len(), 0));
        s.raw(o.randomness.size() == sch.rand_len() ? o.randomness : bytes(sch.rand_len(), 0));
      }
    }
    s.raw(witness_);
    return s.take();
  }

  bool commitment_accepting() const {
    return commit::openings_valid(su_->shares(), grid_, su_->k(), su_->k(), w_, opened_);
  }

  void fork(std::string_view branch) { rng_ = rng_.derive(branch); }

  const bitvec& v() const { return v_; }
  const bitvec& w() const { return w_; }
  const std::vector<commit::opening>& opened() const { return opened_; }
  const std::vector<ntcf::zvec>& images() const { return ys_; }
  std::vector<ntcf::trapdoor>& trapdoors() { return tds_; }
  const bytes& instance() const { return instance_; }

 private:
  setup_ptr su_;
  session_context* ctx_;
  rng rng_;
  bytes instance_;
  bytes witness_;
  sender_mode mode_;
  std::vector<ntcf::trapdoor> tds_;
  std::vector<ntcf::zvec> ys_;
  bitvec v_, w_;
  std::vector<bytes> grid_;
  std::vector<commit::opening> opened_;
  std::optional<sfe::message> m1_;
};

// ---- receiver

enum class receiver_kind {
  classical,  // honest classical: random preimages, independent random shares
  device,     // claw-state device per repetition (the extractor)
  guesser,    // classical, answers v=0 correctly and guesses the equation
};

inline std::string kind_name(receiver_kind k) {
  switch (k) {
    case receiver_kind::classical: return "classical";
    case receiver_kind::device: return "device";
    case receiver_kind::guesser: return "guesser";
  }
  return "?";
}

inline receiver_kind parse_kind(const std::string& s) {
  if (s == "classical") return receiver_kind::classical;
  if (s == "device") return receiver_kind::device;
  if (s == "guesser") return receiver_kind::guesser;
  throw config_error("unknown receiver kind '" + s + "'");
}

class receiver_core {
 public:
  receiver_core(setup_ptr su, session_context* ctx, receiver_kind kind, const seed32& seed)
      : su_(std::move(su)), ctx_(ctx), kind_(kind), rng_(seed, "cqext/receiver") {}

  void on_keys(const bytes& b) {
    keys_ = parse_keys(*su_, b);
    if (kind_ != receiver_kind::device) return;
    for (uint32_t i = 0; i < su_->k(); ++i) {
      try {
        devices_.push_back(ntcf::provision_device(keys_[i], rng_.derive("device/" + std::to_string(i))));
      } catch (const capability_error& e) {
        throw protocol_error(e.what());
      }
    }
  }

  bytes images() {
    writer w;
    const auto& p = su_->prm().ntcf;
    for (uint32_t i = 0; i < su_->k(); ++i) {
      if (kind_ == receiver_kind::device) {
        w.raw(ntcf::serialize_y(devices_[i].gen_y()));
      } else {
        int b = rng_.bit();
        uint32_t x = uint32_t(rng_.below(p.domain_size()));
        pre_.push_back({b, x});
        w.raw(ntcf::serialize_y(ntcf::eval_prime(keys_[i], b, x, rng_)));
      }
    }
    return w.take();
  }

  void on_challenges(const bytes& b) { v_ = parse_bits(b, su_->k(), "challenges"); }

  bytes grid() {
    const auto& sch = su_->shares();
    uint32_t k = su_->k();
    const auto& p = su_->prm().ntcf;
    grid_.payload_count = k;
    grid_.k = k;
    grid_.commitments.resize(size_t(k) * k * 2);
    grid_.openings.resize(grid_.commitments.size());
    for (uint32_t i = 0; i < k; ++i) {
      std::optional<bytes> a;
      if (kind_ == receiver_kind::device) {
        auto r = devices_[i].measure(v_[i]);
        a = su_->encode_answer(v_[i] ? answer{r.u, r.d} : answer{r.b, ntcf::j_encode(p, r.x)});
      } else if (kind_ == receiver_kind::guesser) {
        if (v_[i] == 0) {
          a = su_->encode_answer({pre_[i].first, ntcf::j_encode(p, pre_[i].second)});
        } else {
          bitvec d;
          do {
            d = rng_.bits(p.w_len);
          } while (!ntcf::in_good_set(p, d));
          a = su_->encode_answer({rng_.bit(), d});
        }
      }
      answers_.push_back(a);
      for (uint32_t j = 0; j < k; ++j) {
        bytes sh0 = su_->random_share(rng_);
        bytes sh1 = a ? xor_bytes(sh0, *a) : su_->random_share(rng_);
        bytes sh[2] = {sh0, sh1};
        for (int side = 0; side < 2; ++side) {
          auto rand = sch.sample_randomness(rng_);
          grid_.commitments[grid_.index(i, j, side)] = sch.commit(sh[side], rand);
          grid_.openings[grid_.index(i, j, side)] = {sh[side], rand};
        }
      }
    }
    return grid_.serialize_commitments();
  }

  void on_queries(const bytes& b) { w_ = parse_bits(b, size_t(su_->k()) * su_->k(), "queries"); }

  bytes openings() const { return side_bytes(false); }

  bytes sfe1() {
    auto [m1, st] = sfe::receiver_msg1(ctx_->sfe, su_->prm().backend, su_->f(), side_bytes(true), rng_);
    st_ = st;
    return m1.serialize();
  }

  void on_sfe2(const bytes& b) {
    if (!st_) throw protocol_error("sfe2 before sfe1");
    output_ = decode_output(sfe::receiver_output(*st_, su_->f(), sfe::message::deserialize(b)));
    done_ = true;
  }

  bool done() const { return done_; }
  const std::optional<bytes>& output() const { return output_; }
  receiver_kind kind() const { return kind_; }
  const sfe::receiver_state* sfe_state() const { return st_ ? &*st_ : nullptr; }
  bytes receiver_input() const { return side_bytes(true); }
  const std::vector<ntcf::key>& keys() const { return keys_; }
  void fork(std::string_view branch) { rng_ = rng_.derive(branch); }

 private:
  // the queried side (openings) or the other side (SFE input) of each (i, j)
  bytes side_bytes(bool unopened) const {
    writer w;
    for (uint32_t i = 0; i < su_->k(); ++i)
      for (uint32_t j = 0; j < su_->k(); ++j) {
        int side = w_[size_t(i) * su_->k() + j] ^ int(unopened);
        const auto& o = grid_.open(i, j, side);
        w.raw(o.message).raw(o.randomness);
      }
    return w.take();
  }

  setup_ptr su_;
  session_context* ctx_;
  receiver_kind kind_;
  rng rng_;
  std::vector<ntcf::key> keys_;
  std::vector<ntcf::device> devices_;
  std::vector<std::pair<int, uint32_t>> pre_;
  std::vector<std::optional<bytes>> answers_;
  bitvec v_, w_;
  commit::share_grid grid_;
  std::optional<sfe::receiver_state> st_;
  std::optional<bytes> output_;
  bool done_ = false;
};

// ---- parties

inline const std::vector<step>& schedule() {
  static const std::vector<step> s = {
      {"S", "R", "keys"},   {"R", "S", "images"},   {"S", "R", "challenges"}, {"R", "S", "grid"},
      {"S", "R", "queries"}, {"R", "S", "openings"}, {"R", "S", "sfe1"},       {"S", "R", "sfe2"},
  };
  return s;
}

class sender_party : public party {
 public:
  explicit sender_party(sender_core c) : core_(std::move(c)) {}
  std::string role() const override { return "S"; }
  void receive(const message& m) override {
    if (m.type == "images") core_.on_images(m.payload);
    else if (m.type == "grid") core_.on_grid(m.payload);
    else if (m.type == "openings") core_.on_openings(m.payload);
    else if (m.type == "sfe1") core_.on_sfe1(m.payload);
    else throw protocol_error("sender got unexpected '" + m.type + "'");
  }
  message send(const std::string& type) override {
    if (type == "keys") return {type, core_.keys(), {}};
    if (type == "challenges") return {type, core_.challenges(), {}};
    if (type == "queries") return {type, core_.queries(), {}};
    if (type == "sfe2") return {type, core_.sfe2(), {}};
    throw protocol_error("sender cannot send '" + type + "'");
  }
  std::unique_ptr<party> clone() const override { return std::make_unique<sender_party>(*this); }
  void fork(std::string_view branch) override { core_.fork(branch); }
  sender_core& core() { return core_; }

 private:
  sender_core core_;
};

class receiver_party : public party {
 public:
  receiver_party(receiver_core c, bool snapshotable = true) : core_(std::move(c)), snapshotable_(snapshotable) {}
  std::string role() const override { return "R"; }
  void receive(const message& m) override {
    if (m.type == "keys") core_.on_keys(m.payload);
    else if (m.type == "challenges") core_.on_challenges(m.payload);
    else if (m.type == "queries") core_.on_queries(m.payload);
    else if (m.type == "sfe2") core_.on_sfe2(m.payload);
    else throw protocol_error("receiver got unexpected '" + m.type + "'");
  }
  message send(const std::string& type) override {
    if (type == "images") return {type, core_.images(), {}};
    if (type == "grid") return {type, core_.grid(), {}};
    if (type == "openings") return {type, core_.openings(), {}};
    if (type == "sfe1") return {type, core_.sfe1(), {}};
    throw protocol_error("receiver cannot send '" + type + "'");
  }
  std::unique_ptr<party> clone() const override {
    if (!snapshotable_) return nullptr;
    return std::make_unique<receiver_party>(*this);
  }
  void fork(std::string_view branch) override { core_.fork(branch); }
  receiver_core& core() { return core_; }

 private:
  receiver_core core_;
  bool snapshotable_;
};

// ---- drivers

using party_factory = std::function<std::unique_ptr<party>(setup_ptr, session_context*, const seed32&)>;

inline party_factory honest_sender(bytes instance, bytes witness, sender_mode mode = sender_mode::honest) {
  return [=](setup_ptr su, session_context* ctx, const seed32& s) -> std::unique_ptr<party> {
    return std::make_unique<sender_party>(sender_core(std::move(su), ctx, s, instance, witness, mode));
  };
}

inline party_factory receiver_of(receiver_kind kind, bool snapshotable = true) {
  return [=](setup_ptr su, session_context* ctx, const seed32& s) -> std::unique_ptr<party> {
    return std::make_unique<receiver_party>(receiver_core(std::move(su), ctx, kind, s), snapshotable);
  };
}

inline std::string params_json(const params& p) {
  const auto& n = p.ntcf;
  return "{\"k\":" + std::to_string(p.k) + ",\"ntcf\":{\"n\":" + std::to_string(n.n) + ",\"m\":" +
         std::to_string(n.m) + ",\"q\":" + std::to_string(n.q) + ",\"noise_bound\":" + std::to_string(n.noise_bound) +
         ",\"x_bits\":" + std::to_string(n.x_bits) + ",\"w_len\":" + std::to_string(n.w_len) +
         "},\"witness_len\":" + std::to_string(p.witness_len) + ",\"sfe\":\"" + sfe::backend_name(p.backend) +
         "\"}";
}

// session seeds: sender randomness, receiver randomness and mediator keys all
// come from one seed by labeled derivation
inline session make_session(setup_ptr su, const seed32& seed, const party_factory& sender,
                            const party_factory& receiver, const std::string& id = "cqext") {
  auto ctx = std::make_unique<session_context>(derive_seed(seed, "cqext/ctx"));
  std::vector<std::unique_ptr<party>> ps;
  ps.push_back(sender(su, ctx.get(), derive_seed(seed, "cqext/S")));
  ps.push_back(receiver(su, ctx.get(), derive_seed(seed, "cqext/R")));
  return session(id, {"cqext", params_json(su->prm()), seed_hex(seed)}, schedule(), std::move(ps), std::move(ctx));
}

inline receiver_party* find_receiver(party& p) {
  if (auto* r = dynamic_cast<receiver_party*>(&p)) return r;
  if (auto* a = dynamic_cast<abort_at*>(&p)) return find_receiver(a->inner());
  return nullptr;
}
inline sender_party* find_sender(party& p) {
  if (auto* s = dynamic_cast<sender_party*>(&p)) return s;
  if (auto* a = dynamic_cast<abort_at*>(&p)) return find_sender(a->inner());
  return nullptr;
}

// the receiver's view: every message it got, in order, then its output
inline bytes view_of(const session& s, const std::string& role, const std::optional<bytes>& output) {
  writer w;
  for (auto& r : s.records()) {
    if (r.is_abort()) {
      w.str("abort").u32(r.round).str(r.from).str(r.reason);
    } else if (r.to == role) {
      w.str(r.type).u32(r.round).blob(r.payload);
    }
  }
  w.u8(output ? 1 : 0);
  if (output) w.blob(*output);
  return w.take();
}

struct run_result {
  std::vector<record> transcript;
  std::optional<bytes> output;
  std::optional<record> abort;
  bytes view;
  std::vector<size_t> lengths;  // payload length per delivered round
  // for replay: the mediator and the receiver's envelope state
  sfe::context sfe_ctx;
  std::optional<sfe::receiver_state> sfe_state;
};

inline run_result finish(session& s) {
  run_result out;
  out.transcript = s.records();
  out.abort = s.abort_record();
  if (auto* r = find_receiver(s.get("R"))) {
    if (r->core().done()) out.output = r->core().output();
    if (auto* st = r->core().sfe_state()) out.sfe_state = *st;
  }
  out.sfe_ctx = s.context().sfe;
  out.view = view_of(s, "R", out.output);
  for (auto& r : s.records())
    if (!r.is_abort()) out.lengths.push_back(r.payload.size());
  return out;
}

inline run_result run(setup_ptr su, const seed32& seed, const party_factory& sender, const party_factory& receiver) {
  auto s = make_session(std::move(su), seed, sender, receiver);
  s.run();
  return finish(s);
}

inline run_result run_honest(setup_ptr su, const bytes& instance, const bytes& witness, receiver_kind kind,
                             const seed32& seed) {
  return run(std::move(su), seed, honest_sender(instance, witness), receiver_of(kind));
}

// the extractor: a device-backed receiver against the given sender
inline run_result extract(setup_ptr su, const party_factory& sender, const seed32& seed) {
  return run(std::move(su), seed, sender, receiver_of(receiver_kind::device));
}

// honest sender through the openings, then F on input bottom
inline run_result zk_simulate(setup_ptr su, const bytes& instance, const party_factory& receiver,
                              const seed32& seed) {
  bytes dummy(su->prm().witness_len, 0);
  auto s = make_session(su, seed, honest_sender(instance, dummy, sender_mode::simulator), receiver);
  if (!s.get("R").clone()) throw capability_error("zk simulation needs a snapshotable receiver");
  s.run();
  return finish(s);
}

// ---- hybrid H2: inner rewinding on w, outer rewinding on v

struct h2_budget {
  uint32_t inner_max = 0;  // per thread; 0 means 4 k^2
  uint32_t outer_max = 0;  // 0 means 4 k
};

struct h2_result {
  std::optional<std::vector<tuple>> tuples;
  bool aborted = false;  // the hybrid's own abort conditions
  std::string reason;
  std::vector<uint32_t> inner_rewinds;  // per thread, main thread first
  uint32_t outer_rewinds = 0;
  uint32_t divergence = 0;  // coordinates where v and v' differ
};

namespace detail {

struct thread_outcome {
  bool accepting = false;
  bool abort = false;
  bool budget = false;
  std::string reason;
  uint32_t inner = 0;
  bitvec v;
  std::vector<answer> answers;
};

// runs from a post-images state through the openings, rewinds the queries
// until a second accepting transcript, and combines shares
inline thread_outcome run_thread(session& s, const setup& su, uint32_t inner_max) {
  thread_outcome out;
  s.run_until(4);
  if (s.aborted()) {
    out.reason = "adversary aborted";
    return out;
  }
  auto inner_tok = s.snapshot();
  s.run_until(6);
  auto* snd = find_sender(s.get("S"));
  if (s.aborted() || !snd->core().commitment_accepting()) {
    out.reason = "not commitment accepting";
    return out;
  }
  out.accepting = true;
  out.v = snd->core().v();
  auto w1 = snd->core().w();
  auto ops1 = snd->core().opened();
  uint32_t k = su.k();
  for (;;) {
    if (out.inner >= inner_max) {
      out.budget = true;
      out.reason = "inner rewind budget exhausted";
      return out;
    }
    s.restore(inner_tok, {"S"});
    ++out.inner;
    s.run_until(6);
    snd = find_sender(s.get("S"));
    if (s.aborted() || !snd->core().commitment_accepting()) continue;
    const auto& w2 = snd->core().w();
    const auto& ops2 = snd->core().opened();
    for (uint32_t i = 0; i < k; ++i) {
      std::optional<bytes> a;
      for (uint32_t j = 0; j < k && !a; ++j) {
        size_t idx = size_t(i) * k + j;
        if (w1[idx] != w2[idx]) a = xor_bytes(ops1[idx].message, ops2[idx].message);
      }
      if (!a) {
        out.abort = true;
        out.reason = "query bits coincide on every j for i=" + std::to_string(i);
        return out;
      }
      out.answers.push_back(su.decode_answer(*a));
    }
    return out;
  }
}

inline bool ntcf_condition(session& s, const setup& su, const thread_outcome& t, std::vector<tuple>* tuples) {
  auto& core = find_sender(s.get("S"))->core();
  for (uint32_t i = 0; i < su.k(); ++i) {
    tuple tp;
    tp.i = i;
    if (!check_answer(su, core.trapdoors()[i], core.images()[i], t.v[i], t.answers[i], &tp)) return false;
    if (tuples) tuples->push_back(tp);
  }
  return true;
}

}  // namespace detail

inline h2_result hybrid_h2_extract(setup_ptr su, const bytes& instance, const bytes& witness,
                                   const party_factory& receiver, const seed32& seed, h2_budget budget = {}) {
  uint32_t k = su->k();
  uint32_t inner_max = budget.inner_max ? budget.inner_max : 4 * k * k;
  uint32_t outer_max = budget.outer_max ? budget.outer_max : 4 * k;
  auto s = make_session(su, seed, honest_sender(instance, witness), receiver, "cqext-h2");
  if (!s.get("R").clone()) throw capability_error("the hybrid needs a snapshotable receiver");
  h2_result res;
  s.run_until(2);
  if (s.aborted()) {
    res.reason = "adversary aborted";
    return res;
  }
  auto outer_tok = s.snapshot();

  auto main = detail::run_thread(s, *su, inner_max);
  res.inner_rewinds.push_back(main.inner);
  std::vector<tuple> first;
  if (main.abort) {
    res.aborted = true;
    res.reason = main.reason;
    return res;
  }
  if (!main.accepting || main.budget) {
    res.reason = "main thread: " + main.reason;
    return res;
  }
  if (!detail::ntcf_condition(s, *su, main, &first)) {
    res.reason = "main thread fails the NTCF check";
    return res;
  }

  for (;;) {
    if (res.outer_rewinds >= outer_max) {
      res.reason = "outer rewind budget exhausted";
      return res;
    }
    s.restore(outer_tok, {"S"});
    ++res.outer_rewinds;
    auto t = detail::run_thread(s, *su, inner_max);
    if (t.accepting) res.inner_rewinds.push_back(t.inner);
    if (t.abort) {
      res.aborted = true;
      res.reason = t.reason;
      return res;
    }
    if (!t.accepting || t.budget) continue;
    std::vector<tuple> second;
    if (!detail::ntcf_condition(s, *su, t, &second)) continue;

    std::vector<tuple> out;
    for (uint32_t i = 0; i < k; ++i) {
      if (main.v[i] == t.v[i]) continue;
      ++res.divergence;
      const auto& pre = main.v[i] == 0 ? first[i] : second[i];
      const auto& eq = main.v[i] == 1 ? first[i] : second[i];
      out.push_back({i, pre.b, pre.x, eq.d, eq.u});
    }
    if (res.divergence < su->prm().divergence_threshold()) {
      res.aborted = true;
      res.reason = "challenge vectors differ in " + std::to_string(res.divergence) + " coordinates";
      return res;
    }
    res.tuples = std::move(out);
    return res;
  }
}

}  // namespace qext::cqext
