#pragma once

#include <map>

#include "qext/cqext.hpp"
#include "qext/wi.hpp"

namespace qext::qzk {

struct params {
  cqext::params qext;  // cQEXT run inside, verifier as sender
  uint32_t k = 16;     // prover share pairs
  uint32_t k_wi = 20;
  uint32_t td_bits = 16;
  uint32_t graph_n = 8;
  bool classical_variant = false;  // extractable commitment of d ahead of cQEXT
  uint32_t ext_rewinds = 0;        // classical simulator budget; 0 means 4 k
  seed32 public_seed{};

  void validate() const {
    if (k == 0 || k > 64) throw config_error("qzk: k must be in [1, 64]");
    if (k_wi == 0 || k_wi > 256) throw config_error("qzk: k_wi must be in [1, 256]");
    if (td_bits == 0 || td_bits > 64) throw config_error("qzk: td_bits must be in [1, 64]");
    if (graph_n < 3 || graph_n > 16) throw config_error("qzk: graph_n must be in [3, 16]");
  }
  uint32_t rewind_budget() const { return ext_rewinds ? ext_rewinds : 4 * k; }
};

class setup {
 public:
  explicit setup(params p) : p_(std::move(p)) {
    p_.validate();
    td_ = commit::scheme(p_.td_bits, p_.public_seed, "qzk/td");
    shares_ = commit::scheme(p_.td_bits, p_.public_seed, "qzk/shares");
    ext_ = commit::scheme(8 * td_.rand_len(), p_.public_seed, "qzk/ext");
    wi_ = wi::schemes(p_.public_seed);
    auto q = p_.qext;
    q.public_seed = p_.public_seed;
    q.witness_len = td_.rand_len() + td_.msg_len();
    qext_ = std::make_shared<const cqext::setup>(q);
  }

  const params& prm() const { return p_; }
  const commit::scheme& td_scheme() const { return td_; }
  const commit::scheme& shares() const { return shares_; }
  const commit::scheme& ext() const { return ext_; }
  const wi::schemes& wi() const { return wi_; }
  const cqext::setup_ptr& qext() const { return qext_; }
  size_t td_len() const { return td_.msg_len(); }
  size_t d_len() const { return td_.rand_len(); }

  bytes random_td(rng& r) const {
    auto td = r.take(td_len());
    for (uint32_t b = p_.td_bits; b < td_len() * 8; ++b) set_bit(td, b, 0);
    return td;
  }

 private:
  params p_;
  commit::scheme td_, shares_, ext_;
  wi::schemes wi_;
  cqext::setup_ptr qext_;
};

using setup_ptr = std::shared_ptr<const setup>;

inline std::vector<step> schedule(bool classical_variant) {
  std::vector<step> s = {{"V", "P", "commit_td"}};
  if (classical_variant) s.insert(s.end(), {{"V", "P", "ext_commit"}, {"P", "V", "ext_challenge"}, {"V", "P", "ext_open"}});
  for (auto st : cqext::schedule()) {
    st.from = st.from == "S" ? "V" : "P";
    st.to = st.to == "S" ? "V" : "P";
    s.push_back(st);
  }
  s.insert(s.end(), {{"P", "V", "shares"},
                     {"V", "P", "share_challenges"},
                     {"P", "V", "share_openings"},
                     {"V", "P", "reveal"},
                     {"P", "V", "wi_commit"},
                     {"V", "P", "wi_challenge"},
                     {"P", "V", "wi_response"}});
  return s;
}

// round after which the extractable commitment is opened
inline uint32_t ext_open_round() { return 4; }

inline std::vector<bytes> parse_commitments(const bytes& b, size_t count, size_t len, const char* what) {
  if (b.size() != count * len) throw protocol_error(std::string(what) + " message has wrong length");
  std::vector<bytes> out;
  for (size_t i = 0; i < count; ++i) out.push_back(slice(b, i * len, len));
  return out;
}

inline std::vector<commit::opening> parse_openings(const commit::scheme& s, const bytes& b, size_t count,
                                                   const char* what) {
  size_t len = s.msg_len() + s.rand_len();
  if (b.size() != count * len) throw protocol_error(std::string(what) + " message has wrong length");
  reader rd(b);
  std::vector<commit::opening> out;
  for (size_t i = 0; i < count; ++i) {
    commit::opening o;
    o.message = rd.raw(s.msg_len());
    o.randomness = rd.raw(s.rand_len());
    out.push_back(std::move(o));
  }
  return out;
}

// ---- verifier

enum class verifier_mode {
  honest,
  wrong_rqext,  // reveals different cQEXT randomness
  wrong_td,     // reveals a td other than the committed one
};

class verifier_party : public party {
 public:
  verifier_party(setup_ptr su, session_context* ctx, ham::graph x, const seed32& seed, verifier_mode mode,
                 bool snapshotable)
      : su_(std::move(su)), x_(std::move(x)), rng_(seed, "qzk/verifier"), r_qext_(derive_seed(seed, "qzk/r_qext")),
        mode_(mode), snapshotable_(snapshotable) {
    const auto& ts = su_->td_scheme();
    td_ = su_->random_td(rng_);
    d_ = ts.sample_randomness(rng_);
    c_ = ts.commit(td_, d_);
    bytes w = d_;
    append(w, td_);
    core_.emplace(su_->qext(), ctx, r_qext_, c_, w);
  }

  std::string role() const override { return "V"; }

  void receive(const message& m) override {
    const auto& p = su_->prm();
    if (m.type == "ext_challenge") {
      ext_ch_ = cqext::parse_bits(m.payload, p.k, "ext challenge");
    } else if (m.type == "images") {
      core_->on_images(m.payload);
    } else if (m.type == "grid") {
      core_->on_grid(m.payload);
    } else if (m.type == "openings") {
      core_->on_openings(m.payload);
    } else if (m.type == "sfe1") {
      core_->on_sfe1(m.payload);
    } else if (m.type == "shares") {
      shares_ = parse_commitments(m.payload, size_t(p.k) * 2, su_->shares().commitment_len(), "shares");
    } else if (m.type == "share_openings") {
      auto ops = parse_openings(su_->shares(), m.payload, p.k, "share openings");
      for (uint32_t j = 0; j < p.k; ++j)
        if (!su_->shares().verify_open(shares_[j * 2 + b_[j]], ops[j].message, ops[j].randomness))
          throw protocol_error("reject: share opening " + std::to_string(j) + " fails");
    } else if (m.type == "wi_commit") {
      wi_first_ = m.payload;
    } else if (m.type == "wi_response") {
      // decision step
      accepted_ = wi::verify(su_->wi(), su_->shares(), wi_instance(), p.k_wi, wi_first_, wi_ch_, m.payload);
    } else {
      throw protocol_error("verifier got unexpected '" + m.type + "'");
    }
  }

  message send(const std::string& type) override {
    const auto& p = su_->prm();
    if (type == "commit_td") return {type, c_, {}};
    if (type == "ext_commit") {
      ext_ = commit::grid_commit(su_->ext(), {d_}, p.k, rng_);
      return {type, ext_.serialize_commitments(), {}};
    }
    if (type == "ext_open") {
      writer w;
      for (uint32_t j = 0; j < p.k; ++j) {
        const auto& o = ext_.open(0, j, ext_ch_[j]);
        w.raw(o.message).raw(o.randomness);
      }
      return {type, w.take(), {}};
    }
    if (type == "keys") return {type, core_->keys(), {}};
    if (type == "challenges") return {type, core_->challenges(), {}};
    if (type == "queries") return {type, core_->queries(), {}};
    if (type == "sfe2") return {type, core_->sfe2(), {}};
    if (type == "share_challenges") {
      b_ = rng_.bits(p.k);
      return {type, from_bits(b_), {}};
    }
    if (type == "reveal") {
      seed32 r = r_qext_;
      bytes td = td_;
      if (mode_ == verifier_mode::wrong_rqext) r[0] ^= 1;
      if (mode_ == verifier_mode::wrong_td) td[0] ^= 1;
      writer w;
      w.raw(r.data(), r.size()).raw(d_).raw(td);
      return {type, w.take(), {}};
    }
    if (type == "wi_challenge") {
      wi_ch_ = from_bits(rng_.bits(p.k_wi));
      return {type, wi_ch_, {}};
    }
    throw protocol_error("verifier cannot send '" + type + "'");
  }

  std::unique_ptr<party> clone() const override {
    if (!snapshotable_) return nullptr;
    return std::make_unique<verifier_party>(*this);
  }
  void fork(std::string_view branch) override {
    rng_ = rng_.derive(branch);
    core_->fork(branch);
  }

  std::optional<bool> decision() const { return accepted_; }
  bool accepted() const { return accepted_.value_or(false); }
  const bytes& td() const { return td_; }
  const bytes& d() const { return d_; }
  const bytes& c() const { return c_; }

  wi::instance wi_instance() const { return {x_, td_, su_->prm().k, shares_}; }

 private:
  setup_ptr su_;
  ham::graph x_;
  rng rng_;
  seed32 r_qext_;
  verifier_mode mode_;
  bool snapshotable_;
  bytes td_, d_, c_;
  std::optional<cqext::sender_core> core_;
  commit::share_grid ext_;
  bitvec ext_ch_, b_;
  std::vector<bytes> shares_;
  bytes wi_first_, wi_ch_;
  std::optional<bool> accepted_;
};

// ---- prover

enum class prover_mode {
  honest,      // language witness
  sim_q,       // extracts td through cQEXT with the claw-state device
  sim_c,       // td handed in by the rewinding driver
  no_witness,  // generic cheater
  td_guesser,  // xors its shares to a guessed td, uses it if the guess was right
  replayer,    // replays the WI messages of a recorded honest run
};

inline std::string mode_name(prover_mode m) {
  switch (m) {
    case prover_mode::honest: return "honest";
    case prover_mode::sim_q: return "sim_q";
    case prover_mode::sim_c: return "sim_c";
    case prover_mode::no_witness: return "no_witness";
    case prover_mode::td_guesser: return "td_guesser";
    case prover_mode::replayer: return "replayer";
  }
  return "?";
}

// payload per message type of one run
using recording = std::map<std::string, bytes>;

class prover_party : public party {
 public:
  prover_party(setup_ptr su, session_context* ctx, ham::graph x, std::optional<ham::cycle> w, const seed32& seed,
               prover_mode mode, recording replay = {})
      : su_(std::move(su)), x_(std::move(x)), w_(std::move(w)), rng_(seed, "qzk/prover"), mode_(mode),
        replay_(std::move(replay)),
        core_(su_->qext(), ctx, mode == prover_mode::sim_q ? cqext::receiver_kind::device : cqext::receiver_kind::classical,
              derive_seed(seed, "qzk/receiver")) {
    if (mode_ == prover_mode::honest && (!w_ || !ham::is_cycle(x_, *w_)))
      throw argument_error("qzk: honest prover needs a Hamiltonian cycle of x");
    if (mode_ == prover_mode::replayer && (!replay_.count("wi_commit") || !replay_.count("wi_response")))
      throw argument_error("qzk: replayer needs a recorded WI exchange");
  }

  std::string role() const override { return "P"; }

  void receive(const message& m) override {
    const auto& p = su_->prm();
    if (m.type == "commit_td") {
      if (m.payload.size() != su_->td_scheme().commitment_len()) throw protocol_error("commit_td has wrong length");
      c_ = m.payload;
    } else if (m.type == "ext_commit") {
      reader rd(m.payload);
      if (m.payload.size() < 8 || rd.u32() != 1 || rd.u32() != p.k) throw protocol_error("ext commitment has wrong shape");
      ext_comms_.clear();
      for (uint32_t i = 0; i < 2 * p.k; ++i) {
        ext_comms_.push_back(rd.blob());
        if (ext_comms_.back().size() != su_->ext().commitment_len())
          throw protocol_error("ext commitment has wrong length");
      }
      rd.expect_done();
    } else if (m.type == "ext_open") {
      ext_ops_ = parse_openings(su_->ext(), m.payload, p.k, "ext open");
      if (!commit::openings_valid(su_->ext(), ext_comms_, 1, p.k, ext_ch_, ext_ops_))
        throw protocol_error("prover abort: extractable commitment does not open");
    } else if (m.type == "keys" || m.type == "challenges" || m.type == "queries" || m.type == "sfe2") {
      rec_[m.type] = m.payload;
      if (m.type == "keys") core_.on_keys(m.payload);
      if (m.type == "challenges") core_.on_challenges(m.payload);
      if (m.type == "queries") core_.on_queries(m.payload);
      if (m.type == "sfe2") {
        core_.on_sfe2(m.payload);
        if (mode_ == prover_mode::sim_q) {
          if (!core_.output()) throw protocol_error("simulator abort: extraction failed");
          td_star_ = slice(*core_.output(), su_->d_len(), su_->td_len());
        }
      }
    } else if (m.type == "share_challenges") {
      b_ = cqext::parse_bits(m.payload, p.k, "share challenges");
    } else if (m.type == "reveal") {
      on_reveal(m.payload);
    } else if (m.type == "wi_challenge") {
      wi_ch_ = m.payload;
    } else {
      throw protocol_error("prover got unexpected '" + m.type + "'");
    }
  }

  message send(const std::string& type) override {
    const auto& p = su_->prm();
    if (type == "ext_challenge") {
      ext_ch_ = rng_.bits(p.k);
      return {type, from_bits(ext_ch_), {}};
    }
    if (type == "images" || type == "grid" || type == "openings" || type == "sfe1") {
      bytes out = type == "images" ? core_.images()
                  : type == "grid" ? core_.grid()
                  : type == "openings" ? core_.openings()
                                       : core_.sfe1();
      rec_[type] = out;
      return {type, out, {}};
    }
    if (type == "shares") return {type, make_shares(), {}};
    if (type == "share_openings") {
      writer w;
      for (uint32_t j = 0; j < p.k; ++j) {
        const auto& o = share_ops_[j * 2 + b_[j]];
        w.raw(o.message).raw(o.randomness);
      }
      return {type, w.take(), {}};
    }
    if (type == "wi_commit") {
      if (mode_ == prover_mode::replayer) return {type, replay_.at("wi_commit"), {}};
      wi_.emplace(su_->wi(), su_->shares(), wi_instance(), wi_witness(), p.k_wi, rng_.seed());
      return {type, wi_->first(), {}};
    }
    if (type == "wi_response") {
      if (mode_ == prover_mode::replayer) return {type, replay_.at("wi_response"), {}};
      if (!wi_) throw protocol_error("wi response before the first message");
      return {type, wi_->respond(wi_ch_), {}};
    }
    throw protocol_error("prover cannot send '" + type + "'");
  }

  std::unique_ptr<party> clone() const override { return std::make_unique<prover_party>(*this); }
  void fork(std::string_view branch) override {
    rng_ = rng_.derive(branch);
    core_.fork(branch);
  }

  // the classical simulator's extraction result
  void set_extracted(std::optional<bytes> td) { td_star_ = std::move(td); }

  const bitvec& ext_challenge() const { return ext_ch_; }
  const std::vector<commit::opening>& ext_openings() const { return ext_ops_; }
  const bytes& c() const { return c_; }
  const std::optional<bytes>& extracted() const { return td_star_; }
  prover_mode mode() const { return mode_; }
  const cqext::receiver_core& receiver() const { return core_; }

  wi::instance wi_instance() const {
    std::vector<bytes> comms;
    for (auto& o : share_ops_) comms.push_back(su_->shares().commit(o.message, o.randomness));
    return {x_, revealed_td_, su_->prm().k, comms};
  }

 private:
  bool simulating() const { return mode_ == prover_mode::sim_q || mode_ == prover_mode::sim_c; }

  bytes make_shares() {
    const auto& s = su_->shares();
    std::optional<bytes> target;
    if (simulating()) {
      if (!td_star_) throw protocol_error("simulator abort: extraction failed");
      target = *td_star_;
    } else if (mode_ == prover_mode::td_guesser) {
      guess_ = su_->random_td(rng_);
      target = guess_;
    }
    share_ops_.clear();
    writer w;
    for (uint32_t j = 0; j < su_->prm().k; ++j) {
      bytes sh0 = su_->random_td(rng_);
      bytes sh1 = target ? xor_bytes(sh0, *target) : su_->random_td(rng_);
      for (auto* sh : {&sh0, &sh1}) {
        auto r = s.sample_randomness(rng_);
        w.raw(s.commit(*sh, r));
        share_ops_.push_back({*sh, r});
      }
    }
    return w.take();
  }

  // transcript consistency: the revealed randomness must reproduce every
  // cQEXT sender message, and c must open to the revealed td
  void on_reveal(const bytes& b) {
    size_t dl = su_->d_len(), tl = su_->td_len();
    if (b.size() != 32 + dl + tl) throw protocol_error("reveal has wrong length");
    seed32 r;
    std::copy(b.begin(), b.begin() + 32, r.begin());
    bytes d = slice(b, 32, dl), td = slice(b, 32 + dl, tl);
    if (!su_->td_scheme().verify_open(c_, td, d)) throw protocol_error("prover abort: c does not open to the revealed td");
    bytes w = d;
    append(w, td);
    cqext::sender_core replay(su_->qext(), nullptr, r, c_, w);
    auto same = [&](const char* type, const bytes& got) {
      if (got != rec_.at(type)) throw protocol_error(std::string("prover abort: revealed randomness does not reproduce ") + type);
    };
    same("keys", replay.keys());
    replay.on_images(rec_.at("images"));
    same("challenges", replay.challenges());
    replay.on_grid(rec_.at("grid"));
    same("queries", replay.queries());
    replay.on_openings(rec_.at("openings"));
    const auto* st = core_.sfe_state();
    if (!st) throw protocol_error("prover abort: no sfe state");
    const auto& f = su_->qext()->f();
    auto expect = sfe::expected_msg2(*st, eval_native(f, replay.sfe_input(), core_.receiver_input())).serialize();
    same("sfe2", expect);
    if (simulating() && td != *td_star_) throw protocol_error("simulator abort: revealed td differs from the extracted one");
    revealed_td_ = td;
  }

  std::optional<wi::witness> wi_witness() const {
    if (mode_ == prover_mode::honest) return wi::witness{wi::branch::language, *w_, {}};
    bool trap = simulating() || (mode_ == prover_mode::td_guesser && guess_ == revealed_td_);
    if (trap) return wi::witness{wi::branch::trapdoor, {}, share_ops_};
    return std::nullopt;
  }

  setup_ptr su_;
  ham::graph x_;
  std::optional<ham::cycle> w_;
  rng rng_;
  prover_mode mode_;
  recording replay_;
  cqext::receiver_core core_;
  recording rec_;
  bytes c_;
  std::vector<bytes> ext_comms_;
  bitvec ext_ch_, b_;
  std::vector<commit::opening> ext_ops_;
  std::optional<bytes> td_star_;
  bytes guess_;
  std::vector<commit::opening> share_ops_;
  bytes revealed_td_;
  std::optional<wi::prover> wi_;
  bytes wi_ch_;
};

// ---- drivers

using party_factory = std::function<std::unique_ptr<party>(setup_ptr, session_context*, const seed32&)>;

inline party_factory verifier_of(ham::graph x, verifier_mode mode = verifier_mode::honest, bool snapshotable = true) {
  return [=](setup_ptr su, session_context* ctx, const seed32& s) -> std::unique_ptr<party> {
    return std::make_unique<verifier_party>(std::move(su), ctx, x, s, mode, snapshotable);
  };
}

inline party_factory prover_of(ham::graph x, std::optional<ham::cycle> w, prover_mode mode, recording replay = {}) {
  return [=](setup_ptr su, session_context* ctx, const seed32& s) -> std::unique_ptr<party> {
    return std::make_unique<prover_party>(std::move(su), ctx, x, w, s, mode, replay);
  };
}

inline std::string params_json(const params& p) {
  return "{\"k\":" + std::to_string(p.k) + ",\"k_wi\":" + std::to_string(p.k_wi) + ",\"td_bits\":" +
         std::to_string(p.td_bits) + ",\"graph_n\":" + std::to_string(p.graph_n) + ",\"classical_variant\":" +
         (p.classical_variant ? "true" : "false") + ",\"cqext\":" + cqext::params_json(p.qext) + "}";
}

inline session make_session(setup_ptr su, const seed32& seed, const party_factory& prover,
                            const party_factory& verifier, const std::string& id = "qzk") {
  auto ctx = std::make_unique<session_context>(derive_seed(seed, "qzk/ctx"));
  std::vector<std::unique_ptr<party>> ps;
  ps.push_back(verifier(su, ctx.get(), derive_seed(seed, "qzk/V")));
  ps.push_back(prover(su, ctx.get(), derive_seed(seed, "qzk/P")));
  return session(id, {"qzk", params_json(su->prm()), seed_hex(seed)}, schedule(su->prm().classical_variant),
                 std::move(ps), std::move(ctx));
}

inline verifier_party* find_verifier(party& p) {
  if (auto* v = dynamic_cast<verifier_party*>(&p)) return v;
  if (auto* a = dynamic_cast<abort_at*>(&p)) return find_verifier(a->inner());
  return nullptr;
}
inline prover_party* find_prover(party& p) {
  if (auto* v = dynamic_cast<prover_party*>(&p)) return v;
  if (auto* a = dynamic_cast<abort_at*>(&p)) return find_prover(a->inner());
  return nullptr;
}

struct run_result {
  std::vector<record> transcript;
  std::vector<record> archive;  // every branch, when the simulator rewound
  bool accepted = false;
  std::optional<record> abort;
  std::string sim_failure;  // set when a simulator could not run at all
  sfe::context sfe_ctx;
  std::optional<sfe::receiver_state> sfe_state;
};

inline run_result finish(session& s) {
  run_result out;
  out.transcript = s.records();
  out.archive = s.archive();
  out.abort = s.abort_record();
  if (auto* v = find_verifier(s.get("V")); v && !s.aborted()) out.accepted = v->accepted();
  if (auto* p = find_prover(s.get("P")))
    if (auto* st = p->receiver().sfe_state()) out.sfe_state = *st;
  out.sfe_ctx = s.context().sfe;
  return out;
}

inline recording record_of(const std::vector<record>& t) {
  recording out;
  for (auto& r : t)
    if (!r.is_abort()) out[r.type] = r.payload;
  return out;
}

inline run_result run(setup_ptr su, const seed32& seed, const party_factory& prover, const party_factory& verifier) {
  auto s = make_session(std::move(su), seed, prover, verifier);
  s.run();
  return finish(s);
}

inline run_result run_honest(setup_ptr su, const ham::graph& x, const ham::cycle& w, const seed32& seed) {
  return run(su, seed, prover_of(x, w, prover_mode::honest), verifier_of(x));
}

// Sim_q: the claw-state device extracts td inside cQEXT, no rewinding
inline run_result simulate_q(setup_ptr su, const ham::graph& x, const party_factory& verifier, const seed32& seed) {
  return run(su, seed, prover_of(x, std::nullopt, prover_mode::sim_q), verifier);
}

// Sim_c: rewinds the verifier over the extractable commitment of d until two
// challenges differ somewhere, then decodes td from c with the recovered d
inline run_result simulate_c(setup_ptr su, const ham::graph& x, const party_factory& verifier, const seed32& seed) {
  if (!su->prm().classical_variant) throw config_error("the classical simulator needs the classical variant");
  auto s = make_session(su, seed, prover_of(x, std::nullopt, prover_mode::sim_c), verifier);
  s.run_until(2);
  if (s.aborted()) return finish(s);
  auto snap = s.snapshot();
  s.run_until(ext_open_round());
  if (s.aborted()) return finish(s);
  auto* pv = find_prover(s.get("P"));
  auto ch0 = pv->ext_challenge();
  auto ops0 = pv->ext_openings();
  std::optional<bytes> d;
  for (uint32_t n = 0; n < su->prm().rewind_budget() && !d; ++n) {
    s.restore(snap, {"P"});
    s.run_until(ext_open_round());
    if (s.aborted()) continue;
    pv = find_prover(s.get("P"));
    const auto& ch1 = pv->ext_challenge();
    for (uint32_t j = 0; j < su->prm().k && !d; ++j)
      if (ch0[j] != ch1[j]) d = xor_bytes(ops0[j].message, pv->ext_openings()[j].message);
  }
  if (s.aborted()) return finish(s);
  pv = find_prover(s.get("P"));
  if (d) {
    auto td = su->td_scheme().decode_with_randomness(pv->c(), *d);
    pv->set_extracted(td);
  }
  s.run();
  return finish(s);
}

struct dual_result {
  run_result classical;
  run_result quantum;
  bool classical_ok = false;
  bool quantum_ok = false;
};

// both simulators; one of them must get through
inline dual_result simulate_dual(setup_ptr su, const ham::graph& x, const party_factory& verifier,
                                 const seed32& seed) {
  dual_result out;
  try {
    out.classical = simulate_c(su, x, verifier, seed);
    out.classical_ok = !out.classical.abort && out.classical.accepted;
  } catch (const capability_error& e) {
    out.classical.sim_failure = e.what();
  }
  out.quantum = simulate_q(su, x, verifier, seed);
  out.quantum_ok = !out.quantum.abort && out.quantum.accepted;
  return out;
}

// (round, from, to, type, payload length) of every record
inline bytes shape_of(const std::vector<record>& t) {
  writer w;
  for (auto& r : t) {
    w.u32(r.round).str(r.from).str(r.to).str(r.type).u64(r.payload.size());
    if (r.is_abort()) w.str("abort");
  }
  return w.take();
}

}  // namespace qext::qzk
