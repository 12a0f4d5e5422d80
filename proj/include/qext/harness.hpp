#pragma once

#include <mutex>

#include "qext/transcript.hpp"

namespace qext::harness {

// ---- demo instances, derived from the session seed

struct preimage_instance {
  bytes x, w;
};

inline preimage_instance demo_preimage(const config& c, const seed32& seed, std::string_view label) {
  rng r(seed, std::string("demo/") + std::string(label));
  auto w = r.take(c.witness_len);
  return {hash_bytes(w, 32), w};
}

struct graph_instance {
  ham::graph x;
  std::optional<ham::cycle> w;
};

inline graph_instance demo_graph(const config& c, const seed32& seed, bool member) {
  rng r(seed, "demo/graph");
  if (!member) return {ham::non_member(c.graph_n, r), std::nullopt};
  auto [g, cyc] = ham::planted(c.graph_n, r);
  return {g, cyc};
}

inline json graph_json(const ham::graph& g) { return {{"n", g.n}, {"adjacency", g.adjacency_list()}}; }

inline ham::graph graph_from_json(const json& j) {
  try {
    uint32_t n = j.at("n").get<uint32_t>();
    if (n < 3 || n > 16) throw config_error("graph size must be in [3, 16]");
    ham::graph g(n);
    const auto& adj = j.at("adjacency");
    if (!adj.is_array() || adj.size() != n) throw config_error("adjacency list must have one entry per vertex");
    for (uint32_t u = 0; u < n; ++u)
      for (auto& v : adj[u]) {
        auto vv = v.get<uint32_t>();
        if (vv >= n || vv == u) throw config_error("bad edge " + std::to_string(u) + "->" + std::to_string(vv));
        g.set(u, vv);
      }
    return g;
  } catch (const json::exception& e) {
    throw config_error(std::string("graph json: ") + e.what());
  }
}

// setups are built once per config and shared by every trial
class lab {
 public:
  explicit lab(config c) : c_(std::move(c)) { c_.validate(); }
  lab(const lab&) = delete;
  lab& operator=(const lab&) = delete;

  const config& cfg() const { return c_; }
  cqext::setup_ptr cq() const {
    std::call_once(cq_once_, [&] { cq_ = std::make_shared<const cqext::setup>(c_.cqext_params()); });
    return cq_;
  }
  qqext::setup_ptr qq() const {
    std::call_once(qq_once_, [&] { qq_ = std::make_shared<const qqext::setup>(c_.qqext_params()); });
    return qq_;
  }
  qzk::setup_ptr qz() const {
    std::call_once(qz_once_, [&] { qz_ = std::make_shared<const qzk::setup>(c_.qzk_params()); });
    return qz_;
  }

 private:
  config c_;
  mutable std::once_flag cq_once_, qq_once_, qz_once_;
  mutable cqext::setup_ptr cq_;
  mutable qqext::setup_ptr qq_;
  mutable qzk::setup_ptr qz_;
};

// what one execution leaves behind
struct outcome {
  std::string protocol;
  std::string driver;
  json parties = json::object();
  std::string params;
  seed32 seed{};
  std::vector<record> archive;  // every branch
  std::vector<record> path;     // the final branch
  std::optional<record> abort;
  json result = json::object();
  sfe::context sfe_ctx;
  std::optional<sfe::receiver_state> sfe_state;

  transcript_header header(const config& c) const {
    transcript_header h;
    h.protocol = protocol;
    h.driver = driver;
    h.parties = parties;
    h.seed_hex = seed_hex(seed);
    h.params = json::parse(params);
    h.config = to_json(c);
    return h;
  }
};

namespace detail {

inline std::string pick(const json& parties, const char* role, const char* fallback) {
  if (!parties.contains(role)) return fallback;
  if (!parties.at(role).is_string()) throw config_error(std::string("party '") + role + "' must be a string");
  return parties.at(role).get<std::string>();
}

inline void only_roles(const json& parties, std::initializer_list<const char*> roles) {
  if (!parties.is_object()) throw config_error("parties must be an object");
  for (auto& [k, v] : parties.items())
    if (std::none_of(roles.begin(), roles.end(), [&](const char* r) { return k == r; }))
      throw config_error("unknown party slot '" + k + "'");
}

inline qqext::sender_mode parse_qq_mode(const std::string& s) {
  if (s == "honest") return qqext::sender_mode::honest;
  if (s == "simulator") return qqext::sender_mode::simulator;
  if (s == "zero_td") return qqext::sender_mode::zero_td;
  if (s == "refuse_sfe") return qqext::sender_mode::refuse_sfe;
  throw config_error("unknown qqext sender mode '" + s + "'");
}

inline qzk::prover_mode parse_prover(const std::string& s) {
  for (auto m : {qzk::prover_mode::honest, qzk::prover_mode::sim_q, qzk::prover_mode::sim_c,
                 qzk::prover_mode::no_witness, qzk::prover_mode::td_guesser, qzk::prover_mode::replayer})
    if (qzk::mode_name(m) == s) return m;
  throw config_error("unknown prover mode '" + s + "'");
}

inline qzk::verifier_mode parse_verifier(const std::string& s) {
  if (s == "honest") return qzk::verifier_mode::honest;
  if (s == "wrong_rqext") return qzk::verifier_mode::wrong_rqext;
  if (s == "wrong_td") return qzk::verifier_mode::wrong_td;
  throw config_error("unknown verifier mode '" + s + "'");
}

template <class R>
void take_common(outcome& o, R&& r) {
  o.path = r.transcript;
  o.archive = r.transcript;
  o.abort = r.abort;
  o.sfe_ctx = std::move(r.sfe_ctx);
  o.sfe_state = std::move(r.sfe_state);
}

inline outcome run_cqext(const lab& L, const std::string& driver, const json& parties, const seed32& seed) {
  detail::only_roles(parties, {"S", "R"});
  const auto& c = L.cfg();
  auto su = L.cq();
  auto inst = demo_preimage(c, seed, "cqext");
  outcome o;
  auto snd = pick(parties, "S", "honest");
  auto rcv = pick(parties, "R", driver == "extract" ? "device" : "classical");
  if (snd != "honest" && snd != "simulator") throw config_error("unknown cqext sender mode '" + snd + "'");
  if (driver == "extract" && rcv != "device") throw config_error("the cqext extractor is the device receiver");
  if (driver == "simulate" && snd != "honest") throw config_error("cqext simulation fixes the sender");
  o.parties = {{"S", driver == "simulate" ? "simulator" : snd}, {"R", rcv}};
  auto kind = cqext::parse_kind(rcv);
  cqext::run_result r;
  if (driver == "run" || driver == "extract") {
    auto mode = snd == "simulator" ? cqext::sender_mode::simulator : cqext::sender_mode::honest;
    r = cqext::run(su, seed, cqext::honest_sender(inst.x, inst.w, mode), cqext::receiver_of(kind));
  } else if (driver == "simulate") {
    r = cqext::zk_simulate(su, inst.x, cqext::receiver_of(kind), seed);
  } else {
    throw config_error("cqext has no driver '" + driver + "'");
  }
  take_common(o, r);
  o.params = cqext::params_json(su->prm());
  o.result["instance_hex"] = to_hex(inst.x);
  if (r.output) {
    o.result["output_hex"] = to_hex(*r.output);
    o.result["witness_valid"] = cqext::preimage_relation(c.witness_len).holds(inst.x, *r.output);
  } else {
    o.result["output_hex"] = nullptr;
  }
  return o;
}

inline outcome run_qqext(const lab& L, const std::string& driver, const json& parties, const seed32& seed) {
  detail::only_roles(parties, {"S", "R"});
  const auto& c = L.cfg();
  auto su = L.qq();
  auto inst = demo_preimage(c, seed, "qqext");
  outcome o;
  auto snd = pick(parties, "S", driver == "simulate" ? "simulator" : "honest");
  auto rcv = pick(parties, "R", driver == "extract" ? "nbb" : "honest");
  if (driver != "extract" && rcv != "honest") throw config_error("qqext receiver must be 'honest'");
  if (driver == "extract" && rcv != "nbb") throw config_error("the qqext extractor is the 'nbb' receiver");
  o.parties = {{"S", snd}, {"R", rcv}};
  o.params = qqext::params_json(su->prm());
  auto mode = parse_qq_mode(snd);
  auto init = qqext::initial_state(*su, derive_seed(seed, "qqext/S"), inst.x, inst.w, mode);
  o.result["instance_hex"] = to_hex(inst.x);
  o.result["sender_td_hex"] = to_hex(qqext::drawn_td(*su, init));
  if (driver == "run" || driver == "simulate") {
    if (driver == "simulate" && mode != qqext::sender_mode::simulator)
      throw config_error("qqext simulation fixes the sender");
    auto r = qqext::run_with_state(su, seed, init);
    take_common(o, r);
    o.result["output_hex"] = r.output ? json(to_hex(*r.output)) : json(nullptr);
  } else if (driver == "extract") {
    // non-black-box: no session transcript, only the outcome
    auto r = qqext::nbb_extract(su, {init}, seed);
    o.result["td_hex"] = to_hex(r.td);
    o.result["witness_hex"] = r.witness ? json(to_hex(*r.witness)) : json(nullptr);
    o.result["reason"] = r.reason;
    if (r.witness) o.result["witness_valid"] = cqext::preimage_relation(c.witness_len).holds(inst.x, *r.witness);
  } else {
    throw config_error("qqext has no driver '" + driver + "'");
  }
  return o;
}

inline outcome run_qzk(const lab& L, const std::string& driver, const json& parties, const seed32& seed,
                       std::optional<graph_instance> given = std::nullopt) {
  detail::only_roles(parties, {"P", "V", "instance"});
  const auto& c = L.cfg();
  outcome o;
  auto pv = pick(parties, "P", driver == "simulate" ? "sim_q" : "honest");
  auto vv = pick(parties, "V", "honest");
  auto pm = parse_prover(pv);
  auto vm = parse_verifier(vv);
  bool no_witness = pm == qzk::prover_mode::no_witness || pm == qzk::prover_mode::td_guesser;
  auto which = pick(parties, "instance", no_witness ? "non_member" : "member");
  if (which != "member" && which != "non_member") throw config_error("instance must be member or non_member");
  if (pm == qzk::prover_mode::honest && which != "member") throw config_error("the honest prover needs a member");
  o.parties = {{"P", pv}, {"V", vv}, {"instance", which}};
  auto inst = given ? *given : demo_graph(c, seed, which == "member");
  // the classical simulator runs on the classical variant
  auto su = L.qz();
  if (pm == qzk::prover_mode::sim_c && !c.classical_variant)
    throw config_error("the classical simulator needs protocol.classical_variant = true");
  o.params = qzk::params_json(su->prm());
  o.result["instance"] = graph_json(inst.x);
  auto verifier = qzk::verifier_of(inst.x, vm);
  qzk::run_result r;
  if (driver == "run") {
    if (pm == qzk::prover_mode::sim_q || pm == qzk::prover_mode::sim_c)
      throw config_error("simulators run under the 'simulate' driver");
    qzk::recording rec;
    if (pm == qzk::prover_mode::replayer) {
      if (!inst.w) throw config_error("the replayer copies an honest run, which needs a member instance");
      rec = qzk::record_of(qzk::run_honest(su, inst.x, *inst.w, derive_seed(seed, "qzk/replay-source")).transcript);
    }
    auto w = pm == qzk::prover_mode::honest ? inst.w : std::nullopt;
    r = qzk::run(su, seed, qzk::prover_of(inst.x, w, pm, rec), verifier);
  } else if (driver == "simulate") {
    if (pm == qzk::prover_mode::sim_q) r = qzk::simulate_q(su, inst.x, verifier, seed);
    else if (pm == qzk::prover_mode::sim_c) r = qzk::simulate_c(su, inst.x, verifier, seed);
    else throw config_error("the simulate driver takes P = sim_q or sim_c");
  } else {
    throw config_error("qzk has no driver '" + driver + "'");
  }
  take_common(o, r);
  o.archive = r.archive;
  o.result["accepted"] = r.accepted;
  return o;
}

}  // namespace detail

// one session (or extraction) of any protocol, fully determined by the arguments
inline outcome execute(const lab& L, const std::string& protocol, const std::string& driver, const json& parties,
                       const seed32& seed) {
  outcome o;
  if (protocol == "cqext") o = detail::run_cqext(L, driver, parties, seed);
  else if (protocol == "qqext") o = detail::run_qqext(L, driver, parties, seed);
  else if (protocol == "qzk") o = detail::run_qzk(L, driver, parties, seed);
  else throw config_error("unknown protocol '" + protocol + "'");
  o.protocol = protocol;
  o.driver = driver;
  o.seed = seed;
  if (o.abort) o.result["abort"] = {{"round", o.abort->round}, {"party", o.abort->from}, {"reason", o.abort->reason}};
  return o;
}

// ---- replay

struct check_counts {
  uint32_t checked = 0;
  uint32_t invalid = 0;
  uint32_t unnoticed = 0;  // invalid, yet the branch did not end in an abort
};

namespace detail {

inline const record* find(const std::vector<record>& path, const std::string& type) {
  for (auto& r : path)
    if (!r.is_abort() && r.type == type) return &r;
  return nullptr;
}

inline void tally(check_counts& c, bool ok, bool branch_aborted) {
  ++c.checked;
  if (!ok) {
    ++c.invalid;
    if (!branch_aborted) ++c.unnoticed;
  }
}

// cQEXT share grid: every queried side must open
inline void check_grid(const cqext::setup& su, const std::vector<record>& path, check_counts& c) {
  auto* g = find(path, "grid");
  auto* q = find(path, "queries");
  auto* o = find(path, "openings");
  if (!g || !q || !o) return;
  bool aborted = !path.empty() && path.back().is_abort();
  std::vector<bytes> grid;
  std::vector<commit::opening> ops;
  bitvec w;
  try {
    grid = cqext::parse_grid(su, g->payload);
    w = cqext::parse_bits(q->payload, size_t(su.k()) * su.k(), "queries");
    ops = cqext::parse_openings(su, o->payload);
  } catch (const protocol_error&) {
    return tally(c, false, aborted);
  }
  for (size_t idx = 0; idx < ops.size(); ++idx)
    tally(c, su.shares().verify_open(grid[idx * 2 + w[idx]], ops[idx].message, ops[idx].randomness), aborted);
}

inline void check_qzk(const qzk::setup& su, const std::vector<record>& path, check_counts& c) {
  bool aborted = !path.empty() && path.back().is_abort();
  const auto& p = su.prm();
  check_grid(*su.qext(), path, c);
  try {
    if (auto *ec = find(path, "ext_commit"), *ch = find(path, "ext_challenge"), *eo = find(path, "ext_open");
        ec && ch && eo) {
      reader rd(ec->payload);
      rd.u32();
      rd.u32();
      std::vector<bytes> comms;
      for (uint32_t i = 0; i < 2 * p.k; ++i) comms.push_back(rd.blob());
      auto bits = cqext::parse_bits(ch->payload, p.k, "ext challenge");
      auto ops = qzk::parse_openings(su.ext(), eo->payload, p.k, "ext open");
      for (uint32_t j = 0; j < p.k; ++j)
        tally(c, su.ext().verify_open(comms[j * 2 + bits[j]], ops[j].message, ops[j].randomness), aborted);
    }
    if (auto *sh = find(path, "shares"), *ch = find(path, "share_challenges"), *so = find(path, "share_openings");
        sh && ch && so) {
      auto comms = qzk::parse_commitments(sh->payload, size_t(p.k) * 2, su.shares().commitment_len(), "shares");
      auto bits = cqext::parse_bits(ch->payload, p.k, "share challenges");
      auto ops = qzk::parse_openings(su.shares(), so->payload, p.k, "share openings");
      for (uint32_t j = 0; j < p.k; ++j)
        tally(c, su.shares().verify_open(comms[j * 2 + bits[j]], ops[j].message, ops[j].randomness), aborted);
    }
    if (auto *ct = find(path, "commit_td"), *rv = find(path, "reveal"); ct && rv) {
      size_t dl = su.d_len(), tl = su.td_len();
      if (rv->payload.size() != 32 + dl + tl) return tally(c, false, aborted);
      tally(c, su.td_scheme().verify_open(ct->payload, slice(rv->payload, 32 + dl, tl), slice(rv->payload, 32, dl)),
            aborted);
    }
  } catch (const error&) {
    tally(c, false, aborted);
  }
}

// sfe1 authenticates under the mediator, sfe2 opens under the receiver's key and
// equals the envelope recomputed from its own content
inline void check_envelopes(const outcome& o, const functionality& fn, check_counts& c) {
  bool aborted = !o.path.empty() && o.path.back().is_abort();
  auto* m1 = find(o.path, "sfe1");
  auto* m2 = find(o.path, "sfe2");
  auto ctx = o.sfe_ctx;
  if (m1) {
    bool ok = true;
    try {
      auto msg = sfe::message::deserialize(m1->payload);
      if (msg.tag == sfe::backend::ideal) ctx.open_msg1(msg.payload);
      else ok = slice(msg.payload, 0, 16) == ctx.session();
    } catch (const error&) {
      ok = false;
    }
    tally(c, ok, aborted);
  }
  if (m2) {
    bool ok = false;
    if (o.sfe_state) {
      auto st = *o.sfe_state;
      st.consumed = false;
      try {
        auto msg = sfe::message::deserialize(m2->payload);
        auto out = sfe::receiver_output(st, fn, msg);
        ok = st.tag != sfe::backend::ideal || sfe::expected_msg2(st, out).serialize() == m2->payload;
      } catch (const error&) {
        ok = false;
      }
    }
    tally(c, ok, aborted);
  }
}

inline bool same_record(const record& a, const record& b) {
  return a.session == b.session && a.round == b.round && a.from == b.from && a.to == b.to && a.type == b.type &&
         a.payload == b.payload && a.reason == b.reason;
}

}  // namespace detail

struct replay_result {
  bool rerun_identical = false;
  std::string first_difference;
  check_counts openings;
  check_counts envelopes;
  json result;

  bool ok() const {
    return rerun_identical && openings.unnoticed == 0 && envelopes.invalid == 0;
  }
  json to_json() const {
    return {{"rerun_identical", rerun_identical},
            {"first_difference", first_difference},
            {"openings", {{"checked", openings.checked}, {"invalid", openings.invalid}, {"unnoticed", openings.unnoticed}}},
            {"envelopes", {{"checked", envelopes.checked}, {"invalid", envelopes.invalid}}},
            {"result", result},
            {"ok", ok()}};
  }
};

// reruns the header's session and re-verifies every opening and envelope on
// the logged bytes, branch by branch
inline replay_result replay(const transcript_file& t) {
  auto cfg = config_from_json(t.header.config);
  cfg.validate();
  lab L(cfg);
  auto seed = seed_from_hex(t.header.seed_hex);
  auto o = execute(L, t.header.protocol, t.header.driver, t.header.parties, seed);
  replay_result res;
  res.result = o.result;
  res.rerun_identical = o.archive.size() == t.records.size();
  if (!res.rerun_identical)
    res.first_difference = "record count " + std::to_string(t.records.size()) + " vs " + std::to_string(o.archive.size());
  for (size_t i = 0; res.rerun_identical && i < t.records.size(); ++i)
    if (!detail::same_record(t.records[i], o.archive[i])) {
      res.rerun_identical = false;
      res.first_difference = "record " + std::to_string(i) + " (" + t.records[i].session + " round " +
                             std::to_string(t.records[i].round) + ")";
    }
  if (t.header.params != json::parse(o.params)) {
    res.rerun_identical = false;
    res.first_difference = "parameters";
  }
  // checks run on the file's bytes; the rerun only supplies trusted key material
  auto paths = branch_paths(t.records);
  for (auto& path : paths) {
    if (t.header.protocol == "cqext") detail::check_grid(*L.cq(), path, res.openings);
    if (t.header.protocol == "qzk") detail::check_qzk(*L.qz(), path, res.openings);
  }
  outcome logged = o;
  logged.path = paths.empty() ? std::vector<record>{} : paths.back();
  if (t.header.protocol == "cqext") detail::check_envelopes(logged, L.cq()->f(), res.envelopes);
  if (t.header.protocol == "qqext") detail::check_envelopes(logged, L.qq()->f(), res.envelopes);
  if (t.header.protocol == "qzk") detail::check_envelopes(logged, L.qz()->qext()->f(), res.envelopes);
  return res;
}

}  // namespace qext::harness
