#pragma once

#include "qext/harness.hpp"
#include "qext/stats.hpp"

namespace qext::harness {

using experiment_fn = std::function<stats::report(const lab&, uint32_t trials)>;

struct experiment {
  std::string description;
  experiment_fn fn;
};

namespace detail {

template <class T>
std::vector<std::pair<T, double>> timed(const lab& L, const std::string& id, uint32_t trials,
                                        const std::function<T(const seed32&)>& fn) {
  return stats::parallel_map<std::pair<T, double>>(trials, L.cfg().threads, [&](size_t i) {
    stats::stopwatch sw;
    T v = fn(stats::trial_seed(L.cfg().seed, id, i));
    return std::make_pair(std::move(v), sw.ms());
  });
}

inline stats::report start(const lab& L, const std::string& id, uint32_t trials) {
  stats::report r;
  r.experiment = id;
  r.trials = trials;
  r.config = to_json(L.cfg());
  return r;
}

inline double rate(uint64_t n, uint32_t trials) { return trials ? double(n) / trials : 0.0; }

// claw check from the public key alone, by scanning the domain
inline bool tuple_ok(const ntcf::key& k, const ntcf::zvec& y, const cqext::tuple& t) {
  if (!ntcf::chk(k, t.b, t.x, y)) return false;
  std::optional<uint32_t> x0, x1;
  for (uint32_t x = 0; x < k.prm.domain_size(); ++x) {
    if (ntcf::chk(k, 0, x, y)) x0 = x;
    if (ntcf::chk(k, 1, x, y)) x1 = x;
  }
  if (!x0 || !x1 || !ntcf::in_good_set(k.prm, t.d)) return false;
  ntcf::claw c{*x0, *x1, y};
  return ntcf::claw_equation(k.prm, c, t.d) == t.u;
}

}  // namespace detail

// one (b, x) round trip per trial under a single key
inline stats::report exp_ntcf_roundtrip(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "ntcf-roundtrip", trials);
  const auto& p = L.cfg().ntcf;
  rng kr(L.cfg().seed, "ntcf-roundtrip/key");
  auto [k, td] = ntcf::gen(p, kr);
  struct row {
    bool chk = false, inv = false;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&, k = k, td = td](const seed32& s) mutable {
    rng r(s, "trial");
    int b = r.bit();
    auto x = uint32_t(r.below(p.domain_size()));
    auto y = ntcf::eval_prime(k, b, x, r);
    auto t = td;
    return row{ntcf::chk(k, b, x, y), ntcf::inv(t, b, y) == x};
  });
  uint64_t ok_chk = 0, ok_inv = 0;
  for (auto& [r, ms] : rows) ok_chk += r.chk, ok_inv += r.inv, rep.times_ms.push_back(ms);
  rep.counts = {{"chk_true", ok_chk}, {"inv_correct", ok_inv}};
  rep.rates = {{"chk", detail::rate(ok_chk, trials)}, {"inv", detail::rate(ok_inv, trials)}};
  if (ok_chk != trials || ok_inv != trials) rep.fail("round trip below 100%");
  return rep;
}

// device measurements: preimages pass chk, equations match the claw
inline stats::report exp_ntcf_device(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "ntcf-device", trials);
  const auto& p = L.cfg().ntcf;
  rng kr(L.cfg().seed, "ntcf-device/key");
  auto [k, td] = ntcf::gen(p, kr);
  struct row {
    int ch = 0;
    bool ok = false;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&, k = k, td = td](const seed32& s) mutable {
    rng r(s, "trial");
    int ch = r.bit();
    auto dev = ntcf::provision_device(k, r.derive("device"));
    auto y = dev.gen_y();
    auto resp = dev.measure(ch);
    auto t = td;
    auto c = ntcf::claw_of(t, y);
    bool ok = ch == 0 ? ntcf::chk(k, resp.b, resp.x, y)
                      : ntcf::in_good_set(p, resp.d) && ntcf::claw_equation(p, c, resp.d) == resp.u;
    return row{ch, ok};
  });
  uint64_t ok[2] = {0, 0}, n[2] = {0, 0};
  for (auto& [r, ms] : rows) ++n[r.ch], ok[r.ch] += r.ok, rep.times_ms.push_back(ms);
  rep.counts = {{"challenge0", n[0]}, {"challenge0_valid", ok[0]}, {"challenge1", n[1]}, {"challenge1_valid", ok[1]}};
  rep.rates = {{"valid", detail::rate(ok[0] + ok[1], trials)}};
  if (ok[0] + ok[1] != trials) rep.fail("device response failed its predicate");
  return rep;
}

// extractor gets a relation-verified witness, honest classical receiver gets bottom
inline stats::report exp_cqext_extract(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "cqext-extract", trials);
  auto su = L.cq();
  auto rel = cqext::preimage_relation(L.cfg().witness_len);
  struct row {
    bool extracted = false, bottom = false;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&](const seed32& s) {
    auto inst = demo_preimage(L.cfg(), s, "cqext");
    auto e = cqext::extract(su, cqext::honest_sender(inst.x, inst.w), s);
    auto h = cqext::run_honest(su, inst.x, inst.w, cqext::receiver_kind::classical, s);
    return row{e.output && rel.holds(inst.x, *e.output), !h.abort && !h.output};
  });
  uint64_t ex = 0, bot = 0;
  for (auto& [r, ms] : rows) ex += r.extracted, bot += r.bottom, rep.times_ms.push_back(ms);
  rep.counts = {{"extracted", ex}, {"classical_bottom", bot}};
  rep.rates = {{"success_rate", detail::rate(ex, trials)}, {"classical_bottom_rate", detail::rate(bot, trials)}};
  if (trials && detail::rate(ex, trials) < 1.0 - L.cfg().tolerance) rep.fail("success_rate below 1 - tolerance");
  if (bot != trials) rep.fail("a classical receiver obtained a witness");
  return rep;
}

// real and simulated receiver views, seed-paired
inline stats::report exp_cqext_zk(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "cqext-zk", trials);
  auto su = L.cq();
  auto rows = detail::timed<int>(L, rep.experiment, trials, [&](const seed32& s) {
    auto inst = demo_preimage(L.cfg(), s, "cqext");
    auto real = cqext::run_honest(su, inst.x, inst.w, cqext::receiver_kind::classical, s);
    auto sim = cqext::zk_simulate(su, inst.x, cqext::receiver_of(cqext::receiver_kind::classical), s);
    return int(real.view == sim.view);
  });
  uint64_t same = 0;
  for (auto& [r, ms] : rows) same += r, rep.times_ms.push_back(ms);
  rep.counts = {{"identical_views", same}};
  rep.rates = {{"identical", detail::rate(same, trials)}};
  if (same != trials) rep.fail("a simulated view differs from the real one");
  return rep;
}

// the rewinding hybrid against the device-backed receiver
inline stats::report exp_cqext_h2(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "cqext-h2", trials);
  auto su = L.cq();
  uint32_t k = su->k(), need = su->prm().divergence_threshold();
  struct row {
    cqext::h2_result h;
    bool tuples_ok = true;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&](const seed32& s) {
    auto inst = demo_preimage(L.cfg(), s, "cqext");
    row out;
    out.h = cqext::hybrid_h2_extract(su, inst.x, inst.w, cqext::receiver_of(cqext::receiver_kind::device), s);
    if (out.h.tuples) {
      auto sess = cqext::make_session(su, s, cqext::honest_sender(inst.x, inst.w),
                                      cqext::receiver_of(cqext::receiver_kind::device));
      sess.run_until(2);
      auto& core = cqext::find_sender(sess.get("S"))->core();
      for (auto& t : *out.h.tuples) out.tuples_ok &= detail::tuple_ok(core.trapdoors()[t.i].k, core.images()[t.i], t);
    }
    return out;
  });
  std::vector<uint32_t> inner, outer, sizes;
  std::vector<double> inner_d, outer_d;
  uint64_t ok = 0, aborted = 0, big = 0, valid = 0;
  for (auto& [r, ms] : rows) {
    rep.times_ms.push_back(ms);
    for (auto n : r.h.inner_rewinds) inner.push_back(n), inner_d.push_back(n);
    outer.push_back(r.h.outer_rewinds);
    outer_d.push_back(r.h.outer_rewinds);
    aborted += r.h.aborted;
    if (r.h.tuples) {
      ++ok;
      sizes.push_back(uint32_t(r.h.tuples->size()));
      big += r.h.tuples->size() >= need;
      valid += r.tuples_ok;
    }
  }
  double p99_in = stats::percentile(inner_d, 99), p99_out = stats::percentile(outer_d, 99);
  rep.counts = {{"extracted", ok}, {"hybrid_aborts", aborted}, {"tuple_sets_large_enough", big},
                {"tuple_sets_valid", valid}};
  rep.rates = {{"extracted", detail::rate(ok, trials)}, {"inner_p99", p99_in}, {"outer_p99", p99_out}};
  rep.histograms = {{"inner_rewinds", stats::histogram(inner)}, {"outer_rewinds", stats::histogram(outer)},
                    {"tuple_set_size", stats::histogram(sizes)}};
  rep.extra = {{"inner_bound", k * k}, {"outer_bound", k}, {"tuple_threshold", need}};
  if (p99_in > double(k) * k) rep.fail("inner rewinds 99th percentile above k^2");
  if (p99_out > double(k)) rep.fail("outer rewinds 99th percentile above k");
  if (big != ok || valid != ok) rep.fail("an extracted tuple set is too small or fails the claw checks");
  return rep;
}

// message lengths of extractor runs against honest runs, opened-share bit balance
inline stats::report exp_cqext_structure(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "cqext-structure", trials);
  auto su = L.cq();
  size_t bits = su->shares().msg_bits;
  struct row {
    bool same = false;
    std::vector<uint64_t> ones;
    uint64_t openings = 0;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&](const seed32& s) {
    auto inst = demo_preimage(L.cfg(), s, "cqext");
    auto e = cqext::extract(su, cqext::honest_sender(inst.x, inst.w), s);
    auto h = cqext::run_honest(su, inst.x, inst.w, cqext::receiver_kind::classical, s);
    row out;
    out.same = e.lengths == h.lengths;
    out.ones.assign(bits, 0);
    for (auto& r : e.transcript)
      if (r.type == "openings")
        for (auto& o : cqext::parse_openings(*su, r.payload)) {
          ++out.openings;
          for (size_t b = 0; b < bits; ++b) out.ones[b] += get_bit(o.message, b);
        }
    return out;
  });
  uint64_t same = 0, openings = 0;
  std::vector<uint64_t> ones(bits, 0);
  for (auto& [r, ms] : rows) {
    rep.times_ms.push_back(ms);
    same += r.same;
    openings += r.openings;
    for (size_t b = 0; b < bits; ++b) ones[b] += r.ones[b];
  }
  double z = stats::max_bit_z(ones, openings);
  rep.counts = {{"same_lengths", same}, {"openings", openings}};
  rep.rates = {{"same_lengths", detail::rate(same, trials)}, {"max_bit_z", z}};
  rep.p_values = {{"worst_bit", stats::normal_p(z)}};
  if (same != trials) rep.fail("extractor message lengths differ from honest runs");
  if (z > 3.0) rep.fail("an opened-share bit is off balance by more than 3 sigma");
  return rep;
}

// non-black-box extraction recovers td || w; the honest receiver gets bottom
inline stats::report exp_qqext_extract(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "qqext-extract", trials);
  auto su = L.qq();
  auto rel = cqext::preimage_relation(L.cfg().witness_len);
  struct row {
    bool extracted = false, td_match = false, bottom = false;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&](const seed32& s) {
    auto inst = demo_preimage(L.cfg(), s, "qqext");
    auto init = qqext::initial_state(*su, derive_seed(s, "qqext/S"), inst.x, inst.w);
    auto e = qqext::nbb_extract(su, {init}, s);
    auto h = qqext::run_with_state(su, s, init);
    return row{e.witness && rel.holds(inst.x, *e.witness), e.witness && e.td == qqext::drawn_td(*su, init),
               !h.abort && !h.output};
  });
  uint64_t ex = 0, td = 0, bot = 0;
  for (auto& [r, ms] : rows) ex += r.extracted, td += r.td_match, bot += r.bottom, rep.times_ms.push_back(ms);
  rep.counts = {{"extracted", ex}, {"td_matches", td}, {"honest_bottom", bot}};
  rep.rates = {{"success_rate", detail::rate(ex, trials)}, {"honest_bottom_rate", detail::rate(bot, trials)}};
  if (ex != trials || td != trials) rep.fail("extraction missed td or w");
  if (bot != trials) rep.fail("an honest receiver obtained output");
  return rep;
}

// the lockable obfuscation contract on the qQEXT locked program
inline stats::report exp_obf_lock(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "obf-lock", trials);
  rng r(L.cfg().seed, "obf-lock");
  obf_oracle o;
  bytes lock = r.take(qqext::lock_len), payload = r.take(qqext::sk_len), alpha = r.take(16);
  auto inner = [alpha](const bytes& x) -> std::optional<bytes> {
    if (x.size() != alpha.size()) return std::nullopt;
    return xor_bytes(x, alpha);
  };
  // C(x) = alpha xor x, so the lock opens exactly at x = (lock xor alpha)
  auto h = o.obfuscate(build_cc_circuit(inner, lock, payload), r);
  auto right = o.eval(h, xor_bytes(lock, alpha));
  uint64_t released = 0;
  for (uint32_t t = 0; t < trials; ++t) released += o.eval(h, r.take(16)).has_value();
  rep.counts = {{"correct_lock_released", right && *right == payload ? 1 : 0}, {"random_released", released}};
  if (!right || *right != payload) rep.fail("correct lock did not release the payload");
  if (released) rep.fail("a random input released the payload");
  return rep;
}

// garbled and ideal SFE agree on f, valid and perturbed inputs alike
inline stats::report exp_sfe_equivalence(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "sfe-equivalence", trials);
  auto su = L.qq();
  const auto& lay = su->layout();
  const auto& fn = su->f();
  struct row {
    bool same = false, bottom = false;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&](const seed32& s) {
    rng r(s, "trial");
    auto td = su->random_td(r);
    std::vector<bytes> rs, cstar;
    for (uint32_t i = 0; i < lay.ell; ++i) {
      rs.push_back(lay.bit_scheme.sample_randomness(r));
      cstar.push_back(lay.bit_scheme.commit(bytes{uint8_t(get_bit(td, i))}, rs.back()));
    }
    bytes rcat;
    for (auto& x : rs) append(rcat, x);
    auto d = lay.vec_scheme.sample_randomness(r);
    auto sin = lay.sender_input(td, lay.vec_scheme.commit(rcat, d), cstar, r.take(qqext::sk_len));
    auto rin = lay.receiver_input(d, rs);
    if (r.bit()) rin[r.below(rin.size())] ^= uint8_t(1u << r.below(8));
    sfe::context ctx(s, "sfe-equivalence");
    auto go = [&](sfe::backend b) {
      auto [m1, st] = sfe::receiver_msg1(ctx, b, fn, rin, r);
      auto m2 = sfe::sender_msg2(ctx, fn, sin, m1, r);
      return sfe::receiver_output(st, fn, m2);
    };
    auto ideal = go(sfe::backend::ideal);
    return row{go(sfe::backend::garbled) == ideal, is_bottom(ideal)};
  });
  uint64_t same = 0, bot = 0;
  for (auto& [r, ms] : rows) same += r.same, bot += r.bottom, rep.times_ms.push_back(ms);
  rep.counts = {{"equal", same}, {"bottom_outputs", bot}};
  rep.rates = {{"equal", detail::rate(same, trials)}};
  if (same != trials) rep.fail("garbled output differs from ideal");
  return rep;
}

inline stats::report exp_qzk_complete(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "qzk-complete", trials);
  auto rows = detail::timed<int>(L, rep.experiment, trials, [&](const seed32& s) {
    return int(execute(L, "qzk", "run", {{"P", "honest"}}, s).result.at("accepted").get<bool>());
  });
  uint64_t acc = 0;
  for (auto& [r, ms] : rows) acc += r, rep.times_ms.push_back(ms);
  rep.counts = {{"accepted", acc}};
  rep.rates = {{"accept", detail::rate(acc, trials)}};
  if (acc != trials) rep.fail("an honest run was rejected");
  return rep;
}

// the attack suite plus the true-witness control
inline stats::report exp_qzk_soundness(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "qzk-soundness", trials);
  const std::vector<std::pair<std::string, json>> suite = {
      {"no_witness", {{"P", "no_witness"}, {"instance", "non_member"}}},
      {"td_guesser", {{"P", "td_guesser"}, {"instance", "non_member"}}},
      {"replayer", {{"P", "replayer"}, {"instance", "member"}}},
      {"control", {{"P", "honest"}, {"instance", "member"}}},
  };
  for (auto& [name, parties] : suite) {
    auto rows = detail::timed<int>(L, rep.experiment + "/" + name, trials, [&](const seed32& s) {
      return int(execute(L, "qzk", "run", parties, s).result.at("accepted").get<bool>());
    });
    uint64_t acc = 0;
    for (auto& [r, ms] : rows) acc += r, rep.times_ms.push_back(ms);
    rep.counts[name] = acc;
    if (name == "control" && acc != trials) rep.fail("control prover was rejected");
    if (name != "control" && acc != 0) rep.fail(name + " convinced the verifier");
  }
  return rep;
}

// the device simulator against the honest verifier: same shape, both accept
inline stats::report exp_qzk_zk(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "qzk-zk", trials);
  struct row {
    bool same = false, both = false;
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&](const seed32& s) {
    auto real = execute(L, "qzk", "run", {{"P", "honest"}}, s);
    auto sim = execute(L, "qzk", "simulate", {{"P", "sim_q"}}, s);
    return row{qzk::shape_of(real.path) == qzk::shape_of(sim.path),
               real.result.at("accepted").get<bool>() && sim.result.at("accepted").get<bool>()};
  });
  uint64_t same = 0, both = 0;
  for (auto& [r, ms] : rows) same += r.same, both += r.both, rep.times_ms.push_back(ms);
  rep.counts = {{"same_shape", same}, {"both_accept", both}};
  if (same != trials || both != trials) rep.fail("simulation differs from the real interaction");
  return rep;
}

// WI: the same instance and challenge under both witnesses; decisions must
// agree, and the opened values must not separate the branches
inline uint32_t wi_bin(const wi::rep_feature& f, uint32_t n) { return (f[0] * n + f[1] % n) * 16 + (f[2] >> 4); }

inline stats::report exp_wi_branches(const lab& L, uint32_t trials) {
  auto rep = detail::start(L, "wi-branches", trials);
  auto su = L.qz();
  const auto& p = su->prm();
  uint32_t n = p.graph_n, bins = 2 * n * 16;
  struct row {
    bool dec[2] = {false, false};
    std::vector<uint32_t> feat[2];
  };
  auto rows = detail::timed<row>(L, rep.experiment, trials, [&](const seed32& s) {
    rng r(s, "wi-instance");
    auto [g, cyc] = ham::planted(n, r);
    wi::instance in{g, su->random_td(r), p.k, {}};
    wi::witness lang{wi::branch::language, cyc, {}}, trap{wi::branch::trapdoor, {}, {}};
    for (uint32_t j = 0; j < p.k; ++j) {
      auto sh0 = su->random_td(r);
      auto sh1 = xor_bytes(sh0, in.td);
      for (auto* sh : {&sh0, &sh1}) {
        auto rand = su->shares().sample_randomness(r);
        in.grid.push_back(su->shares().commit(*sh, rand));
        trap.shares.push_back({*sh, rand});
      }
    }
    auto ch = from_bits(r.bits(p.k_wi));
    row out;
    int i = 0;
    for (auto* w : {&lang, &trap}) {
      wi::prover pv(su->wi(), su->shares(), in, *w, p.k_wi, derive_seed(s, "wi-prover"));
      auto first = pv.first();
      auto resp = pv.respond(ch);
      out.dec[i] = wi::verify(su->wi(), su->shares(), in, p.k_wi, first, ch, resp);
      for (auto& f : wi::opened_features(su->wi(), su->shares(), in, p.k_wi, resp)) out.feat[i].push_back(wi_bin(f, n));
      ++i;
    }
    return out;
  });
  uint64_t agree = 0, acc[2] = {0, 0};
  std::vector<uint64_t> h[2] = {std::vector<uint64_t>(bins, 0), std::vector<uint64_t>(bins, 0)};
  for (auto& [r, ms] : rows) {
    rep.times_ms.push_back(ms);
    agree += r.dec[0] == r.dec[1];
    for (int b = 0; b < 2; ++b) {
      acc[b] += r.dec[b];
      for (auto x : r.feat[b]) ++h[b][x];
    }
  }
  auto chi = stats::chi2_homogeneity(h[0], h[1]);
  rep.counts = {{"decisions_agree", agree}, {"language_accepts", acc[0]}, {"trapdoor_accepts", acc[1]}};
  rep.rates = {{"chi2", chi.statistic}, {"chi2_dof", chi.dof}};
  rep.p_values = {{"chi2_homogeneity", chi.p_value}};
  if (agree != trials) rep.fail("acceptance differs between witness branches");
  if (trials && chi.p_value < 0.01) rep.fail("opened-value histograms separate the branches at alpha = 0.01");
  return rep;
}

inline const std::map<std::string, experiment>& experiments() {
  static const std::map<std::string, experiment> reg = {
      {"ntcf-roundtrip", {"eval_prime then chk and inv on random (b, x)", exp_ntcf_roundtrip}},
      {"ntcf-device", {"claw-state device answers pass their predicates", exp_ntcf_device}},
      {"cqext-extract", {"extractor recovers the witness, classical receiver gets bottom", exp_cqext_extract}},
      {"cqext-zk", {"seed-paired real and simulated receiver views", exp_cqext_zk}},
      {"cqext-h2", {"rewinding hybrid: rewind counts and claw tuples", exp_cqext_h2}},
      {"cqext-structure", {"message lengths and opened-share bit balance", exp_cqext_structure}},
      {"qqext-extract", {"non-black-box extraction of td and w", exp_qqext_extract}},
      {"obf-lock", {"lockable obfuscation releases only at the lock", exp_obf_lock}},
      {"sfe-equivalence", {"garbled against ideal SFE on f", exp_sfe_equivalence}},
      {"qzk-complete", {"honest prover acceptance", exp_qzk_complete}},
      {"qzk-soundness", {"attack suite and true-witness control", exp_qzk_soundness}},
      {"qzk-zk", {"device simulator against the honest verifier", exp_qzk_zk}},
      {"wi-branches", {"witness branches: decisions and opened-value chi-square", exp_wi_branches}},
  };
  return reg;
}

inline stats::report run_experiment(const lab& L, const std::string& id, uint32_t trials) {
  auto it = experiments().find(id);
  if (it == experiments().end()) throw config_error("unknown experiment '" + id + "'");
  return it->second.fn(L, trials);
}

}  // namespace qext::harness
