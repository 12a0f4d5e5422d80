#pragma once

#include <array>
#include <optional>

#include "qext/commit.hpp"
#include "qext/ham.hpp"

namespace qext::wi {

// OR of two parallel-repeated binary-challenge protocols, composed by
// splitting the verifier's challenge: the prover picks e_L, the trapdoor
// branch answers e_T = ch xor e_L, and the branch without a witness is
// simulated for a challenge fixed in advance.
//   language branch: Blum's Hamiltonicity protocol on x
//   trapdoor branch: a masked proof that a binary z solves M z = t over Z_256,
//   where M z = t encodes "every share pair opens and xors to td"

struct schemes {
  commit::scheme bit;  // adjacency entries
  commit::scheme val;  // Z_256 values

  schemes() = default;
  explicit schemes(const seed32& pub) : bit(1, pub, "wi/bit"), val(8, pub, "wi/val") {}
};

struct instance {
  ham::graph x;
  bytes td;
  uint32_t k = 0;
  std::vector<bytes> grid;  // share commitments, (j, side) at j * 2 + side
};

enum class branch { language, trapdoor };

inline std::string branch_name(branch b) { return b == branch::language ? "language" : "trapdoor"; }

struct witness {
  branch which = branch::language;
  ham::cycle cycle;                     // language
  std::vector<commit::opening> shares;  // trapdoor, j * 2 + side
};

// per j the unknowns are the bits of sh_0, then the randomness bits of both
// openings. sh_1 = sh_0 xor td folds into t since 128 (a xor b) = 128 (a + b) mod 256
class lin_system {
 public:
  lin_system(const commit::scheme& sch, const instance& in) : sch_(&sch), k_(in.k) {
    if (sch.w != 8) throw config_error("wi: share commitments must use w = 8");
    if (in.k == 0 || in.grid.size() != size_t(in.k) * 2) throw argument_error("wi: grid shape does not match k");
    if (in.td.size() != sch.msg_len()) throw argument_error("wi: td has wrong length");
    for (uint32_t b = sch.msg_bits; b < sch.msg_len() * 8; ++b)
      if (get_bit(in.td, b)) throw argument_error("wi: td has nonzero slack bits");
    uint8_t centre = uint8_t(1u << (sch.beta - 1));
    t_.resize(eqs());
    for (uint32_t j = 0; j < k_; ++j)
      for (int side = 0; side < 2; ++side) {
        const auto& c = in.grid[j * 2 + side];
        if (c.size() != sch.commitment_len()) throw argument_error("wi: share commitment has wrong length");
        for (uint32_t row = 0; row < sch.rows(); ++row) {
          uint8_t v = uint8_t(c[row] + centre);
          if (side == 1 && row < sch.msg_bits && get_bit(in.td, row)) v = uint8_t(v - 128);
          t_[eq(j, side, row)] = v;
        }
      }
  }

  size_t per_j() const { return sch_->msg_bits + 2 * size_t(sch_->rand_bits()); }
  size_t vars() const { return k_ * per_j(); }
  size_t eqs() const { return size_t(k_) * 2 * sch_->rows(); }
  const std::vector<uint8_t>& target() const { return t_; }

  std::vector<uint8_t> apply(const std::vector<uint8_t>& z) const {
    if (z.size() != vars()) throw argument_error("wi: vector has wrong length");
    const auto& s = *sch_;
    std::vector<uint8_t> out(eqs());
    for (uint32_t j = 0; j < k_; ++j) {
      const uint8_t* sh = z.data() + j * per_j();
      for (int side = 0; side < 2; ++side) {
        const uint8_t* r = sh + s.msg_bits + side * size_t(s.rand_bits());
        const uint8_t* v = r + s.n;
        for (uint32_t row = 0; row < s.rows(); ++row) {
          uint32_t acc = 0;
          for (uint32_t c = 0; c < s.n; ++c) acc += uint32_t(s.a[row * s.n + c]) * r[c];
          for (uint32_t b = 0; b < s.beta; ++b) acc += uint32_t(v[row * s.beta + b]) << b;
          if (row < s.msg_bits) acc += 128u * sh[row];
          out[eq(j, side, row)] = uint8_t(acc);
        }
      }
    }
    return out;
  }

  std::vector<uint8_t> witness_vector(const std::vector<commit::opening>& ops) const {
    const auto& s = *sch_;
    if (ops.size() != size_t(k_) * 2) throw argument_error("wi: need two openings per j");
    std::vector<uint8_t> z;
    z.reserve(vars());
    for (uint32_t j = 0; j < k_; ++j) {
      const auto& o0 = ops[j * 2];
      const auto& o1 = ops[j * 2 + 1];
      if (o0.message.size() != s.msg_len() || o0.randomness.size() != s.rand_len() ||
          o1.randomness.size() != s.rand_len())
        throw argument_error("wi: opening has wrong length");
      for (uint32_t b = 0; b < s.msg_bits; ++b) z.push_back(uint8_t(get_bit(o0.message, b)));
      for (auto* o : {&o0, &o1})
        for (uint32_t b = 0; b < s.rand_bits(); ++b) z.push_back(uint8_t(get_bit(o->randomness, b)));
    }
    return z;
  }

 private:
  size_t eq(uint32_t j, int side, uint32_t row) const { return (size_t(j) * 2 + side) * sch_->rows() + row; }

  const commit::scheme* sch_;
  uint32_t k_;
  std::vector<uint8_t> t_;
};

// ---- language branch: one Blum repetition

struct ham_rep {
  ham::perm pi;  // empty when only challenge 1 can be answered
  ham::cycle u;  // permuted cycle; empty when only challenge 0 can be answered
  std::vector<uint8_t> mat;
  std::vector<bytes> rand;
};

inline size_t ham_first_len(const schemes& sc, uint32_t n) { return size_t(n) * n * sc.bit.commitment_len(); }
inline size_t ham_resp_len(const schemes& sc, uint32_t n, int e) {
  return n + (e ? size_t(n) : size_t(n) * n) * sc.bit.rand_len();
}

inline ham_rep ham_start(const schemes& sc, const ham::graph& g, const ham::cycle* c, int sim_e, rng& r,
                         writer& first) {
  ham_rep rep;
  if (c || sim_e == 0) {
    rep.pi = ham::random_perm(g.n, r);
    rep.mat = ham::permute(g, rep.pi).adj;
    if (c)
      for (auto v : *c) rep.u.push_back(rep.pi[v]);
  } else {
    rep.u = ham::random_perm(g.n, r);
    rep.mat = ham::cycle_graph(rep.u).adj;
  }
  for (auto bit : rep.mat) {
    rep.rand.push_back(sc.bit.sample_randomness(r));
    first.raw(sc.bit.commit(bytes{bit}, rep.rand.back()));
  }
  return rep;
}

inline void ham_respond(const schemes& sc, uint32_t n, const ham_rep& rep, int e, rng& r, writer& out) {
  if (e == 0 && !rep.pi.empty()) {
    for (auto v : rep.pi) out.u8(uint8_t(v));
    for (auto& x : rep.rand) out.raw(x);
  } else if (e == 1 && !rep.u.empty()) {
    for (auto v : rep.u) out.u8(uint8_t(v));
    for (uint32_t i = 0; i < n; ++i) out.raw(rep.rand[size_t(rep.u[i]) * n + rep.u[(i + 1) % n]]);
  } else {
    out.raw(r.take(ham_resp_len(sc, n, e)));  // cannot answer
  }
}

inline bool ham_check(const schemes& sc, const ham::graph& g, const uint8_t* first, int e, reader& rd) {
  size_t cl = sc.bit.commitment_len();
  auto com = [&](size_t idx) { return bytes(first + idx * cl, first + (idx + 1) * cl); };
  std::vector<uint32_t> p(g.n);
  for (auto& v : p) v = rd.u8();
  if (!ham::is_perm(p, g.n)) return false;
  if (e == 0) {
    auto mat = ham::permute(g, p).adj;
    for (size_t i = 0; i < mat.size(); ++i)
      if (!sc.bit.verify_open(com(i), bytes{mat[i]}, rd.raw(sc.bit.rand_len()))) return false;
    return true;
  }
  for (uint32_t i = 0; i < g.n; ++i)
    if (!sc.bit.verify_open(com(size_t(p[i]) * g.n + p[(i + 1) % g.n]), bytes{1}, rd.raw(sc.bit.rand_len())))
      return false;
  return true;
}

// ---- trapdoor branch: one masked repetition

struct lin_rep {
  std::vector<uint8_t> z;  // the witness, or random bits when simulating
  std::vector<uint8_t> rho;
  bitvec pi;
  std::vector<bytes> r_rho, r_pair, r_mrho;
  int only = -1;  // the one challenge a simulated repetition can answer
};

inline size_t lin_first_len(const schemes& sc, const lin_system& ls) {
  return (3 * ls.vars() + ls.eqs()) * sc.val.commitment_len();
}
inline size_t lin_resp_len(const schemes& sc, const lin_system& ls, int e) {
  size_t n = ls.vars(), m = ls.eqs(), rl = sc.val.rand_len(), bits = (n + 7) / 8;
  return e ? n + bits + n * rl + m + m * rl : n + n * rl + bits + 2 * n * rl + m * rl;
}

// pair i commits {rho_i, rho_i + 1} in the order given by pi_i; answering
// challenge 1 opens the entry equal to y_i = z_i + rho_i, at position z_i xor pi_i.
// a simulated challenge-1 repetition uses random bits for z and commits
// M y - t in place of M rho
inline lin_rep lin_start(const schemes& sc, const lin_system& ls, const std::vector<uint8_t>* z, int sim_e, rng& r,
                         writer& first) {
  lin_rep rep;
  size_t n = ls.vars();
  if (z) {
    rep.z = *z;
  } else {
    rep.z = r.bits(n);
    rep.only = sim_e;
  }
  rep.rho = r.take(n);
  rep.pi = r.bits(n);
  std::vector<uint8_t> mrho;
  if (!z && sim_e == 1) {
    std::vector<uint8_t> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = uint8_t(rep.z[i] + rep.rho[i]);
    mrho = ls.apply(y);
    for (size_t i = 0; i < mrho.size(); ++i) mrho[i] = uint8_t(mrho[i] - ls.target()[i]);
  } else {
    mrho = ls.apply(rep.rho);
  }
  auto put = [&](uint8_t v, std::vector<bytes>& rs) {
    rs.push_back(sc.val.sample_randomness(r));
    first.raw(sc.val.commit(bytes{v}, rs.back()));
  };
  for (size_t i = 0; i < n; ++i) put(rep.rho[i], rep.r_rho);
  for (size_t i = 0; i < n; ++i) {
    put(uint8_t(rep.rho[i] + rep.pi[i]), rep.r_pair);
    put(uint8_t(rep.rho[i] + 1 - rep.pi[i]), rep.r_pair);
  }
  for (auto v : mrho) put(v, rep.r_mrho);
  return rep;
}

inline void lin_respond(const schemes& sc, const lin_system& ls, const lin_rep& rep, int e, rng& r, writer& out) {
  if (rep.only >= 0 && rep.only != e) {
    out.raw(r.take(lin_resp_len(sc, ls, e)));
    return;
  }
  size_t n = ls.vars();
  if (e == 0) {
    out.raw(rep.rho);
    for (auto& x : rep.r_rho) out.raw(x);
    out.raw(from_bits(rep.pi));
    for (auto& x : rep.r_pair) out.raw(x);
  } else {
    bitvec idx(n);
    for (size_t i = 0; i < n; ++i) {
      out.u8(uint8_t(rep.z[i] + rep.rho[i]));
      idx[i] = rep.z[i] ^ rep.pi[i];
    }
    out.raw(from_bits(idx));
    for (size_t i = 0; i < n; ++i) out.raw(rep.r_pair[2 * i + idx[i]]);
    // the committed M rho (or M y - t when simulating) in the clear
    std::vector<uint8_t> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = uint8_t(rep.z[i] + rep.rho[i]);
    auto my = ls.apply(y);
    for (size_t i = 0; i < my.size(); ++i) out.u8(uint8_t(my[i] - ls.target()[i]));
  }
  for (auto& x : rep.r_mrho) out.raw(x);
}

inline bool lin_check(const schemes& sc, const lin_system& ls, const uint8_t* first, int e, reader& rd) {
  size_t n = ls.vars(), m = ls.eqs(), cl = sc.val.commitment_len(), rl = sc.val.rand_len();
  auto com = [&](size_t idx) { return bytes(first + idx * cl, first + (idx + 1) * cl); };
  auto rho_c = [&](size_t i) { return com(i); };
  auto pair_c = [&](size_t i, int s) { return com(n + 2 * i + s); };
  auto mrho_c = [&](size_t i) { return com(3 * n + i); };
  auto read_bits = [&](size_t count) {
    auto raw = rd.raw((count + 7) / 8);
    auto bits = to_bits(raw, count);
    if (from_bits(bits) != raw) throw decode_error("nonzero padding");
    return bits;
  };
  if (e == 0) {
    auto rho = rd.raw(n);
    for (size_t i = 0; i < n; ++i)
      if (!sc.val.verify_open(rho_c(i), bytes{rho[i]}, rd.raw(rl))) return false;
    auto pi = read_bits(n);
    for (size_t i = 0; i < n; ++i) {
      if (!sc.val.verify_open(pair_c(i, 0), bytes{uint8_t(rho[i] + pi[i])}, rd.raw(rl))) return false;
      if (!sc.val.verify_open(pair_c(i, 1), bytes{uint8_t(rho[i] + 1 - pi[i])}, rd.raw(rl))) return false;
    }
    auto mrho = ls.apply(std::vector<uint8_t>(rho.begin(), rho.end()));
    for (size_t i = 0; i < m; ++i)
      if (!sc.val.verify_open(mrho_c(i), bytes{mrho[i]}, rd.raw(rl))) return false;
    return true;
  }
  auto y = rd.raw(n);
  auto idx = read_bits(n);
  for (size_t i = 0; i < n; ++i)
    if (!sc.val.verify_open(pair_c(i, idx[i]), bytes{y[i]}, rd.raw(rl))) return false;
  auto mrho = rd.raw(m);
  for (size_t i = 0; i < m; ++i)
    if (!sc.val.verify_open(mrho_c(i), bytes{mrho[i]}, rd.raw(rl))) return false;
  auto my = ls.apply(std::vector<uint8_t>(y.begin(), y.end()));
  for (size_t i = 0; i < m; ++i)
    if (uint8_t(my[i] - mrho[i]) != ls.target()[i]) return false;
  return true;
}

// ---- the composed 3-message protocol

inline size_t first_len(const schemes& sc, const lin_system& ls, const instance& in, uint32_t k_wi) {
  return size_t(k_wi) * (ham_first_len(sc, in.x.n) + lin_first_len(sc, ls));
}

// every answer is zero-padded to the longer of the two, so the response
// length does not depend on the challenge split
inline size_t ham_slot(const schemes& sc, uint32_t n) { return std::max(ham_resp_len(sc, n, 0), ham_resp_len(sc, n, 1)); }
inline size_t lin_slot(const schemes& sc, const lin_system& ls) {
  return std::max(lin_resp_len(sc, ls, 0), lin_resp_len(sc, ls, 1));
}
inline size_t response_len(const schemes& sc, const lin_system& ls, const instance& in, uint32_t k_wi) {
  return (k_wi + 7) / 8 + size_t(k_wi) * (ham_slot(sc, in.x.n) + lin_slot(sc, ls));
}

inline void pad_to(writer& out, const bytes& part, size_t len) {
  out.raw(part);
  out.raw(bytes(len - part.size(), 0));
}

inline bitvec parse_challenge(const bytes& b, uint32_t k_wi) {
  if (b.size() != (k_wi + 7) / 8) throw decode_error("wi challenge has wrong length");
  auto bits = to_bits(b, k_wi);
  if (from_bits(bits) != b) throw decode_error("wi challenge has nonzero padding");
  return bits;
}

class prover {
 public:
  // no witness gives the generic cheater: both branches simulated on guessed challenges
  prover(const schemes& sc, const commit::scheme& shares, instance in, std::optional<witness> w, uint32_t k_wi,
         const seed32& seed)
      : sc_(&sc), in_(std::move(in)), ls_(shares, in_), w_(std::move(w)), k_wi_(k_wi), rng_(seed, "wi/prover") {
    if (k_wi_ == 0) throw config_error("wi: k_wi must be positive");
    if (w_ && w_->which == branch::language && !ham::is_cycle(in_.x, w_->cycle))
      throw argument_error("wi: language witness is not a Hamiltonian cycle");
    if (w_ && w_->which == branch::trapdoor) {
      z_ = ls_.witness_vector(w_->shares);
      if (ls_.apply(z_) != ls_.target()) throw argument_error("wi: trapdoor witness does not satisfy the relation");
    }
  }

  bytes first() {
    writer out;
    bool lang = w_ && w_->which == branch::language;
    bool trap = w_ && w_->which == branch::trapdoor;
    guess_l_ = rng_.bits(k_wi_);
    guess_t_ = rng_.bits(k_wi_);
    for (uint32_t r = 0; r < k_wi_; ++r)
      ham_.push_back(ham_start(*sc_, in_.x, lang ? &w_->cycle : nullptr, guess_l_[r], rng_, out));
    for (uint32_t r = 0; r < k_wi_; ++r)
      lin_.push_back(lin_start(*sc_, ls_, trap ? &z_ : nullptr, guess_t_[r], rng_, out));
    return out.take();
  }

  bytes respond(const bytes& challenge) {
    if (ham_.empty()) throw protocol_error("wi response before the first message");
    auto ch = parse_challenge(challenge, k_wi_);
    bitvec e_l(k_wi_);
    for (uint32_t r = 0; r < k_wi_; ++r) {
      if (w_ && w_->which == branch::language) e_l[r] = ch[r] ^ guess_t_[r];
      else e_l[r] = guess_l_[r];
    }
    writer out;
    out.raw(from_bits(e_l));
    size_t hmax = ham_slot(*sc_, in_.x.n), lmax = lin_slot(*sc_, ls_);
    for (uint32_t r = 0; r < k_wi_; ++r) {
      writer part;
      ham_respond(*sc_, in_.x.n, ham_[r], e_l[r], rng_, part);
      pad_to(out, part.take(), hmax);
    }
    for (uint32_t r = 0; r < k_wi_; ++r) {
      writer part;
      lin_respond(*sc_, ls_, lin_[r], ch[r] ^ e_l[r], rng_, part);
      pad_to(out, part.take(), lmax);
    }
    return out.take();
  }

  const instance& inst() const { return in_; }

 private:
  const schemes* sc_;
  instance in_;
  lin_system ls_;
  std::optional<witness> w_;
  uint32_t k_wi_;
  rng rng_;
  std::vector<uint8_t> z_;
  bitvec guess_l_, guess_t_;
  std::vector<ham_rep> ham_;
  std::vector<lin_rep> lin_;
};

inline bool verify(const schemes& sc, const commit::scheme& shares, const instance& in, uint32_t k_wi,
                   const bytes& first, const bytes& challenge, const bytes& response) {
  try {
    lin_system ls(shares, in);
    if (first.size() != first_len(sc, ls, in, k_wi)) return false;
    auto ch = parse_challenge(challenge, k_wi);
    if (response.size() != response_len(sc, ls, in, k_wi)) return false;
    reader rd(response);
    auto head = rd.raw((k_wi + 7) / 8);
    auto e_l = to_bits(head, k_wi);
    if (from_bits(e_l) != head) return false;
    size_t hf = ham_first_len(sc, in.x.n), lf = lin_first_len(sc, ls);
    // one padded slot per repetition
    auto slot = [&](size_t len, auto&& check) {
      auto part = rd.raw(len);
      reader sub(part);
      if (!check(sub)) return false;
      return all_zero(sub.raw(sub.remaining()));
    };
    for (uint32_t r = 0; r < k_wi; ++r)
      if (!slot(ham_slot(sc, in.x.n), [&](reader& sub) { return ham_check(sc, in.x, first.data() + r * hf, e_l[r], sub); }))
        return false;
    for (uint32_t r = 0; r < k_wi; ++r)
      if (!slot(lin_slot(sc, ls),
                [&](reader& sub) { return lin_check(sc, ls, first.data() + k_wi * hf + r * lf, ch[r] ^ e_l[r], sub); }))
        return false;
    rd.expect_done();
    return true;
  } catch (const decode_error&) {
    return false;
  } catch (const argument_error&) {
    return false;
  }
}

// per repetition: e_L, the first opened vertex of the language branch and
// the first opened value of the trapdoor branch
using rep_feature = std::array<uint32_t, 3>;

inline std::vector<rep_feature> opened_features(const schemes& sc, const commit::scheme& shares, const instance& in,
                                                uint32_t k_wi, const bytes& response) {
  lin_system ls(shares, in);
  auto e_l = to_bits(slice(response, 0, (k_wi + 7) / 8), k_wi);
  std::vector<rep_feature> out(k_wi);
  size_t off = (k_wi + 7) / 8;
  for (uint32_t r = 0; r < k_wi; ++r) {
    out[r][0] = e_l[r];
    out[r][1] = response.at(off);
    off += ham_slot(sc, in.x.n);
  }
  for (uint32_t r = 0; r < k_wi; ++r) {
    out[r][2] = response.at(off);
    off += lin_slot(sc, ls);
  }
  return out;
}

}  // namespace qext::wi
