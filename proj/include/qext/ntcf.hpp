#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qext/bytes.hpp"
#include "qext/rng.hpp"

namespace qext::ntcf {

using zvec = std::vector<uint32_t>;

struct params {
  uint32_t n = 4;
  uint32_t m = 8;
  uint32_t q = 64;
  uint32_t noise_bound = 3;
  uint32_t x_bits = 8;
  uint32_t w_len = 12;
  seed32 seed{};

  uint32_t log_q() const {
    uint32_t l = 0;
    while ((1u << l) < q) ++l;
    return l;
  }

  // bits of x carried by coordinate i
  uint32_t digit_bits(uint32_t i) const { return x_bits / n + (i < x_bits % n ? 1 : 0); }

  uint64_t domain_size() const { return uint64_t(1) << x_bits; }

  void validate() const {
    if (q < 2) throw config_error("ntcf: q must be at least 2");
    if (q & (q - 1)) throw config_error("ntcf: q must be a power of two");
    if (q > (1u << 16)) throw config_error("ntcf: q above 2^16");
    if (n == 0 || m == 0) throw config_error("ntcf: n and m must be positive");
    if (4 * noise_bound >= q) throw config_error("ntcf: noise_bound must be below q/4");
    if (x_bits == 0 || x_bits > 20) throw config_error("ntcf: x_bits must be in [1, 20]");
    if (w_len <= x_bits) throw config_error("ntcf: w_len must exceed x_bits");
    for (uint32_t i = 0; i < n; ++i)
      if (digit_bits(i) > log_q()) throw config_error("ntcf: x_bits too large for n*log2(q)");
  }

  bool operator==(const params& o) const {
    return n == o.n && m == o.m && q == o.q && noise_bound == o.noise_bound && x_bits == o.x_bits &&
           w_len == o.w_len;
  }
};

inline params preset(const std::string& name) {
  params p;
  if (name == "toy8") {
    p.n = 4, p.m = 8, p.q = 64, p.noise_bound = 3, p.x_bits = 8, p.w_len = 12;
  } else if (name == "toy12") {
    p.n = 4, p.m = 10, p.q = 128, p.noise_bound = 5, p.x_bits = 12, p.w_len = 16;
  } else {
    throw config_error("unknown preset '" + name + "'");
  }
  p.seed = derive_seed(seed32{}, "preset/" + name);
  return p;
}

// domain element x in [0, 2^x_bits) -> coordinate vector in the subgroup H of Z_q^n
inline zvec encode_x(const params& p, uint32_t x) {
  zvec v(p.n);
  uint32_t shift = 0, lq = p.log_q();
  for (uint32_t i = 0; i < p.n; ++i) {
    uint32_t a = p.digit_bits(i);
    uint32_t digit = (x >> shift) & ((1u << a) - 1);
    v[i] = (digit << (lq - a)) & (p.q - 1);
    shift += a;
  }
  return v;
}

// group operation of H carried back to X: digit-wise subtraction
inline uint32_t sub_x(const params& p, uint32_t a, uint32_t b) {
  uint32_t out = 0, shift = 0;
  for (uint32_t i = 0; i < p.n; ++i) {
    uint32_t w = p.digit_bits(i), mask = (1u << w) - 1;
    uint32_t d = (((a >> shift) & mask) - ((b >> shift) & mask)) & mask;
    out |= d << shift;
    shift += w;
  }
  return out;
}

inline int32_t centered(uint32_t v, uint32_t q) {
  v &= q - 1;
  return v >= q / 2 ? int32_t(v) - int32_t(q) : int32_t(v);
}

struct key {
  params prm;
  zvec a;  // m x n, row-major
  zvec t;

  zvec mul(const zvec& x) const {
    zvec out(prm.m, 0);
    for (uint32_t r = 0; r < prm.m; ++r) {
      uint64_t acc = 0;
      for (uint32_t c = 0; c < prm.n; ++c) acc += uint64_t(a[r * prm.n + c]) * x[c];
      out[r] = uint32_t(acc & (prm.q - 1));
    }
    return out;
  }

  bytes serialize() const {
    writer w;
    w.u32(prm.n).u32(prm.m).u32(prm.q).u32(prm.noise_bound).u32(prm.x_bits).u32(prm.w_len);
    for (auto v : a) w.u32(v);
    for (auto v : t) w.u32(v);
    return w.take();
  }

  static key deserialize(reader& r) {
    key k;
    k.prm.n = r.u32(), k.prm.m = r.u32(), k.prm.q = r.u32();
    k.prm.noise_bound = r.u32(), k.prm.x_bits = r.u32(), k.prm.w_len = r.u32();
    k.prm.validate();
    k.a.resize(size_t(k.prm.m) * k.prm.n);
    for (auto& v : k.a) {
      v = r.u32();
      if (v >= k.prm.q) throw decode_error("key entry out of range");
    }
    k.t.resize(k.prm.m);
    for (auto& v : k.t) {
      v = r.u32();
      if (v >= k.prm.q) throw decode_error("key entry out of range");
    }
    return k;
  }

  static key deserialize(const bytes& b) {
    reader r(b);
    auto k = deserialize(r);
    r.expect_done();
    return k;
  }

  bool operator==(const key& o) const { return prm == o.prm && a == o.a && t == o.t; }
};

struct trapdoor {
  key k;
  uint32_t s = 0;      // secret as a domain element; its encoding is the LWE secret
  zvec s_vec;
  std::vector<zvec> inversion_table;  // A * encode(x) for all x, filled lazily

  const std::vector<zvec>& table() {
    if (inversion_table.empty()) {
      inversion_table.reserve(size_t(k.prm.domain_size()));
      for (uint64_t x = 0; x < k.prm.domain_size(); ++x) inversion_table.push_back(k.mul(encode_x(k.prm, uint32_t(x))));
    }
    return inversion_table;
  }

  bytes serialize() const {
    writer w;
    w.raw(k.serialize()).u32(s);
    return w.take();
  }
};

struct claw {
  uint32_t x0 = 0;
  uint32_t x1 = 0;
  zvec y;
};

inline bool in_domain(const params& p, uint64_t x) { return x < p.domain_size(); }

inline bool within_box(const zvec& y, const zvec& center, const params& p) {
  for (size_t i = 0; i < y.size(); ++i)
    if (std::abs(centered(y[i] - center[i], p.q)) > int32_t(p.noise_bound)) return false;
  return true;
}

// sampling condition on A: every nonzero delta in H is pushed far from zero
inline bool well_spread(const key& k) {
  const auto& p = k.prm;
  for (uint64_t x = 1; x < p.domain_size(); ++x) {
    auto ad = k.mul(encode_x(p, uint32_t(x)));
    int32_t best = 0;
    for (auto v : ad) best = std::max(best, std::abs(centered(v, p.q)));
    if (best <= int32_t(3 * p.noise_bound)) return false;
  }
  return true;
}

inline zvec sample_noise(const params& p, rng& r) {
  zvec e(p.m);
  for (auto& v : e) {
    int32_t d = int32_t(r.below(2 * p.noise_bound + 1)) - int32_t(p.noise_bound);
    v = uint32_t(d) & (p.q - 1);
  }
  return e;
}

inline std::pair<key, trapdoor> gen(const params& p, rng& r) {
  p.validate();
  key k;
  k.prm = p;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 10000) throw config_error("ntcf: could not sample a well-spread matrix");
    k.a.resize(size_t(p.m) * p.n);
    for (auto& v : k.a) v = uint32_t(r.below(p.q));
    if (well_spread(k)) break;
  }
  trapdoor td;
  td.s = uint32_t(1 + r.below(p.domain_size() - 1));
  td.s_vec = encode_x(p, td.s);
  auto as = k.mul(td.s_vec);
  auto e = sample_noise(p, r);
  k.t.resize(p.m);
  for (uint32_t i = 0; i < p.m; ++i) k.t[i] = (as[i] + e[i]) & (p.q - 1);
  td.k = k;
  return {k, td};
}

// mean of the branch b function at x: A*enc(x) + b*t
inline zvec branch_center(const key& k, int b, uint32_t x) {
  auto c = k.mul(encode_x(k.prm, x));
  if (b)
    for (uint32_t i = 0; i < k.prm.m; ++i) c[i] = (c[i] + k.t[i]) & (k.prm.q - 1);
  return c;
}

inline zvec eval_prime(const key& k, int b, uint64_t x, rng& r) {
  if (!in_domain(k.prm, x)) throw domain_error("x outside the domain");
  if (b != 0 && b != 1) throw domain_error("branch bit must be 0 or 1");
  auto y = branch_center(k, b, uint32_t(x));
  auto e = sample_noise(k.prm, r);
  for (uint32_t i = 0; i < k.prm.m; ++i) y[i] = (y[i] + e[i]) & (k.prm.q - 1);
  return y;
}

inline bool well_formed_y(const params& p, const zvec& y) {
  if (y.size() != p.m) return false;
  for (auto v : y)
    if (v >= p.q) return false;
  return true;
}

inline bool chk(const key& k, int b, uint64_t x, const zvec& y) {
  if ((b != 0 && b != 1) || !in_domain(k.prm, x) || !well_formed_y(k.prm, y)) return false;
  return within_box(y, branch_center(k, b, uint32_t(x)), k.prm);
}

inline uint32_t inv(trapdoor& td, int b, const zvec& y) {
  const auto& p = td.k.prm;
  if ((b != 0 && b != 1) || !well_formed_y(p, y)) throw inversion_error("malformed image");
  zvec z(p.m);
  for (uint32_t i = 0; i < p.m; ++i) z[i] = (y[i] - (b ? td.k.t[i] : 0)) & (p.q - 1);
  const auto& tab = td.table();
  for (uint64_t x = 0; x < tab.size(); ++x)
    if (within_box(z, tab[x], p)) return uint32_t(x);
  throw inversion_error("no preimage on branch " + std::to_string(b));
}

inline claw claw_of(trapdoor& td, const zvec& y) {
  claw c;
  c.x0 = inv(td, 0, y);
  c.x1 = inv(td, 1, y);
  c.y = y;
  return c;
}

inline bitvec j_encode(const params& p, uint64_t x) {
  if (!in_domain(p, x)) throw domain_error("x outside the domain");
  bitvec out(p.w_len, 0);
  for (uint32_t i = 0; i < p.x_bits; ++i) out[i] = uint8_t((x >> i) & 1);
  return out;
}

inline uint32_t j_decode(const params& p, const bitvec& bits) {
  if (bits.size() != p.w_len) throw decode_error("J image has wrong length");
  uint32_t x = 0;
  for (uint32_t i = 0; i < p.w_len; ++i) {
    if (bits[i] > 1) throw decode_error("J image is not a bit string");
    if (i >= p.x_bits && bits[i]) throw decode_error("bit string outside the range of J");
    if (i < p.x_bits) x |= uint32_t(bits[i]) << i;
  }
  return x;
}

// d is good when it touches the informative part of J; on the padding the
// equation would be trivially 0
inline bool in_good_set(const params& p, const bitvec& d) {
  if (d.size() != p.w_len) return false;
  for (uint32_t i = 0; i < p.x_bits; ++i)
    if (d[i]) return true;
  return false;
}

inline int inner_product(const bitvec& a, const bitvec& b) {
  int acc = 0;
  for (size_t i = 0; i < a.size() && i < b.size(); ++i) acc ^= (a[i] & b[i]);
  return acc;
}

inline int claw_equation(const params& p, const claw& c, const bitvec& d) {
  auto j0 = j_encode(p, c.x0), j1 = j_encode(p, c.x1);
  for (size_t i = 0; i < j0.size(); ++i) j0[i] ^= j1[i];
  return inner_product(d, j0);
}

inline bytes serialize_y(const zvec& y) {
  writer w;
  for (auto v : y) w.u32(v);
  return w.take();
}

inline zvec deserialize_y(reader& r, const params& p) {
  zvec y(p.m);
  for (auto& v : y) {
    v = r.u32();
    if (v >= p.q) throw decode_error("image entry out of range");
  }
  return y;
}

// recover the secret from the public key by exhaustive search over H.
// stands in for quantum capability at desk scale
inline std::optional<trapdoor> recover_trapdoor(const key& k) {
  const auto& p = k.prm;
  for (uint64_t s = 1; s < p.domain_size(); ++s) {
    auto sv = encode_x(p, uint32_t(s));
    if (within_box(k.t, k.mul(sv), p)) {
      trapdoor td;
      td.k = k;
      td.s = uint32_t(s);
      td.s_vec = sv;
      return td;
    }
  }
  return std::nullopt;
}

enum class response_kind { preimage, equation };

struct device_response {
  response_kind kind = response_kind::preimage;
  int b = 0;
  uint32_t x = 0;
  bitvec d;
  int u = 0;
};

// simulated quantum device holding one claw state at a time. value type: a copy
// is a snapshot of the (unmeasured) state, which only the rewinding harness does
class device {
 public:
  device(key k, trapdoor td, rng r) : k_(std::move(k)), td_(std::move(td)), rng_(std::move(r)) {}

  // prepare the range superposition and measure the image register
  zvec gen_y() {
    if (state_ == state::holding) throw protocol_order_error("device already holds an unmeasured state");
    const auto& p = k_.prm;
    claw_.x0 = uint32_t(rng_.below(p.domain_size()));
    claw_.x1 = sub_x(p, claw_.x0, td_.s);
    auto c0 = branch_center(k_, 0, claw_.x0);
    auto c1 = branch_center(k_, 1, claw_.x1);
    // y - c0 is uniform on the intersection of the two noise boxes
    claw_.y.assign(p.m, 0);
    int32_t nb = int32_t(p.noise_bound);
    for (uint32_t i = 0; i < p.m; ++i) {
      int32_t off = centered(c1[i] - c0[i], p.q);
      int32_t lo = std::max(-nb, off - nb), hi = std::min(nb, off + nb);
      int32_t e = lo + int32_t(rng_.below(uint64_t(hi - lo + 1)));
      claw_.y[i] = (c0[i] + uint32_t(e)) & (p.q - 1);
    }
    state_ = state::holding;
    return claw_.y;
  }

  device_response measure(int challenge) {
    if (state_ == state::idle) throw protocol_order_error("measure before gen_y");
    if (state_ == state::consumed) throw state_consumed_error("state already measured");
    state_ = state::consumed;
    const auto& p = k_.prm;
    device_response out;
    if (challenge == 0) {
      out.kind = response_kind::preimage;
      out.b = rng_.bit();
      out.x = out.b ? claw_.x1 : claw_.x0;
    } else {
      out.kind = response_kind::equation;
      do {
        out.d = rng_.bits(p.w_len);
      } while (!in_good_set(p, out.d));
      out.u = claw_equation(p, claw_, out.d);
    }
    return out;
  }

  const key& public_key() const { return k_; }
  bool consumed() const { return state_ == state::consumed; }

 private:
  enum class state { idle, holding, consumed };
  key k_;
  trapdoor td_;
  rng rng_;
  claw claw_;
  state state_ = state::idle;
};

// harness side: builds a device for any public key
inline device provision_device(const key& k, rng r) {
  auto td = recover_trapdoor(k);
  if (!td) throw capability_error("key has no trapdoor of the expected shape");
  return device(k, *td, std::move(r));
}

}  // namespace qext::ntcf
