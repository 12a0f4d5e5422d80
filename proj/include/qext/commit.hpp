#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qext/bytes.hpp"
#include "qext/rng.hpp"

namespace qext::commit {

// c = A r + e + m * 2^(w-1) mod 2^w, one row per message bit plus row_pad
// message-free rows. r is binary (n bits), e_i = v_i - 2^(beta-1) with v_i a
// beta-bit value. randomness bytes are the raw bits of r then all v_i.
struct scheme {
  uint32_t msg_bits = 0;
  uint32_t n = 16;
  uint32_t w = 8;
  uint32_t beta = 2;
  uint32_t row_pad = 8;
  std::vector<uint8_t> a;  // rows x n
  std::vector<uint8_t> table;

  scheme() = default;

  scheme(uint32_t msg_bits_, const seed32& seed, std::string_view label, uint32_t n_ = 16, uint32_t w_ = 8,
         uint32_t beta_ = 2, uint32_t row_pad_ = 8)
      : msg_bits(msg_bits_), n(n_), w(w_), beta(beta_), row_pad(row_pad_) {
    if (w == 0 || w > 8) throw config_error("commit: w must be in [1, 8]");
    if (beta == 0 || beta + 2 > w) throw config_error("commit: noise width too large for w");
    if (n == 0 || n > 64) throw config_error("commit: n must be in [1, 64]");
    if (row_pad == 0) throw config_error("commit: row_pad must be positive");
    writer wr;
    wr.u32(msg_bits).u32(n).u32(w).u32(beta).u32(row_pad);
    rng r(derive_seed(seed, label, wr.data()), "commit/matrix");
    // at tiny sizes resample until lattice-level binding can be confirmed
    for (int attempt = 0;; ++attempt) {
      a.resize(size_t(rows()) * n);
      for (auto& v : a) v = uint8_t(r.below(q()));
      if (n > 10 || binding_by_enumeration()) break;
      if (attempt == 1000) throw config_error("commit: no binding matrix for these parameters");
    }
    build_table();
  }

  uint32_t rows() const { return msg_bits + row_pad; }
  uint32_t q() const { return 1u << w; }
  uint32_t msg_len() const { return (msg_bits + 7) / 8; }
  uint32_t rand_bits() const { return n + rows() * beta; }
  uint32_t rand_len() const { return (rand_bits() + 7) / 8; }
  uint32_t commitment_len() const { return rows(); }

  bytes sample_randomness(rng& r) const {
    auto out = r.take(rand_len());
    for (uint32_t i = rand_bits(); i < rand_len() * 8; ++i) set_bit(out, i, 0);
    return out;
  }

  bool well_formed(const bytes& m, const bytes& rand) const {
    if (m.size() != msg_len() || rand.size() != rand_len()) return false;
    for (uint32_t i = msg_bits; i < msg_len() * 8; ++i)
      if (get_bit(m, i)) return false;
    for (uint32_t i = rand_bits(); i < rand_len() * 8; ++i)
      if (get_bit(rand, i)) return false;
    return true;
  }

  int32_t noise(const bytes& rand, uint32_t row) const {
    uint32_t v = 0, base = n + row * beta;
    for (uint32_t b = 0; b < beta; ++b) v |= uint32_t(get_bit(rand, base + b)) << b;
    return int32_t(v) - int32_t(1u << (beta - 1));
  }

  // A r + e, the message-free part
  std::vector<uint32_t> mask(const bytes& rand) const {
    std::vector<uint32_t> out(rows());
    if (!table.empty()) {
      uint32_t chunks = (n + 7) / 8;
      for (uint32_t row = 0; row < rows(); ++row) {
        uint32_t acc = 0;
        for (uint32_t ch = 0; ch < chunks; ++ch) acc += table[(size_t(row) * chunks + ch) * 256 + chunk_bits(rand, ch)];
        out[row] = uint32_t(int32_t(acc) + noise(rand, row)) & (q() - 1);
      }
      return out;
    }
    for (uint32_t row = 0; row < rows(); ++row) {
      uint32_t acc = 0;
      for (uint32_t c = 0; c < n; ++c)
        if (get_bit(rand, c)) acc += a[row * n + c];
      out[row] = uint32_t(int32_t(acc) + noise(rand, row)) & (q() - 1);
    }
    return out;
  }

  // byte-chunk partial sums of each row, for small blocks
  void build_table() {
    uint32_t chunks = (n + 7) / 8;
    table.clear();
    if (size_t(rows()) * chunks * 256 > (1u << 18)) return;
    table.resize(size_t(rows()) * chunks * 256);
    for (uint32_t row = 0; row < rows(); ++row)
      for (uint32_t ch = 0; ch < chunks; ++ch)
        for (uint32_t v = 0; v < 256; ++v) {
          uint32_t acc = 0;
          for (uint32_t b = 0; b < 8 && ch * 8 + b < n; ++b)
            if (v >> b & 1) acc += a[row * n + ch * 8 + b];
          table[(size_t(row) * chunks + ch) * 256 + v] = uint8_t(acc & (q() - 1));
        }
  }

  uint32_t chunk_bits(const bytes& rand, uint32_t ch) const {
    uint32_t width = std::min(8u, n - ch * 8);
    if (width == 8) return rand[ch];
    uint32_t v = 0;
    for (uint32_t b = 0; b < width; ++b) v |= uint32_t(get_bit(rand, ch * 8 + b)) << b;
    return v;
  }

  bytes commit(const bytes& m, const bytes& rand) const {
    if (m.size() != msg_len()) throw argument_error("commit: message has wrong length");
    if (rand.size() != rand_len()) throw argument_error("commit: randomness has wrong length");
    if (!well_formed(m, rand)) throw argument_error("commit: nonzero slack bits");
    bytes c(rows());
    if (!table.empty()) {
      // fused path: table lookups for A r, noise read straight from the bytes
      uint32_t chunks = (n + 7) / 8, centre = 1u << (beta - 1), vmask = (1u << beta) - 1;
      for (uint32_t row = 0; row < rows(); ++row) {
        uint32_t acc = 0;
        const uint8_t* t = table.data() + size_t(row) * chunks * 256;
        for (uint32_t ch = 0; ch < chunks; ++ch) acc += t[ch * 256 + chunk_bits(rand, ch)];
        size_t pos = n + size_t(row) * beta;
        uint32_t win = rand[pos >> 3];
        if ((pos >> 3) + 1 < rand.size()) win |= uint32_t(rand[(pos >> 3) + 1]) << 8;
        acc += ((win >> (pos & 7)) & vmask) - centre;
        uint32_t bit = row < msg_bits ? uint32_t(get_bit(m, row)) : 0;
        c[row] = uint8_t((acc + (bit << (w - 1))) & (q() - 1));
      }
      return c;
    }
    auto mk = mask(rand);
    for (uint32_t row = 0; row < rows(); ++row) {
      uint32_t bit = row < msg_bits ? uint32_t(get_bit(m, row)) : 0;
      c[row] = uint8_t((mk[row] + (bit << (w - 1))) & (q() - 1));
    }
    return c;
  }

  bool verify_open(const bytes& c, const bytes& m, const bytes& rand) const {
    if (c.size() != commitment_len() || !well_formed(m, rand)) return false;
    return commit(m, rand) == c;
  }

  // message bound to c under the given randomness, if the opening is consistent
  std::optional<bytes> decode_with_randomness(const bytes& c, const bytes& rand) const {
    if (c.size() != commitment_len() || rand.size() != rand_len()) return std::nullopt;
    auto mk = mask(rand);
    bytes m(msg_len(), 0);
    for (uint32_t row = 0; row < rows(); ++row) {
      uint32_t diff = (uint32_t(c[row]) - mk[row]) & (q() - 1);
      if (diff != 0 && diff != (1u << (w - 1))) return std::nullopt;
      int bit = diff != 0;
      if (row >= msg_bits && bit) return std::nullopt;
      if (row < msg_bits) set_bit(m, row, bit);
    }
    if (!well_formed(m, rand)) return std::nullopt;
    return m;
  }

  // lattice-level binding: no dr in {-1,0,1}^n, dm != 0 with A dr + de = dm * q/2,
  // |de| < 2^beta, on every row. dm = 0 rows need |A dr| small, message rows may differ.
  bool binding_by_enumeration() const {
    int32_t de_max = int32_t(1u << beta) - 1;
    uint64_t total = 1;
    for (uint32_t i = 0; i < n; ++i) total *= 3;
    std::vector<int32_t> dr(n);
    for (uint64_t code = 0; code < total; ++code) {
      uint64_t t = code;
      for (uint32_t i = 0; i < n; ++i) dr[i] = int32_t(t % 3) - 1, t /= 3;
      bool some_msg_row = false, ok = true;
      for (uint32_t row = 0; row < rows() && ok; ++row) {
        int32_t acc = 0;
        for (uint32_t c = 0; c < n; ++c) acc += int32_t(a[row * n + c]) * dr[c];
        int32_t v = acc & int32_t(q() - 1);
        int32_t dist0 = std::min(v, int32_t(q()) - v);
        int32_t dist_half = std::abs(v - int32_t(q() / 2));
        bool zero_ok = dist0 <= de_max, half_ok = dist_half <= de_max;
        if (row >= msg_bits) {
          ok = zero_ok;
        } else {
          ok = zero_ok || half_ok;
          if (!zero_ok) some_msg_row = true;
          else if (half_ok) some_msg_row = true;
        }
      }
      if (ok && some_msg_row) return false;
    }
    return true;
  }
};

inline std::pair<bytes, bytes> xor_share(const bytes& secret, rng& r) {
  auto sh0 = r.take(secret.size());
  return {sh0, xor_bytes(sh0, secret)};
}

struct opening {
  bytes message;
  bytes randomness;
};

// payload_count x k x 2 commitments to fresh xor shares of each payload
struct share_grid {
  uint32_t payload_count = 0;
  uint32_t k = 0;
  std::vector<bytes> commitments;  // index (i * k + j) * 2 + side
  std::vector<opening> openings;

  size_t index(uint32_t i, uint32_t j, int side) const { return (size_t(i) * k + j) * 2 + size_t(side); }
  const bytes& commitment(uint32_t i, uint32_t j, int side) const { return commitments[index(i, j, side)]; }
  const opening& open(uint32_t i, uint32_t j, int side) const { return openings[index(i, j, side)]; }

  bytes serialize_commitments() const {
    writer w;
    w.u32(payload_count).u32(k);
    for (auto& c : commitments) w.blob(c);
    return w.take();
  }
};

inline share_grid grid_commit(const scheme& s, const std::vector<bytes>& payloads, uint32_t k, rng& r) {
  if (k == 0) throw argument_error("grid_commit: k must be positive");
  if (payloads.empty()) throw argument_error("grid_commit: no payloads");
  share_grid g;
  g.payload_count = uint32_t(payloads.size());
  g.k = k;
  g.commitments.resize(size_t(g.payload_count) * k * 2);
  g.openings.resize(g.commitments.size());
  for (uint32_t i = 0; i < g.payload_count; ++i) {
    if (payloads[i].size() != s.msg_len()) throw argument_error("grid_commit: payload length mismatch");
    for (uint32_t j = 0; j < k; ++j) {
      auto [sh0, sh1] = xor_share(payloads[i], r);
      // keep slack bits clear on both shares
      for (uint32_t b = s.msg_bits; b < s.msg_len() * 8; ++b) set_bit(sh0, b, 0), set_bit(sh1, b, 0);
      bytes sh[2] = {sh0, sh1};
      for (int side = 0; side < 2; ++side) {
        auto rand = s.sample_randomness(r);
        g.commitments[g.index(i, j, side)] = s.commit(sh[side], rand);
        g.openings[g.index(i, j, side)] = {sh[side], rand};
      }
    }
  }
  return g;
}

// the committer side of the commit / challenge / open pattern
class rewindable_committer {
 public:
  virtual ~rewindable_committer() = default;
  virtual std::vector<bytes> commitments() = 0;
  // challenges[i * k + j] selects which side of (i, j) to open
  virtual std::optional<std::vector<opening>> open(const bitvec& challenges) = 0;
  // nullptr when the committer cannot be snapshotted
  virtual std::unique_ptr<rewindable_committer> clone() const = 0;
};

struct extraction_result {
  std::optional<std::vector<bytes>> payloads;
  uint32_t rounds = 0;
  std::string reason;
};

inline bool openings_valid(const scheme& s, const std::vector<bytes>& comms, uint32_t payload_count, uint32_t k,
                           const bitvec& ch, const std::vector<opening>& ops) {
  if (ops.size() != size_t(payload_count) * k || comms.size() != size_t(payload_count) * k * 2) return false;
  for (size_t idx = 0; idx < ops.size(); ++idx)
    if (!s.verify_open(comms[idx * 2 + ch[idx]], ops[idx].message, ops[idx].randomness)) return false;
  return true;
}

// rewinds the committer to just after its commitments until a second accepting
// opening arrives, then combines opposite sides
inline extraction_result grid_extract_by_rewind(const scheme& s, const rewindable_committer& adversary,
                                                uint32_t payload_count, uint32_t k, rng& challenges,
                                                uint32_t max_rounds) {
  auto base = adversary.clone();
  if (!base) throw capability_error("committer is not snapshotable");
  extraction_result res;
  auto comms = base->commitments();
  auto first_run = base->clone();
  if (!first_run) throw capability_error("committer is not snapshotable");
  auto ch0 = challenges.bits(size_t(payload_count) * k);
  res.rounds = 1;
  auto ops0 = first_run->open(ch0);
  if (!ops0 || !openings_valid(s, comms, payload_count, k, ch0, *ops0)) {
    res.reason = "main thread not accepting";
    return res;
  }
  for (;;) {
    if (res.rounds >= max_rounds) {
      res.reason = "rewind budget exhausted";
      return res;
    }
    auto branch = base->clone();
    auto ch1 = challenges.bits(size_t(payload_count) * k);
    ++res.rounds;
    auto ops1 = branch->open(ch1);
    if (!ops1 || !openings_valid(s, comms, payload_count, k, ch1, *ops1)) continue;
    std::vector<bytes> out;
    for (uint32_t i = 0; i < payload_count; ++i) {
      std::optional<bytes> got;
      for (uint32_t j = 0; j < k && !got; ++j) {
        size_t idx = size_t(i) * k + j;
        if (ch0[idx] != ch1[idx]) got = xor_bytes((*ops0)[idx].message, (*ops1)[idx].message);
      }
      if (!got) {
        res.reason = "challenges coincide on every j for payload " + std::to_string(i);
        return res;
      }
      out.push_back(*got);
    }
    res.payloads = std::move(out);
    return res;
  }
}

// honest committer over a fixed grid
class honest_committer : public rewindable_committer {
 public:
  explicit honest_committer(share_grid g) : g_(std::move(g)) {}
  std::vector<bytes> commitments() override { return g_.commitments; }
  std::optional<std::vector<opening>> open(const bitvec& ch) override {
    std::vector<opening> out;
    for (uint32_t i = 0; i < g_.payload_count; ++i)
      for (uint32_t j = 0; j < g_.k; ++j) out.push_back(g_.open(i, j, ch[size_t(i) * g_.k + j]));
    return out;
  }
  std::unique_ptr<rewindable_committer> clone() const override { return std::make_unique<honest_committer>(*this); }

 private:
  share_grid g_;
};

}  // namespace qext::commit
