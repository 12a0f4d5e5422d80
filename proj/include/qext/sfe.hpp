#pragma once

#include <map>
#include <string>

#include "qext/circuit.hpp"
#include "qext/garble.hpp"
#include "qext/rng.hpp"

namespace qext::sfe {

enum class backend : uint8_t { ideal = 1, garbled = 2 };

inline std::string backend_name(backend b) { return b == backend::ideal ? "ideal" : "garbled"; }

inline backend parse_backend(const std::string& s) {
  if (s == "ideal") return backend::ideal;
  if (s == "garbled") return backend::garbled;
  throw config_error("unknown sfe backend '" + s + "'");
}

struct message {
  backend tag = backend::ideal;
  bytes payload;

  bytes serialize() const {
    bytes out{uint8_t(tag)};
    append(out, payload);
    return out;
  }
  static message deserialize(const bytes& b) {
    if (b.empty() || (b[0] != uint8_t(backend::ideal) && b[0] != uint8_t(backend::garbled)))
      throw protocol_error("sfe message has no valid backend tag");
    return {backend(b[0]), bytes(b.begin() + 1, b.end())};
  }
};
using msg1 = message;
using msg2 = message;

struct receiver_state {
  backend tag = backend::ideal;
  bytes session;
  bytes handle;
  seed32 key{};
  size_t output_len = 0;
  // garbled only
  bytes choice_bits;
  std::vector<bytes> ot_keys;
  bool consumed = false;
};

// record kept by the mediator; plays the role of the ideal-world extractor
struct log_entry {
  bytes handle;
  std::string fn;
  bytes sender_input;
  bytes receiver_input;
  bytes output;
};

inline bytes mac(const seed32& key, const bytes& data) {
  ensure_sodium();
  bytes out(32);
  crypto_generichash(out.data(), 32, data.data(), data.size(), key.data(), key.size());
  return out;
}

inline bytes keystream(const seed32& key, const bytes& handle, size_t n) {
  rng r(derive_seed(key, "sfe/envelope", handle), "stream");
  return r.take(n);
}

// envelope of an ideal-backend output: deterministic in (key, session, handle, output)
inline msg2 expected_msg2(const seed32& key, const bytes& session, const bytes& handle, const bytes& output) {
  writer w;
  w.raw(session).raw(handle).blob(xor_bytes(output, keystream(key, handle, output.size())));
  auto body = w.take();
  append(body, mac(key, body));
  return {backend::ideal, body};
}

inline msg2 expected_msg2(const receiver_state& st, const bytes& output) {
  if (st.tag != backend::ideal) throw argument_error("expected_msg2 applies to the ideal backend");
  return expected_msg2(st.key, st.session, st.handle, output);
}

// per-session trusted party: the ideal SFE mediator and the ideal OT dealer
class context {
 public:
  context() = default;
  context(const seed32& seed, std::string_view label) {
    rng r(seed, label);
    session_ = r.take(16);
    mediator_key_ = r.seed();
  }

  const bytes& session() const { return session_; }
  const std::vector<log_entry>& input_log() const { return log_; }

  // ideal backend
  bytes register_receiver(const bytes& handle, const bytes& input, const seed32& key, const bytes& salt) {
    writer w;
    w.raw(session_).raw(handle).raw(hash_bytes(concat(salt, input)));
    auto body = w.take();
    append(body, mac(mediator_key_, body));
    pending_[handle] = {input, key};
    return body;
  }

  std::tuple<bytes, seed32, bytes> open_msg1(const bytes& payload) {
    if (payload.size() != 16 + 16 + 32 + 32) throw protocol_error("ideal msg1 has wrong length");
    auto body = slice(payload, 0, 64);
    if (sodium_memcmp(mac(mediator_key_, body).data(), payload.data() + 64, 32) != 0)
      throw protocol_error("ideal msg1 failed authentication");
    if (slice(payload, 0, 16) != session_) throw protocol_error("msg1 belongs to another session");
    auto handle = slice(payload, 16, 16);
    auto it = pending_.find(handle);
    if (it == pending_.end()) throw protocol_error("unknown receiver handle");
    return {handle, it->second.key, it->second.input};
  }

  void record(log_entry e) { log_.push_back(std::move(e)); }

  // ideal OT dealer: random-OT correlation per token
  bytes ot_token(int choice, rng& r, bytes& key_out) {
    auto token = r.take(16);
    ot_entry e{r.take(16), r.take(16)};
    key_out = choice ? e.k1 : e.k0;
    ot_[token] = e;
    return token;
  }

  std::pair<bytes, bytes> ot_keys(const bytes& token) const {
    auto it = ot_.find(token);
    if (it == ot_.end()) throw protocol_error("unknown OT token");
    return {it->second.k0, it->second.k1};
  }

 private:
  static bytes concat(bytes a, const bytes& b) {
    append(a, b);
    return a;
  }
  struct pending {
    bytes input;
    seed32 key;
  };
  struct ot_entry {
    bytes k0, k1;
  };
  bytes session_ = bytes(16, 0);
  seed32 mediator_key_{};
  std::map<bytes, pending> pending_;
  std::map<bytes, ot_entry> ot_;
  std::vector<log_entry> log_;
};

inline std::pair<msg1, receiver_state> receiver_msg1(context& ctx, backend b, const functionality& fn,
                                                     const bytes& receiver_input, rng& r) {
  fn.check_inputs(nullptr, &receiver_input);
  receiver_state st;
  st.tag = b;
  st.session = ctx.session();
  st.output_len = fn.output_len;
  if (b == backend::ideal) {
    st.handle = r.take(16);
    st.key = r.seed();
    auto salt = r.take(32);
    return {{b, ctx.register_receiver(st.handle, receiver_input, st.key, salt)}, st};
  }
  if (!fn.circuit) throw config_error(fn.name + " has no circuit; the garbled backend cannot run it");
  auto bits = to_bits(receiver_input, fn.circuit->receiver_bits);
  writer w;
  w.raw(ctx.session()).u32(uint32_t(bits.size()));
  for (auto bit : bits) {
    bytes k;
    w.raw(ctx.ot_token(bit, r, k));
    st.ot_keys.push_back(k);
  }
  st.choice_bits = bits;
  return {{b, w.take()}, st};
}

inline msg2 sender_msg2(context& ctx, const functionality& fn, const bytes& sender_input, const msg1& m1, rng& r) {
  fn.check_inputs(&sender_input, nullptr);
  if (m1.tag == backend::ideal) {
    auto [handle, key, rin] = ctx.open_msg1(m1.payload);
    auto out = eval_native(fn, sender_input, rin);
    ctx.record({handle, fn.name, sender_input, rin, out});
    return expected_msg2(key, ctx.session(), handle, out);
  }
  if (!fn.circuit) throw config_error(fn.name + " has no circuit; the garbled backend cannot run it");
  const auto& c = *fn.circuit;
  reader rd(m1.payload);
  if (m1.payload.size() < 20 || slice(m1.payload, 0, 16) != ctx.session())
    throw protocol_error("msg1 belongs to another session");
  rd.raw(16);
  uint32_t n = rd.u32();
  if (n != c.receiver_bits || rd.remaining() != size_t(n) * 16) throw protocol_error("garbled msg1 has wrong shape");
  auto gc = garble::garble(c, r);
  writer w;
  w.raw(ctx.session());
  w.blob(gc.tables);
  auto sbits = to_bits(sender_input, c.sender_bits);
  uint8_t buf[16];
  for (uint32_t i = 0; i < c.sender_bits; ++i) {
    garble::store(buf, garble::label_for(gc, i, sbits[i]));
    w.raw(buf, 16);
  }
  for (uint32_t i = 0; i < n; ++i) {
    auto [k0, k1] = ctx.ot_keys(rd.raw(16));
    for (int v = 0; v < 2; ++v) {
      garble::store(buf, garble::label_for(gc, c.sender_bits + i, v));
      auto& k = v ? k1 : k0;
      for (int j = 0; j < 16; ++j) buf[j] ^= k[j];
      w.raw(buf, 16);
    }
  }
  w.raw(from_bits(gc.decode));
  return {backend::garbled, w.take()};
}

inline bytes receiver_output(receiver_state& st, const functionality& fn, const msg2& m2) {
  if (st.consumed) throw consumed_error("receiver state already used");
  if (m2.tag != st.tag) throw protocol_error("sfe backend mismatch");
  if (st.tag == backend::ideal) {
    reader rd(m2.payload);
    try {
      auto session = rd.raw(16);
      auto handle = rd.raw(16);
      if (session != st.session || handle != st.handle) throw protocol_error("msg2 belongs to another session");
      auto sealed = rd.blob();
      if (sealed.size() != st.output_len) throw protocol_error("envelope has wrong length");
      auto body = slice(m2.payload, 0, m2.payload.size() - rd.remaining());
      auto tag = rd.raw(32);
      rd.expect_done();
      if (sodium_memcmp(mac(st.key, body).data(), tag.data(), 32) != 0)
        throw protocol_error("envelope failed authentication");
      st.consumed = true;
      return xor_bytes(sealed, keystream(st.key, st.handle, sealed.size()));
    } catch (const decode_error& e) {
      throw protocol_error(std::string("malformed envelope: ") + e.what());
    }
  }
  if (!fn.circuit) throw config_error(fn.name + " has no circuit");
  const auto& c = *fn.circuit;
  try {
    reader rd(m2.payload);
    if (rd.raw(16) != st.session) throw protocol_error("msg2 belongs to another session");
    auto tables = rd.blob();
    std::vector<garble::block> labels;
    labels.reserve(c.input_bits());
    for (uint32_t i = 0; i < c.sender_bits; ++i) labels.push_back(garble::load(rd.raw(16).data()));
    for (uint32_t i = 0; i < c.receiver_bits; ++i) {
      auto e0 = rd.raw(16), e1 = rd.raw(16);
      auto& e = st.choice_bits[i] ? e1 : e0;
      labels.push_back(garble::load(xor_bytes(e, st.ot_keys[i]).data()));
    }
    auto decode = to_bits(rd.raw((c.outputs.size() + 7) / 8), c.outputs.size());
    rd.expect_done();
    st.consumed = true;
    return from_bits(garble::evaluate(c, tables, std::move(labels), decode));
  } catch (const decode_error& e) {
    throw protocol_error(std::string("malformed garbled msg2: ") + e.what());
  }
}

}  // namespace qext::sfe
