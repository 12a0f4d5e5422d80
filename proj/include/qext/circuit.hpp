#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qext/bytes.hpp"

namespace qext {

enum class gate_op : uint8_t { and_, xor_, not_ };

struct gate {
  gate_op op;
  uint32_t a;
  uint32_t b;  // unused for NOT
  uint32_t out;
};

// wires 0..sender_bits-1 are sender inputs, then receiver inputs; gate g defines
// wire sender_bits + receiver_bits + g
struct bool_circuit {
  uint32_t sender_bits = 0;
  uint32_t receiver_bits = 0;
  std::vector<gate> gates;
  std::vector<uint32_t> outputs;

  uint32_t input_bits() const { return sender_bits + receiver_bits; }
  uint32_t wire_count() const { return input_bits() + uint32_t(gates.size()); }

  size_t and_count() const {
    size_t n = 0;
    for (auto& g : gates) n += g.op == gate_op::and_;
    return n;
  }

  void validate() const {
    uint32_t next = input_bits();
    for (auto& g : gates) {
      if (g.out != next) throw decode_error("gate output wire out of order");
      if (g.a >= next || (g.op != gate_op::not_ && g.b >= next)) throw decode_error("gate reads an undefined wire");
      ++next;
    }
    for (auto o : outputs)
      if (o >= next) throw decode_error("output wire undefined");
  }

  bitvec eval(const bitvec& sender, const bitvec& receiver) const {
    if (sender.size() != sender_bits || receiver.size() != receiver_bits)
      throw argument_error("circuit input width mismatch");
    std::vector<uint8_t> v(wire_count());
    std::copy(sender.begin(), sender.end(), v.begin());
    std::copy(receiver.begin(), receiver.end(), v.begin() + sender_bits);
    for (auto& g : gates) {
      switch (g.op) {
        case gate_op::and_: v[g.out] = v[g.a] & v[g.b]; break;
        case gate_op::xor_: v[g.out] = v[g.a] ^ v[g.b]; break;
        case gate_op::not_: v[g.out] = v[g.a] ^ 1; break;
      }
    }
    bitvec out(outputs.size());
    for (size_t i = 0; i < outputs.size(); ++i) out[i] = v[outputs[i]];
    return out;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "inputs " << sender_bits << ' ' << receiver_bits << '\n';
    os << "gates " << gates.size() << '\n';
    for (auto& g : gates) {
      if (g.op == gate_op::not_)
        os << "NOT " << g.a << " -> " << g.out << '\n';
      else
        os << (g.op == gate_op::and_ ? "AND " : "XOR ") << g.a << ' ' << g.b << " -> " << g.out << '\n';
    }
    os << "outputs";
    for (auto o : outputs) os << ' ' << o;
    os << '\n';
    return os.str();
  }

  static bool_circuit from_text(const std::string& text) {
    bool_circuit c;
    std::istringstream is(text);
    std::string line;
    bool have_inputs = false;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string tok;
      ls >> tok;
      if (tok == "inputs") {
        if (!(ls >> c.sender_bits >> c.receiver_bits)) throw decode_error("bad inputs line");
        have_inputs = true;
      } else if (tok == "gates") {
        size_t n;
        if (!(ls >> n)) throw decode_error("bad gates line");
        c.gates.reserve(n);
      } else if (tok == "outputs") {
        uint32_t o;
        while (ls >> o) c.outputs.push_back(o);
      } else if (tok == "AND" || tok == "XOR" || tok == "NOT") {
        gate g{};
        std::string arrow;
        g.op = tok == "AND" ? gate_op::and_ : tok == "XOR" ? gate_op::xor_ : gate_op::not_;
        bool ok = g.op == gate_op::not_ ? bool(ls >> g.a >> arrow >> g.out) : bool(ls >> g.a >> g.b >> arrow >> g.out);
        if (!ok || arrow != "->") throw decode_error("bad gate line: " + line);
        c.gates.push_back(g);
      } else {
        throw decode_error("unknown circuit line: " + line);
      }
    }
    if (!have_inputs) throw decode_error("circuit text lacks an inputs line");
    c.validate();
    return c;
  }
};

// builds circuits over symbolic bits; constants fold away so only real gates are emitted
class circuit_builder {
 public:
  struct bit {
    int32_t v;  // -1 const 0, -2 const 1, else wire index
    bool is_const() const { return v < 0; }
    int const_value() const { return v == -2; }
  };
  using word = std::vector<bit>;

  circuit_builder(uint32_t sender_bits, uint32_t receiver_bits) {
    c_.sender_bits = sender_bits;
    c_.receiver_bits = receiver_bits;
  }

  static bit zero() { return {-1}; }
  static bit one() { return {-2}; }
  static bit constant(int v) { return v ? one() : zero(); }

  bit sender(uint32_t i) const {
    if (i >= c_.sender_bits) throw argument_error("sender input index out of range");
    return {int32_t(i)};
  }
  bit receiver(uint32_t i) const {
    if (i >= c_.receiver_bits) throw argument_error("receiver input index out of range");
    return {int32_t(c_.sender_bits + i)};
  }
  word sender_word(uint32_t off, uint32_t n) const {
    word w;
    for (uint32_t i = 0; i < n; ++i) w.push_back(sender(off + i));
    return w;
  }
  word receiver_word(uint32_t off, uint32_t n) const {
    word w;
    for (uint32_t i = 0; i < n; ++i) w.push_back(receiver(off + i));
    return w;
  }

  bit xor_(bit a, bit b) {
    if (a.is_const()) return a.const_value() ? not_(b) : b;
    if (b.is_const()) return b.const_value() ? not_(a) : a;
    if (a.v == b.v) return zero();
    return emit(gate_op::xor_, a, b);
  }
  bit and_(bit a, bit b) {
    if (a.is_const()) return a.const_value() ? b : zero();
    if (b.is_const()) return b.const_value() ? a : zero();
    if (a.v == b.v) return a;
    return emit(gate_op::and_, a, b);
  }
  bit not_(bit a) {
    if (a.is_const()) return constant(!a.const_value());
    return emit(gate_op::not_, a, a);
  }
  bit or_(bit a, bit b) { return not_(and_(not_(a), not_(b))); }
  bit mux(bit sel, bit if0, bit if1) { return xor_(if0, and_(sel, xor_(if0, if1))); }

  // a + b mod 2^width, little-endian words of equal width
  word add(const word& a, const word& b) {
    if (a.size() != b.size()) throw argument_error("adder width mismatch");
    word out(a.size(), zero());
    bit carry = zero();
    for (size_t i = 0; i < a.size(); ++i) {
      bit axc = xor_(a[i], carry);
      out[i] = xor_(axc, b[i]);
      if (i + 1 < a.size()) carry = xor_(and_(axc, xor_(b[i], carry)), carry);
    }
    return out;
  }

  static word constant_word(uint64_t v, size_t width) {
    word w(width);
    for (size_t i = 0; i < width; ++i) w[i] = constant(int((v >> i) & 1));
    return w;
  }

  word and_each(const word& a, bit s) {
    word out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = and_(a[i], s);
    return out;
  }

  bit equal(const word& a, const word& b) {
    if (a.size() != b.size()) throw argument_error("comparator width mismatch");
    std::vector<bit> eq;
    for (size_t i = 0; i < a.size(); ++i) eq.push_back(not_(xor_(a[i], b[i])));
    return all(eq);
  }

  bit all(std::vector<bit> v) {
    if (v.empty()) return one();
    while (v.size() > 1) {
      std::vector<bit> next;
      for (size_t i = 0; i + 1 < v.size(); i += 2) next.push_back(and_(v[i], v[i + 1]));
      if (v.size() % 2) next.push_back(v.back());
      v = std::move(next);
    }
    return v[0];
  }

  void output(bit b) { pending_.push_back(b); }
  void output(const word& w) {
    for (auto b : w) output(b);
  }

  bool_circuit finish() {
    for (auto b : pending_) c_.outputs.push_back(materialize(b));
    pending_.clear();
    c_.validate();
    return std::move(c_);
  }

 private:
  bit emit(gate_op op, bit a, bit b) {
    uint32_t out = c_.wire_count();
    c_.gates.push_back({op, uint32_t(a.v), uint32_t(b.v), out});
    return {int32_t(out)};
  }

  // constants need a real wire once they reach an output
  uint32_t materialize(bit b) {
    if (!b.is_const()) return uint32_t(b.v);
    if (c_.input_bits() == 0) throw argument_error("constant output in a circuit without inputs");
    if (zero_wire_ < 0) {
      zero_wire_ = emit(gate_op::xor_, bit{0}, bit{0}).v;
      one_wire_ = emit(gate_op::not_, bit{zero_wire_}, bit{zero_wire_}).v;
    }
    return uint32_t(b.const_value() ? one_wire_ : zero_wire_);
  }

  bool_circuit c_;
  std::vector<bit> pending_;
  int32_t zero_wire_ = -1, one_wire_ = -1;
};

// two-party functionality: sender and receiver inputs in, receiver output out
struct functionality {
  std::string name;
  size_t sender_len = 0;
  size_t receiver_len = 0;
  size_t output_len = 0;  // including the tag byte
  std::function<bytes(const bytes&, const bytes&)> native;
  std::shared_ptr<const bool_circuit> circuit;

  void check_inputs(const bytes* s, const bytes* r) const {
    if (s && s->size() != sender_len)
      throw argument_error(name + ": sender input is " + std::to_string(s->size()) + " bytes, expected " +
                           std::to_string(sender_len));
    if (r && r->size() != receiver_len)
      throw argument_error(name + ": receiver input is " + std::to_string(r->size()) + " bytes, expected " +
                           std::to_string(receiver_len));
  }
};

inline bytes eval_native(const functionality& fn, const bytes& s, const bytes& r) {
  fn.check_inputs(&s, &r);
  auto out = fn.native(s, r);
  if (out.size() != fn.output_len) throw argument_error(fn.name + ": native output has wrong length");
  return out;
}

inline bytes eval_circuit(const functionality& fn, const bytes& s, const bytes& r) {
  if (!fn.circuit) throw capability_error(fn.name + " has no circuit refinement");
  fn.check_inputs(&s, &r);
  auto out = fn.circuit->eval(to_bits(s, fn.circuit->sender_bits), to_bits(r, fn.circuit->receiver_bits));
  return from_bits(out);
}

// in-band output encoding: 0x00 followed by zeros is bottom
inline bytes encode_bottom(size_t output_len) { return bytes(output_len, 0); }

inline bytes encode_value(const bytes& payload, size_t output_len) {
  if (payload.size() + 1 > output_len) throw argument_error("payload longer than declared output");
  bytes out(output_len, 0);
  out[0] = 1;
  std::copy(payload.begin(), payload.end(), out.begin() + 1);
  return out;
}

inline bool is_bottom(const bytes& out) { return out.empty() || out[0] == 0; }

inline std::optional<bytes> decode_output(const bytes& out) {
  if (is_bottom(out)) return std::nullopt;
  return bytes(out.begin() + 1, out.end());
}

}  // namespace qext
