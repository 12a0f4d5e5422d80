#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "qext/errors.hpp"

namespace qext {

using bytes = std::vector<uint8_t>;
// one entry per bit, values 0/1
using bitvec = std::vector<uint8_t>;

inline std::string to_hex(const uint8_t* p, size_t n) {
  static const char digits[] = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (size_t i = 0; i < n; ++i) {
    out[2 * i] = digits[p[i] >> 4];
    out[2 * i + 1] = digits[p[i] & 15];
  }
  return out;
}

inline std::string to_hex(const bytes& b) { return to_hex(b.data(), b.size()); }

inline bytes from_hex(std::string_view s) {
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (s.size() % 2) throw decode_error("odd hex length");
  bytes out(s.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    int hi = nib(s[2 * i]), lo = nib(s[2 * i + 1]);
    if (hi < 0 || lo < 0) throw decode_error("bad hex digit");
    out[i] = uint8_t(hi << 4 | lo);
  }
  return out;
}

inline bytes xor_bytes(const bytes& a, const bytes& b) {
  if (a.size() != b.size()) throw argument_error("xor of unequal lengths");
  bytes out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

inline void append(bytes& dst, const bytes& src) { dst.insert(dst.end(), src.begin(), src.end()); }

inline bytes slice(const bytes& b, size_t off, size_t len) {
  if (off + len > b.size()) throw decode_error("slice out of range");
  return bytes(b.begin() + off, b.begin() + off + len);
}

// little-endian bit order inside each byte
inline int get_bit(const bytes& b, size_t i) { return (b[i >> 3] >> (i & 7)) & 1; }
inline void set_bit(bytes& b, size_t i, int v) {
  if (v)
    b[i >> 3] |= uint8_t(1u << (i & 7));
  else
    b[i >> 3] &= uint8_t(~(1u << (i & 7)));
}

inline bitvec to_bits(const bytes& b, size_t nbits) {
  bitvec out(nbits);
  for (size_t i = 0; i < nbits; ++i) out[i] = uint8_t(get_bit(b, i));
  return out;
}

inline bitvec to_bits(const bytes& b) { return to_bits(b, b.size() * 8); }

inline bytes from_bits(const bitvec& bits) {
  bytes out((bits.size() + 7) / 8, 0);
  for (size_t i = 0; i < bits.size(); ++i) set_bit(out, i, bits[i] & 1);
  return out;
}

inline bool all_zero(const bytes& b) {
  for (auto v : b)
    if (v) return false;
  return true;
}

// canonical little-endian byte layout
class writer {
 public:
  writer& u8(uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  writer& u16(uint16_t v) { return put(v, 2); }
  writer& u32(uint32_t v) { return put(v, 4); }
  writer& u64(uint64_t v) { return put(v, 8); }
  writer& raw(const bytes& b) {
    append(buf_, b);
    return *this;
  }
  writer& raw(const uint8_t* p, size_t n) {
    buf_.insert(buf_.end(), p, p + n);
    return *this;
  }
  writer& blob(const bytes& b) {
    u32(uint32_t(b.size()));
    return raw(b);
  }
  writer& str(std::string_view s) {
    u32(uint32_t(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
    return *this;
  }
  const bytes& data() const { return buf_; }
  bytes take() { return std::move(buf_); }

 private:
  writer& put(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(uint8_t(v >> (8 * i)));
    return *this;
  }
  bytes buf_;
};

class reader {
 public:
  explicit reader(const bytes& b) : b_(b) {}
  uint8_t u8() { return uint8_t(get(1)); }
  uint16_t u16() { return uint16_t(get(2)); }
  uint32_t u32() { return uint32_t(get(4)); }
  uint64_t u64() { return get(8); }
  bytes raw(size_t n) {
    need(n);
    bytes out(b_.begin() + pos_, b_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  bytes blob() { return raw(u32()); }
  std::string str() {
    auto b = blob();
    return std::string(b.begin(), b.end());
  }
  bool done() const { return pos_ == b_.size(); }
  size_t remaining() const { return b_.size() - pos_; }
  void expect_done() const {
    if (!done()) throw decode_error("trailing bytes");
  }

 private:
  void need(size_t n) const {
    if (pos_ + n > b_.size()) throw decode_error("truncated input");
  }
  uint64_t get(int n) {
    need(size_t(n));
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= uint64_t(b_[pos_ + i]) << (8 * i);
    pos_ += size_t(n);
    return v;
  }
  const bytes& b_;
  size_t pos_ = 0;
};

}  // namespace qext
