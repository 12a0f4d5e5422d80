#pragma once

#include <functional>
#include <map>
#include <optional>

#include "qext/rng.hpp"

namespace qext {

// compute-and-compare program: release payload iff inner(input) == lock
struct cc_program {
  std::function<std::optional<bytes>(const bytes&)> inner;
  bytes lock;
  bytes payload;

  std::optional<bytes> run(const bytes& input) const {
    auto v = inner(input);
    if (!v || v->size() != lock.size()) return std::nullopt;
    if (sodium_memcmp(v->data(), lock.data(), lock.size()) != 0) return std::nullopt;
    return payload;
  }
};

inline cc_program build_cc_circuit(std::function<std::optional<bytes>(const bytes&)> inner, bytes lock,
                                   bytes payload) {
  if (lock.empty()) throw config_error("compute-and-compare lock must be nonempty");
  if (!inner) throw config_error("compute-and-compare program needs an inner procedure");
  return {std::move(inner), std::move(lock), std::move(payload)};
}

// ideal lockable obfuscation: the oracle keeps the program, the
// handle is an opaque identifier of fixed shape
class obf_oracle {
 public:
  static constexpr size_t handle_len = 16;

  bytes obfuscate(cc_program p, rng& r) {
    auto h = fresh(r);
    programs_[h] = std::move(p);
    return h;
  }

  // simulator handle: same shape, bound to nothing
  bytes simulate(rng& r) {
    auto h = fresh(r);
    simulated_.insert({h, true});
    return h;
  }

  std::optional<bytes> eval(const bytes& handle, const bytes& input) const {
    auto it = programs_.find(handle);
    if (it == programs_.end()) return std::nullopt;
    return it->second.run(input);
  }

  bool known(const bytes& handle) const { return programs_.count(handle) || simulated_.count(handle); }

 private:
  bytes fresh(rng& r) {
    bytes h;
    do {
      h = r.take(handle_len);
    } while (known(h));
    return h;
  }
  std::map<bytes, cc_program> programs_;
  std::map<bytes, bool> simulated_;
};

}  // namespace qext
