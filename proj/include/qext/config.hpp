#pragma once

#include <json.hpp>
#include <toml.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "qext/cqext.hpp"
#include "qext/qqext.hpp"
#include "qext/qzk.hpp"

namespace qext {

using json = nlohmann::ordered_json;

// one document drives every experiment; defaults are the desk parameters
struct config {
  std::string preset = "toy8";
  ntcf::params ntcf = ntcf::preset("toy8");
  uint32_t k = 16;
  uint32_t ell = 16;
  uint32_t k_wi = 20;
  uint32_t witness_len = 16;
  uint32_t td_bits = 16;
  uint32_t graph_n = 8;
  uint32_t threshold = 0;
  uint32_t ext_rewinds = 0;
  bool classical_variant = false;
  sfe::backend sfe = sfe::backend::ideal;
  std::string qfhe = "mock";
  std::string obf = "ideal";
  std::string ot = "ideal";
  uint32_t trials = 200;
  double tolerance = 0.0;
  uint32_t threads = 1;
  seed32 seed = seed_from_u64(1);

  cqext::params cqext_params() const {
    cqext::params p;
    p.ntcf = ntcf;
    p.k = k;
    p.backend = sfe;
    p.witness_len = witness_len;
    p.threshold = threshold;
    p.public_seed = derive_seed(seed, "public/cqext");
    return p;
  }
  qqext::params qqext_params() const {
    qqext::params p;
    p.ell = ell;
    p.witness_len = witness_len;
    p.backend = sfe;
    p.public_seed = derive_seed(seed, "public/qqext");
    return p;
  }
  // the inner cQEXT always runs on the ideal mediator; F is native-only
  qzk::params qzk_params() const {
    qzk::params p;
    p.qext = cqext_params();
    p.qext.backend = sfe::backend::ideal;
    p.k = k;
    p.k_wi = k_wi;
    p.td_bits = td_bits;
    p.graph_n = graph_n;
    p.classical_variant = classical_variant;
    p.ext_rewinds = ext_rewinds;
    p.public_seed = derive_seed(seed, "public/qzk");
    return p;
  }

  void validate() const {
    ntcf.validate();
    auto c = cqext_params();
    c.backend = sfe::backend::ideal;
    c.validate();
    qqext_params().validate();
    qzk_params().validate();
    if (qfhe != "mock") throw config_error("qfhe backend '" + qfhe + "' is not available, use 'mock'");
    if (obf != "ideal") throw config_error("obf backend '" + obf + "' is not available, use 'ideal'");
    if (ot != "ideal") throw config_error("ot backend '" + ot + "' is not available, use 'ideal'");
    if (tolerance < 0 || tolerance > 1) throw config_error("tolerance must be in [0, 1]");
    if (threads == 0 || threads > 256) throw config_error("threads must be in [1, 256]");
  }
};

inline json to_json(const config& c) {
  json pre = {{"name", c.preset},         {"n", c.ntcf.n},           {"m", c.ntcf.m},
              {"q", c.ntcf.q},            {"noise_bound", c.ntcf.noise_bound}, {"x_bits", c.ntcf.x_bits},
              {"w_len", c.ntcf.w_len}};
  json proto = {{"k", c.k},
                {"ell", c.ell},
                {"k_wi", c.k_wi},
                {"witness_len", c.witness_len},
                {"td_bits", c.td_bits},
                {"graph_n", c.graph_n},
                {"threshold", c.threshold},
                {"ext_rewinds", c.ext_rewinds},
                {"classical_variant", c.classical_variant}};
  json be = {{"sfe", sfe::backend_name(c.sfe)}, {"qfhe", c.qfhe}, {"obf", c.obf}, {"ot", c.ot}};
  return {{"seed", seed_hex(c.seed)}, {"trials", c.trials},   {"tolerance", c.tolerance}, {"threads", c.threads},
          {"preset", pre},            {"protocol", proto},    {"backends", be}};
}

namespace detail {

inline json from_toml(const toml::node& n) {
  if (auto* t = n.as_table()) {
    json out = json::object();
    for (auto& [k, v] : *t) out[std::string(k.str())] = from_toml(v);
    return out;
  }
  if (auto* a = n.as_array()) {
    json out = json::array();
    for (auto& v : *a) out.push_back(from_toml(v));
    return out;
  }
  if (auto* v = n.as_integer()) return v->get();
  if (auto* v = n.as_floating_point()) return v->get();
  if (auto* v = n.as_boolean()) return v->get();
  if (auto* v = n.as_string()) return v->get();
  throw config_error("unsupported toml value (dates are not config values)");
}

class fields {
 public:
  fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw config_error(where_ + " must be a table");
    for (auto& [k, v] : j_.items()) pending_.push_back(k);
  }
  // every key must have been consumed
  void done() const {
    if (!pending_.empty()) throw config_error("unknown key '" + where_ + pending_.front() + "'");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  void u32(const std::string& k, uint32_t& out) {
    if (!take(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_number_integer() || v.get<int64_t>() < 0 || v.get<int64_t>() > int64_t(UINT32_MAX))
      throw config_error(where_ + k + " must be a non-negative integer");
    out = v.get<uint32_t>();
  }
  void boolean(const std::string& k, bool& out) {
    if (!take(k)) return;
    if (!j_.at(k).is_boolean()) throw config_error(where_ + k + " must be a boolean");
    out = j_.at(k).get<bool>();
  }
  void str(const std::string& k, std::string& out) {
    if (!take(k)) return;
    if (!j_.at(k).is_string()) throw config_error(where_ + k + " must be a string");
    out = j_.at(k).get<std::string>();
  }
  void real(const std::string& k, double& out) {
    if (!take(k)) return;
    if (!j_.at(k).is_number()) throw config_error(where_ + k + " must be a number");
    out = j_.at(k).get<double>();
  }
  const json* table(const std::string& k) {
    if (!take(k)) return nullptr;
    return &j_.at(k);
  }
  const json* raw(const std::string& k) { return take(k) ? &j_.at(k) : nullptr; }

 private:
  bool take(const std::string& k) {
    auto it = std::find(pending_.begin(), pending_.end(), k);
    if (it == pending_.end()) return false;
    pending_.erase(it);
    return true;
  }
  const json& j_;
  std::string where_;
  std::vector<std::string> pending_;
};

}  // namespace detail

// hex string of 32 bytes, or a non-negative integer
inline seed32 parse_seed(const json& v) {
  if (v.is_number_integer() && v.get<int64_t>() >= 0) return seed_from_u64(v.get<uint64_t>());
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s.size() == 64) {
      try {
        return seed_from_hex(s);
      } catch (const std::exception&) {
      }
    }
    if (!s.empty() && s.size() <= 19 && std::all_of(s.begin(), s.end(), ::isdigit)) return seed_from_u64(std::stoull(s));
    throw config_error("seed must be 64 hex digits or a decimal integer");
  }
  throw config_error("seed must be 64 hex digits or a decimal integer");
}

inline json parse_document(const std::string& text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw config_error(std::string("bad json: ") + e.what());
    }
  }
  try {
    return detail::from_toml(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "bad toml at line " << e.source().begin.line << ": " << e.description();
    throw config_error(os.str());
  }
}

// preset first, then field by field overrides
inline config config_from_json(const json& doc) {
  config c;
  detail::fields top(doc, "");
  const json* pre = top.table("preset");
  if (!pre) throw config_error("config needs a [preset] table");
  {
    detail::fields f(*pre, "preset.");
    f.str("name", c.preset);
    c.ntcf = ntcf::preset(c.preset);
    f.u32("n", c.ntcf.n);
    f.u32("m", c.ntcf.m);
    f.u32("q", c.ntcf.q);
    f.u32("noise_bound", c.ntcf.noise_bound);
    f.u32("x_bits", c.ntcf.x_bits);
    f.u32("w_len", c.ntcf.w_len);
    f.done();
  }
  if (auto* s = top.raw("seed")) c.seed = parse_seed(*s);
  top.u32("trials", c.trials);
  top.real("tolerance", c.tolerance);
  top.u32("threads", c.threads);
  if (auto* p = top.table("protocol")) {
    detail::fields f(*p, "protocol.");
    f.u32("k", c.k);
    f.u32("ell", c.ell);
    f.u32("k_wi", c.k_wi);
    f.u32("witness_len", c.witness_len);
    f.u32("td_bits", c.td_bits);
    f.u32("graph_n", c.graph_n);
    f.u32("threshold", c.threshold);
    f.u32("ext_rewinds", c.ext_rewinds);
    f.boolean("classical_variant", c.classical_variant);
    f.done();
  }
  if (auto* b = top.table("backends")) {
    detail::fields f(*b, "backends.");
    std::string s = sfe::backend_name(c.sfe);
    f.str("sfe", s);
    c.sfe = sfe::parse_backend(s);
    f.str("qfhe", c.qfhe);
    f.str("obf", c.obf);
    f.str("ot", c.ot);
    f.done();
  }
  top.done();
  return c;
}

// QEXT_SEED, when set, beats the document's seed
inline void apply_env(config& c) {
  if (const char* s = std::getenv("QEXT_SEED"); s && *s) c.seed = parse_seed(json(std::string(s)));
}

inline config load_config_text(const std::string& text, bool use_env = true) {
  auto c = config_from_json(parse_document(text));
  if (use_env) apply_env(c);
  c.validate();
  return c;
}

inline config load_config_file(const std::string& path, bool use_env = true) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str(), use_env);
}

inline config preset_config(const std::string& name, bool use_env = true) {
  return load_config_text("[preset]\nname = \"" + name + "\"\n", use_env);
}

}  // namespace qext
