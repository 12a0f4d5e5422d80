#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qext/obf.hpp"
#include "qext/qfhe.hpp"
#include "qext/sfe.hpp"

namespace qext {

struct message {
  std::string type;
  bytes payload;
  std::string abort_reason;  // nonempty marks an abort

  bool is_abort() const { return !abort_reason.empty(); }
  static message abort(std::string reason) { return {"abort", {}, std::move(reason)}; }
};

// trusted per-session machinery: ideal SFE mediator, qFHE keys, obfuscation oracle
struct session_context {
  sfe::context sfe;
  qfhe::oracle fhe;
  obf_oracle obf;

  session_context() = default;
  explicit session_context(const seed32& seed) : sfe(seed, "session/sfe") {}
};

// a next-message machine. receive() gets every message addressed to it,
// send() produces the message the schedule asks for
class party {
 public:
  virtual ~party() = default;
  virtual std::string role() const = 0;
  virtual void receive(const message& m) = 0;
  virtual message send(const std::string& type) = 0;
  // deep copy for snapshots; nullptr means the party cannot be rewound
  virtual std::unique_ptr<party> clone() const = 0;
  // fresh randomness for a rewound branch
  virtual void fork(std::string_view branch) { (void)branch; }
};

// wraps a party and makes it abort instead of sending the given message type
class abort_at : public party {
 public:
  abort_at(std::unique_ptr<party> inner, std::string type) : inner_(std::move(inner)), type_(std::move(type)) {}
  std::string role() const override { return inner_->role(); }
  void receive(const message& m) override { inner_->receive(m); }
  message send(const std::string& type) override {
    if (type == type_) return message::abort("refused to send " + type);
    return inner_->send(type);
  }
  std::unique_ptr<party> clone() const override {
    auto c = inner_->clone();
    if (!c) return nullptr;
    return std::make_unique<abort_at>(std::move(c), type_);
  }
  void fork(std::string_view branch) override { inner_->fork(branch); }
  party& inner() { return *inner_; }

 private:
  std::unique_ptr<party> inner_;
  std::string type_;
};

struct step {
  std::string from;
  std::string to;
  std::string type;
};

struct record {
  std::string session;
  uint32_t round = 0;
  std::string from;
  std::string to;
  std::string type;
  bytes payload;
  std::string reason;  // abort records only

  bool is_abort() const { return !reason.empty(); }
};

struct setup_info {
  std::string protocol;
  std::string params_json;  // canonical json text of the parameters
  std::string seed_hex;
};

class session {
 public:
  struct token_data;
  using token = std::shared_ptr<const token_data>;

  session(std::string id, setup_info setup, std::vector<step> schedule, std::vector<std::unique_ptr<party>> parties,
          std::unique_ptr<session_context> ctx)
      : root_(id), id_(std::move(id)), setup_(std::move(setup)), schedule_(std::move(schedule)),
        ctx_(std::move(ctx)) {
    if (!ctx_) ctx_ = std::make_unique<session_context>();
    std::vector<std::string> roles;
    for (auto& s : schedule_)
      for (auto* r : {&s.from, &s.to})
        if (std::find(roles.begin(), roles.end(), *r) == roles.end()) roles.push_back(*r);
    if (parties.size() != roles.size())
      throw session_error("round 0: schedule has " + std::to_string(roles.size()) + " roles, got " +
                          std::to_string(parties.size()) + " parties");
    for (size_t i = 0; i < roles.size(); ++i) {
      if (!parties[i] || parties[i]->role() != roles[i])
        throw session_error("round 0: party " + std::to_string(i) + " should play '" + roles[i] + "', got '" +
                            (parties[i] ? parties[i]->role() : std::string("null")) + "'");
      parties_[roles[i]] = std::move(parties[i]);
    }
  }

  session_context& context() { return *ctx_; }
  const std::string& id() const { return id_; }
  const setup_info& setup() const { return setup_; }
  uint32_t round() const { return round_; }
  bool done() const { return aborted_ || round_ >= schedule_.size(); }
  bool aborted() const { return aborted_; }
  const std::vector<step>& schedule() const { return schedule_; }
  const std::vector<record>& records() const { return path_; }
  // every record of every branch, in emission order
  const std::vector<record>& archive() const { return archive_; }
  party& get(const std::string& role) { return *parties_.at(role); }

  std::optional<record> abort_record() const {
    if (!aborted_) return std::nullopt;
    return path_.back();
  }

  // executes one scheduled message; false once finished or aborted
  bool advance() {
    if (done()) return false;
    const auto& st = schedule_[round_];
    uint32_t rnd = round_ + 1;
    message m;
    try {
      m = parties_.at(st.from)->send(st.type);
    } catch (const protocol_error& e) {
      m = message::abort(e.what());
    } catch (const decode_error& e) {
      m = message::abort(e.what());
    }
    if (m.is_abort()) return abort(rnd, st.from, m.abort_reason);
    if (m.type != st.type)
      throw session_error("round " + std::to_string(rnd) + ": expected '" + st.type + "' from " + st.from +
                          ", got '" + m.type + "'");
    // logged before delivery
    emit({id_, rnd, st.from, st.to, st.type, m.payload, {}});
    ++round_;
    try {
      parties_.at(st.to)->receive(m);
    } catch (const protocol_error& e) {
      return abort(rnd, st.to, e.what());
    } catch (const decode_error& e) {
      return abort(rnd, st.to, e.what());
    }
    return !done();
  }

  void run() {
    while (advance()) {
    }
  }

  // run until the given number of rounds has been delivered
  void run_until(uint32_t rounds) {
    while (round_ < rounds && advance()) {
    }
  }

  token snapshot() const;
  void restore(const token& t, const std::vector<std::string>& fork_roles = {});

 private:
  bool abort(uint32_t rnd, const std::string& who, const std::string& reason) {
    record r;
    r.session = id_;
    r.round = rnd;
    r.from = who;
    r.type = "abort";
    r.reason = reason.empty() ? "abort" : reason;
    emit(r);
    aborted_ = true;
    return false;
  }
  void emit(record r) {
    path_.push_back(r);
    archive_.push_back(std::move(r));
  }

  std::string root_;
  std::string id_;
  setup_info setup_;
  std::vector<step> schedule_;
  std::map<std::string, std::unique_ptr<party>> parties_;
  std::unique_ptr<session_context> ctx_;
  std::vector<record> path_;
  std::vector<record> archive_;
  uint32_t round_ = 0;
  bool aborted_ = false;
  uint32_t branches_ = 0;
};

struct session::token_data {
  std::string root;
  uint32_t round = 0;
  bool aborted = false;
  std::string id;
  std::vector<record> path;
  std::map<std::string, std::shared_ptr<party>> parties;
  session_context ctx;
};

inline session::token session::snapshot() const {
  auto t = std::make_shared<token_data>();
  t->root = root_;
  t->round = round_;
  t->aborted = aborted_;
  t->id = id_;
  t->path = path_;
  for (auto& [role, p] : parties_) {
    auto c = p->clone();
    if (!c) throw capability_error("party '" + role + "' cannot be snapshotted");
    t->parties[role] = std::shared_ptr<party>(std::move(c));
  }
  t->ctx = *ctx_;
  return t;
}

inline void session::restore(const token& t, const std::vector<std::string>& fork_roles) {
  if (!t || t->root != root_) throw restore_error("token belongs to another session");
  for (auto& [role, p] : t->parties) {
    auto c = p->clone();
    if (!c) throw capability_error("party '" + role + "' cannot be restored");
    parties_[role] = std::move(c);
  }
  // in place, so parties holding the context address stay valid
  *ctx_ = t->ctx;
  round_ = t->round;
  aborted_ = t->aborted;
  path_ = t->path;
  id_ = root_ + "/b" + std::to_string(++branches_);
  for (auto& role : fork_roles) parties_.at(role)->fork(id_);
}

}  // namespace qext
