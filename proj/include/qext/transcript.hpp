#pragma once

#include <fstream>
#include <sstream>

#include "qext/config.hpp"

namespace qext {

// first line of every transcript file: enough to rebuild and rerun the session
struct transcript_header {
  std::string protocol;
  std::string driver;  // run, extract, simulate, ...
  json parties = json::object();
  json config;  // canonical config document
  std::string seed_hex;
  json params;  // the protocol's own parameter echo

  json to_json() const {
    return {{"protocol", protocol}, {"driver", driver}, {"parties", parties},
            {"seed", seed_hex},     {"params", params}, {"config", config}};
  }
};

inline json record_json(const record& r) {
  if (r.is_abort()) return {{"session", r.session}, {"round", r.round}, {"party", r.from}, {"reason", r.reason}};
  return {{"session", r.session}, {"round", r.round}, {"from", r.from},
          {"to", r.to},           {"type", r.type},   {"payload_hex", to_hex(r.payload)}};
}

inline record record_from_json(const json& j) {
  auto need = [&](const char* k) -> const json& {
    if (!j.contains(k)) throw decode_error(std::string("transcript record lacks '") + k + "'");
    return j.at(k);
  };
  record r;
  try {
    r.session = need("session").get<std::string>();
    r.round = need("round").get<uint32_t>();
    if (j.contains("reason")) {
      r.from = need("party").get<std::string>();
      r.type = "abort";
      r.reason = need("reason").get<std::string>();
      if (r.reason.empty()) throw decode_error("abort record with empty reason");
      return r;
    }
    r.from = need("from").get<std::string>();
    r.to = need("to").get<std::string>();
    r.type = need("type").get<std::string>();
    r.payload = from_hex(need("payload_hex").get<std::string>());
  } catch (const json::exception& e) {
    throw decode_error(std::string("transcript record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw decode_error(std::string("transcript payload: ") + e.what());
  }
  return r;
}

inline std::string write_jsonl(const transcript_header& h, const std::vector<record>& records) {
  std::string out = json{{"header", h.to_json()}}.dump() + "\n";
  for (auto& r : records) out += record_json(r).dump() + "\n";
  return out;
}

struct transcript_file {
  transcript_header header;
  std::vector<record> records;
};

inline transcript_file read_jsonl(const std::string& text) {
  transcript_file out;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw decode_error(std::string("transcript line is not json: ") + e.what());
    }
    if (first) {
      if (!j.contains("header")) throw decode_error("transcript starts without a header line");
      const auto& h = j.at("header");
      try {
        out.header.protocol = h.at("protocol").get<std::string>();
        out.header.driver = h.at("driver").get<std::string>();
        out.header.parties = h.at("parties");
        out.header.seed_hex = h.at("seed").get<std::string>();
        out.header.params = h.at("params");
        out.header.config = h.at("config");
      } catch (const json::exception& e) {
        throw decode_error(std::string("transcript header: ") + e.what());
      }
      first = false;
      continue;
    }
    out.records.push_back(record_from_json(j));
  }
  if (first) throw decode_error("empty transcript");
  return out;
}

inline transcript_file read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read transcript '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return read_jsonl(ss.str());
}

// splits an archive (every branch, emission order) into per-branch paths;
// a new session id starts a branch that shares the first round-1 records
inline std::vector<std::vector<record>> branch_paths(const std::vector<record>& archive) {
  std::vector<std::vector<record>> out;
  std::vector<record> path;
  std::string cur;
  for (auto& r : archive) {
    if (!path.empty() && r.session != cur) {
      out.push_back(path);
      if (r.round == 0 || r.round - 1 > path.size()) throw decode_error("branch starts past its parent");
      path.resize(r.round - 1);
    }
    cur = r.session;
    path.push_back(r);
  }
  if (!path.empty()) out.push_back(path);
  return out;
}

}  // namespace qext
