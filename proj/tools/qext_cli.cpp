#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "qext/experiments.hpp"

using namespace qext;
using harness::lab;

namespace {

enum exit_code { ok = 0, internal = 1, protocol_abort = 2, acceptance_failure = 3, bad_config = 4 };

struct common_opts {
  std::string preset = "toy8";
  std::string config_path;
  std::string seed;
  std::string out;
  int64_t k = -1, kwi = -1, ell = -1, trials = -1, threads = -1;
  bool classical_variant = false;
  std::string sfe;
};

void add_common(CLI::App* app, common_opts& o) {
  app->add_option("--preset", o.preset, "built-in preset (toy8, toy12)");
  app->add_option("--config", o.config_path, "TOML or JSON config document");
  app->add_option("--seed", o.seed, "seed: 64 hex digits or an integer (beats QEXT_SEED)");
  app->add_option("--out", o.out, "write the JSON output here instead of stdout");
  app->add_option("--k", o.k, "share repetitions");
  app->add_option("--kwi", o.kwi, "WI repetitions");
  app->add_option("--ell", o.ell, "qQEXT td bits");
  app->add_option("--trials", o.trials, "trial count");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--sfe", o.sfe, "sfe backend (ideal, garbled)");
  app->add_flag("--classical-variant", o.classical_variant, "qzk with the extractable commitment of d");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

config build_config(const common_opts& o) {
  json doc;
  if (!o.config_path.empty()) doc = parse_document(slurp(o.config_path));
  else doc = {{"preset", {{"name", o.preset}}}};
  auto set = [&](const char* table, const char* key, int64_t v) {
    if (v < 0) return;
    doc[table][key] = v;
  };
  set("protocol", "k", o.k);
  set("protocol", "k_wi", o.kwi);
  set("protocol", "ell", o.ell);
  if (o.trials >= 0) doc["trials"] = o.trials;
  if (o.threads >= 0) doc["threads"] = o.threads;
  if (o.classical_variant) doc["protocol"]["classical_variant"] = true;
  if (!o.sfe.empty()) doc["backends"]["sfe"] = o.sfe;
  auto c = config_from_json(doc);
  apply_env(c);
  if (!o.seed.empty()) c.seed = parse_seed(json(o.seed));
  c.validate();
  return c;
}

void emit(const common_opts& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw config_error("cannot write '" + o.out + "'");
  f << text << "\n";
}

void write_transcript(const std::string& path, const config& c, const harness::outcome& r) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw config_error("cannot write transcript '" + path + "'");
  f << write_jsonl(r.header(c), r.archive);
}

json summary(const harness::outcome& r) {
  return {{"protocol", r.protocol}, {"driver", r.driver},   {"seed", seed_hex(r.seed)}, {"parties", r.parties},
          {"records", r.archive.size()}, {"result", r.result}};
}

int outcome_code(const harness::outcome& r) {
  if (r.abort) return protocol_abort;
  if (r.result.contains("accepted") && !r.result.at("accepted").get<bool>()) return acceptance_failure;
  return ok;
}

int finish_report(const common_opts& o, const std::vector<stats::report>& reps, bool timing) {
  json out = json::array();
  bool pass = true;
  for (auto& r : reps) {
    out.push_back(r.to_json(timing));
    pass &= r.passed;
  }
  emit(o, (reps.size() == 1 ? out[0] : out).dump(2));
  return pass ? ok : acceptance_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum extractable commitment desk harness"};
  app.require_subcommand(1);

  common_opts o;
  std::string protocol, sender, receiver, prover, verifier, instance, transcript_out, graph_path;

  auto* run = app.add_subcommand("run", "run one session");
  add_common(run, o);
  run->add_option("protocol", protocol, "cqext, qqext or qzk")->required();
  run->add_option("--sender", sender, "cqext: honest|simulator; qqext: honest|simulator|zero_td|refuse_sfe");
  run->add_option("--receiver", receiver, "cqext: classical|device|guesser");
  run->add_option("--prover", prover, "qzk: honest|no_witness|td_guesser|replayer");
  run->add_option("--verifier", verifier, "qzk: honest|wrong_rqext|wrong_td");
  run->add_option("--instance", instance, "qzk: member|non_member");
  run->add_option("--graph", graph_path, "qzk: graph as JSON {n, adjacency[, cycle]}");
  run->add_option("--transcript", transcript_out, "write the JSON-lines transcript here");

  auto* extract = app.add_subcommand("extract", "run the extractor against the honest sender");
  add_common(extract, o);
  extract->add_option("protocol", protocol, "cqext or qqext")->required();
  extract->add_option("--transcript", transcript_out, "write the JSON-lines transcript here");

  std::string sim_verifier = "device";
  auto* simulate = app.add_subcommand("simulate-zk", "run a zero-knowledge simulator");
  add_common(simulate, o);
  simulate->add_option("protocol", protocol, "cqext, qqext or qzk")->required();
  simulate->add_option("--verifier", sim_verifier, "qzk: classical (rewinding) or device; cqext: receiver kind");
  simulate->add_option("--transcript", transcript_out, "write the JSON-lines transcript here");

  std::string attack_name;
  auto* attack = app.add_subcommand("attack", "run an attack suite");
  add_common(attack, o);
  attack->add_option("suite", attack_name, "qzk-soundness")->required();

  std::string experiment_id;
  bool timing = false, list = false;
  auto* st = app.add_subcommand("stats", "run a registered experiment, or 'all'");
  add_common(st, o);
  st->add_option("experiment", experiment_id, "experiment id");
  st->add_flag("--timing", timing, "add timing percentiles (not reproducible)");
  st->add_flag("--list", list, "list experiment ids");

  auto* self = app.add_subcommand("selftest", "quick pass over every experiment");
  add_common(self, o);

  std::string replay_path;
  auto* rp = app.add_subcommand("replay", "rerun a transcript and re-verify its openings and envelopes");
  rp->add_option("transcript", replay_path, "JSON-lines transcript")->required();
  rp->add_option("--out", o.out, "write the JSON output here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? ok : bad_config;
  }

  try {
    if (*run || *extract || *simulate) {
      auto c = build_config(o);
      json parties = json::object();
      std::string driver = *run ? "run" : *extract ? "extract" : "simulate";
      if (*simulate && protocol == "qzk") {
        if (sim_verifier != "classical" && sim_verifier != "device")
          throw config_error("--verifier must be classical or device");
        if (sim_verifier == "classical") c.classical_variant = true;
        parties["P"] = sim_verifier == "classical" ? "sim_c" : "sim_q";
      } else if (*simulate && protocol == "cqext") {
        parties["R"] = sim_verifier;
      }
      if (!sender.empty()) parties["S"] = sender;
      if (!receiver.empty()) parties["R"] = receiver;
      if (!prover.empty()) parties["P"] = prover;
      if (!verifier.empty()) parties["V"] = verifier;
      if (!instance.empty()) parties["instance"] = instance;
      lab L(c);
      harness::outcome r;
      if (!graph_path.empty()) {
        if (protocol != "qzk") throw config_error("--graph applies to qzk");
        if (!transcript_out.empty()) throw config_error("transcripts of custom graphs cannot be replayed");
        auto gj = parse_document(slurp(graph_path));
        harness::graph_instance gi{harness::graph_from_json(gj), std::nullopt};
        if (gj.contains("cycle")) gi.w = gj.at("cycle").get<ham::cycle>();
        if (gi.w && !ham::is_cycle(gi.x, *gi.w)) throw config_error("the given cycle is not a Hamiltonian cycle");
        r = harness::detail::run_qzk(L, driver, parties, c.seed, gi);
        r.protocol = "qzk";
        r.driver = driver;
        r.seed = c.seed;
      } else {
        r = harness::execute(L, protocol, driver, parties, c.seed);
      }
      write_transcript(transcript_out, c, r);
      emit(o, summary(r).dump(2));
      if (*extract && !r.result.value("witness_valid", false)) return acceptance_failure;
      return outcome_code(r);
    }
    if (*attack) {
      if (attack_name != "qzk-soundness") throw config_error("unknown attack suite '" + attack_name + "'");
      auto c = build_config(o);
      lab L(c);
      return finish_report(o, {harness::run_experiment(L, "qzk-soundness", c.trials)}, false);
    }
    if (*st) {
      if (list) {
        json out = json::object();
        for (auto& [id, e] : harness::experiments()) out[id] = e.description;
        emit(o, out.dump(2));
        return ok;
      }
      if (experiment_id.empty()) throw config_error("stats needs an experiment id (see --list)");
      auto c = build_config(o);
      lab L(c);
      std::vector<stats::report> reps;
      if (experiment_id == "all")
        for (auto& [id, e] : harness::experiments()) reps.push_back(e.fn(L, c.trials));
      else
        reps.push_back(harness::run_experiment(L, experiment_id, c.trials));
      return finish_report(o, reps, timing);
    }
    if (*self) {
      // small parameters, few trials: a smoke pass, not the acceptance run
      if (o.k < 0) o.k = 4;
      if (o.kwi < 0) o.kwi = 8;
      auto c = build_config(o);
      lab L(c);
      std::vector<stats::report> reps;
      for (auto& [id, e] : harness::experiments()) {
        uint32_t n = id.rfind("qzk", 0) == 0 || id == "wi-branches" ? 4 : 10;
        if (id == "obf-lock") n = 100;
        reps.push_back(e.fn(L, n));
      }
      json out = json::object();
      bool pass = true;
      for (auto& r : reps) {
        out[r.experiment] = r.passed ? json("pass") : json(r.failures);
        pass &= r.passed;
      }
      emit(o, out.dump(2));
      return pass ? ok : acceptance_failure;
    }
    if (*rp) {
      auto text = slurp(replay_path);
      transcript_file t;
      try {
        t = read_jsonl(text);
      } catch (const decode_error& e) {
        emit(o, json{{"ok", false}, {"error", e.what()}}.dump(2));
        return acceptance_failure;
      }
      auto res = harness::replay(t);
      auto out = res.to_json();
      out["lossless"] = write_jsonl(t.header, t.records) == text;
      emit(o, out.dump(2));
      return res.ok() && out["lossless"].get<bool>() ? ok : acceptance_failure;
    }
  } catch (const config_error& e) {
    std::cerr << e.what() << "\n";
    return bad_config;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return internal;
  }
  return internal;
}
