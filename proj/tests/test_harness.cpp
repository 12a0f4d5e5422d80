#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "qext/experiments.hpp"

using namespace qext;
using harness::lab;

namespace {

// small enough that a qzk run takes milliseconds
config small(uint64_t seed = 7) {
  auto c = preset_config("toy8", false);
  c.k = 4;
  c.k_wi = 4;
  c.seed = seed_from_u64(seed);
  c.validate();
  return c;
}

const char* toml_doc = R"(
seed = 42
trials = 5
[preset]
name = "toy8"
[protocol]
k = 6
k_wi = 3
)";

const char* json_doc = R"({"seed": 42, "trials": 5, "preset": {"name": "toy8"}, "protocol": {"k": 6, "k_wi": 3}})";

struct env_guard {
  explicit env_guard(const char* v) { setenv("QEXT_SEED", v, 1); }
  ~env_guard() { unsetenv("QEXT_SEED"); }
};

}  // namespace

TEST(config, toml_and_json_agree) {
  auto a = load_config_text(toml_doc, false), b = load_config_text(json_doc, false);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(a.k, 6u);
  EXPECT_EQ(a.k_wi, 3u);
  EXPECT_EQ(a.trials, 5u);
  EXPECT_EQ(a.seed, seed_from_u64(42));
}

TEST(config, canonical_document_round_trips) {
  auto c = load_config_text(toml_doc, false);
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(config, shipped_presets_load) {
  for (auto name : {"toy8", "toy12"}) {
    auto c = load_config_file(std::string(QEXT_SOURCE_DIR) + "/config/" + name + ".toml", false);
    EXPECT_EQ(to_json(c), to_json(preset_config(name, false))) << name;
  }
}

TEST(config, rejects_bad_documents) {
  EXPECT_THROW(load_config_text("[preset]\nname = \"toy8\"\nbogus = 1\n", false), config_error);
  EXPECT_THROW(load_config_text("[preset]\nname = \"toy8\"\n[protocol]\nkk = 1\n", false), config_error);
  EXPECT_THROW(load_config_text("[preset]\nname = \"toy99\"\n", false), std::exception);
  EXPECT_THROW(load_config_text("[preset]\nname = \"toy8\"\n[protocol]\nk = -1\n", false), config_error);
  EXPECT_THROW(load_config_text("[preset]\nname = \"toy8\"\n[protocol]\nk = 0\n", false), config_error);
  EXPECT_THROW(load_config_text("tolerance = 2.0\n[preset]\nname = \"toy8\"\n", false), config_error);
  EXPECT_THROW(load_config_text("[backends]\nobf = \"ideal\"\n", false), config_error);
  EXPECT_THROW(load_config_text("[preset\n", false), config_error);
  EXPECT_THROW(load_config_text("{\"preset\": ", false), config_error);
  EXPECT_THROW(parse_seed(json("12ab")), config_error);
}

TEST(config, seed_forms) {
  EXPECT_EQ(parse_seed(json(5)), seed_from_u64(5));
  EXPECT_EQ(parse_seed(json("5")), seed_from_u64(5));
  auto hex = seed_hex(seed_from_u64(9));
  EXPECT_EQ(parse_seed(json(hex)), seed_from_u64(9));
}

TEST(config, environment_seed_overrides_document) {
  env_guard g("77");
  EXPECT_EQ(load_config_text(toml_doc).seed, seed_from_u64(77));
  EXPECT_EQ(load_config_text(toml_doc, false).seed, seed_from_u64(42));
}

TEST(transcript, jsonl_round_trip_is_lossless) {
  lab L(small());
  for (auto [proto, driver, parties] : {std::tuple{"cqext", "extract", json{{"R", "device"}}},
                                        std::tuple{"qqext", "run", json::object()},
                                        std::tuple{"qzk", "simulate", json{{"P", "sim_q"}}}}) {
    auto o = harness::execute(L, proto, driver, parties, seed_from_u64(3));
    auto text = write_jsonl(o.header(L.cfg()), o.archive);
    auto t = read_jsonl(text);
    EXPECT_EQ(write_jsonl(t.header, t.records), text) << proto;
    ASSERT_EQ(t.records.size(), o.archive.size());
    for (size_t i = 0; i < o.archive.size(); ++i) {
      EXPECT_EQ(t.records[i].payload, o.archive[i].payload);
      EXPECT_EQ(t.records[i].type, o.archive[i].type);
    }
  }
}

TEST(transcript, branch_paths_end_with_the_final_path) {
  auto c = small();
  c.classical_variant = true;
  lab L(c);
  auto o = harness::execute(L, "qzk", "simulate", {{"P", "sim_c"}}, seed_from_u64(4));
  auto paths = branch_paths(o.archive);
  ASSERT_GT(paths.size(), 1u);  // the rewinding simulator forks
  ASSERT_EQ(paths.back().size(), o.path.size());
  for (size_t i = 0; i < o.path.size(); ++i) EXPECT_EQ(paths.back()[i].payload, o.path[i].payload);
}

TEST(transcript, malformed_lines_throw) {
  EXPECT_THROW(read_jsonl(""), decode_error);
  EXPECT_THROW(read_jsonl("{\"session\": \"a\"}\n"), decode_error);
  lab L(small());
  auto o = harness::execute(L, "qqext", "run", json::object(), seed_from_u64(1));
  auto head = write_jsonl(o.header(L.cfg()), {});
  EXPECT_THROW(read_jsonl(head + "not json\n"), decode_error);
  EXPECT_THROW(read_jsonl(head + "{\"session\": \"a\", \"round\": 1}\n"), decode_error);
  EXPECT_THROW(
      read_jsonl(head + R"({"session":"a","round":1,"from":"S","to":"R","type":"m","payload_hex":"zz"})" "\n"),
      decode_error);
}

TEST(replay, honest_transcripts_replay_clean) {
  lab L(small());
  for (auto proto : {"cqext", "qqext", "qzk"}) {
    auto o = harness::execute(L, proto, "run", json::object(), seed_from_u64(11));
    auto t = read_jsonl(write_jsonl(o.header(L.cfg()), o.archive));
    auto res = harness::replay(t);
    EXPECT_TRUE(res.ok()) << proto << " " << res.to_json().dump();
  }
}

TEST(replay, tampered_payload_is_caught) {
  lab L(small());
  auto o = harness::execute(L, "qzk", "run", json::object(), seed_from_u64(12));
  auto t = read_jsonl(write_jsonl(o.header(L.cfg()), o.archive));
  size_t hit = 0;
  for (auto& r : t.records)
    if (r.type == "share_openings" && !r.payload.empty()) {
      r.payload.back() ^= 1;
      ++hit;
    }
  ASSERT_GT(hit, 0u);
  auto res = harness::replay(t);
  EXPECT_FALSE(res.rerun_identical);
  EXPECT_FALSE(res.ok());
}

TEST(replay, changed_seed_is_caught) {
  lab L(small());
  auto o = harness::execute(L, "cqext", "run", json::object(), seed_from_u64(13));
  auto t = read_jsonl(write_jsonl(o.header(L.cfg()), o.archive));
  t.header.seed_hex = seed_hex(seed_from_u64(14));
  EXPECT_FALSE(harness::replay(t).ok());
}

TEST(stats, parallel_map_ignores_thread_count) {
  auto f = [](size_t i) { return uint64_t(i * i + 3); };
  auto a = stats::parallel_map<uint64_t>(257, 1, f), b = stats::parallel_map<uint64_t>(257, 7, f);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(stats::parallel_map<uint64_t>(0, 4, f).empty());
  EXPECT_THROW(stats::parallel_map<int>(10, 3, [](size_t i) -> int { throw std::runtime_error(std::to_string(i)); }),
               std::runtime_error);
}

TEST(stats, percentiles_and_chi2) {
  EXPECT_EQ(stats::percentile({}, 99), 0);
  EXPECT_EQ(stats::percentile({5, 1, 3, 2, 4}, 50), 3);
  EXPECT_EQ(stats::percentile({5, 1, 3, 2, 4}, 99), 5);
  std::vector<uint64_t> a(10, 100), b(10, 100);
  EXPECT_NEAR(stats::chi2_homogeneity(a, b).p_value, 1.0, 1e-12);
  b[0] = 300, b[1] = 0;
  EXPECT_LT(stats::chi2_homogeneity(a, b).p_value, 1e-6);
  // sparse bins get pooled into one cell: nothing to test
  auto r = stats::chi2_homogeneity({1, 1, 0}, {0, 1, 1});
  EXPECT_EQ(r.bins_used, 1u);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(stats, zero_trials_give_empty_reports) {
  lab L(small());
  for (auto& [id, e] : harness::experiments()) {
    stats::report r;
    ASSERT_NO_THROW(r = e.fn(L, 0)) << id;
    EXPECT_EQ(r.trials, 0u);
    EXPECT_EQ(r.experiment, id);
  }
}

TEST(stats, reports_are_reproducible_and_thread_independent) {
  auto c1 = small(21), c4 = small(21);
  c4.threads = 4;
  lab L1(c1), L1b(c1), L4(c4);
  for (auto id : {"cqext-extract", "qqext-extract", "qzk-complete", "wi-branches"}) {
    auto a = harness::run_experiment(L1, id, 6).to_json();
    auto b = harness::run_experiment(L1b, id, 6).to_json();
    auto d = harness::run_experiment(L4, id, 6).to_json();
    EXPECT_EQ(a.dump(), b.dump()) << id;
    // the config echo records the thread count; everything else must agree
    a.erase("config"), d.erase("config");
    EXPECT_EQ(a.dump(), d.dump()) << id;
  }
}

TEST(stats, timing_only_on_request) {
  lab L(small());
  auto r = harness::run_experiment(L, "ntcf-roundtrip", 5);
  EXPECT_FALSE(r.to_json().contains("timing"));
  EXPECT_TRUE(r.to_json(true).contains("timing"));
}

TEST(harness, distinct_seeds_give_distinct_valid_sessions) {
  lab L(small());
  std::set<std::string> seen;
  const uint32_t n = 200;
  auto outs = stats::parallel_map<harness::outcome>(n, 1, [&](size_t i) {
    return harness::execute(L, "cqext", "extract", {{"R", "device"}}, stats::trial_seed(L.cfg().seed, "distinct", i));
  });
  for (auto& o : outs) {
    EXPECT_FALSE(o.abort);
    EXPECT_TRUE(o.result.value("witness_valid", false));
    std::string all;
    for (auto& r : o.archive) all += to_hex(r.payload);
    seen.insert(all);
  }
  EXPECT_EQ(seen.size(), n);
}

TEST(harness, bad_roles_are_config_errors) {
  lab L(small());
  EXPECT_THROW(harness::execute(L, "qzk", "run", {{"P", "wizard"}}, seed_from_u64(1)), config_error);
  EXPECT_THROW(harness::execute(L, "qzk", "run", {{"S", "honest"}}, seed_from_u64(1)), config_error);
  EXPECT_THROW(harness::execute(L, "nope", "run", json::object(), seed_from_u64(1)), config_error);
  EXPECT_THROW(harness::execute(L, "qzk", "simulate", {{"P", "sim_c"}}, seed_from_u64(1)), config_error);
}

TEST(harness, demo_graph_json_round_trip) {
  auto c = small();
  for (bool member : {true, false}) {
    auto g = harness::demo_graph(c, seed_from_u64(2), member);
    EXPECT_EQ(harness::graph_json(harness::graph_from_json(harness::graph_json(g.x))), harness::graph_json(g.x));
    EXPECT_EQ(g.w.has_value(), member);
    if (member) {
      EXPECT_TRUE(ham::is_cycle(g.x, *g.w));
    }
  }
}
