// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Everything runs on deterministic stub backends; the last criterion
// is network-gated and skips unless a live endpoint is configured.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ctxforest/bench.hpp"
#include "ctxforest/config.hpp"
#include "ctxforest/semantic_index.hpp"
#include "doctest.h"
#include "json.hpp"
#include "testutil.hpp"

using namespace ctxforest;
using json = nlohmann::json;

namespace {

struct CriterionReporter {
  int n;
  const char* desc;
  bool ok = true;
  const char* verdict_override = nullptr;
  ~CriterionReporter() {
    std::printf("ACCEPTANCE %s criterion %d: %s\n",
                verdict_override ? verdict_override : (ok ? "PASS" : "FAIL"), n, desc);
    std::fflush(stdout);
  }
};

#define A_CHECK(rep, cond)       \
  do {                           \
    bool a_check_v = (cond);     \
    if (!a_check_v) rep.ok = false; \
    CHECK(a_check_v);            \
  } while (0)

std::string fixture(const std::string& name) {
  return std::string(CTXF_FIXTURE_DIR) + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Random but always-valid decision backend for the randomized suite: it
// parses the candidate trees out of the prompt and answers with a uniformly
// chosen legal action.
class RandomDecisionGateway : public Gateway {
public:
  explicit RandomDecisionGateway(std::uint64_t seed) : rng_(seed), seed_(seed) {}

  std::string chat_complete(const BackendProfile& profile,
                            const std::vector<Message>& messages) override {
    record_chat(profile.role, messages);
    std::string last;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
      if (it->role == "user") {
        last = it->content;
        break;
      }
    switch (profile.role) {
      case Role::Responder: return "reply " + std::to_string(dist_(rng_) % 1000);
      case Role::Judge: return "yes";
      case Role::Summary: {
        auto dot = last.find('.');
        return dot == std::string::npos ? last.substr(0, 40) : last.substr(0, dot + 1);
      }
      case Role::Decision: {
        if (last.find("[branch-decision]") != std::string::npos) {
          switch (dist_(rng_) % 3) {
            case 0: return "CONTINUE";
            case 1: return "CREATE_BRANCH:top";
            default: return "SWITCH_BRANCH:top";
          }
        }
        // collect "Tree <id>" lines; the active one is marked
        std::vector<long long> others;
        std::istringstream in(last);
        std::string line;
        while (std::getline(in, line)) {
          if (line.rfind("Tree ", 0) != 0) continue;
          long long id = std::strtoll(line.c_str() + 5, nullptr, 10);
          if (line.find("(active)") == std::string::npos) others.push_back(id);
        }
        unsigned roll = dist_(rng_) % 10;
        if (roll < 2) return "CREATE_TOPIC";
        if (roll < 4 && !others.empty())
          return "SWITCH_TOPIC:" + std::to_string(others[dist_(rng_) % others.size()]);
        return "CONTINUE";
      }
      case Role::Embedding: break;
    }
    throw_error(Err::Internal, "unexpected role");
  }

  std::vector<std::vector<double>> embed_batch(const BackendProfile&,
                                               const std::vector<std::string>& texts) override {
    record_embed();
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(StubGateway::stub_embedding(t, 8, seed_));
    return out;
  }

private:
  std::mt19937_64 rng_;
  std::uniform_int_distribution<unsigned> dist_;
  std::uint64_t seed_;
};

// Independent structural checker for the randomized suite (deliberately not
// validate_state): per tree, exactly one root, every parent walk terminates
// at the root, and every branch's members sorted by depth form a parent
// chain.
std::string brute_force_check(const SessionState& s) {
  for (const auto& tree : s.forest.trees) {
    if (tree.nodes.empty()) continue;
    int roots = 0;
    for (const auto& n : tree.nodes)
      if (!n.parent.has_value()) roots++;
    if (roots != 1) return "tree does not have exactly one root";

    auto find = [&](NodeId id) -> const DialogueNode* {
      for (const auto& n : tree.nodes)
        if (n.id == id) return &n;
      return nullptr;
    };
    for (const auto& n : tree.nodes) {
      const DialogueNode* cur = &n;
      std::size_t steps = 0;
      while (cur->parent.has_value()) {
        cur = find(*cur->parent);
        if (!cur) return "parent escapes the tree";
        if (++steps > tree.nodes.size()) return "cycle in parent chain";
      }
      if (cur->id != tree.root) return "parent walk does not end at the root";
    }
    std::map<BranchId, std::vector<std::pair<std::size_t, const DialogueNode*>>> branches;
    for (const auto& n : tree.nodes) {
      std::size_t depth = 0;
      const DialogueNode* cur = &n;
      while (cur->parent.has_value()) {
        cur = find(*cur->parent);
        depth++;
      }
      branches[n.branch_id].push_back({depth, &n});
    }
    for (auto& [b, members] : branches) {
      std::sort(members.begin(), members.end());
      for (std::size_t i = 1; i < members.size(); i++) {
        if (members[i].first != members[i - 1].first + 1)
          return "branch depths are not consecutive";
        if (!members[i].second->parent.has_value() ||
            *members[i].second->parent != members[i - 1].second->id)
          return "branch members do not chain";
      }
    }
  }
  return "";
}

const char* kWordPool[] = {"garden",  "rocket", "sonata", "harbor", "citrus", "meadow",
                           "granite", "lantern", "breeze", "copper", "thistle", "voyage"};

std::string random_query(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(3, 9);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWordPool) - 1);
  std::string q;
  int n = len(rng);
  for (int i = 0; i < n; i++) {
    if (i) q += ' ';
    q += kWordPool[pick(rng)];
  }
  return q;
}

struct RandomSuiteStats {
  int gate_true_total = 0;
  int branch_calls_total = 0;
  bool per_sequence_match = true;
};

RandomSuiteStats run_randomized_suite(CriterionReporter& rep, int sequences) {
  RandomSuiteStats stats;
  for (int seq = 0; seq < sequences; seq++) {
    auto gw = std::make_shared<RandomDecisionGateway>(static_cast<std::uint64_t>(seq) * 7919 + 1);
    BackendSet set = make_stub_backends(static_cast<std::uint64_t>(seq));
    set.gateway = gw;
    Session session(set, PolicyConfig{});
    std::mt19937_64 rng(static_cast<std::uint64_t>(seq) + 99);
    std::uniform_int_distribution<int> turns(6, 14);

    int n_turns = turns(rng);
    for (int t = 0; t < n_turns; t++) {
      auto advanced = session.advance_turn(random_query(rng));
      session.commit_turn(advanced.pending, "reply " + std::to_string(t));

      auto violations = validate_state(session.state());
      if (!violations.empty()) {
        rep.ok = false;
        FAIL_CHECK("validate_state: " << violations.front() << " (sequence " << seq << ")");
        return stats;
      }
      std::string brute = brute_force_check(session.state());
      if (!brute.empty()) {
        rep.ok = false;
        FAIL_CHECK("brute force: " << brute << " (sequence " << seq << ")");
        return stats;
      }
    }

    int gate_true = 0;
    for (const auto& trace : session.traces()) gate_true += trace.filter_passed ? 1 : 0;
    int calls = gw->counts().branch_decisions;
    if (gate_true != calls) stats.per_sequence_match = false;
    stats.gate_true_total += gate_true;
    stats.branch_calls_total += calls;
  }
  return stats;
}

RunResult run_fixture(const std::string& name, const char* strategy, std::uint64_t seed) {
  DialogueScript script = load_script(fixture(name));
  BackendSet set = make_stub_backends(seed);
  return run_session(script, parse_strategy(strategy), set, PolicyConfig{});
}

}  // namespace

TEST_CASE("criterion 1: randomized structural invariant suite") {
  CriterionReporter rep{1, "500 randomized action sequences keep every forest invariant (<30s)"};
  auto start = std::chrono::steady_clock::now();
  RandomSuiteStats stats = run_randomized_suite(rep, 500);
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  A_CHECK(rep, seconds < 30.0);
  A_CHECK(rep, stats.gate_true_total > 0);  // the suite actually exercised branching
  MESSAGE("randomized suite: " << seconds << "s, " << stats.gate_true_total
                               << " gate-true turns");
}

TEST_CASE("criterion 2: golden replay of the 15-turn trip fixture") {
  CriterionReporter rep{2, "trip replay: 3 trees, branched tree 2, topic actions, golden bytes"};
  RunResult r = run_fixture("fig6_trip.json", "context_agent", 0);

  SessionState s = restore(r.final_snapshot);
  A_CHECK(rep, s.forest.trees.size() == 3);
  A_CHECK(rep, get_tree(s, 2).branches.size() >= 2);

  REQUIRE(r.per_turn.size() == 15);
  A_CHECK(rep, r.per_turn[0].topic_action == "CREATE_TOPIC");
  A_CHECK(rep, r.per_turn[3].topic_action == "CREATE_TOPIC");
  A_CHECK(rep, r.per_turn[6].topic_action == "CREATE_TOPIC");
  A_CHECK(rep, r.per_turn[8].topic_action == "SWITCH_TOPIC:2");
  A_CHECK(rep, r.per_turn[8].branch_action == "CREATE_BRANCH:5");
  A_CHECK(rep, r.per_turn[9].branch_action == "SWITCH_BRANCH:6");
  A_CHECK(rep, r.per_turn[14].branch_action == "SWITCH_BRANCH:9");

  std::string golden = slurp(fixture("fig6_snapshot.golden.json"));
  A_CHECK(rep, r.final_snapshot == golden);
}

TEST_CASE("criterion 3: context construction matches hand-assembled oracles") {
  CriterionReporter rep{3, "20 hand-built fixtures assemble to the exact expected context"};

  int fixtures = 0;
  for (int path_len = 1; path_len <= 5; path_len++) {
    for (int siblings = 0; siblings <= 1; siblings++) {
      for (int other_trees = 0; other_trees <= 1; other_trees++) {
        fixtures++;
        SessionState s = init_session();
        TreeId t1 = create_tree(s);
        BranchId main_branch = allocate_branch_id(s);

        // expected context is assembled by hand below, independent of the
        // library's aggregation helpers
        std::vector<std::string> expected_lines;

        std::optional<NodeId> prev;
        for (int i = 1; i <= path_len; i++) {
          std::string content = "User: path q" + std::to_string(i) + "\nAssistant: path r" +
                                std::to_string(i);
          std::string summary = "ps" + std::to_string(i);
          prev = testutil::put(s, t1, prev, main_branch, content, {}, summary);
          expected_lines.push_back(content);
        }
        NodeId tip = *prev;

        std::vector<std::string> sibling_lines;
        for (int b = 0; b < siblings; b++) {
          BranchId side = allocate_branch_id(s);
          testutil::put(s, t1, get_tree(s, t1).root, side, "User: side\nAssistant: side",
                        {}, "side-a");
          NodeId side_tip = branch_tip(s, t1, side);
          testutil::put(s, t1, side_tip, side, "User: side2\nAssistant: side2", {}, "side-b");
          sibling_lines.push_back("[Branch " + std::to_string(side) +
                                  " summary] side-a | side-b");
        }

        std::vector<std::string> tree_lines;
        for (int o = 0; o < other_trees; o++) {
          TreeId t2 = create_tree(s);
          BranchId ob = allocate_branch_id(s);
          testutil::put(s, t2, std::nullopt, ob, "User: other\nAssistant: other", {}, "ot-1");
          tree_lines.push_back("[Topic " + std::to_string(t2) + " summary] [Branch " +
                               std::to_string(ob) + " summary] ot-1");
        }

        s.active_tree = t1;
        s.active_branch = main_branch;
        s.current_node = tip;

        for (const auto& line : sibling_lines) expected_lines.push_back(line);
        for (const auto& line : tree_lines) expected_lines.push_back(line);
        std::string expected;
        for (std::size_t i = 0; i < expected_lines.size(); i++)
          expected += (i ? "\n" : "") + expected_lines[i];

        AssembledContext ctx = build_context(s);
        A_CHECK(rep, render_context(ctx) == expected);

        // degenerate single-branch fixtures equal the full-history content
        if (siblings == 0 && other_trees == 0) {
          LinearHistory h;
          for (int i = 1; i <= path_len; i++) {
            LinearTurn lt;
            lt.turn_index = i;
            lt.content = "User: path q" + std::to_string(i) + "\nAssistant: path r" +
                         std::to_string(i);
            h.turns.push_back(lt);
          }
          A_CHECK(rep, render_context(ctx) == render_context(full_history_context(h)));
        }
      }
    }
  }
  A_CHECK(rep, fixtures == 20);
}

TEST_CASE("criterion 4: tree contexts beat full history on the trip fixture") {
  CriterionReporter rep{4, "context tokens below full history for t>=5; final reduction >20%"};

  DialogueScript script = load_script(fixture("fig6_trip.json"));
  RunResult ca = run_fixture("fig6_trip.json", "context_agent", 0);
  RunResult fh = run_fixture("fig6_trip.json", "full_history", 0);
  REQUIRE(ca.per_turn.size() == 15);
  REQUIRE(fh.per_turn.size() == 15);

  // fixture precondition: every committed content is longer than the
  // 60-token summary cap
  SessionState s = restore(ca.final_snapshot);
  for (const auto& tree : s.forest.trees)
    for (const auto& n : tree.nodes) A_CHECK(rep, count_tokens(n.content) > 60);

  // per-turn comparison on pure context tokens (selected context only)
  for (std::size_t i = 4; i < 15; i++) {
    std::int64_t q = count_tokens(script.turns[i].query);
    A_CHECK(rep, ca.per_turn[i].context_tokens - q < fh.per_turn[i].context_tokens - q);
  }
  std::int64_t q15 = count_tokens(script.turns[14].query);
  double ca_final = static_cast<double>(ca.per_turn[14].context_tokens - q15);
  double fh_final = static_cast<double>(fh.per_turn[14].context_tokens - q15);
  double reduction = 1.0 - ca_final / fh_final;
  A_CHECK(rep, reduction > 0.20);
  MESSAGE("final-turn reduction: " << reduction * 100.0 << "%");
}

TEST_CASE("criterion 5: branch model consulted exactly when the gate passes") {
  CriterionReporter rep{5, "branch-decision calls equal gate-true turns over the randomized suite"};
  RandomSuiteStats stats = run_randomized_suite(rep, 500);
  A_CHECK(rep, stats.per_sequence_match);
  A_CHECK(rep, stats.gate_true_total == stats.branch_calls_total);
  A_CHECK(rep, stats.gate_true_total > 0);
}

TEST_CASE("criterion 6: fork point equals brute force on 200 random pairs") {
  CriterionReporter rep{6, "find_fork_point matches exhaustive argmax with older-node ties"};
  std::mt19937 rng(4242);
  int checked = 0;
  while (checked < 200) {
    SessionState s = testutil::random_forest(rng, 14, 6);
    for (const auto& tree : s.forest.trees) {
      if (tree.nodes.empty() || checked >= 200) continue;
      // occasionally duplicate an embedding to force ties
      if (checked % 5 == 0 && tree.nodes.size() >= 2) {
        auto& nodes = get_tree(s, tree.id).nodes;
        nodes.back().embedding = nodes.front().embedding;
      }
      std::vector<double> q = testutil::random_unit(rng, 6);

      SimilarityHit got = find_fork_point(s, tree.id, q);

      const DialogueNode* best = nullptr;
      double best_score = 0.0;
      for (const auto& n : tree.nodes) {
        double score = cosine_sim(q, n.embedding);
        if (!best || score > best_score ||
            (score == best_score && n.turn_index < best->turn_index)) {
          best = &n;
          best_score = score;
        }
      }
      A_CHECK(rep, got.node_id == best->id);
      A_CHECK(rep, got.score == doctest::Approx(best_score));
      checked++;
    }
  }
  A_CHECK(rep, checked == 200);
}

TEST_CASE("criterion 7: metric fixtures") {
  CriterionReporter rep{7, "TCR 4/6 and micro/macro fixtures; EM/F1 hand-derived values"};

  auto mk = [](std::vector<bool> outcomes) {
    RunResult r;
    r.dialogue_id = "m";
    r.strategy = parse_strategy("full_history");
    r.checkpoint_outcomes = std::move(outcomes);
    r.judged = true;
    TurnRecord t;
    t.turn = 1;
    t.context_tokens = 1;
    t.response = "x";
    r.per_turn.push_back(t);
    return r;
  };

  std::vector<RunResult> four_of_six{mk({true, true, true, true, false, false})};
  A_CHECK(rep, std::abs(compute_tcr(four_of_six) - 0.666666667) < 1e-9);

  std::vector<RunResult> two{mk({true, true, true}), mk({true, false, false, false, false})};
  A_CHECK(rep, compute_tcr(two) == doctest::Approx(0.5).epsilon(1e-12));
  A_CHECK(rep, compute_tcr_macro(two) == doctest::Approx(0.6).epsilon(1e-12));
  A_CHECK(rep, compute_tcr(two) != compute_tcr_macro(two));

  EmF1 exact = compute_em_f1("Hokkaido.", {"hokkaido"});
  A_CHECK(rep, exact.em == 1);
  A_CHECK(rep, exact.f1 == doctest::Approx(1.0));
  EmF1 overlap = compute_em_f1("beach resort in Phuket", {"resort in Phuket"});
  A_CHECK(rep, overlap.em == 0);
  A_CHECK(rep, overlap.f1 == doctest::Approx(6.0 / 7.0).epsilon(1e-9));
  EmF1 disjoint = compute_em_f1("alpha beta", {"gamma delta"});
  A_CHECK(rep, disjoint.em == 0);
  A_CHECK(rep, disjoint.f1 == doctest::Approx(0.0));
}

TEST_CASE("criterion 8: linear baseline contracts") {
  CriterionReporter rep{8, "truncation window, full-history monotone ACT, linear RAG oracle"};

  // 10-turn stub session; the stub responder echo makes contents exactly
  // reconstructible
  json doc;
  doc["schema_version"] = 1;
  doc["id"] = "ten";
  doc["domain"] = "daily-life";
  doc["turns"] = json::array();
  for (int i = 1; i <= 10; i++)
    doc["turns"].push_back({{"query", "query number " + std::to_string(i) + " about " +
                                          std::string(1, char('a' + i)) + " things"}});
  doc["checkpoints"] = json::array();
  for (int i = 0; i < 3; i++)
    doc["checkpoints"].push_back(
        {{"question", "q"}, {"mode", "rule"}, {"keywords", {"stub-reply"}}});
  auto tmp = std::filesystem::temp_directory_path() / "ctxforest_accept_ten.json";
  {
    std::ofstream out(tmp);
    out << doc.dump();
  }
  DialogueScript script = load_script(tmp.string());

  // truncation(4) over the completed 10-turn history selects turns 7..10
  LinearHistory h;
  for (int i = 1; i <= 10; i++) {
    LinearTurn t;
    t.turn_index = i;
    t.query = script.turns[static_cast<std::size_t>(i - 1)].query;
    t.response = "[stub-reply] " + t.query;
    t.content = format_turn_content(t.query, t.response);
    h.turns.push_back(t);
  }
  AssembledContext trunc = truncation_context(h, 4);
  REQUIRE(trunc.segments.size() == 4);
  bool window_ok = true;
  for (int i = 0; i < 4; i++)
    window_ok &= trunc.segments[static_cast<std::size_t>(i)].text ==
                 h.turns[static_cast<std::size_t>(6 + i)].content;
  A_CHECK(rep, window_ok);

  // the recorded truncation run agrees with the library selection per turn
  BackendSet set = make_stub_backends(0);
  RunResult tr = run_session(script, parse_strategy("truncation:4"), set, PolicyConfig{});
  for (std::size_t i = 0; i < 10; i++) {
    LinearHistory upto;
    upto.turns.assign(h.turns.begin(), h.turns.begin() + static_cast<long>(i));
    std::int64_t expect = truncation_context(upto, 4).token_count +
                          count_tokens(script.turns[i].query);
    A_CHECK(rep, tr.per_turn[i].context_tokens == expect);
  }

  // full-history ACT is monotonically non-decreasing within the session
  RunResult fh = run_session(script, parse_strategy("full_history"), set, PolicyConfig{});
  for (std::size_t i = 1; i < fh.per_turn.size(); i++)
    A_CHECK(rep, fh.per_turn[i].context_tokens >= fh.per_turn[i - 1].context_tokens);

  // linear RAG(3) matches the sort oracle under stub embeddings
  StubGateway stub;
  BackendProfile embed_profile;
  embed_profile.role = Role::Embedding;
  for (auto& t : h.turns) t.embedding = StubGateway::stub_embedding(t.content, 8, 0);
  std::vector<double> qemb = StubGateway::stub_embedding("query number 3 about d things", 8, 0);
  AssembledContext rag = linear_rag_context(h, qemb, 3);

  struct Row {
    int turn;
    double score;
  };
  std::vector<Row> rows;
  for (const auto& t : h.turns) rows.push_back({t.turn_index, cosine_sim(qemb, t.embedding)});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.turn < b.turn;
  });
  rows.resize(3);
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.turn < b.turn; });
  REQUIRE(rag.segments.size() == 3);
  for (std::size_t i = 0; i < 3; i++)
    A_CHECK(rep, rag.segments[i].text ==
                     h.turns[static_cast<std::size_t>(rows[i].turn - 1)].content);

  std::filesystem::remove(tmp);
}

TEST_CASE("criterion 9: two CLI bench runs are byte-identical") {
  CriterionReporter rep{9, "cmd_bench with a fixed seed reproduces reports and snapshots"};

  std::string bin = CTXF_CLI_BIN;
  auto base = std::filesystem::current_path() / "acceptance_bench";
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);

  auto run = [&](const std::string& out) {
    std::string cmd = "\"" + bin + "\" bench --scripts \"" + fixture("fig6_trip.json") +
                      "\" --scripts \"" + fixture("fig9_coding.json") + "\" --scripts \"" +
                      fixture("qa_mini.json") +
                      "\" --strategy full_history --strategy truncation:4 --strategy "
                      "linear_rag:3 --strategy heuristic_only --strategy context_agent "
                      "--seed 11 --out \"" +
                      out + "\" > \"" + out + ".stdout\" 2>&1";
    return std::system(cmd.c_str());
  };

  std::string out_a = (base / "a").string();
  std::string out_b = (base / "b").string();
  A_CHECK(rep, run(out_a) == 0);
  A_CHECK(rep, run(out_b) == 0);

  int compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(out_a)) {
    std::string name = entry.path().filename().string();
    if (name.find("report") == std::string::npos &&
        name.find("snapshot") == std::string::npos)
      continue;
    auto other = std::filesystem::path(out_b) / name;
    A_CHECK(rep, std::filesystem::exists(other));
    if (std::filesystem::exists(other)) A_CHECK(rep, slurp(entry.path().string()) == slurp(other.string()));
    compared++;
  }
  // report.csv + report.json + one snapshot per (dialogue, tree strategy)
  A_CHECK(rep, compared == 2 + 2 * 3);
  std::filesystem::remove_all(base);
}

TEST_CASE("criterion 10: live smoke against a chat-completions endpoint") {
  CriterionReporter rep{10, "5-turn script against a live endpoint emits a well-formed report"};
  const char* endpoint = std::getenv("CTXFOREST_LIVE_ENDPOINT");
  if (!endpoint || !*endpoint) {
    rep.verdict_override = "SKIP";
    MESSAGE("set CTXFOREST_LIVE_ENDPOINT (and optionally CTXFOREST_LIVE_MODEL, "
            "CTXFOREST_LIVE_KEY) to enable");
    return;
  }

  json cfg;
  cfg["backends"]["responder"]["endpoint"] = endpoint;
  if (const char* model = std::getenv("CTXFOREST_LIVE_MODEL"); model && *model)
    cfg["backends"]["responder"]["model"] = model;
  if (const char* key = std::getenv("CTXFOREST_LIVE_KEY"); key && *key)
    cfg["backends"]["responder"]["api_key_env"] = "CTXFOREST_LIVE_KEY";
  EngineConfig engine = parse_engine_config(cfg.dump());

  json doc;
  doc["schema_version"] = 1;
  doc["id"] = "live-smoke";
  doc["domain"] = "daily-life";
  doc["turns"] = json::array();
  doc["turns"].push_back({{"query", "Suggest a simple pasta dinner for two."}});
  doc["turns"].push_back({{"query", "Make it vegetarian instead."}});
  doc["turns"].push_back({{"query", "What wine pairs with that?"}});
  doc["turns"].push_back({{"query", "new topic: a two-line toast for the dinner."}});
  doc["turns"].push_back({{"query", "Now summarize the full dinner plan."}});
  doc["checkpoints"] = json::array();
  for (const char* kw : {"pasta", "vegetarian", "dinner"})
    doc["checkpoints"].push_back(
        {{"question", std::string("mentions ") + kw}, {"mode", "rule"}, {"keywords", {kw}}});
  auto tmp = std::filesystem::temp_directory_path() / "ctxforest_live_smoke.json";
  {
    std::ofstream out(tmp);
    out << doc.dump();
  }

  auto out_dir = std::filesystem::temp_directory_path() / "ctxforest_live_out";
  std::filesystem::remove_all(out_dir);
  BenchOutcome outcome = run_bench({tmp.string()}, {parse_strategy("context_agent")},
                                   engine.backends, engine.policy, out_dir.string());
  A_CHECK(rep, outcome.aborted.empty());
  A_CHECK(rep, outcome.results.size() == 1);
  A_CHECK(rep, !outcome.report_csv.empty());
  json parsed = json::parse(outcome.report_json);
  A_CHECK(rep, parsed.contains("strategies"));
  std::filesystem::remove_all(out_dir);
  std::filesystem::remove(tmp);
}
