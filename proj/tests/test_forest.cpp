// forest_core: structural model, queries, snapshot round trips, DOT export.

#include <random>
#include <set>

#include <fstream>
#include <sstream>
#include "doctest.h"
#include "testutil.hpp"

using namespace ctxforest;
using testutil::put;
using testutil::unit2;

TEST_CASE("init_session starts empty") {
  SessionState s = init_session();
  CHECK(s.forest.trees.empty());
  CHECK(s.turn_count == 0);
  CHECK_FALSE(s.current_node.has_value());
}

TEST_CASE("first committed node becomes the root with no parent") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId root = put(s, t, std::nullopt, b);
  CHECK(s.forest.trees.size() == 1);
  CHECK(get_tree(s, t).root == root);
  CHECK_FALSE(get_node(s, root).parent.has_value());
  CHECK(get_node(s, root).turn_index == 1);
}

TEST_CASE("two sessions are independent values") {
  SessionState a = init_session();
  SessionState b = init_session();
  TreeId t = create_tree(a);
  put(a, t, std::nullopt, allocate_branch_id(a));
  CHECK(a.forest.trees.size() == 1);
  CHECK(b.forest.trees.empty());
  CHECK(b.turn_count == 0);
}

TEST_CASE("add_node extends a branch chain") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId root = put(s, t, std::nullopt, b);
  NodeId child = put(s, t, root, b);
  CHECK(get_node(s, child).parent == root);
  CHECK(get_tree(s, t).branches.size() == 1);
  CHECK(branch_tip(s, t, b) == child);
}

TEST_CASE("add_node with a new branch under a mid-path node keeps chains contiguous") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b1 = allocate_branch_id(s);
  NodeId root = put(s, t, std::nullopt, b1);
  NodeId mid = put(s, t, root, b1);
  put(s, t, mid, b1);

  BranchId b2 = allocate_branch_id(s);
  NodeId forked = put(s, t, mid, b2);
  put(s, t, forked, b2);

  CHECK(get_tree(s, t).branches == std::vector<BranchId>{b1, b2});
  // Exhaustive chain walk over both branches via the validator.
  CHECK(validate_state(s).empty());
}

TEST_CASE("add_node error paths") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId root = put(s, t, std::nullopt, b);

  SUBCASE("unknown tree") {
    CHECK_THROWS_WITH_AS(put(s, 99, root, b), doctest::Contains("UnknownTree"), Error);
  }
  SUBCASE("unknown parent") {
    CHECK_THROWS_WITH_AS(put(s, t, NodeId{404}, b), doctest::Contains("UnknownParent"), Error);
  }
  SUBCASE("parent in a different tree") {
    TreeId t2 = create_tree(s);
    CHECK_THROWS_WITH_AS(put(s, t2, root, allocate_branch_id(s)),
                         doctest::Contains("CrossTreeParent"), Error);
  }
  SUBCASE("second root") {
    CHECK_THROWS_WITH_AS(put(s, t, std::nullopt, b), doctest::Contains("NonRootWithoutParent"),
                         Error);
  }
  SUBCASE("non-normalized embedding") {
    CHECK_THROWS_AS(add_node(s, t, root, b, "x", {1.0, 1.0}, "sum"), Error);
  }
}

TEST_CASE("path_to_root") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId r = put(s, t, std::nullopt, b);

  SUBCASE("root only") { CHECK(path_to_root(s, r) == std::vector<NodeId>{r}); }

  SUBCASE("linear chain") {
    NodeId a = put(s, t, r, b);
    NodeId c = put(s, t, a, b);
    CHECK(path_to_root(s, c) == std::vector<NodeId>{r, a, c});
  }

  SUBCASE("unknown node") {
    CHECK_THROWS_WITH_AS(path_to_root(s, 12345), doctest::Contains("UnknownNode"), Error);
  }
}

TEST_CASE("is_ancestor basics") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId r = put(s, t, std::nullopt, b);
  NodeId a = put(s, t, r, b);
  NodeId c = put(s, t, a, b);

  CHECK(is_ancestor(s, r, a));
  CHECK(is_ancestor(s, r, c));
  CHECK_FALSE(is_ancestor(s, c, c));  // strict
  CHECK_FALSE(is_ancestor(s, c, r));

  TreeId t2 = create_tree(s);
  NodeId other = put(s, t2, std::nullopt, allocate_branch_id(s));
  CHECK_FALSE(is_ancestor(s, r, other));  // different trees: false, not error
  CHECK_THROWS_AS(is_ancestor(s, r, 999), Error);
}

TEST_CASE("is_ancestor matches the path-enumeration oracle on random trees") {
  std::mt19937 rng(71);
  for (int round = 0; round < 20; round++) {
    SessionState s = testutil::random_forest(rng, 12);
    std::vector<NodeId> ids;
    for (const auto& tree : s.forest.trees)
      for (const auto& n : tree.nodes) ids.push_back(n.id);
    for (NodeId x : ids)
      for (NodeId y : ids) CHECK(is_ancestor(s, x, y) == testutil::oracle_is_ancestor(s, x, y));
  }
}

TEST_CASE("is_ancestor is irreflexive, antisymmetric, transitive") {
  std::mt19937 rng(9);
  SessionState s = testutil::random_forest(rng, 16);
  std::vector<NodeId> ids;
  for (const auto& tree : s.forest.trees)
    for (const auto& n : tree.nodes) ids.push_back(n.id);
  for (NodeId x : ids) {
    CHECK_FALSE(is_ancestor(s, x, x));
    for (NodeId y : ids) {
      if (is_ancestor(s, x, y)) CHECK_FALSE(is_ancestor(s, y, x));
      for (NodeId z : ids)
        if (is_ancestor(s, x, y) && is_ancestor(s, y, z)) CHECK(is_ancestor(s, x, z));
    }
  }
}

TEST_CASE("branch_tip") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId r = put(s, t, std::nullopt, b);

  SUBCASE("single node branch") { CHECK(branch_tip(s, t, b) == r); }

  SUBCASE("chain of three") {
    NodeId a = put(s, t, r, b);
    NodeId c = put(s, t, a, b);
    CHECK(branch_tip(s, t, b) == c);
  }

  SUBCASE("three branches, tips match the full-scan oracle") {
    NodeId a = put(s, t, r, b);
    BranchId b2 = allocate_branch_id(s);
    put(s, t, r, b2);
    BranchId b3 = allocate_branch_id(s);
    NodeId f = put(s, t, a, b3);
    put(s, t, f, b3);
    for (BranchId each : get_tree(s, t).branches)
      CHECK(branch_tip(s, t, each) == testutil::oracle_branch_tip(s, t, each));
  }

  SUBCASE("unknown branch") {
    CHECK_THROWS_WITH_AS(branch_tip(s, t, 777), doctest::Contains("UnknownBranch"), Error);
  }
}

TEST_CASE("structural invariants hold after any valid growth sequence") {
  std::mt19937 rng(2024);
  for (int round = 0; round < 30; round++) {
    SessionState s = testutil::random_forest(rng, 20);
    auto violations = validate_state(s);
    CHECK_MESSAGE(violations.empty(),
                  (violations.empty() ? std::string("ok") : violations.front()));

    // node count = edge count + tree count
    std::size_t edges = 0, nodes = 0;
    for (const auto& tree : s.forest.trees) {
      nodes += tree.nodes.size();
      for (const auto& n : tree.nodes) edges += n.parent.has_value() ? 1 : 0;
    }
    CHECK(nodes == edges + s.forest.trees.size());
  }
}

TEST_CASE("snapshot round trip: empty state") {
  SessionState s = init_session();
  SessionState back = restore(snapshot(s));
  CHECK(back.forest.trees.empty());
  CHECK(back.turn_count == 0);
  CHECK(snapshot(back) == snapshot(s));
}

TEST_CASE("snapshot round trip preserves structure and re-snapshots identically") {
  std::mt19937 rng(5);
  SessionState s = testutil::random_forest(rng, 18);
  s.active_tree = s.forest.trees.back().id;
  s.active_branch = s.forest.trees.back().branches.front();

  std::string doc = snapshot(s);
  SessionState back = restore(doc);

  CHECK(back.turn_count == s.turn_count);
  REQUIRE(back.forest.trees.size() == s.forest.trees.size());
  for (std::size_t i = 0; i < s.forest.trees.size(); i++) {
    const auto& a = s.forest.trees[i];
    const auto& b = back.forest.trees[i];
    CHECK(a.id == b.id);
    CHECK(a.root == b.root);
    CHECK(a.cursor == b.cursor);
    CHECK(a.branches == b.branches);
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t j = 0; j < a.nodes.size(); j++) {
      CHECK(a.nodes[j].id == b.nodes[j].id);
      CHECK(a.nodes[j].parent == b.nodes[j].parent);
      CHECK(a.nodes[j].branch_id == b.nodes[j].branch_id);
      CHECK(a.nodes[j].content == b.nodes[j].content);
      CHECK(a.nodes[j].summary == b.nodes[j].summary);
      REQUIRE(a.nodes[j].embedding.size() == b.nodes[j].embedding.size());
      for (std::size_t k = 0; k < a.nodes[j].embedding.size(); k++)
        CHECK(b.nodes[j].embedding[k] == doctest::Approx(a.nodes[j].embedding[k]).epsilon(1e-8));
    }
  }
  // Decimal re-serialization is a fixed point after the first round.
  CHECK(snapshot(back) == doc);
}

TEST_CASE("restore rejects malformed documents with position info") {
  CHECK_THROWS_WITH_AS(restore("{\"schema_version\": 1"), doctest::Contains("MalformedSnapshot"),
                       Error);
  CHECK_THROWS_WITH_AS(restore("[]"), doctest::Contains("MalformedSnapshot"), Error);
  CHECK_THROWS_WITH_AS(restore("{\"schema_version\": 99}"), doctest::Contains("schema_version"),
                       Error);
  // truncated: session present but trees missing
  CHECK_THROWS_WITH_AS(
      restore("{\"schema_version\":1,\"session\":{\"turn_count\":0,\"active_tree\":null,"
              "\"active_branch\":null,\"current_node\":null},\"counters\":{\"next_node\":1,"
              "\"next_branch\":1,\"next_tree\":1}}"),
      doctest::Contains("trees"), Error);
}

TEST_CASE("export_dot marks the active path solid and everything else dashed") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId r = put(s, t, std::nullopt, b);

  SUBCASE("single node forest: one digraph, zero edges") {
    std::string dot = export_dot(s);
    CHECK(dot.find("digraph tree_1") != std::string::npos);
    CHECK(dot.find("->") == std::string::npos);
  }

  SUBCASE("active path edges are solid") {
    NodeId a = put(s, t, r, b);
    BranchId b2 = allocate_branch_id(s);
    NodeId off = put(s, t, r, b2);
    s.active_tree = t;
    s.active_branch = b;
    s.current_node = a;
    std::string dot = export_dot(s);
    CHECK(dot.find("n" + std::to_string(r) + " -> n" + std::to_string(a) + " [style=solid]") !=
          std::string::npos);
    CHECK(dot.find("n" + std::to_string(r) + " -> n" + std::to_string(off) + " [style=dashed]") !=
          std::string::npos);
  }
}

TEST_CASE("ascii_forest") {
  SessionState s = init_session();
  CHECK(ascii_forest(s) == "(empty forest)\n");
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId r = put(s, t, std::nullopt, b, "User: hello\nAssistant: hi");
  put(s, t, r, b);
  std::string text = ascii_forest(s);
  CHECK(text.find("Tree 1") != std::string::npos);
  CHECK(text.find("(1)") != std::string::npos);
  CHECK(text.find("(2)") != std::string::npos);
}

TEST_CASE("trip fixture: the path of the turn-9 node follows the refinement chain") {
  // hand-drawn adjacency for the golden forest: 4 -> 5 -> 9, with 9 starting
  // the refinement branch under the itinerary-options node
  std::ifstream in(std::string(CTXF_FIXTURE_DIR) + "/fig6_snapshot.golden.json",
                   std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  SessionState s = restore(buf.str());

  CHECK(path_to_root(s, 9) == std::vector<NodeId>{4, 5, 9});
  CHECK(path_to_root(s, 15) == std::vector<NodeId>{4, 5, 9, 15});
  CHECK(path_to_root(s, 14) == std::vector<NodeId>{4, 5, 6, 10, 11, 12, 13, 14});

  // restore keeps the full structure and re-snapshots identically
  CHECK(s.forest.trees.size() == 3);
  CHECK(get_tree(s, 2).branches == std::vector<BranchId>{2, 4});
  CHECK(validate_state(s).empty());
  CHECK(snapshot(s) == buf.str());
}

TEST_CASE("restore rejects parsable documents that violate forest invariants") {
  SessionState s = init_session();
  TreeId t = create_tree(s);
  BranchId b = allocate_branch_id(s);
  NodeId r = put(s, t, std::nullopt, b);
  put(s, t, r, b);
  std::string doc = snapshot(s);

  // forge a parent cycle: point the root's parent at its child
  auto pos = doc.find("\"parent\": null");
  REQUIRE(pos != std::string::npos);
  std::string forged = doc.substr(0, pos) + "\"parent\": 2" + doc.substr(pos + 14);
  CHECK_THROWS_WITH_AS(restore(forged), doctest::Contains("MalformedSnapshot"), Error);
}
