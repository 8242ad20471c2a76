#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "ctxforest/forest.hpp"
#include "json.hpp"

namespace ctxforest {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

// Quantize to 9 significant decimal digits. Snapshot documents carry
// embeddings on this grid, so a restored state re-snapshots byte-identically.
double quantize9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return std::strtod(buf, nullptr);
}

ordered_json node_to_json(const DialogueNode& n) {
  ordered_json j;
  j["id"] = n.id;
  j["turn"] = n.turn_index;
  if (n.parent.has_value())
    j["parent"] = *n.parent;
  else
    j["parent"] = nullptr;
  j["branch"] = n.branch_id;
  j["content"] = n.content;
  j["summary"] = n.summary;
  ordered_json emb = ordered_json::array();
  for (double x : n.embedding) emb.push_back(quantize9(x));
  j["embedding"] = std::move(emb);
  return j;
}

[[noreturn]] void malformed(const std::string& what) {
  throw_error(Err::MalformedSnapshot, what);
}

const ordered_json& require(const ordered_json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) malformed("missing field '" + std::string(key) + "' in " + where);
  return *it;
}

}  // namespace

std::string snapshot(const SessionState& state) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  ordered_json session;
  session["turn_count"] = state.turn_count;
  session["active_tree"] = state.active_tree == 0 ? ordered_json(nullptr) : ordered_json(state.active_tree);
  session["active_branch"] =
      state.active_branch == 0 ? ordered_json(nullptr) : ordered_json(state.active_branch);
  session["current_node"] =
      state.current_node.has_value() ? ordered_json(*state.current_node) : ordered_json(nullptr);
  doc["session"] = std::move(session);

  ordered_json counters;
  counters["next_node"] = state.forest.next_node_id;
  counters["next_branch"] = state.forest.next_branch_id;
  counters["next_tree"] = state.forest.next_tree_id;
  doc["counters"] = std::move(counters);

  ordered_json trees = ordered_json::array();
  for (const auto& t : state.forest.trees) {
    ordered_json jt;
    jt["id"] = t.id;
    jt["root"] = t.root;
    jt["cursor"] = t.cursor;
    jt["branches"] = t.branches;
    ordered_json nodes = ordered_json::array();
    for (const auto& n : t.nodes) nodes.push_back(node_to_json(n));
    jt["nodes"] = std::move(nodes);
    trees.push_back(std::move(jt));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

SessionState restore(const std::string& document) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    malformed(std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) malformed("top level is not an object");
  if (require(doc, "schema_version", "document").get<int>() != kSchemaVersion)
    malformed("unsupported schema_version");

  SessionState state;
  try {
    const auto& session = require(doc, "session", "document");
    state.turn_count = require(session, "turn_count", "session").get<int>();
    const auto& at = require(session, "active_tree", "session");
    state.active_tree = at.is_null() ? 0 : at.get<TreeId>();
    const auto& ab = require(session, "active_branch", "session");
    state.active_branch = ab.is_null() ? 0 : ab.get<BranchId>();
    const auto& cn = require(session, "current_node", "session");
    if (!cn.is_null()) state.current_node = cn.get<NodeId>();

    const auto& counters = require(doc, "counters", "document");
    state.forest.next_node_id = require(counters, "next_node", "counters").get<NodeId>();
    state.forest.next_branch_id = require(counters, "next_branch", "counters").get<BranchId>();
    state.forest.next_tree_id = require(counters, "next_tree", "counters").get<TreeId>();

    const auto& trees = require(doc, "trees", "document");
    if (!trees.is_array()) malformed("'trees' is not an array");
    for (const auto& jt : trees) {
      TopicTree tree;
      tree.id = require(jt, "id", "tree").get<TreeId>();
      tree.root = require(jt, "root", "tree").get<NodeId>();
      tree.cursor = require(jt, "cursor", "tree").get<NodeId>();
      for (const auto& b : require(jt, "branches", "tree")) tree.branches.push_back(b.get<BranchId>());
      const auto& nodes = require(jt, "nodes", "tree");
      if (!nodes.is_array()) malformed("'nodes' is not an array");
      for (const auto& jn : nodes) {
        DialogueNode n;
        n.id = require(jn, "id", "node").get<NodeId>();
        n.turn_index = require(jn, "turn", "node").get<int>();
        const auto& parent = require(jn, "parent", "node");
        if (!parent.is_null()) n.parent = parent.get<NodeId>();
        n.branch_id = require(jn, "branch", "node").get<BranchId>();
        n.content = require(jn, "content", "node").get<std::string>();
        n.summary = require(jn, "summary", "node").get<std::string>();
        for (const auto& x : require(jn, "embedding", "node")) n.embedding.push_back(x.get<double>());
        tree.nodes.push_back(std::move(n));
      }
      state.forest.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("bad field type: ") + e.what());
  }
  // A parsable document can still describe an impossible forest; reject it
  // with the first violation rather than letting it poison a session.
  auto violations = validate_state(state);
  if (!violations.empty()) malformed("document violates forest invariants: " + violations.front());
  return state;
}

std::string export_dot(const SessionState& state) {
  // Membership set for the active path; an edge is solid iff its child end
  // lies on the path (then the parent end necessarily does too).
  std::vector<NodeId> active_path;
  if (state.current_node.has_value())
    active_path = path_to_root(state, *state.current_node);
  auto on_path = [&](NodeId id) {
    return std::find(active_path.begin(), active_path.end(), id) != active_path.end();
  };

  std::string out;
  for (const auto& tree : state.forest.trees) {
    out += "digraph tree_" + std::to_string(tree.id) + " {\n";
    out += "  label=\"tree " + std::to_string(tree.id) + "\";\n";
    for (const auto& n : tree.nodes)
      out += "  n" + std::to_string(n.id) + " [label=\"" + std::to_string(n.turn_index) + "\"];\n";
    for (const auto& n : tree.nodes) {
      if (!n.parent.has_value()) continue;
      bool solid = on_path(n.id);
      out += "  n" + std::to_string(*n.parent) + " -> n" + std::to_string(n.id) + " [style=" +
             (solid ? "solid" : "dashed") + "];\n";
    }
    out += "}\n";
  }
  return out;
}

namespace {

std::string one_line_preview(const std::string& text, std::size_t max_chars = 48) {
  std::string out;
  for (char c : text) {
    if (c == '\n') {
      out += " / ";
      continue;
    }
    out.push_back(c);
    if (out.size() >= max_chars) {
      out += "...";
      break;
    }
  }
  return out;
}

}  // namespace

std::string ascii_forest(const SessionState& state) {
  if (total_nodes(state) == 0) return "(empty forest)\n";

  std::vector<NodeId> active_path;
  if (state.current_node.has_value())
    active_path = path_to_root(state, *state.current_node);
  auto on_path = [&](NodeId id) {
    return std::find(active_path.begin(), active_path.end(), id) != active_path.end();
  };

  std::string out;
  for (const auto& tree : state.forest.trees) {
    out += "Tree " + std::to_string(tree.id);
    if (tree.id == state.active_tree) out += " [active]";
    out += "\n";
    if (tree.nodes.empty()) continue;

    // Depth-first from the root, children in insertion order.
    struct Frame {
      NodeId id;
      int depth;
    };
    std::vector<Frame> stack{{tree.root, 0}};
    while (!stack.empty()) {
      Frame f = stack.back();
      stack.pop_back();
      const DialogueNode& n = get_node(state, f.id);
      out += std::string(static_cast<std::size_t>(f.depth) * 2 + 2, ' ');
      out += on_path(n.id) ? "* " : "- ";
      out += "(" + std::to_string(n.turn_index) + ") [b" + std::to_string(n.branch_id) + "] " +
             one_line_preview(n.content) + "\n";
      // Push children in reverse so the oldest child prints first.
      std::vector<NodeId> kids;
      for (const auto& c : tree.nodes)
        if (c.parent.has_value() && *c.parent == n.id) kids.push_back(c.id);
      for (auto it = kids.rbegin(); it != kids.rend(); ++it)
        stack.push_back({*it, f.depth + 1});
    }
  }
  return out;
}

}  // namespace ctxforest
