#include "ctxforest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace ctxforest {

const char* err_name(Err e) {
  switch (e) {
    case Err::Ok: return "ok";
    case Err::UnknownTree: return "UnknownTree";
    case Err::UnknownParent: return "UnknownParent";
    case Err::CrossTreeParent: return "CrossTreeParent";
    case Err::NonRootWithoutParent: return "NonRootWithoutParent";
    case Err::UnknownNode: return "UnknownNode";
    case Err::UnknownBranch: return "UnknownBranch";
    case Err::MalformedSnapshot: return "MalformedSnapshot";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::ZeroVector: return "ZeroVector";
    case Err::EmptyTree: return "EmptyTree";
    case Err::EmptyContent: return "EmptyContent";
    case Err::MissingSummary: return "MissingSummary";
    case Err::BackendUnavailable: return "BackendUnavailable";
    case Err::MalformedDecision: return "MalformedDecision";
    case Err::InvalidAction: return "InvalidAction";
    case Err::StalePendingTurn: return "StalePendingTurn";
    case Err::Timeout: return "Timeout";
    case Err::HttpError: return "HttpError";
    case Err::ExhaustedRetries: return "ExhaustedRetries";
    case Err::DimensionDrift: return "DimensionDrift";
    case Err::ParseError: return "ParseError";
    case Err::SchemaViolation: return "SchemaViolation";
    case Err::JudgeUnparsable: return "JudgeUnparsable";
    case Err::EmptyInput: return "EmptyInput";
    case Err::UnsupportedFormat: return "UnsupportedFormat";
    case Err::UnknownStrategy: return "UnknownStrategy";
    case Err::InvalidArgument: return "InvalidArgument";
    case Err::IoError: return "IoError";
    case Err::Internal: return "Internal";
  }
  return "Internal";
}

namespace {

bool is_unit_norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::fabs(std::sqrt(sq) - 1.0) <= 1e-6;
}

const TopicTree* find_tree(const SessionState& state, TreeId tree_id) {
  for (const auto& t : state.forest.trees)
    if (t.id == tree_id) return &t;
  return nullptr;
}

TopicTree* find_tree(SessionState& state, TreeId tree_id) {
  for (auto& t : state.forest.trees)
    if (t.id == tree_id) return &t;
  return nullptr;
}

const DialogueNode* find_node(const SessionState& state, NodeId node_id, TreeId* tree_out = nullptr) {
  for (const auto& t : state.forest.trees) {
    for (const auto& n : t.nodes) {
      if (n.id == node_id) {
        if (tree_out) *tree_out = t.id;
        return &n;
      }
    }
  }
  return nullptr;
}

}  // namespace

SessionState init_session() { return SessionState{}; }

TreeId create_tree(SessionState& state) {
  TopicTree tree;
  tree.id = state.forest.next_tree_id++;
  state.forest.trees.push_back(std::move(tree));
  return state.forest.trees.back().id;
}

BranchId allocate_branch_id(SessionState& state) { return state.forest.next_branch_id++; }

NodeId add_node(SessionState& state, TreeId tree_id, std::optional<NodeId> parent,
                BranchId branch_id, std::string content, std::vector<double> embedding,
                std::string summary) {
  TopicTree* tree = find_tree(state, tree_id);
  if (!tree) throw_error(Err::UnknownTree, "no tree with id " + std::to_string(tree_id));

  if (parent.has_value()) {
    TreeId parent_tree = 0;
    const DialogueNode* p = find_node(state, *parent, &parent_tree);
    if (!p) throw_error(Err::UnknownParent, "no node with id " + std::to_string(*parent));
    if (parent_tree != tree_id)
      throw_error(Err::CrossTreeParent, "parent " + std::to_string(*parent) + " lives in tree " +
                                            std::to_string(parent_tree) + ", not " +
                                            std::to_string(tree_id));
  } else if (!tree->nodes.empty()) {
    throw_error(Err::NonRootWithoutParent,
                "tree " + std::to_string(tree_id) + " already has a root");
  }
  if (!is_unit_norm(embedding))
    throw_error(Err::InvalidArgument, "embedding is not unit-normalized");

  DialogueNode node;
  node.id = state.forest.next_node_id++;
  node.turn_index = static_cast<int>(total_nodes(state)) + 1;
  node.content = std::move(content);
  node.embedding = std::move(embedding);
  node.parent = parent;
  node.branch_id = branch_id;
  node.summary = std::move(summary);

  if (!parent.has_value()) tree->root = node.id;
  if (std::find(tree->branches.begin(), tree->branches.end(), branch_id) == tree->branches.end())
    tree->branches.push_back(branch_id);
  tree->cursor = node.id;
  state.turn_count += 1;

  NodeId id = node.id;
  tree->nodes.push_back(std::move(node));
  return id;
}

const TopicTree& get_tree(const SessionState& state, TreeId tree_id) {
  const TopicTree* t = find_tree(state, tree_id);
  if (!t) throw_error(Err::UnknownTree, "no tree with id " + std::to_string(tree_id));
  return *t;
}

TopicTree& get_tree(SessionState& state, TreeId tree_id) {
  TopicTree* t = find_tree(state, tree_id);
  if (!t) throw_error(Err::UnknownTree, "no tree with id " + std::to_string(tree_id));
  return *t;
}

const DialogueNode& get_node(const SessionState& state, NodeId node_id) {
  const DialogueNode* n = find_node(state, node_id);
  if (!n) throw_error(Err::UnknownNode, "no node with id " + std::to_string(node_id));
  return *n;
}

TreeId tree_of_node(const SessionState& state, NodeId node_id) {
  TreeId tree_id = 0;
  if (!find_node(state, node_id, &tree_id))
    throw_error(Err::UnknownNode, "no node with id " + std::to_string(node_id));
  return tree_id;
}

std::size_t total_nodes(const SessionState& state) {
  std::size_t n = 0;
  for (const auto& t : state.forest.trees) n += t.nodes.size();
  return n;
}

std::vector<NodeId> path_to_root(const SessionState& state, NodeId node_id) {
  const DialogueNode* n = find_node(state, node_id);
  if (!n) throw_error(Err::UnknownNode, "no node with id " + std::to_string(node_id));

  std::vector<NodeId> path;
  std::size_t guard = total_nodes(state) + 1;
  while (true) {
    path.push_back(n->id);
    if (!n->parent.has_value()) break;
    if (path.size() > guard)
      throw_error(Err::Internal, "parent chain cycle at node " + std::to_string(n->id));
    n = find_node(state, *n->parent);
    if (!n) throw_error(Err::Internal, "dangling parent link");
  }
  std::reverse(path.begin(), path.end());
  return path;
}

bool is_ancestor(const SessionState& state, NodeId a, NodeId b) {
  TreeId ta = tree_of_node(state, a);
  TreeId tb = tree_of_node(state, b);
  if (ta != tb) return false;
  if (a == b) return false;
  std::vector<NodeId> path = path_to_root(state, b);
  // Everything on b's root path except b itself is a proper ancestor.
  return std::find(path.begin(), path.end() - 1, a) != path.end() - 1;
}

NodeId branch_tip(const SessionState& state, TreeId tree_id, BranchId branch_id) {
  const TopicTree& tree = get_tree(state, tree_id);
  const DialogueNode* tip = nullptr;
  std::size_t tip_depth = 0;
  for (const auto& n : tree.nodes) {
    if (n.branch_id != branch_id) continue;
    std::size_t depth = path_to_root(state, n.id).size();
    if (!tip || depth > tip_depth) {
      tip = &n;
      tip_depth = depth;
    }
  }
  if (!tip)
    throw_error(Err::UnknownBranch, "tree " + std::to_string(tree_id) + " has no branch " +
                                        std::to_string(branch_id));
  return tip->id;
}

std::vector<std::string> validate_state(const SessionState& state) {
  std::vector<std::string> out;
  auto fail = [&](std::string msg) { out.push_back(std::move(msg)); };

  std::unordered_set<NodeId> all_ids;
  std::set<int> turn_indices;
  std::size_t node_total = 0;

  for (const auto& tree : state.forest.trees) {
    std::unordered_map<NodeId, const DialogueNode*> by_id;
    std::size_t roots = 0;
    for (const auto& n : tree.nodes) {
      if (!all_ids.insert(n.id).second)
        fail("duplicate node id " + std::to_string(n.id));
      by_id[n.id] = &n;
      if (!n.parent.has_value()) roots++;
      if (!turn_indices.insert(n.turn_index).second)
        fail("duplicate turn index " + std::to_string(n.turn_index));
      if (!is_unit_norm(n.embedding))
        fail("node " + std::to_string(n.id) + " embedding not unit-normalized");
      if (n.summary.empty())
        fail("node " + std::to_string(n.id) + " has an empty summary");
      if (n.parent.has_value() == (tree.root == n.id))
        fail("node " + std::to_string(n.id) + " parent/root mismatch");
    }
    node_total += tree.nodes.size();
    if (tree.nodes.empty()) continue;

    if (roots != 1)
      fail("tree " + std::to_string(tree.id) + " has " + std::to_string(roots) + " roots");
    if (by_id.find(tree.cursor) == by_id.end())
      fail("tree " + std::to_string(tree.id) + " cursor names a foreign node");

    // Reachability from the root via child links; also catches cycles
    // (a cycle is unreachable from the root).
    std::unordered_map<NodeId, std::vector<NodeId>> children;
    for (const auto& n : tree.nodes)
      if (n.parent.has_value()) children[*n.parent].push_back(n.id);
    std::unordered_set<NodeId> seen;
    std::vector<NodeId> stack{tree.root};
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      if (!seen.insert(id).second) continue;
      for (NodeId c : children[id]) stack.push_back(c);
    }
    if (seen.size() != tree.nodes.size())
      fail("tree " + std::to_string(tree.id) + " has nodes unreachable from the root");

    // Edge count: every non-root contributes exactly one edge.
    std::size_t edges = 0;
    for (const auto& n : tree.nodes) {
      if (!n.parent.has_value()) continue;
      edges++;
      if (by_id.find(*n.parent) == by_id.end())
        fail("node " + std::to_string(n.id) + " parent not in its tree");
    }
    if (edges + 1 != tree.nodes.size())
      fail("tree " + std::to_string(tree.id) + " edge count mismatch");

    // Every branch is one contiguous parent-child chain: exactly one branch
    // head (node whose parent carries a different branch or is absent), and
    // walking child links within the branch visits every member.
    for (BranchId b : tree.branches) {
      std::vector<const DialogueNode*> members;
      for (const auto& n : tree.nodes)
        if (n.branch_id == b) members.push_back(&n);
      if (members.empty()) {
        fail("tree " + std::to_string(tree.id) + " lists branch " + std::to_string(b) +
             " with no nodes");
        continue;
      }
      const DialogueNode* head = nullptr;
      for (const auto* n : members) {
        bool is_head = !n->parent.has_value() || by_id.at(*n->parent)->branch_id != b;
        if (is_head) {
          if (head) fail("branch " + std::to_string(b) + " has two heads");
          head = n;
        }
      }
      if (!head) {
        fail("branch " + std::to_string(b) + " has no head (cycle?)");
        continue;
      }
      std::size_t walked = 0;
      const DialogueNode* cur = head;
      while (cur) {
        walked++;
        const DialogueNode* next = nullptr;
        for (const auto* n : members) {
          if (n->parent.has_value() && *n->parent == cur->id) {
            if (next) fail("branch " + std::to_string(b) + " forks inside itself");
            next = n;
          }
        }
        cur = next;
      }
      if (walked != members.size())
        fail("branch " + std::to_string(b) + " is not a contiguous chain");
    }
    for (const auto& n : tree.nodes)
      if (std::find(tree.branches.begin(), tree.branches.end(), n.branch_id) ==
          tree.branches.end())
        fail("node " + std::to_string(n.id) + " carries unregistered branch " +
             std::to_string(n.branch_id));
  }

  // Turn indices across the forest form exactly 1..t.
  int expect = 1;
  for (int t : turn_indices) {
    if (t != expect) {
      fail("turn indices are not the contiguous prefix 1..t");
      break;
    }
    expect++;
  }
  if (node_total != static_cast<std::size_t>(state.turn_count))
    fail("turn_count " + std::to_string(state.turn_count) + " != node total " +
         std::to_string(node_total));

  // Session cursor consistency.
  if (state.active_tree != 0) {
    const TopicTree* act = find_tree(state, state.active_tree);
    if (!act) {
      fail("active_tree names a missing tree");
    } else if (!act->nodes.empty()) {
      if (std::find(act->branches.begin(), act->branches.end(), state.active_branch) ==
          act->branches.end())
        fail("active_branch not in active tree");
    }
    if (state.current_node.has_value()) {
      const DialogueNode* cur = find_node(state, *state.current_node);
      if (!cur)
        fail("current_node missing");
      else if (cur->branch_id != state.active_branch)
        fail("current_node does not carry the active branch");
    }
  }
  return out;
}

}  // namespace ctxforest
