#pragma once

// Forest data model: dialogue nodes, branches, topic trees, and the session
// cursor that moves across them. Purely structural — no model calls, no
// policy. Everything here is value-semantic and cheap to copy at dialogue
// scale (hundreds of nodes).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxforest/errors.hpp"

namespace ctxforest {

using NodeId = std::int64_t;
using BranchId = std::int64_t;
using TreeId = std::int64_t;

// One full user+assistant exchange.
struct DialogueNode {
  NodeId id = 0;
  int turn_index = 0;                 // 1-based, global across the forest
  std::string content;                // "User: ...\nAssistant: ..."
  std::vector<double> embedding;      // unit L2 norm (1 +/- 1e-6)
  std::optional<NodeId> parent;       // absent iff tree root
  BranchId branch_id = 0;
  std::string summary;                // non-empty once committed
};

// A rooted tree of nodes covering one conversational topic. Branches are
// contiguous parent-child chains inside the tree, identified by branch_id.
struct TopicTree {
  TreeId id = 0;
  NodeId root = 0;                    // 0 while the tree is still empty
  std::vector<DialogueNode> nodes;    // insertion order
  std::vector<BranchId> branches;     // creation order (first node carrying the id)
  NodeId cursor = 0;                  // last active node in this tree
};

struct Forest {
  std::vector<TopicTree> trees;       // creation order
  NodeId next_node_id = 1;
  BranchId next_branch_id = 1;
  TreeId next_tree_id = 1;
};

// S_t: the full history plus the active-topic / active-branch / current-node
// cursor. A SessionState is single-writer; distinct states are independent.
struct SessionState {
  Forest forest;
  TreeId active_tree = 0;             // 0 = none yet
  BranchId active_branch = 0;
  std::optional<NodeId> current_node;
  int turn_count = 0;
};

// ---------------------------------------------------------------------------
// Construction and mutation
// ---------------------------------------------------------------------------

SessionState init_session();

// Appends an empty tree and returns its id. The first add_node into it
// becomes the root.
TreeId create_tree(SessionState& state);

// Reserves a fresh branch id. The id is registered in a tree's branch list
// when the first node carrying it is inserted.
BranchId allocate_branch_id(SessionState& state);

// Inserts a node. Assigns the next global turn index and a fresh node id.
// Throws UnknownTree, UnknownParent, CrossTreeParent, NonRootWithoutParent,
// InvalidArgument (embedding not unit-normalized).
NodeId add_node(SessionState& state, TreeId tree_id, std::optional<NodeId> parent,
                BranchId branch_id, std::string content, std::vector<double> embedding,
                std::string summary);

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

const TopicTree& get_tree(const SessionState& state, TreeId tree_id);
TopicTree& get_tree(SessionState& state, TreeId tree_id);
const DialogueNode& get_node(const SessionState& state, NodeId node_id);
TreeId tree_of_node(const SessionState& state, NodeId node_id);
std::size_t total_nodes(const SessionState& state);

// Root-first chain ending at node_id; consecutive pairs are parent->child.
std::vector<NodeId> path_to_root(const SessionState& state, NodeId node_id);

// Strict: a node is never its own ancestor. Nodes in different trees are
// unrelated (false, not an error).
bool is_ancestor(const SessionState& state, NodeId a, NodeId b);

// Deepest node carrying branch_id inside tree_id.
NodeId branch_tip(const SessionState& state, TreeId tree_id, BranchId branch_id);

// Structural invariant check used by tests and the randomized acceptance
// suite: single root per tree, acyclic reachability, contiguous branch
// chains, globally unique ids, turn indices forming the prefix 1..t,
// cursor consistency. Returns human-readable violations (empty = healthy).
std::vector<std::string> validate_state(const SessionState& state);

// ---------------------------------------------------------------------------
// Snapshots (self-describing JSON document) and DOT export
// ---------------------------------------------------------------------------

// Canonical, byte-stable document. Embedding components are quantized to
// 9 significant decimal digits, so restore(snapshot(s)) reproduces every
// field up to that decimal re-serialization and a second snapshot of the
// restored state is byte-identical to the first.
std::string snapshot(const SessionState& state);

// Throws MalformedSnapshot with position/field information.
SessionState restore(const std::string& document);

// One digraph per tree; edges on the active path solid, everything else
// dashed; node labels are turn indices.
std::string export_dot(const SessionState& state);

// Indented text rendering of the forest for terminals; "(empty forest)"
// when nothing has been committed. Active-path nodes are starred.
std::string ascii_forest(const SessionState& state);

}  // namespace ctxforest
