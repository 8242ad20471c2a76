#pragma once

// The turn-cycle state machine: topic decision, fork-point search, heuristic
// filter, branch decision, node update, and delegation to context assembly.
//
// A turn runs in two halves. advance_turn executes the decisions and moves
// the session cursor (active tree / branch / current node), returning the
// assembled context plus a PendingTurn handle; the caller generates the
// response with that context and then commit_turn inserts the node. One
// pending turn may be in flight per session; advance and commit alternate.

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ctxforest/context.hpp"
#include "ctxforest/forest.hpp"
#include "ctxforest/gateway.hpp"
#include "ctxforest/semantic_index.hpp"
#include "ctxforest/summarizer.hpp"

namespace ctxforest {

struct TopicAction {
  enum class Kind { Continue, CreateTopic, SwitchTopic };
  Kind kind = Kind::Continue;
  TreeId target_tree = 0;  // required for SwitchTopic
};

struct BranchAction {
  enum class Kind { Continue, CreateBranch, SwitchBranch };
  Kind kind = Kind::Continue;
  NodeId fork_node = 0;  // required for CreateBranch / SwitchBranch
};

std::string topic_action_name(const TopicAction& a);
std::string branch_action_name(const BranchAction& a);

struct PolicyConfig {
  double theta_sim = 0.6;  // similarity gate, in [0, 1]
  int retrieval_m = 3;     // R(q) size
  int summary_cap = 60;    // tokens per node summary
  // HeuristicOnly replaces the branch model with: filter true ->
  // CREATE_BRANCH at the fork point, else CONTINUE (no model call).
  enum class BranchMode { Model, HeuristicOnly };
  BranchMode branch_mode = BranchMode::Model;
};

struct TreeSummaryForDecision {
  TreeId id = 0;
  std::string summary;
  bool active = false;
};

// Step 1. With no trees the only legal action is CREATE_TOPIC and the
// backend is not consulted. Throws BackendUnavailable, MalformedDecision
// (after one retry), InvalidAction (target tree missing or already active).
TopicAction decide_topic(const std::string& query,
                         const std::vector<TreeSummaryForDecision>& tree_summaries,
                         Gateway& gateway, const BackendProfile& decision_profile);

// Step 3 gate: fork hit is relevant enough AND (lies on another branch OR is
// a proper ancestor of the current node). Pure predicate.
bool heuristic_filter(const SimilarityHit& hit, NodeId current_node, const PolicyConfig& config,
                      const SessionState& state);

// Step 3 model decision, consulted only when the gate passes. fork targets
// must come from the retrieved list ("top" selects the best hit). Throws
// BackendUnavailable, MalformedDecision, InvalidAction.
BranchAction decide_branch(const SessionState& state, const std::string& query,
                           const std::vector<NodeId>& current_path,
                           const std::vector<SimilarityHit>& retrieved, Gateway& gateway,
                           const BackendProfile& decision_profile);

struct PendingTurn {
  std::uint64_t ticket = 0;
  std::string query;
  std::vector<double> query_embedding;  // empty when the branch stage was skipped

  TopicAction topic_action;
  std::optional<BranchAction> branch_action;  // absent when skipped
  bool filter_passed = false;
  std::optional<SimilarityHit> fork_hit;

  TreeId target_tree = 0;              // tree receiving the node
  std::optional<NodeId> parent;        // parent of the upcoming node
  BranchId branch = 0;                 // branch of the upcoming node

  // rollback info for abort_turn
  TreeId prev_active_tree = 0;
  BranchId prev_active_branch = 0;
  std::optional<NodeId> prev_current_node;
  TreeId created_tree = 0;
  TreeId prev_next_tree_id = 0;
  BranchId prev_next_branch_id = 0;
};

// Per-committed-turn record of what the policy decided.
struct TurnTrace {
  int turn = 0;
  std::string query;
  std::string topic_action;
  std::string branch_action;  // empty when the branch stage was skipped
  bool filter_passed = false;
  NodeId fork_node = 0;
  double fork_score = 0.0;
  std::int64_t context_tokens = 0;  // assembled context, excluding the query
};

class Session {
public:
  Session(BackendSet backends, PolicyConfig config);
  Session(BackendSet backends, PolicyConfig config, SessionState restored);

  struct AdvanceResult {
    AssembledContext context;
    PendingTurn pending;
  };

  // Steps 1-4 plus cursor updates. State mutations happen only after every
  // backend call has succeeded, so a throwing advance leaves the session
  // untouched.
  AdvanceResult advance_turn(const std::string& query);

  // Node update: embeds and summarizes the exchange, inserts the node,
  // advances cursors, invalidates summary caches. Throws StalePendingTurn
  // if this pending was already settled or is not the one in flight.
  void commit_turn(const PendingTurn& pending, const std::string& response_text);

  // Rolls the cursor updates of an uncommitted advance back (REPL error
  // paths). Throws StalePendingTurn as commit does.
  void abort_turn(const PendingTurn& pending);

  const SessionState& state() const { return state_; }
  const PolicyConfig& config() const { return config_; }
  const BackendSet& backends() const { return backends_; }
  const std::vector<TurnTrace>& traces() const { return traces_; }
  SummaryCache& cache() { return cache_; }

  // Appends one JSON record per committed turn (query, candidate summaries,
  // actions, scores).
  void open_audit_log(const std::string& path);

private:
  BackendSet backends_;
  PolicyConfig config_;
  SessionState state_;
  SummaryCache cache_;
  std::vector<TurnTrace> traces_;  // committed turns only
  TurnTrace pending_trace_;
  std::unique_ptr<std::ostream> audit_;
  std::string pending_audit_;
  std::uint64_t next_ticket_ = 1;
  std::uint64_t open_ticket_ = 0;  // 0 = none in flight
};

// Message layout for the response model: fixed instructions plus the
// rendered context as the system message, the bare query as the user
// message. Everything except the fixed instructions counts toward ACT.
std::vector<Message> responder_messages(const AssembledContext& context,
                                        const std::string& query);

}  // namespace ctxforest
