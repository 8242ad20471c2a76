#include "ctxforest/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace ctxforest {

using json = nlohmann::json;

std::string topic_action_name(const TopicAction& a) {
  switch (a.kind) {
    case TopicAction::Kind::Continue: return "CONTINUE";
    case TopicAction::Kind::CreateTopic: return "CREATE_TOPIC";
    case TopicAction::Kind::SwitchTopic: return "SWITCH_TOPIC:" + std::to_string(a.target_tree);
  }
  return "?";
}

std::string branch_action_name(const BranchAction& a) {
  switch (a.kind) {
    case BranchAction::Kind::Continue: return "CONTINUE";
    case BranchAction::Kind::CreateBranch: return "CREATE_BRANCH:" + std::to_string(a.fork_node);
    case BranchAction::Kind::SwitchBranch: return "SWITCH_BRANCH:" + std::to_string(a.fork_node);
  }
  return "?";
}

namespace {

// Prompt texts are versioned plumbing; bump when the wording changes so
// cassettes and audit logs can be told apart.
constexpr const char* kPromptVersion = "v1";

constexpr const char* kTopicSystemPrompt =
    "You route conversation turns between topic trees. Reply with exactly one "
    "line and nothing else: CONTINUE, CREATE_TOPIC, or SWITCH_TOPIC:<tree id>.";

constexpr const char* kBranchSystemPrompt =
    "You route conversation turns between dialogue branches. Reply with exactly "
    "one line and nothing else: CONTINUE, CREATE_BRANCH:<node id or top>, or "
    "SWITCH_BRANCH:<node id or top>.";

constexpr const char* kResponderSystemPrompt =
    "You are a helpful assistant. Conversation context gathered so far is "
    "provided below; answer the user's current query.";

std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", score);
  return buf;
}

// Wire grammar: a single line `ACTION[:TARGET]`.
struct DecisionLine {
  std::string action;
  std::string target;  // empty when absent
};

std::optional<DecisionLine> parse_decision_line(const std::string& text) {
  std::string t = text;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
  if (t.empty() || t.find('\n') != std::string::npos) return std::nullopt;

  DecisionLine line;
  auto colon = t.find(':');
  if (colon == std::string::npos) {
    line.action = t;
  } else {
    line.action = t.substr(0, colon);
    line.target = t.substr(colon + 1);
    if (line.target.empty()) return std::nullopt;
  }
  return line;
}

// One call with a single retry on an unparsable answer.
DecisionLine ask_for_decision(Gateway& gateway, const BackendProfile& profile,
                              std::vector<Message> messages, const char* what) {
  std::string answer = gateway.chat_complete(profile, messages);
  if (auto parsed = parse_decision_line(answer)) return *parsed;

  messages.push_back({"assistant", answer});
  messages.push_back({"user", "That was not a valid action line. Answer with exactly one line."});
  std::string second = gateway.chat_complete(profile, messages);
  if (auto parsed = parse_decision_line(second)) return *parsed;

  throw_error(Err::MalformedDecision,
              std::string(what) + " backend answered '" + answer + "' then '" + second + "'");
}

std::optional<std::int64_t> parse_id(const std::string& s) {
  if (s.empty()) return std::nullopt;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  try {
    return std::stoll(s);
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace

TopicAction decide_topic(const std::string& query,
                         const std::vector<TreeSummaryForDecision>& tree_summaries,
                         Gateway& gateway, const BackendProfile& decision_profile) {
  if (tree_summaries.empty()) return {TopicAction::Kind::CreateTopic, 0};

  std::string prompt = "[topic-decision]\nQuery: " + query + "\nTrees:\n";
  for (const auto& t : tree_summaries) {
    prompt += "Tree " + std::to_string(t.id) + (t.active ? " (active)" : "") + ": " + t.summary +
              "\n";
  }
  prompt += "Answer with one line: CONTINUE, CREATE_TOPIC, or SWITCH_TOPIC:<tree id>.";

  DecisionLine line = ask_for_decision(
      gateway, decision_profile, {{"system", kTopicSystemPrompt}, {"user", prompt}}, "topic");

  if (line.action == "CONTINUE" && line.target.empty()) return {TopicAction::Kind::Continue, 0};
  if (line.action == "CREATE_TOPIC" && line.target.empty())
    return {TopicAction::Kind::CreateTopic, 0};
  if (line.action == "SWITCH_TOPIC") {
    auto id = parse_id(line.target);
    if (!id) throw_error(Err::MalformedDecision, "bad SWITCH_TOPIC target '" + line.target + "'");
    const TreeSummaryForDecision* named = nullptr;
    for (const auto& t : tree_summaries)
      if (t.id == *id) named = &t;
    if (!named)
      throw_error(Err::InvalidAction, "SWITCH_TOPIC names missing tree " + line.target);
    if (named->active)
      throw_error(Err::InvalidAction, "SWITCH_TOPIC names the active tree " + line.target);
    return {TopicAction::Kind::SwitchTopic, *id};
  }
  throw_error(Err::MalformedDecision, "unknown topic action '" + line.action + "'");
}

bool heuristic_filter(const SimilarityHit& hit, NodeId current_node, const PolicyConfig& config,
                      const SessionState& state) {
  if (hit.score < config.theta_sim) return false;
  const DialogueNode& h = get_node(state, hit.node_id);
  const DialogueNode& c = get_node(state, current_node);
  return h.branch_id != c.branch_id || is_ancestor(state, hit.node_id, current_node);
}

BranchAction decide_branch(const SessionState& state, const std::string& query,
                           const std::vector<NodeId>& current_path,
                           const std::vector<SimilarityHit>& retrieved, Gateway& gateway,
                           const BackendProfile& decision_profile) {
  if (retrieved.empty()) throw_error(Err::InvalidArgument, "decide_branch with no retrieved nodes");

  std::string prompt = "[branch-decision]\nQuery: " + query + "\nCurrent path:\n";
  for (NodeId id : current_path) {
    const DialogueNode& n = get_node(state, id);
    prompt += "turn " + std::to_string(n.turn_index) + ": " + n.summary + "\n";
  }
  prompt += "Retrieved:\n";
  for (const auto& hit : retrieved) {
    const DialogueNode& n = get_node(state, hit.node_id);
    prompt += "node " + std::to_string(n.id) + " (branch " + std::to_string(n.branch_id) +
              ", turn " + std::to_string(n.turn_index) + ", score " + format_score(hit.score) +
              "): " + n.summary + "\n";
  }
  prompt += "Answer with one line: CONTINUE, CREATE_BRANCH:<node id or top>, or "
            "SWITCH_BRANCH:<node id or top>.";

  DecisionLine line = ask_for_decision(
      gateway, decision_profile, {{"system", kBranchSystemPrompt}, {"user", prompt}}, "branch");

  if (line.action == "CONTINUE" && line.target.empty()) return {BranchAction::Kind::Continue, 0};

  BranchAction::Kind kind;
  if (line.action == "CREATE_BRANCH")
    kind = BranchAction::Kind::CreateBranch;
  else if (line.action == "SWITCH_BRANCH")
    kind = BranchAction::Kind::SwitchBranch;
  else
    throw_error(Err::MalformedDecision, "unknown branch action '" + line.action + "'");

  NodeId fork = 0;
  if (line.target == "top") {
    fork = retrieved.front().node_id;
  } else {
    auto id = parse_id(line.target);
    if (!id) throw_error(Err::MalformedDecision, "bad branch target '" + line.target + "'");
    bool in_retrieved = std::any_of(retrieved.begin(), retrieved.end(),
                                    [&](const SimilarityHit& h) { return h.node_id == *id; });
    if (!in_retrieved)
      throw_error(Err::InvalidAction,
                  "branch target " + line.target + " is not among the retrieved nodes");
    fork = *id;
  }
  return {kind, fork};
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

namespace {

void check_config(const PolicyConfig& config) {
  if (config.theta_sim < 0.0 || config.theta_sim > 1.0)
    throw_error(Err::InvalidArgument, "theta_sim must be in [0, 1]");
  if (config.retrieval_m < 1) throw_error(Err::InvalidArgument, "retrieval_m must be >= 1");
  if (config.summary_cap < 1) throw_error(Err::InvalidArgument, "summary_cap must be >= 1");
}

}  // namespace

Session::Session(BackendSet backends, PolicyConfig config)
    : backends_(std::move(backends)), config_(config), state_(init_session()) {
  check_config(config_);
}

Session::Session(BackendSet backends, PolicyConfig config, SessionState restored)
    : backends_(std::move(backends)), config_(config), state_(std::move(restored)) {
  check_config(config_);
}

Session::AdvanceResult Session::advance_turn(const std::string& query) {
  if (query.empty()) throw_error(Err::InvalidArgument, "query is empty");
  if (open_ticket_ != 0)
    throw_error(Err::StalePendingTurn, "previous advance_turn has not been committed");

  Gateway& gw = *backends_.gateway;

  // Step 1: topic decision over all existing tree summaries.
  std::vector<TreeSummaryForDecision> summaries;
  for (const auto& tree : state_.forest.trees) {
    if (tree.nodes.empty()) continue;
    summaries.push_back(
        {tree.id, aggregate_tree(state_, tree.id, &cache_), tree.id == state_.active_tree});
  }
  TopicAction topic = decide_topic(query, summaries, gw, backends_.decision);

  // Resolve where the branch stage runs without touching the state yet.
  TreeId target_tree = 0;      // 0 until CREATE_TOPIC materializes it
  NodeId branch_base = 0;      // n_cur for the branch stage
  bool branch_stage = false;
  switch (topic.kind) {
    case TopicAction::Kind::CreateTopic:
      break;  // new tree is empty; branch stage skipped
    case TopicAction::Kind::SwitchTopic:
      target_tree = topic.target_tree;
      branch_base = get_tree(state_, target_tree).cursor;
      branch_stage = true;
      break;
    case TopicAction::Kind::Continue:
      if (state_.active_tree == 0)
        throw_error(Err::InvalidAction, "CONTINUE with no active tree");
      target_tree = state_.active_tree;
      branch_base = *state_.current_node;
      branch_stage = true;
      break;
  }

  // Steps 2-3: fork point, gate, branch decision.
  PendingTurn pending;
  pending.query = query;
  pending.topic_action = topic;
  BranchAction branch{BranchAction::Kind::Continue, 0};
  std::vector<SimilarityHit> retrieved;
  if (branch_stage) {
    pending.query_embedding = gw.embed_batch(backends_.embedding, {query}).front();
    SimilarityHit hit = find_fork_point(state_, target_tree, pending.query_embedding);
    pending.fork_hit = hit;
    pending.filter_passed = heuristic_filter(hit, branch_base, config_, state_);
    if (pending.filter_passed) {
      retrieved = retrieve_top_m(state_, target_tree, pending.query_embedding, config_.retrieval_m);
      if (config_.branch_mode == PolicyConfig::BranchMode::HeuristicOnly)
        branch = {BranchAction::Kind::CreateBranch, hit.node_id};
      else
        branch = decide_branch(state_, query, path_to_root(state_, branch_base), retrieved, gw,
                               backends_.decision);
    }
    pending.branch_action = branch;
  }

  // All backend calls are done; apply the cursor updates.
  pending.ticket = next_ticket_++;
  pending.prev_active_tree = state_.active_tree;
  pending.prev_active_branch = state_.active_branch;
  pending.prev_current_node = state_.current_node;
  pending.prev_next_tree_id = state_.forest.next_tree_id;
  pending.prev_next_branch_id = state_.forest.next_branch_id;

  switch (topic.kind) {
    case TopicAction::Kind::CreateTopic:
      pending.created_tree = create_tree(state_);
      state_.active_tree = pending.created_tree;
      state_.active_branch = allocate_branch_id(state_);
      state_.current_node.reset();
      break;
    case TopicAction::Kind::SwitchTopic: {
      state_.active_tree = target_tree;
      state_.current_node = branch_base;
      state_.active_branch = get_node(state_, branch_base).branch_id;
      break;
    }
    case TopicAction::Kind::Continue:
      break;
  }
  if (branch_stage) {
    switch (branch.kind) {
      case BranchAction::Kind::Continue:
        break;
      case BranchAction::Kind::CreateBranch:
        state_.active_branch = allocate_branch_id(state_);
        state_.current_node = branch.fork_node;
        break;
      case BranchAction::Kind::SwitchBranch: {
        BranchId b = get_node(state_, branch.fork_node).branch_id;
        state_.active_branch = b;
        state_.current_node = branch_tip(state_, target_tree, b);
        break;
      }
    }
  }

  pending.target_tree = state_.active_tree;
  pending.parent = state_.current_node;
  pending.branch = state_.active_branch;

  // Step 4.
  AssembledContext context = build_context(state_, &cache_);

  // Stage the audit record; it is flushed when the turn commits.
  json audit;
  audit["prompt_version"] = kPromptVersion;
  audit["turn"] = state_.turn_count + 1;
  audit["query"] = query;
  json cand = json::array();
  for (const auto& s : summaries)
    cand.push_back({{"tree", s.id}, {"active", s.active}, {"summary", s.summary}});
  audit["tree_summaries"] = std::move(cand);
  audit["topic_action"] = topic_action_name(topic);
  if (branch_stage) {
    audit["branch_action"] = branch_action_name(branch);
    audit["filter_passed"] = pending.filter_passed;
    audit["fork_node"] = pending.fork_hit->node_id;
    audit["fork_score"] = pending.fork_hit->score;
    json ret = json::array();
    for (const auto& h : retrieved) ret.push_back({{"node", h.node_id}, {"score", h.score}});
    audit["retrieved"] = std::move(ret);
  }
  audit["context_tokens"] = context.token_count;
  pending_audit_ = audit.dump();

  open_ticket_ = pending.ticket;

  pending_trace_ = TurnTrace{};
  pending_trace_.turn = state_.turn_count + 1;
  pending_trace_.query = query;
  pending_trace_.topic_action = topic_action_name(topic);
  pending_trace_.branch_action = branch_stage ? branch_action_name(branch) : "";
  pending_trace_.filter_passed = pending.filter_passed;
  pending_trace_.fork_node = pending.fork_hit ? pending.fork_hit->node_id : 0;
  pending_trace_.fork_score = pending.fork_hit ? pending.fork_hit->score : 0.0;
  pending_trace_.context_tokens = context.token_count;

  return {std::move(context), std::move(pending)};
}

void Session::commit_turn(const PendingTurn& pending, const std::string& response_text) {
  if (open_ticket_ == 0 || pending.ticket != open_ticket_)
    throw_error(Err::StalePendingTurn,
                "pending turn " + std::to_string(pending.ticket) + " is not in flight");

  Gateway& gw = *backends_.gateway;
  std::string content = format_turn_content(pending.query, response_text);
  std::vector<double> embedding = gw.embed_batch(backends_.embedding, {content}).front();
  std::string summary =
      summarize_node(content, gw, backends_.summary, config_.summary_cap);

  NodeId id = add_node(state_, pending.target_tree, pending.parent, pending.branch,
                       std::move(content), std::move(embedding), std::move(summary));
  state_.current_node = id;
  cache_.invalidate(pending.target_tree, pending.branch);

  traces_.push_back(pending_trace_);
  if (audit_ && !pending_audit_.empty()) (*audit_) << pending_audit_ << "\n" << std::flush;
  pending_audit_.clear();
  open_ticket_ = 0;
}

void Session::abort_turn(const PendingTurn& pending) {
  if (open_ticket_ == 0 || pending.ticket != open_ticket_)
    throw_error(Err::StalePendingTurn,
                "pending turn " + std::to_string(pending.ticket) + " is not in flight");

  state_.active_tree = pending.prev_active_tree;
  state_.active_branch = pending.prev_active_branch;
  state_.current_node = pending.prev_current_node;
  state_.forest.next_tree_id = pending.prev_next_tree_id;
  state_.forest.next_branch_id = pending.prev_next_branch_id;
  if (pending.created_tree != 0) {
    auto& trees = state_.forest.trees;
    trees.erase(std::remove_if(trees.begin(), trees.end(),
                               [&](const TopicTree& t) { return t.id == pending.created_tree; }),
                trees.end());
  }
  pending_audit_.clear();
  open_ticket_ = 0;
}

void Session::open_audit_log(const std::string& path) {
  // Fresh file per session; records append through the held stream, one
  // line per committed turn.
  auto out = std::make_unique<std::ofstream>(path, std::ios::trunc);
  if (!*out) throw_error(Err::IoError, "cannot open audit log " + path);
  audit_ = std::move(out);
}

std::vector<Message> responder_messages(const AssembledContext& context,
                                        const std::string& query) {
  std::string system = kResponderSystemPrompt;
  std::string rendered = render_context(context);
  if (!rendered.empty()) system += "\n\n=== Conversation context ===\n" + rendered;
  return {{"system", std::move(system)}, {"user", query}};
}

}  // namespace ctxforest
