#include "ctxforest/context.hpp"

#include <algorithm>

#include "ctxforest/semantic_index.hpp"

namespace ctxforest {

const char* segment_kind_name(SegmentKind k) {
  switch (k) {
    case SegmentKind::ActivePath: return "active_path";
    case SegmentKind::BranchSummary: return "branch_summary";
    case SegmentKind::TreeSummary: return "tree_summary";
    case SegmentKind::RecentTurns: return "recent_turns";
    case SegmentKind::RetrievedChunk: return "retrieved_chunk";
  }
  return "?";
}

StrategyId parse_strategy(const std::string& name) {
  std::string base = name;
  int k = -1;
  auto colon = name.find(':');
  if (colon != std::string::npos) {
    base = name.substr(0, colon);
    try {
      k = std::stoi(name.substr(colon + 1));
    } catch (...) {
      throw_error(Err::UnknownStrategy, "bad window in strategy '" + name + "'");
    }
    if (k < 1) throw_error(Err::UnknownStrategy, "window must be >= 1 in '" + name + "'");
  }
  if (base == "full_history") return {StrategyId::Kind::FullHistory, 0};
  if (base == "truncation") return {StrategyId::Kind::Truncation, k < 0 ? 4 : k};
  if (base == "linear_rag") return {StrategyId::Kind::LinearRag, k < 0 ? 3 : k};
  if (base == "heuristic_only") return {StrategyId::Kind::HeuristicOnly, 0};
  if (base == "context_agent") return {StrategyId::Kind::ContextAgent, 0};
  throw_error(Err::UnknownStrategy, "no strategy named '" + name + "'");
}

std::string strategy_name(const StrategyId& s) {
  switch (s.kind) {
    case StrategyId::Kind::FullHistory: return "full_history";
    case StrategyId::Kind::Truncation: return "truncation:" + std::to_string(s.k);
    case StrategyId::Kind::LinearRag: return "linear_rag:" + std::to_string(s.k);
    case StrategyId::Kind::HeuristicOnly: return "heuristic_only";
    case StrategyId::Kind::ContextAgent: return "context_agent";
  }
  return "?";
}

namespace {

void push_segment(AssembledContext& ctx, SegmentKind kind, std::string text) {
  ctx.token_count += count_tokens(text);
  ctx.segments.push_back({kind, std::move(text)});
}

}  // namespace

AssembledContext build_context(const SessionState& state, SummaryCache* cache) {
  AssembledContext ctx;
  if (state.active_tree == 0) return ctx;

  // (1) Full contents of the active path, root first.
  if (state.current_node.has_value()) {
    for (NodeId id : path_to_root(state, *state.current_node)) {
      const DialogueNode& n = get_node(state, id);
      if (n.summary.empty())
        throw_error(Err::MissingSummary,
                    "committed node " + std::to_string(id) + " lacks a summary");
      push_segment(ctx, SegmentKind::ActivePath, n.content);
    }
  }

  // (2) Summaries of every other branch in the active tree, creation order.
  const TopicTree& active = get_tree(state, state.active_tree);
  for (BranchId b : active.branches) {
    if (b == state.active_branch) continue;
    push_segment(ctx, SegmentKind::BranchSummary, aggregate_branch(state, active.id, b, cache));
  }

  // (3) Summaries of every other tree, creation order.
  for (const auto& tree : state.forest.trees) {
    if (tree.id == state.active_tree || tree.nodes.empty()) continue;
    push_segment(ctx, SegmentKind::TreeSummary,
                 "[Topic " + std::to_string(tree.id) + " summary] " +
                     aggregate_tree(state, tree.id, cache));
  }
  return ctx;
}

AssembledContext full_history_context(const LinearHistory& history) {
  AssembledContext ctx;
  for (const auto& t : history.turns) push_segment(ctx, SegmentKind::RecentTurns, t.content);
  return ctx;
}

AssembledContext truncation_context(const LinearHistory& history, int k) {
  if (k < 1) throw_error(Err::InvalidArgument, "truncation window must be >= 1");
  AssembledContext ctx;
  std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), history.turns.size());
  for (std::size_t i = history.turns.size() - take; i < history.turns.size(); i++)
    push_segment(ctx, SegmentKind::RecentTurns, history.turns[i].content);
  return ctx;
}

AssembledContext linear_rag_context(const LinearHistory& history,
                                    std::span<const double> query_embedding, int k) {
  if (k < 1) throw_error(Err::InvalidArgument, "retrieval size must be >= 1");
  struct Scored {
    const LinearTurn* turn;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(history.turns.size());
  for (const auto& t : history.turns) {
    if (t.embedding.empty())
      throw_error(Err::InvalidArgument,
                  "turn " + std::to_string(t.turn_index) + " has no embedding");
    scored.push_back({&t, cosine_sim(query_embedding, t.embedding)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.turn->turn_index < b.turn->turn_index;
  });
  std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
  scored.resize(take);
  std::sort(scored.begin(), scored.end(),
            [](const Scored& a, const Scored& b) { return a.turn->turn_index < b.turn->turn_index; });

  AssembledContext ctx;
  for (const auto& s : scored)
    push_segment(ctx, SegmentKind::RetrievedChunk, s.turn->content);
  return ctx;
}

AssembledContext select_context(const StrategyId& strategy, const LinearHistory& history,
                                std::span<const double> query_embedding) {
  switch (strategy.kind) {
    case StrategyId::Kind::FullHistory:
      return full_history_context(history);
    case StrategyId::Kind::Truncation:
      return truncation_context(history, strategy.k);
    case StrategyId::Kind::LinearRag:
      if (history.turns.empty()) return AssembledContext{};
      return linear_rag_context(history, query_embedding, strategy.k);
    case StrategyId::Kind::HeuristicOnly:
    case StrategyId::Kind::ContextAgent:
      break;
  }
  throw_error(Err::UnknownStrategy,
              strategy_name(strategy) + " selects through the session pipeline, not a linear history");
}

std::string render_context(const AssembledContext& ctx) {
  std::string out;
  for (std::size_t i = 0; i < ctx.segments.size(); i++) {
    if (i > 0) out += "\n";
    out += ctx.segments[i].text;
  }
  return out;
}

std::string format_turn_content(const std::string& query, const std::string& response) {
  return "User: " + query + "\nAssistant: " + response;
}

}  // namespace ctxforest
