#pragma once

// Context assembly: the path-plus-summaries construction for the tree
// engine, the linear baselines (full history, truncation, linear RAG), and
// token accounting. Pure assembly over read-only state.

#include <span>
#include <string>
#include <vector>

#include "ctxforest/forest.hpp"
#include "ctxforest/summarizer.hpp"
#include "ctxforest/tokens.hpp"

namespace ctxforest {

enum class SegmentKind { ActivePath, BranchSummary, TreeSummary, RecentTurns, RetrievedChunk };

const char* segment_kind_name(SegmentKind k);

struct ContextSegment {
  SegmentKind kind;
  std::string text;
};

struct AssembledContext {
  std::vector<ContextSegment> segments;
  std::int64_t token_count = 0;  // sum of per-segment whitespace tokens
};

// Strategy selector. k is the window (truncation) or retrieval size
// (linear RAG).
struct StrategyId {
  enum class Kind { FullHistory, Truncation, LinearRag, HeuristicOnly, ContextAgent };
  Kind kind = Kind::ContextAgent;
  int k = 0;

  bool operator==(const StrategyId&) const = default;
};

// "full_history" | "truncation[:k]" | "linear_rag[:k]" | "heuristic_only" |
// "context_agent". Throws UnknownStrategy. Defaults: truncation k=4,
// linear_rag k=3.
StrategyId parse_strategy(const std::string& name);
std::string strategy_name(const StrategyId& s);

// ---------------------------------------------------------------------------
// Tree assembly (the engine's own construction)
// ---------------------------------------------------------------------------

// Active-path contents in chronological order, then one summary per other
// branch of the active tree (branch creation order), then one summary per
// other tree (tree creation order). Empty state gives an empty context.
AssembledContext build_context(const SessionState& state, SummaryCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Linear baselines
// ---------------------------------------------------------------------------

struct LinearTurn {
  int turn_index = 0;
  std::string query;
  std::string response;
  std::string content;             // "User: ...\nAssistant: ..."
  std::vector<double> embedding;   // filled only when a strategy needs it
};

struct LinearHistory {
  std::vector<LinearTurn> turns;
};

AssembledContext full_history_context(const LinearHistory& history);
AssembledContext truncation_context(const LinearHistory& history, int k);

// Top-k turns by cosine to the query, re-sorted chronologically. Every turn
// must carry an embedding.
AssembledContext linear_rag_context(const LinearHistory& history,
                                    std::span<const double> query_embedding, int k);

// Strategy dispatch over a linear history. The tree strategies
// (context_agent, heuristic_only) select through the session pipeline and
// build_context instead; passing one here is an UnknownStrategy error. The
// query embedding is consulted only by linear_rag and may be empty
// otherwise.
AssembledContext select_context(const StrategyId& strategy, const LinearHistory& history,
                                std::span<const double> query_embedding);

// Canonical text form (stable bytes given stable inputs): segment texts
// joined by single newlines.
std::string render_context(const AssembledContext& ctx);

// One full exchange as stored in node contents and linear histories.
std::string format_turn_content(const std::string& query, const std::string& response);

}  // namespace ctxforest
