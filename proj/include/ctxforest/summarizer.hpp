#pragma once

// Node summarization plus branch/tree aggregation with per-session caching.
// Summaries are produced eagerly at commit time, so context assembly never
// makes a model call.

#include <map>
#include <optional>
#include <string>

#include "ctxforest/forest.hpp"
#include "ctxforest/gateway.hpp"

namespace ctxforest {

struct SummaryCacheEntry {
  std::string text;
  int valid_through_turn = 0;
};

// Confined to one session. Entries are dropped explicitly whenever a node
// is added to their subject (commit does this for the affected branch and
// tree).
class SummaryCache {
public:
  std::optional<std::string> lookup_branch(TreeId tree, BranchId branch) const;
  std::optional<std::string> lookup_tree(TreeId tree) const;
  void store_branch(TreeId tree, BranchId branch, int turn, std::string text);
  void store_tree(TreeId tree, int turn, std::string text);
  void invalidate(TreeId tree, BranchId branch);

private:
  std::map<std::pair<TreeId, BranchId>, SummaryCacheEntry> branch_cache_;
  std::map<TreeId, SummaryCacheEntry> tree_cache_;
};

// S_node: one short summary per committed node, capped at summary_cap
// whitespace tokens. Throws EmptyContent; backend errors propagate.
std::string summarize_node(const std::string& content, Gateway& gateway,
                           const BackendProfile& summary_profile, int summary_cap);

// S(B): node summaries in chain order, " | "-separated, prefixed with a
// branch label. Throws UnknownBranch, MissingSummary.
std::string aggregate_branch(const SessionState& state, TreeId tree_id, BranchId branch_id,
                             SummaryCache* cache = nullptr);

// S(T): branch aggregates in branch-creation order. A single-branch tree
// aggregates to exactly its branch summary.
std::string aggregate_tree(const SessionState& state, TreeId tree_id,
                           SummaryCache* cache = nullptr);

}  // namespace ctxforest
