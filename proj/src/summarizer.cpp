#include "ctxforest/summarizer.hpp"

#include <sstream>

#include "ctxforest/tokens.hpp"

namespace ctxforest {

namespace {

// Branch/tree labels make the assembled context auditable; the delimiter is
// fixed so fixture oracles can concatenate by hand.
constexpr const char* kDelimiter = " | ";

std::string truncate_tokens(const std::string& text, int cap) {
  std::istringstream in(text);
  std::string tok, out;
  int n = 0;
  while (n < cap && in >> tok) {
    if (n > 0) out += ' ';
    out += tok;
    n++;
  }
  return out;
}

// Chain order: walk from the branch head along child links.
std::vector<const DialogueNode*> branch_chain(const TopicTree& tree, BranchId branch_id) {
  std::vector<const DialogueNode*> members;
  for (const auto& n : tree.nodes)
    if (n.branch_id == branch_id) members.push_back(&n);
  if (members.empty())
    throw_error(Err::UnknownBranch, "tree " + std::to_string(tree.id) + " has no branch " +
                                        std::to_string(branch_id));

  auto in_branch = [&](NodeId id) -> const DialogueNode* {
    for (const auto* n : members)
      if (n->id == id) return n;
    return nullptr;
  };
  const DialogueNode* head = nullptr;
  for (const auto* n : members) {
    if (!n->parent.has_value() || !in_branch(*n->parent)) {
      head = n;
      break;
    }
  }
  if (!head) throw_error(Err::Internal, "branch " + std::to_string(branch_id) + " has no head");

  std::vector<const DialogueNode*> chain;
  const DialogueNode* cur = head;
  while (cur) {
    chain.push_back(cur);
    const DialogueNode* next = nullptr;
    for (const auto* n : members)
      if (n->parent.has_value() && *n->parent == cur->id) next = n;
    cur = next;
  }
  return chain;
}

}  // namespace

std::optional<std::string> SummaryCache::lookup_branch(TreeId tree, BranchId branch) const {
  auto it = branch_cache_.find({tree, branch});
  if (it == branch_cache_.end()) return std::nullopt;
  return it->second.text;
}

std::optional<std::string> SummaryCache::lookup_tree(TreeId tree) const {
  auto it = tree_cache_.find(tree);
  if (it == tree_cache_.end()) return std::nullopt;
  return it->second.text;
}

void SummaryCache::store_branch(TreeId tree, BranchId branch, int turn, std::string text) {
  branch_cache_[{tree, branch}] = SummaryCacheEntry{std::move(text), turn};
}

void SummaryCache::store_tree(TreeId tree, int turn, std::string text) {
  tree_cache_[tree] = SummaryCacheEntry{std::move(text), turn};
}

void SummaryCache::invalidate(TreeId tree, BranchId branch) {
  branch_cache_.erase({tree, branch});
  tree_cache_.erase(tree);
}

std::string summarize_node(const std::string& content, Gateway& gateway,
                           const BackendProfile& summary_profile, int summary_cap) {
  if (content.empty()) throw_error(Err::EmptyContent, "cannot summarize empty content");

  std::vector<Message> messages{
      {"system",
       "Summarize the following dialogue exchange in one short sentence. "
       "Keep concrete entities and decisions; drop filler."},
      {"user", content},
  };
  std::string summary = gateway.chat_complete(summary_profile, messages);
  if (count_tokens(summary) > summary_cap) summary = truncate_tokens(summary, summary_cap);
  if (summary.empty()) summary = truncate_tokens(content, summary_cap);  // backend gave nothing
  return summary;
}

std::string aggregate_branch(const SessionState& state, TreeId tree_id, BranchId branch_id,
                             SummaryCache* cache) {
  if (cache) {
    if (auto hit = cache->lookup_branch(tree_id, branch_id)) return *hit;
  }
  const TopicTree& tree = get_tree(state, tree_id);
  std::string out = "[Branch " + std::to_string(branch_id) + " summary]";
  bool first = true;
  for (const auto* n : branch_chain(tree, branch_id)) {
    if (n->summary.empty())
      throw_error(Err::MissingSummary, "node " + std::to_string(n->id) + " has no summary");
    out += first ? " " : kDelimiter;
    out += n->summary;
    first = false;
  }
  if (cache) cache->store_branch(tree_id, branch_id, state.turn_count, out);
  return out;
}

std::string aggregate_tree(const SessionState& state, TreeId tree_id, SummaryCache* cache) {
  if (cache) {
    if (auto hit = cache->lookup_tree(tree_id)) return *hit;
  }
  const TopicTree& tree = get_tree(state, tree_id);
  std::string out;
  for (std::size_t i = 0; i < tree.branches.size(); i++) {
    if (i > 0) out += " ";
    out += aggregate_branch(state, tree_id, tree.branches[i], cache);
  }
  if (cache) cache->store_tree(tree_id, state.turn_count, out);
  return out;
}

}  // namespace ctxforest
