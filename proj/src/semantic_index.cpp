#include "ctxforest/semantic_index.hpp"

#include <algorithm>
#include <cmath>

namespace ctxforest {

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw_error(Err::DimensionMismatch, std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); i++) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw_error(Err::ZeroVector, "cosine of a zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

std::vector<SimilarityHit> retrieve_top_m(const SessionState& state, TreeId tree_id,
                                          std::span<const double> query_embedding, int m) {
  if (m < 1) throw_error(Err::InvalidArgument, "retrieval size m must be >= 1");
  const TopicTree& tree = get_tree(state, tree_id);
  if (tree.nodes.empty())
    throw_error(Err::EmptyTree, "tree " + std::to_string(tree_id) + " has no nodes");

  struct Scored {
    const DialogueNode* node;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(tree.nodes.size());
  for (const auto& n : tree.nodes)
    scored.push_back({&n, cosine_sim(query_embedding, n.embedding)});

  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node->turn_index < b.node->turn_index;
  });

  std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(m), scored.size());
  std::vector<SimilarityHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; i++) hits.push_back({scored[i].node->id, scored[i].score});
  return hits;
}

SimilarityHit find_fork_point(const SessionState& state, TreeId tree_id,
                              std::span<const double> query_embedding) {
  return retrieve_top_m(state, tree_id, query_embedding, 1).front();
}

}  // namespace ctxforest
