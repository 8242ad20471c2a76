#pragma once

// Embedding similarity over topic trees: fork-point identification and
// top-m retrieval. Pure functions; trees at dialogue scale are scanned
// exhaustively (no ANN index).

#include <span>
#include <vector>

#include "ctxforest/forest.hpp"

namespace ctxforest {

struct SimilarityHit {
  NodeId node_id = 0;
  double score = 0.0;  // cosine, in [-1, 1]
};

// dot(u,v) / (|u||v|). Throws DimensionMismatch, ZeroVector.
double cosine_sim(std::span<const double> u, std::span<const double> v);

// Argmax of cosine_sim(query, node.embedding) over the tree. Ties go to the
// older node (smaller turn_index). Throws EmptyTree, UnknownTree.
SimilarityHit find_fork_point(const SessionState& state, TreeId tree_id,
                              std::span<const double> query_embedding);

// Top-min(m, |tree|) hits, descending score, same tie-break.
std::vector<SimilarityHit> retrieve_top_m(const SessionState& state, TreeId tree_id,
                                          std::span<const double> query_embedding, int m);

}  // namespace ctxforest
