// Similarity of two key-instruction graphs: node text similarity plus the
// similarity of each anchor's k-hop neighbourhood.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "keysim/keyir.hpp"
#include "keysim/simplify.hpp"

namespace keysim {

struct CompareParams {
  double node_threshold = 0.8;   // minimum node score for a pairing
  unsigned context_boundary = 1;  // hop radius of the neighbourhood
  double pair_threshold = 0.5;   // aggregate at or above this is "similar"
  double context_weight = 0.5;   // weight of the context score in an anchor

  /// Empty when every field is in range, else a description of the first
  /// offending field.
  std::string validate() const;
};

std::size_t token_edit_distance(const TokenString& a, const TokenString& b);
/// 1 - distance / longer length; two empty strings are identical.
double token_similarity(const TokenString& a, const TokenString& b);

/// Tokens of one payload as used for textual comparison.
TokenString payload_tokens(const KeyPayload& p);
double payload_similarity(const KeyPayload& a, const KeyPayload& b);

/// 0 across kinds; otherwise the best score over payload pairs.
double node_similarity(const KeyNode& a, const KeyNode& b);

/// Share of the two k-hop neighbourhoods that can be paired one-to-one with
/// node score at or above the threshold, over the larger neighbourhood.
double context_similarity(const KeyGraph& ga, unsigned a, const KeyGraph& gb, unsigned b, const CompareParams& params);

struct AnchorPair {
  unsigned node_a = 0;
  unsigned node_b = 0;
  std::uint64_t address_a = 0;
  std::uint64_t address_b = 0;
  double node_score = 0;
  double context_score = 0;
  double combined = 0;
};

struct MatchReport {
  std::vector<AnchorPair> anchors;
  double aggregate = 0;
  bool similar = false;
  CompareParams params;
  std::size_t nodes_a = 0;
  std::size_t nodes_b = 0;
  std::vector<Diagnostic> diagnostics;
};

/// Greedy anchor selection over pairs whose node score reaches the threshold,
/// by descending combined score, ties broken by the (smaller, larger) address
/// pair so the result does not depend on argument order.
MatchReport match_graphs(const KeyGraph& ga, const KeyGraph& gb, const CompareParams& params = {});

/// `aggregate >= tau`.
bool classify_pair(const MatchReport& report, double tau);

}  // namespace keysim
