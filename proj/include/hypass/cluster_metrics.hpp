#pragma once

#include "hypass/types.hpp"

#include <string>

namespace hypass {

enum class MetricKind { ARI, NMI, PairwiseError };

std::string to_string(MetricKind m);
MetricKind metric_kind_from_string(const std::string& s);

// All partition comparisons treat NOISE points as singleton clusters.

// Adjusted Rand index under the permutation model. Degenerate cases where
// the index and its expectation coincide (e.g. both partitions all singletons)
// score 1.
double ari(const Labels& truth, const Partition& pred);
double ari(const Labels& a, const Labels& b);

// Mutual information normalized by the arithmetic mean of the entropies.
double nmi(const Labels& truth, const Partition& pred);
double nmi(const Labels& a, const Labels& b);

// Fraction of unordered pairs whose same-cluster relation disagrees with the
// same-identity relation: the 0-1 pair verification cost.
double pairwise_error(const Labels& truth, const Partition& pred);

// Score to maximize for the given criterion (pairwise error is negated).
double selection_score(MetricKind kind, const Labels& truth, const Partition& pred);

struct RetrievalScores {
    double mean_ap = 0.0;
    double rank1 = 0.0;
};

// Retrieval by ascending L2 distance, ties broken by gallery index. With
// exclude_self, query i and gallery i are the same item and that entry is
// removed from its own ranking.
RetrievalScores retrieval_scores(const Matrix& query_feats, const Matrix& gallery_feats,
                                 const Labels& query_ids, const Labels& gallery_ids,
                                 bool exclude_self = false);
double mean_average_precision(const Matrix& query_feats, const Matrix& gallery_feats,
                              const Labels& query_ids, const Labels& gallery_ids,
                              bool exclude_self = false);

}  // namespace hypass
