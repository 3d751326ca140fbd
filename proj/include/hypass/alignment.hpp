#pragma once

#include "hypass/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace hypass {

enum class PairRelation { Positive, Negative, All };

// Scalar similarities s(a, b) = ||a - b|| of feature pairs, with the pair
// indices kept so gradients can flow back to the features.
struct SimilaritySample {
    std::vector<double> values;
    std::vector<std::pair<int, int>> pairs;
    PairRelation relation = PairRelation::All;
    Domain domain = Domain::Source;

    std::size_t size() const { return values.size(); }
};

inline constexpr std::size_t kDefaultMaxPairs = 4096;

// Enumerates pairs i < j matching the relation; NOISE-labeled points take part
// only in PairRelation::All. More than max_pairs matches are subsampled
// uniformly without replacement. labels may be empty for PairRelation::All.
SimilaritySample pair_similarities(const Matrix& features, const Labels& labels, PairRelation relation,
                                   std::size_t max_pairs, std::uint64_t seed,
                                   Domain domain = Domain::Source);

// Median pooled |x - y| gap times {0.5, 1, 2}; falls back to 1 when the median
// gap is zero.
std::vector<double> median_bandwidths(const std::vector<double>& a, const std::vector<double>& b);

struct MmdResult {
    double value = 0.0;
    std::vector<double> grad_a;
    std::vector<double> grad_b;
};

// Biased (V-statistic) squared MMD with the kernel averaged over Gaussian
// bandwidths: k(x, y) = mean_s exp(-(x - y)^2 / (2 s^2)).
MmdResult mmd(const std::vector<double>& a, const std::vector<double>& b,
              const std::vector<double>& bandwidths);

struct AlignmentResult {
    double loss = 0.0;
    double positive_term = 0.0;
    double negative_term = 0.0;
    Matrix grad_source;
    Matrix grad_target;
};

struct AlignmentOptions {
    std::size_t max_pairs = kDefaultMaxPairs;
    std::uint64_t seed = 0;
};

// MMD(S+ source, S+ target) + MMD(S- source, S- target), each with median
// bandwidths of its own pooled sample. The gradient includes the dependence of
// the bandwidths on the similarities (exact almost everywhere). Throws
// std::invalid_argument when any of the four samples is empty.
AlignmentResult conditional_alignment_loss(const Matrix& source_features, const Labels& source_labels,
                                           const Matrix& target_features, const Labels& target_labels,
                                           const AlignmentOptions& options = {});

// Single MMD between unconditioned all-pairs similarity samples.
AlignmentResult marginal_alignment_loss(const Matrix& source_features, const Matrix& target_features,
                                        const AlignmentOptions& options = {});

}  // namespace hypass
