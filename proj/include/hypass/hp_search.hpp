#pragma once

#include "hypass/cluster_metrics.hpp"
#include "hypass/clustering.hpp"
#include "hypass/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hypass {

struct HPSearchSpace {
    double lower = 0.0;
    double upper = 2.0;
    bool integer = false;
    int budget = 50;

    void validate() const;
    // Rounds integer dimensions and clamps into [lower, upper].
    double snap(double lambda) const;

    static HPSearchSpace eps_range(int budget = 50) { return {0.0, 2.0, false, budget}; }
    static HPSearchSpace k_range(int n_target, int budget = 50);
};

enum class SearchStrategy { Bayes, Grid };

std::string to_string(SearchStrategy s);
SearchStrategy search_strategy_from_string(const std::string& s);

struct TraceEntry {
    int iteration = 0;
    double lambda = 0.0;
    double score = 0.0;
    double incumbent = 0.0;  // best score so far, this entry included
};

struct SearchResult {
    double best_lambda = 0.0;
    double best_score = 0.0;
    std::vector<TraceEntry> trace;
    int gp_fallbacks = 0;  // iterations proposed at random after Cholesky failure
};

using Objective = std::function<double(double)>;

// 1-D Gaussian-process regression on inputs scaled to [0, 1] with an RBF
// kernel and standardized targets.
class GPSurrogate {
public:
    explicit GPSurrogate(double length_scale = 0.2, double signal_variance = 1.0, double jitter = 1e-6,
                         double max_jitter = 1e-2);

    // False when Cholesky fails even at max_jitter.
    bool fit(const std::vector<double>& x, const std::vector<double>& y);

    struct Prediction {
        double mean = 0.0;  // standardized units
        double sd = 0.0;
    };
    Prediction predict(double x) const;

    double standardize(double y) const { return (y - y_mean_) / y_std_; }
    double jitter_used() const { return jitter_used_; }
    double length_scale() const { return length_scale_; }

private:
    double kernel(double a, double b) const;

    double length_scale_;
    double signal_variance_;
    double jitter_;
    double max_jitter_;
    double jitter_used_ = 0.0;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
    std::vector<double> x_;
    Vector alpha_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// EI for maximization, floored at 0.
double expected_improvement(double mean, double sd, double best, double xi = 0.01);

// Scores lambda with a single clustering of the validation features against
// their ground truth. Pairwise distances (and the average-linkage dendrogram)
// are computed once and reused across lambdas.
class OneClusteringObjective {
public:
    OneClusteringObjective(const Matrix& val_features, Labels val_labels, ClusteringSpec spec_template,
                           MetricKind metric = MetricKind::ARI);

    double operator()(double lambda) const;
    Partition partition(double lambda) const;

private:
    Matrix features_;
    Matrix distances_;
    Labels labels_;
    ClusteringSpec spec_;
    MetricKind metric_;
    std::shared_ptr<const Dendrogram> dendrogram_;
};

double objective_one_clustering(const Matrix& val_features, const Labels& val_labels,
                                const ClusteringSpec& spec_template, double lambda,
                                MetricKind metric = MetricKind::ARI);

// Evaluates lower, lower + step, ... up to upper. Ties go to the smaller
// lambda.
SearchResult grid_search(const HPSearchSpace& space, double step, const Objective& objective);

// Three quasi-random starts (the first replaced by eps0 when given), then GP
// fit + EI maximization over a 512-point lattice until the budget is spent.
// The incumbent only changes on strict improvement.
SearchResult bayes_search(const HPSearchSpace& space, const Objective& objective, std::uint64_t seed,
                          std::optional<double> eps0 = std::nullopt);

struct TuningOptions {
    SearchStrategy strategy = SearchStrategy::Bayes;
    MetricKind metric = MetricKind::ARI;
    double grid_step = 0.05;
    std::uint64_t seed = 0;
    std::optional<double> eps0;
};

// Throws std::invalid_argument on an empty or single-identity validation set.
SearchResult auto_hp_tuning(const Matrix& val_features, const Labels& val_labels,
                            const ClusteringSpec& spec_template, const HPSearchSpace& space,
                            const TuningOptions& options = {});

// CSV with header "iteration,lambda,score,incumbent".
void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace);

}  // namespace hypass
