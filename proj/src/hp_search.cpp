#include "hypass/hp_search.hpp"

#include "hypass/io.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace hypass {

void HPSearchSpace::validate() const
{
    if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper))
        throw std::invalid_argument("search space: need lower < upper");
    if (budget < 1) throw std::invalid_argument("search space: budget must be >= 1");
}

double HPSearchSpace::snap(double lambda) const
{
    double v = std::clamp(lambda, lower, upper);
    if (integer) v = std::clamp(std::round(v), std::ceil(lower), std::floor(upper));
    return v;
}

HPSearchSpace HPSearchSpace::k_range(int n_target, int budget)
{
    if (n_target < 2) throw std::invalid_argument("k search space needs >= 2 target samples");
    return {1.0, static_cast<double>(n_target), true, budget};
}

std::string to_string(SearchStrategy s)
{
    return s == SearchStrategy::Bayes ? "bayes" : "grid";
}

SearchStrategy search_strategy_from_string(const std::string& s)
{
    if (s == "bayes") return SearchStrategy::Bayes;
    if (s == "grid") return SearchStrategy::Grid;
    throw std::invalid_argument("unknown search strategy '" + s + "'");
}

GPSurrogate::GPSurrogate(double length_scale, double signal_variance, double jitter, double max_jitter)
    : length_scale_(length_scale), signal_variance_(signal_variance), jitter_(jitter), max_jitter_(max_jitter)
{
}

double GPSurrogate::kernel(double a, double b) const
{
    const double d = (a - b) / length_scale_;
    return signal_variance_ * std::exp(-0.5 * d * d);
}

bool GPSurrogate::fit(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("GP fit: bad observation set");
    const auto n = static_cast<Eigen::Index>(x.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    y_mean_ = mean;
    y_std_ = sd > 0 ? sd : 1.0;
    x_ = x;

    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)]);
    Vector ys(n);
    for (Eigen::Index i = 0; i < n; ++i) ys(i) = standardize(y[static_cast<std::size_t>(i)]);

    for (double j = jitter_; j <= max_jitter_ * (1 + 1e-9); j *= 10) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += j;
        llt_.compute(kj);
        if (llt_.info() == Eigen::Success) {
            jitter_used_ = j;
            alpha_ = llt_.solve(ys);
            return true;
        }
    }
    return false;
}

GPSurrogate::Prediction GPSurrogate::predict(double x) const
{
    const auto n = static_cast<Eigen::Index>(x_.size());
    Vector ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks(i) = kernel(x, x_[static_cast<std::size_t>(i)]);
    Prediction p;
    p.mean = ks.dot(alpha_);
    const Vector v = llt_.matrixL().solve(ks);
    p.sd = std::sqrt(std::max(0.0, signal_variance_ - v.squaredNorm()));
    return p;
}

double expected_improvement(double mean, double sd, double best, double xi)
{
    const double imp = mean - best - xi;
    if (!(sd > 1e-12)) return std::max(0.0, imp);
    const double z = imp / sd;
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return std::max(0.0, imp * cdf + sd * pdf);
}

OneClusteringObjective::OneClusteringObjective(const Matrix& val_features, Labels val_labels,
                                               ClusteringSpec spec_template, MetricKind metric)
    : features_(val_features), labels_(std::move(val_labels)), spec_(spec_template), metric_(metric)
{
    if (static_cast<std::size_t>(features_.rows()) != labels_.size())
        throw std::invalid_argument("objective: feature/label count mismatch");
    if (features_.rows() < 2) throw std::invalid_argument("objective: need >= 2 validation points");
    if (spec_.algorithm != ClusteringAlgorithm::KMeans) distances_ = pairwise_distances(features_);
    if (spec_.algorithm == ClusteringAlgorithm::Agglomerative)
        dendrogram_ = std::make_shared<Dendrogram>(distances_);
}

Partition OneClusteringObjective::partition(double lambda) const
{
    switch (spec_.algorithm) {
    case ClusteringAlgorithm::DBSCAN:
        return dbscan_precomputed(distances_, lambda, spec_.min_samples);
    case ClusteringAlgorithm::Agglomerative:
        return dendrogram_->cut(lambda);
    case ClusteringAlgorithm::KMeans: {
        const int k = std::clamp(static_cast<int>(std::lround(lambda)), 1, static_cast<int>(features_.rows()));
        return kmeans(features_, k, spec_.seed, spec_.max_iter);
    }
    }
    throw std::logic_error("objective: unhandled algorithm");
}

double OneClusteringObjective::operator()(double lambda) const
{
    return selection_score(metric_, labels_, partition(lambda));
}

double objective_one_clustering(const Matrix& val_features, const Labels& val_labels,
                                const ClusteringSpec& spec_template, double lambda, MetricKind metric)
{
    return OneClusteringObjective(val_features, val_labels, spec_template, metric)(lambda);
}

namespace {

void record(SearchResult& r, double lambda, double score)
{
    const bool better = r.trace.empty() || score > r.best_score;
    if (better) {
        r.best_lambda = lambda;
        r.best_score = score;
    }
    r.trace.push_back({static_cast<int>(r.trace.size()), lambda, score, r.best_score});
}

}  // namespace

SearchResult grid_search(const HPSearchSpace& space, double step, const Objective& objective)
{
    space.validate();
    if (!(step > 0) || !std::isfinite(step)) throw std::invalid_argument("grid search: step must be > 0");
    std::vector<double> grid;
    for (long i = 0;; ++i) {
        const double v = space.lower + static_cast<double>(i) * step;
        if (v > space.upper + 1e-9 * std::max(1.0, std::abs(space.upper))) break;
        const double s = space.snap(v);
        if (grid.empty() || s != grid.back()) grid.push_back(s);
    }
    if (grid.empty()) throw std::invalid_argument("grid search: empty grid");
    SearchResult r;
    // Ascending grid plus strict improvement keeps the smallest tied lambda.
    for (double v : grid) record(r, v, objective(v));
    return r;
}

SearchResult bayes_search(const HPSearchSpace& space, const Objective& objective, std::uint64_t seed,
                          std::optional<double> eps0)
{
    space.validate();
    if (space.budget < 3) throw std::invalid_argument("bayes search: budget must be >= 3");
    const double range = space.upper - space.lower;
    auto to_unit = [&](double v) { return (v - space.lower) / range; };
    auto from_unit = [&](double u) { return space.snap(space.lower + u * range); };

    std::mt19937_64 rng(derive_seed(seed, 21));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SearchResult r;
    std::vector<double> xs, ys;
    std::set<double> seen;
    auto evaluate = [&](double lambda) {
        const double score = objective(lambda);
        record(r, lambda, score);
        xs.push_back(to_unit(lambda));
        ys.push_back(score);
        seen.insert(lambda);
    };
    auto random_unseen = [&]() {
        for (int tries = 0; tries < 1000; ++tries) {
            const double v = from_unit(unif(rng));
            if (!seen.count(v)) return v;
        }
        return from_unit(unif(rng));
    };

    // Kronecker sequence with a seeded offset: well spread, reproducible.
    constexpr double kGolden = 0.6180339887498949;
    double u = unif(rng);
    for (int i = 0; i < 3; ++i) {
        double v = (i == 0 && eps0) ? space.snap(*eps0) : from_unit(u);
        if (seen.count(v)) v = random_unseen();
        evaluate(v);
        u = std::fmod(u + kGolden, 1.0);
    }

    constexpr int kLattice = 512;
    while (static_cast<int>(r.trace.size()) < space.budget) {
        GPSurrogate gp;
        std::optional<double> proposal;
        if (gp.fit(xs, ys)) {
            const double best = gp.standardize(r.best_score);
            double best_ei = -1.0;
            for (int c = 0; c < kLattice; ++c) {
                const double v = from_unit(static_cast<double>(c) / (kLattice - 1));
                if (seen.count(v)) continue;
                const auto p = gp.predict(to_unit(v));
                const double ei = expected_improvement(p.mean, p.sd, best);
                if (ei > best_ei) {
                    best_ei = ei;
                    proposal = v;
                }
            }
        } else {
            ++r.gp_fallbacks;
        }
        evaluate(proposal ? *proposal : random_unseen());
    }
    return r;
}

SearchResult auto_hp_tuning(const Matrix& val_features, const Labels& val_labels,
                            const ClusteringSpec& spec_template, const HPSearchSpace& space,
                            const TuningOptions& options)
{
    if (val_labels.empty()) throw std::invalid_argument("auto HP tuning: empty validation set");
    if (std::set<int>(val_labels.begin(), val_labels.end()).size() < 2)
        throw std::invalid_argument("auto HP tuning: validation set needs >= 2 identities");
    const OneClusteringObjective objective(val_features, val_labels, spec_template, options.metric);
    const Objective f = [&objective](double l) { return objective(l); };
    if (options.strategy == SearchStrategy::Grid) {
        const double step = space.integer ? std::max(1.0, std::round(options.grid_step)) : options.grid_step;
        return grid_search(space, step, f);
    }
    return bayes_search(space, f, options.seed, options.eps0);
}

void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace)
{
    os << "iteration,lambda,score,incumbent\n";
    for (const auto& t : trace)
        os << t.iteration << ',' << format_double(t.lambda) << ',' << format_double(t.score) << ','
           << format_double(t.incumbent) << '\n';
}

}  // namespace hypass
