#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace hypass::theory {

// One observation of the pair space: a scalar similarity and the pair
// relation r (+1 same identity, -1 different).
struct PairObservation {
    double similarity = 0.0;
    int relation = 1;
};

struct GaussianComponent {
    double weight = 1.0;
    double mean = 0.0;
    double sigma = 1.0;
    int relation = 1;
};

// Closed-form density over (similarity, relation): a Gaussian mixture whose
// components carry the class prior over r.
class AnalyticDensity {
public:
    AnalyticDensity() = default;
    explicit AnalyticDensity(std::vector<GaussianComponent> components);

    // N(mean, sigma^2) over similarities, all mass on relation +1.
    static AnalyticDensity gaussian(double mean, double sigma);
    // Pair-verification law: r = +1 with probability prior_pos.
    static AnalyticDensity verification(double prior_pos, double mean_pos, double sigma_pos,
                                        double mean_neg, double sigma_neg);

    double pdf(const PairObservation& x) const;
    double pdf(double similarity, int relation) const;
    std::vector<PairObservation> sample(std::uint64_t seed, std::size_t n) const;
    std::vector<PairObservation> sample(std::mt19937_64& rng, std::size_t n) const;

    // Interval carrying all mass up to 10 sigma of every component.
    std::pair<double, double> support() const;
    std::vector<int> relations() const;
    const std::vector<GaussianComponent>& components() const { return components_; }

private:
    std::vector<GaussianComponent> components_;
};

using CostFunction = std::function<double(const PairObservation&)>;

struct RiskReport {
    double estimate = 0.0;
    std::size_t n_samples = 0;
    double empirical_variance = 0.0;  // sample variance of the weighted summand
    double renyi_bound = 0.0;         // per-sample right side of the variance bound
    double alpha = 0.0;
};

// Target-to-source density ratio; throws std::domain_error where the source
// density vanishes.
double weight_ratio(const AnalyticDensity& p_t, const AnalyticDensity& p_s, const PairObservation& x);

// Mean of weight * cost with the summand's sample variance.
RiskReport weighted_empirical_risk(const std::vector<double>& weights, const std::vector<double>& costs);
RiskReport weighted_empirical_risk(const std::vector<PairObservation>& source_samples,
                                   const AnalyticDensity& p_t, const AnalyticDensity& p_s,
                                   const CostFunction& cost);

// Monte-Carlo estimate of (E_{x~p_t}[w(x)^-alpha])^(1/(alpha-1)) with
// w = p_t/p_s, i.e. (integral of p_s^alpha p_t^(1-alpha))^(1/(alpha-1)).
double renyi_divergence(double alpha, const AnalyticDensity& p_t, const AnalyticDensity& p_s,
                        std::size_t n_mc, std::uint64_t seed);

// The divergence that controls the second moment of the weighted summand:
// (integral of p_t^(alpha+1) / p_s^alpha)^(1/alpha). Same estimator as
// renyi_divergence with the two densities exchanged, sampled from p_s.
double second_moment_divergence(double alpha, const AnalyticDensity& p_t,
                                const AnalyticDensity& p_s, std::size_t n_mc,
                                std::uint64_t seed);

// (d * R^(1 - 1/alpha) - R^2) / n, floored at 0.
double variance_bound(double alpha, double d_alpha_plus_1, double target_risk, std::size_t n);

// True iff the first minimizers of the two risk profiles coincide. Positive
// constant weights cannot move the minimizer, so a mismatch with
// weights_constant set throws std::logic_error.
bool argmin_equivalence_check(const std::vector<double>& lambda_grid,
                              const std::vector<double>& source_risks,
                              const std::vector<double>& weighted_risks, bool weights_constant);

// Adaptive Simpson quadrature on [a, b] split at the given breakpoints.
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-8,
                 const std::vector<double>& breakpoints = {});

// Target risk sum_r integral cost(s, r) p_t(s, r) ds by quadrature.
double expected_risk(const AnalyticDensity& p, const CostFunction& cost,
                     const std::vector<double>& breakpoints = {}, double tol = 1e-8);
double total_mass(const AnalyticDensity& p, double tol = 1e-8);

// Pair-verification 0-1 cost of thresholding similarity at lambda:
// predicted same identity iff similarity <= lambda.
CostFunction threshold_cost(double lambda);

}  // namespace hypass::theory
