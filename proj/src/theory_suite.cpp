#include "hypass/theory_suite.hpp"

#include "hypass/io.hpp"
#include "hypass/risk_theory.hpp"
#include "hypass/types.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hypass::theory {

void TheorySuiteOptions::validate() const
{
    if (alphas.empty() || gaps.empty()) throw std::invalid_argument("theory suite: empty alpha or gap list");
    for (double a : alphas)
        if (!(a > 0)) throw std::invalid_argument("theory suite: alphas must be > 0");
    for (double g : gaps)
        if (!(g >= 0)) throw std::invalid_argument("theory suite: gaps must be >= 0");
    if (n < 2 || replicates < 2 || repetitions < 1 || n_mc < 1 || argmin_profiles < 1)
        throw std::invalid_argument("theory suite: budgets too small");
}

TheorySuiteOptions TheorySuiteOptions::quick() const
{
    TheorySuiteOptions q = *this;
    q.n = std::max<std::size_t>(100, n / 10);
    // Replicates stay: at a few hundred the variance measurement itself
    // scatters ~20%, about the bound's margin at gap 1.
    q.repetitions = std::max<std::size_t>(5, repetitions / 4);
    q.n_mc = std::max<std::size_t>(20000, n_mc / 10);
    return q;
}

namespace {

std::string label(const std::string& prefix, const std::vector<std::pair<std::string, double>>& kv)
{
    std::ostringstream os;
    os << prefix;
    for (const auto& [k, v] : kv) os << '/' << k << '=' << format_double(v);
    return os.str();
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased sample variance
};

Moments moments(const std::vector<double>& v)
{
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.variance += (x - m.mean) * (x - m.mean);
    m.variance /= static_cast<double>(v.size() - 1);
    return m;
}

// Replicated weighted risk estimates, each from n fresh source draws.
std::vector<double> replicate_estimates(const AnalyticDensity& p_t, const AnalyticDensity& p_s,
                                        const CostFunction& cost, std::size_t n,
                                        std::size_t replicates, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<double> out;
    out.reserve(replicates);
    for (std::size_t r = 0; r < replicates; ++r)
        out.push_back(weighted_empirical_risk(p_s.sample(rng, n), p_t, p_s, cost).estimate);
    return out;
}

CostFunction positive_indicator()
{
    return [](const PairObservation& x) { return x.similarity > 0 ? 1.0 : 0.0; };
}

}  // namespace

std::vector<TheoryCheck> run_theory_suite(const TheorySuiteOptions& opt)
{
    opt.validate();
    std::vector<TheoryCheck> rows;
    std::uint64_t stream = 0;
    auto next_seed = [&]() { return derive_seed(opt.seed, ++stream); };

    // Divergences of identical densities.
    const auto same = AnalyticDensity::gaussian(0.0, 1.0);
    for (double a : opt.alphas) {
        if (a != 1.0) {
            const double d = renyi_divergence(a, same, same, opt.n_mc, next_seed());
            rows.push_back({label("identical/renyi", {{"alpha", a}}), d, 1.0, 0.0, 0.0, std::abs(d - 1.0) <= 1e-12});
        }
        const double d = second_moment_divergence(a, same, same, opt.n_mc, next_seed());
        rows.push_back({label("identical/second_moment", {{"alpha", a}}), d, 1.0, 0.0, 0.0, std::abs(d - 1.0) <= 1e-12});
    }

    // Monte-Carlo divergence against the equal-variance Gaussian closed form
    // exp(alpha * gap^2 / 2); 3% relative tolerance.
    for (double a : opt.alphas) {
        if (a == 1.0) continue;
        const double g = 0.5;
        const double d = renyi_divergence(a, AnalyticDensity::gaussian(0.0, 1.0),
                                          AnalyticDensity::gaussian(g, 1.0), opt.n_mc, next_seed());
        const double expect = std::exp(a * g * g / 2);
        rows.push_back({label("gaussian/renyi", {{"alpha", a}, {"gap", g}}), d, expect, 0.0, 0.0,
                        std::abs(d / expect - 1.0) <= 0.03});
    }

    // Per gap: unbiasedness, then the variance bound over repetitions.
    const auto cost = positive_indicator();
    std::vector<Moments> first_rep;
    std::vector<double> variance_se;
    for (double g : opt.gaps) {
        const auto p_t = AnalyticDensity::gaussian(0.0, 1.0);
        const auto p_s = AnalyticDensity::gaussian(-g, 1.0);
        const double risk = expected_risk(p_t, cost, {0.0});

        std::vector<Moments> reps;
        for (std::size_t r = 0; r < opt.repetitions; ++r)
            reps.push_back(moments(replicate_estimates(p_t, p_s, cost, opt.n, opt.replicates, next_seed())));
        const Moments& m0 = reps.front();
        first_rep.push_back(m0);
        variance_se.push_back(m0.variance * std::sqrt(2.0 / static_cast<double>(opt.replicates - 1)));

        const double se = std::sqrt(m0.variance / static_cast<double>(opt.replicates));
        // Quadrature error is at the 1e-8 level; included for completeness.
        const double combined = std::sqrt(se * se + 1e-16);
        rows.push_back({label("unbiased", {{"gap", g}, {"n", static_cast<double>(opt.n)}}), m0.mean, risk,
                        m0.variance, 3 * combined, std::abs(m0.mean - risk) <= 3 * combined});

        for (double a : opt.alphas) {
            const double d = second_moment_divergence(a, p_t, p_s, opt.n_mc, next_seed());
            const double bound = variance_bound(a, d, risk, opt.n);
            std::size_t ok = 0;
            double mean_var = 0;
            for (const auto& m : reps) {
                ok += m.variance <= bound;
                mean_var += m.variance;
            }
            mean_var /= static_cast<double>(reps.size());
            const double rate = static_cast<double>(ok) / static_cast<double>(reps.size());
            rows.push_back({label("bound", {{"gap", g}, {"alpha", a}, {"pass_rate", rate}}), m0.mean, risk,
                            mean_var, bound, rate >= 0.95});
        }
    }

    // Non-decreasing variance along the gap schedule, up to 3 standard errors
    // of the variance estimates.
    std::vector<std::size_t> order(opt.gaps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return opt.gaps[a] < opt.gaps[b]; });
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const std::size_t i = order[k], j = order[k + 1];
        const double slack = 3 * std::hypot(variance_se[i], variance_se[j]);
        rows.push_back({label("monotone", {{"gap", opt.gaps[i]}, {"next_gap", opt.gaps[j]}}), first_rep[i].variance,
                        first_rep[j].variance, first_rep[i].variance, first_rep[j].variance + slack,
                        first_rep[i].variance <= first_rep[j].variance + slack});
    }

    // Raw-space toy against a pair-similarity toy whose shift is smaller: the
    // smaller divergence must come with the smaller estimator variance.
    {
        const auto raw_t = AnalyticDensity::gaussian(0.0, 1.0);
        const auto raw_s = AnalyticDensity::gaussian(-1.0, 1.0);
        const auto sim_t = AnalyticDensity::verification(0.3, 0.5, 0.2, 1.2, 0.2);
        const auto sim_s = AnalyticDensity::verification(0.3, 0.45, 0.2, 1.15, 0.2);
        const auto sim_cost = threshold_cost(0.85);
        const double d_raw = second_moment_divergence(1.0, raw_t, raw_s, opt.n_mc, next_seed());
        const double d_sim = second_moment_divergence(1.0, sim_t, sim_s, opt.n_mc, next_seed());
        const auto v_raw = moments(replicate_estimates(raw_t, raw_s, cost, opt.n, opt.replicates, next_seed()));
        const auto v_sim = moments(replicate_estimates(sim_t, sim_s, sim_cost, opt.n, opt.replicates, next_seed()));
        rows.push_back({label("ordering/divergence", {}), d_sim, d_raw, 0.0, d_raw, d_sim < d_raw});
        rows.push_back({label("ordering/variance", {}), v_sim.variance, v_raw.variance, v_sim.variance,
                        v_raw.variance, v_sim.variance <= v_raw.variance});
    }

    // Constant weights keep the minimizer of risk profiles built from sampled
    // verification pairs and thresholds on a grid.
    {
        std::mt19937_64 rng(next_seed());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> grid;
        for (int i = 1; i <= 20; ++i) grid.push_back(0.1 * i);
        std::size_t ok = 0;
        for (std::size_t k = 0; k < opt.argmin_profiles; ++k) {
            const auto p = AnalyticDensity::verification(0.2 + 0.6 * u(rng), 0.3 + 0.5 * u(rng), 0.1 + 0.3 * u(rng),
                                                         0.9 + 0.6 * u(rng), 0.1 + 0.3 * u(rng));
            const double c = 0.1 + 9.9 * u(rng);
            const auto pairs = p.sample(rng, 200);
            std::vector<double> src, weighted;
            for (double lambda : grid) {
                const auto cf = threshold_cost(lambda);
                std::vector<double> costs;
                for (const auto& x : pairs) costs.push_back(cf(x));
                src.push_back(weighted_empirical_risk(std::vector<double>(costs.size(), 1.0), costs).estimate);
                weighted.push_back(weighted_empirical_risk(std::vector<double>(costs.size(), c), costs).estimate);
            }
            ok += argmin_equivalence_check(grid, src, weighted, true);
        }
        rows.push_back({label("argmin/constant", {{"profiles", static_cast<double>(opt.argmin_profiles)}}),
                        static_cast<double>(ok), static_cast<double>(opt.argmin_profiles), 0.0, 0.0,
                        ok == opt.argmin_profiles});

        // Two thresholds, three pairs: lambda_1 errs on a heavily weighted pair,
        // lambda_2 on two light ones.
        const std::vector<double> costs1{1, 0, 0}, costs2{0, 1, 1}, w{3.0, 0.1, 0.1}, ones{1, 1, 1};
        const std::vector<double> src{weighted_empirical_risk(ones, costs1).estimate,
                                      weighted_empirical_risk(ones, costs2).estimate};
        const std::vector<double> wt{weighted_empirical_risk(w, costs1).estimate,
                                     weighted_empirical_risk(w, costs2).estimate};
        const bool same_argmin = argmin_equivalence_check({0.5, 1.0}, src, wt, false);
        rows.push_back({label("argmin/adversarial", {}), same_argmin ? 1.0 : 0.0, 0.0, 0.0, 0.0, !same_argmin});
    }
    return rows;
}

void write_theory_csv(std::ostream& os, const std::vector<TheoryCheck>& rows)
{
    os << "config,estimate,target,variance,bound,pass\n";
    for (const auto& r : rows)
        os << r.config << ',' << format_double(r.estimate) << ',' << format_double(r.target) << ','
           << format_double(r.variance) << ',' << format_double(r.bound) << ',' << (r.pass ? "true" : "false")
           << '\n';
}

bool all_pass(const std::vector<TheoryCheck>& rows)
{
    return std::all_of(rows.begin(), rows.end(), [](const TheoryCheck& r) { return r.pass; });
}

}  // namespace hypass::theory
