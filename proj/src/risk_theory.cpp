#include "hypass/risk_theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

namespace hypass::theory {

namespace {

double normal_pdf(double x, double mean, double sigma)
{
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

AnalyticDensity::AnalyticDensity(std::vector<GaussianComponent> components)
    : components_(std::move(components))
{
    if (components_.empty()) throw std::invalid_argument("density: no components");
    double total = 0;
    for (const auto& c : components_) {
        if (!(c.weight > 0) || !(c.sigma > 0))
            throw std::invalid_argument("density: weights and sigmas must be > 0");
        if (c.relation != 1 && c.relation != -1)
            throw std::invalid_argument("density: relation must be +1 or -1");
        total += c.weight;
    }
    for (auto& c : components_) c.weight /= total;
}

AnalyticDensity AnalyticDensity::gaussian(double mean, double sigma)
{
    return AnalyticDensity({{1.0, mean, sigma, 1}});
}

AnalyticDensity AnalyticDensity::verification(double prior_pos, double mean_pos, double sigma_pos,
                                              double mean_neg, double sigma_neg)
{
    if (!(prior_pos > 0 && prior_pos < 1))
        throw std::invalid_argument("density: prior must lie in (0, 1)");
    return AnalyticDensity(
        {{prior_pos, mean_pos, sigma_pos, 1}, {1.0 - prior_pos, mean_neg, sigma_neg, -1}});
}

double AnalyticDensity::pdf(double s, int relation) const
{
    double p = 0;
    for (const auto& c : components_)
        if (c.relation == relation) p += c.weight * normal_pdf(s, c.mean, c.sigma);
    return p;
}

double AnalyticDensity::pdf(const PairObservation& x) const { return pdf(x.similarity, x.relation); }

std::vector<PairObservation> AnalyticDensity::sample(std::mt19937_64& rng, std::size_t n) const
{
    std::vector<double> w;
    for (const auto& c : components_) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<PairObservation> out(n);
    for (auto& o : out) {
        const auto& c = components_[components_.size() == 1 ? 0 : pick(rng)];
        o.similarity = c.mean + c.sigma * n01(rng);
        o.relation = c.relation;
    }
    return out;
}

std::vector<PairObservation> AnalyticDensity::sample(std::uint64_t seed, std::size_t n) const
{
    std::mt19937_64 rng(seed);
    return sample(rng, n);
}

std::pair<double, double> AnalyticDensity::support() const
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : components_) {
        lo = std::min(lo, c.mean - 10 * c.sigma);
        hi = std::max(hi, c.mean + 10 * c.sigma);
    }
    return {lo, hi};
}

std::vector<int> AnalyticDensity::relations() const
{
    std::set<int> r;
    for (const auto& c : components_) r.insert(c.relation);
    return {r.begin(), r.end()};
}

double weight_ratio(const AnalyticDensity& p_t, const AnalyticDensity& p_s, const PairObservation& x)
{
    const double ps = p_s.pdf(x);
    if (!(ps > 0)) throw std::domain_error("weight_ratio: sample outside source support");
    return p_t.pdf(x) / ps;
}

RiskReport weighted_empirical_risk(const std::vector<double>& weights, const std::vector<double>& costs)
{
    if (weights.size() != costs.size())
        throw std::invalid_argument("weighted_empirical_risk: length mismatch");
    if (weights.empty()) throw std::invalid_argument("weighted_empirical_risk: empty input");
    const std::size_t n = weights.size();
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] >= 0)) throw std::invalid_argument("weighted_empirical_risk: negative weight");
        mean += weights[i] * costs[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = weights[i] * costs[i] - mean;
        ss += d * d;
    }
    RiskReport r;
    r.estimate = mean;
    r.n_samples = n;
    r.empirical_variance = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    return r;
}

RiskReport weighted_empirical_risk(const std::vector<PairObservation>& samples,
                                   const AnalyticDensity& p_t, const AnalyticDensity& p_s,
                                   const CostFunction& cost)
{
    std::vector<double> w(samples.size()), c(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        w[i] = weight_ratio(p_t, p_s, samples[i]);
        c[i] = cost(samples[i]);
    }
    return weighted_empirical_risk(w, c);
}

double renyi_divergence(double alpha, const AnalyticDensity& p_t, const AnalyticDensity& p_s,
                        std::size_t n_mc, std::uint64_t seed)
{
    if (!(alpha >= 0)) throw std::invalid_argument("renyi_divergence: alpha must be >= 0");
    if (alpha == 1.0) throw std::invalid_argument("renyi_divergence: alpha = 1 is excluded");
    if (n_mc < 1) throw std::invalid_argument("renyi_divergence: n_mc must be >= 1");
    const auto xs = p_t.sample(seed, n_mc);
    double acc = 0;
    for (const auto& x : xs) {
        const double pt = p_t.pdf(x);
        const double ps = p_s.pdf(x);
        // w^-alpha = (p_s / p_t)^alpha
        acc += std::pow(ps / pt, alpha);
    }
    acc /= static_cast<double>(n_mc);
    return std::pow(acc, 1.0 / (alpha - 1.0));
}

double second_moment_divergence(double alpha, const AnalyticDensity& p_t,
                                const AnalyticDensity& p_s, std::size_t n_mc, std::uint64_t seed)
{
    return renyi_divergence(alpha + 1.0, p_s, p_t, n_mc, seed);
}

double variance_bound(double alpha, double d_alpha_plus_1, double target_risk, std::size_t n)
{
    if (!(alpha > 0)) throw std::invalid_argument("variance_bound: alpha must be > 0");
    if (n < 1) throw std::invalid_argument("variance_bound: n must be >= 1");
    if (!(target_risk >= 0 && target_risk <= 1))
        throw std::invalid_argument("variance_bound: target risk must lie in [0, 1]");
    const double v = d_alpha_plus_1 * std::pow(target_risk, 1.0 - 1.0 / alpha) -
                     target_risk * target_risk;
    return std::max(v, 0.0) / static_cast<double>(n);
}

bool argmin_equivalence_check(const std::vector<double>& grid, const std::vector<double>& source,
                              const std::vector<double>& weighted, bool weights_constant)
{
    if (grid.empty()) throw std::invalid_argument("argmin_equivalence_check: empty grid");
    if (source.size() != grid.size() || weighted.size() != grid.size())
        throw std::invalid_argument("argmin_equivalence_check: length mismatch");
    const auto a = std::min_element(source.begin(), source.end()) - source.begin();
    const auto b = std::min_element(weighted.begin(), weighted.end()) - weighted.begin();
    const bool same = a == b;
    if (weights_constant && !same)
        throw std::logic_error("argmin_equivalence_check: constant weights changed the argmin");
    return same;
}

namespace {

double simpson(double fa, double fm, double fb, double a, double b)
{
    return (b - a) / 6.0 * (fa + 4 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                double fb, double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(fa, flm, fm, a, m);
    const double right = simpson(fm, frm, fb, m, b);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           adaptive(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                 const std::vector<double>& breakpoints)
{
    if (!(b > a)) return 0.0;
    std::vector<double> cuts{a};
    for (double p : breakpoints)
        if (p > a && p < b) cuts.push_back(p);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double total = 0;
    const double piece_tol = tol / static_cast<double>(cuts.size() - 1);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        // Start from a few sub-panels so narrow peaks are not stepped over.
        const int panels = 16;
        const double h = (cuts[i + 1] - cuts[i]) / panels;
        for (int k = 0; k < panels; ++k) {
            const double lo = cuts[i] + k * h, hi = lo + h;
            const double flo = f(lo), fhi = f(hi), fm = f(0.5 * (lo + hi));
            total += adaptive(f, lo, hi, flo, fm, fhi, simpson(flo, fm, fhi, lo, hi),
                              piece_tol / panels, 40);
        }
    }
    return total;
}

double expected_risk(const AnalyticDensity& p, const CostFunction& cost,
                     const std::vector<double>& breakpoints, double tol)
{
    const auto [lo, hi] = p.support();
    double total = 0;
    for (int r : p.relations()) {
        auto f = [&](double s) { return cost({s, r}) * p.pdf(s, r); };
        total += integrate(f, lo, hi, tol, breakpoints);
    }
    return total;
}

double total_mass(const AnalyticDensity& p, double tol)
{
    return expected_risk(p, [](const PairObservation&) { return 1.0; }, {}, tol);
}

CostFunction threshold_cost(double lambda)
{
    return [lambda](const PairObservation& x) {
        const int predicted = x.similarity <= lambda ? 1 : -1;
        return predicted == x.relation ? 0.0 : 1.0;
    };
}

}  // namespace hypass::theory
