#include "hypass/risk_theory.hpp"
#include "hypass/theory_suite.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace hypass::theory;

namespace {

const CostFunction positive = [](const PairObservation& x) { return x.similarity > 0 ? 1.0 : 0.0; };

}  // namespace

TEST_CASE("densities integrate to one")
{
    CHECK(total_mass(AnalyticDensity::gaussian(0.3, 0.7)) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(total_mass(AnalyticDensity::verification(0.25, 0.4, 0.1, 1.2, 0.3)) ==
          doctest::Approx(1.0).epsilon(1e-3));
    CHECK(total_mass(AnalyticDensity({{2.0, -1, 0.5, 1}, {1.0, 3, 2.0, 1}})) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("quadrature of known integrals")
{
    CHECK(integrate([](double x) { return x * x; }, 0, 3) == doctest::Approx(9.0).epsilon(1e-10));
    CHECK(integrate([](double x) { return std::sin(x); }, 0, std::numbers::pi) == doctest::Approx(2.0).epsilon(1e-9));
    // P(X > 0) for N(0.5, 1) against the normal CDF.
    const double p = expected_risk(AnalyticDensity::gaussian(0.5, 1.0), positive, {0.0});
    CHECK(p == doctest::Approx(0.5 * std::erfc(-0.5 / std::sqrt(2.0))).epsilon(1e-8));
}

TEST_CASE("weight ratio")
{
    const auto n01 = AnalyticDensity::gaussian(0.0, 1.0);
    const auto n04 = AnalyticDensity::gaussian(0.0, 2.0);
    CHECK(weight_ratio(n01, n01, {0.7, 1}) == 1.0);
    CHECK(weight_ratio(n01, n04, {0.0, 1}) == doctest::Approx(2.0).epsilon(1e-14));
    // All source mass sits on relation +1.
    CHECK_THROWS_AS(weight_ratio(n01, n04, {0.0, -1}), std::domain_error);
}

TEST_CASE("weighted empirical risk")
{
    const auto r = weighted_empirical_risk({1, 1, 1, 1}, {0, 1, 1, 0});
    CHECK(r.estimate == 0.5);
    CHECK(r.n_samples == 4);
    CHECK(r.empirical_variance == doctest::Approx(1.0 / 3.0));
    CHECK(weighted_empirical_risk({2, 3}, {0, 0}).estimate == 0.0);
    CHECK_THROWS_AS(weighted_empirical_risk({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(weighted_empirical_risk({1}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(weighted_empirical_risk({-1}, {1}), std::invalid_argument);

    // Gaussian toy, N = 1e5: within 3 standard errors of the quadrature risk.
    const auto p_t = AnalyticDensity::gaussian(0.0, 1.0);
    const auto p_s = AnalyticDensity::gaussian(-0.5, 1.0);
    const auto big = weighted_empirical_risk(p_s.sample(3, 100000), p_t, p_s, positive);
    const double truth = expected_risk(p_t, positive, {0.0});
    CHECK(truth == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(std::abs(big.estimate - truth) <= 3 * std::sqrt(big.empirical_variance / 1e5));
}

TEST_CASE("renyi divergence")
{
    const auto a = AnalyticDensity::gaussian(0.0, 1.0);
    const auto b = AnalyticDensity::gaussian(0.5, 1.0);
    CHECK(renyi_divergence(2.0, a, a, 100, 1) == 1.0);
    CHECK(renyi_divergence(0.5, a, a, 100, 1) == 1.0);
    // Equal variances: exp(alpha * gap^2 / (2 sigma^2)).
    CHECK(renyi_divergence(2.0, a, b, 400000, 7) == doctest::Approx(std::exp(0.25)).epsilon(0.01));
    CHECK(second_moment_divergence(1.0, a, b, 400000, 8) == doctest::Approx(std::exp(0.25)).epsilon(0.01));
    CHECK_THROWS_AS(renyi_divergence(1.0, a, b, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(renyi_divergence(-1.0, a, b, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(renyi_divergence(2.0, a, b, 0, 1), std::invalid_argument);
}

TEST_CASE("variance bound")
{
    CHECK(variance_bound(2.0, 1.7, 0.0, 10) == 0.0);
    CHECK(variance_bound(1.0, 1.0, 0.25, 100) == doctest::Approx((1.0 - 0.0625) / 100).epsilon(1e-15));
    CHECK(variance_bound(2.0, 1.5, 0.25, 100) ==
          doctest::Approx((1.5 * std::pow(0.25, 0.5) - 0.0625) / 100).epsilon(1e-15));
    CHECK_THROWS_AS(variance_bound(0.0, 1, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(variance_bound(1.0, 1, 1.5, 1), std::invalid_argument);

    // Toy pair, alpha = 1, n = 1000: variance over 2000 replicates stays under.
    const auto p_t = AnalyticDensity::gaussian(0.0, 1.0);
    const auto p_s = AnalyticDensity::gaussian(-0.5, 1.0);
    std::mt19937_64 rng(11);
    double s = 0, s2 = 0;
    for (int r = 0; r < 2000; ++r) {
        const double e = weighted_empirical_risk(p_s.sample(rng, 1000), p_t, p_s, positive).estimate;
        s += e;
        s2 += e * e;
    }
    const double var = (s2 - s * s / 2000) / 1999;
    const double d2 = std::exp(0.25);  // closed form of the alpha + 1 = 2 divergence
    CHECK(var <= variance_bound(1.0, d2, 0.5, 1000));
}

TEST_CASE("argmin equivalence")
{
    const std::vector<double> grid{0.1, 0.2, 0.3, 0.4};
    const std::vector<double> risk{0.5, 0.2, 0.3, 0.2};
    std::vector<double> scaled;
    for (double r : risk) scaled.push_back(3 * r);
    CHECK(argmin_equivalence_check(grid, risk, scaled, true));
    CHECK(!argmin_equivalence_check({1, 2}, {0.3, 0.4}, {0.5, 0.2}, false));
    CHECK(argmin_equivalence_check({1}, {0.3}, {9.0}, false));
    CHECK_THROWS_AS(argmin_equivalence_check({}, {}, {}, false), std::invalid_argument);
    CHECK_THROWS_AS(argmin_equivalence_check({1, 2}, {0.3, 0.4}, {0.5, 0.2}, true), std::logic_error);
}

TEST_CASE("quick theory suite passes and writes its csv")
{
    TheorySuiteOptions opt;
    const auto rows = run_theory_suite(opt.quick());
    for (const auto& r : rows) {
        INFO(r.config << " estimate " << r.estimate << " target " << r.target << " bound " << r.bound);
        CHECK(r.pass);
    }
    std::ostringstream os;
    write_theory_csv(os, rows);
    CHECK(os.str().rfind("config,estimate,target,variance,bound,pass\n", 0) == 0);
    CHECK(all_pass(rows));
}
